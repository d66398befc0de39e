// Shared aliases and error types for the cooperative regulation library.
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

namespace coopreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using Complex = std::complex<double>;

// Inputs whose shapes do not line up.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A factorization or iteration failed to deliver a usable result.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A design precondition (stabilizability, detectability, spectrum shape,
// connectivity) does not hold for the given data.
struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A gain or solution could not be produced even though preconditions passed.
struct SynthesisError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A linear matrix system has no solution; carries the least-squares residual.
struct UnsolvableError : std::runtime_error {
  UnsolvableError(const std::string& what, double r)
      : std::runtime_error(what), residual(r) {}
  double residual;
};

// Semantic problem in user-supplied scenario data.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// State norm blew past the divergence guard during integration.
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& what, double t)
      : std::runtime_error(what), time(t) {}
  double time;
};

// Verbosity from COOPREG_LOG (0 = silent). Read once per process.
inline int log_level() {
  static const int level = [] {
    const char* env = std::getenv("COOPREG_LOG");
    return env ? std::atoi(env) : 0;
  }();
  return level;
}

}  // namespace coopreg
