// Dense numerical kernels: spectra, stability tests, Lyapunov/Riccati solvers
// and a structured linear matrix-equation solver. Everything is deterministic;
// no randomized algorithms.
#pragma once

#include "coopreg/types.hpp"

namespace coopreg::numkit {

// Comparison tolerance for eigenvalue real parts / moduli (absolute).
inline constexpr double kSpectrumTol = 1e-9;
// Relative singular-value threshold for rank decisions.
inline constexpr double kRankRelTol = 1e-10;

struct EigenvalueGroup {
  Complex value;   // cluster representative
  int algebraic;   // cluster size
  int geometric;   // dim ker(M - value*I)
};

struct Spectrum {
  // All eigenvalues with repetition, sorted by (real, imag) ascending.
  std::vector<Complex> values;
  // Clustered view (values within kSpectrumTol merged).
  std::vector<EigenvalueGroup> groups;

  double max_real() const;
  double max_abs() const;
};

// Full eigenvalue analysis of a square matrix.
Spectrum spectrum(const Matrix& M);

// True iff every eigenvalue satisfies Re(lambda) < -margin - kSpectrumTol.
bool is_hurwitz(const Matrix& M, double margin = 0.0);

// max |lambda| over the spectrum.
double spectral_radius(const Matrix& M);

// Rank of a real or complex matrix, singular values below
// kRankRelTol * sigma_max are treated as zero.
Eigen::Index rank(const Matrix& M);
Eigen::Index rank(const ComplexMatrix& M);

// PBH tests. Stabilizable: rank [A - lambda I, B] = n for every eigenvalue
// with Re >= 0; controllable checks every eigenvalue. Detectable/observable
// are the duals.
bool pbh_stabilizable(const Matrix& A, const Matrix& B);
bool pbh_detectable(const Matrix& A, const Matrix& C);
bool pbh_controllable(const Matrix& A, const Matrix& B);
bool pbh_observable(const Matrix& A, const Matrix& C);

// Kronecker product.
Matrix kron(const Matrix& A, const Matrix& B);

// Solve A'X + XA + Q = 0 (controller form). A need not be Hurwitz but the
// equation must be nonsingular (no lambda_i + conj(lambda_j) = 0).
Matrix solve_lyapunov(const Matrix& A, const Matrix& Q);

// Solve AX + XA' + Q = 0 (filter form).
Matrix solve_lyapunov_filter(const Matrix& A, const Matrix& Q);

// For a marginally stable S (no eigenvalue with Re > 0; imaginary-axis
// eigenvalues semi-simple) return a symmetric P > 0 with P S' + S P <= 0.
// Imaginary-axis modes contribute exactly zero to the residual; strictly
// stable modes contribute a negative definite part.
Matrix solve_lyap_marginal(const Matrix& S);

// Stabilizing solution of A'P + PA - P B B' P + I = 0 (Q = I, R = I).
// Hamiltonian stable-invariant-subspace method, refined by Newton-Kleinman
// iteration. Throws SynthesisError if (A, B) fails the PBH stabilizability
// test, NumericError if the solve degrades.
Matrix solve_are(const Matrix& A, const Matrix& B);

// Real block-diagonalization M T = T D of a matrix whose eigenvalues are all
// semi-simple. D is block diagonal with 1x1 blocks [a] for real eigenvalues
// and 2x2 blocks [[a, b], [-b, a]] for complex pairs a +- bi (b > 0).
// Column pairs are phase-normalized deterministically.
struct RealBlockDiag {
  Matrix T;
  Matrix D;
};
RealBlockDiag real_block_diagonalize(const Matrix& M);

// One term L * X_k * R of a linear matrix equation, X_k the k-th unknown.
struct MatrixTerm {
  std::size_t unknown;
  Matrix left;
  Matrix right;
};

// sum_j L_j X_{k_j} R_j = rhs.
struct MatrixEquation {
  std::vector<MatrixTerm> terms;
  Matrix rhs;
};

struct MatrixShape {
  Eigen::Index rows;
  Eigen::Index cols;
};

struct MatrixSystemSolution {
  std::vector<Matrix> unknowns;
  double residual;  // 2-norm of the stacked defect
  bool exact;       // residual < 1e-9 * (1 + ||rhs||)
};

// Solve a set of coupled linear matrix equations by vectorization.
// Rank-deficient systems get the minimum-norm least-squares solution.
// When the residual exceeds the exactness tolerance the system is declared
// inconsistent: throws UnsolvableError unless allow_residual is set, in
// which case the least-squares solution is returned with exact = false.
MatrixSystemSolution solve_linear_matrix_system(
    const std::vector<MatrixEquation>& equations,
    const std::vector<MatrixShape>& shapes, bool allow_residual = false);

}  // namespace coopreg::numkit
