#include "coopreg/numkit.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace coopreg::numkit {

namespace {

void require_square(const Matrix& M, const char* who) {
  if (M.rows() != M.cols())
    throw DimensionError(std::string(who) + ": matrix must be square, got " +
                         std::to_string(M.rows()) + "x" +
                         std::to_string(M.cols()));
}

bool lex_less(const Complex& a, const Complex& b) {
  if (a.real() != b.real()) return a.real() < b.real();
  return a.imag() < b.imag();
}

// Geometric multiplicity of lambda as a kernel dimension of M - lambda I.
int geometric_multiplicity(const Matrix& M, const Complex& lambda) {
  ComplexMatrix shifted = M.cast<Complex>();
  shifted.diagonal().array() -= lambda;
  const auto r = rank(shifted);
  return static_cast<int>(M.rows() - r);
}

}  // namespace

double Spectrum::max_real() const {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& v : values) m = std::max(m, v.real());
  return m;
}

double Spectrum::max_abs() const {
  double m = 0.0;
  for (const auto& v : values) m = std::max(m, std::abs(v));
  return m;
}

Spectrum spectrum(const Matrix& M) {
  require_square(M, "spectrum");
  Spectrum out;
  if (M.rows() == 0) return out;

  Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw NumericError("spectrum: eigenvalue iteration failed to converge");

  out.values.assign(es.eigenvalues().data(),
                    es.eigenvalues().data() + M.rows());
  std::sort(out.values.begin(), out.values.end(), lex_less);

  for (std::size_t i = 0; i < out.values.size();) {
    const Complex rep = out.values[i];
    std::size_t j = i + 1;
    while (j < out.values.size() &&
           std::abs(out.values[j] - rep) <= kSpectrumTol)
      ++j;
    const int algebraic = static_cast<int>(j - i);
    const int geometric =
        std::max(1, geometric_multiplicity(M, rep));
    out.groups.push_back({rep, algebraic, geometric});
    i = j;
  }
  return out;
}

bool is_hurwitz(const Matrix& M, double margin) {
  return spectrum(M).max_real() < -margin - kSpectrumTol;
}

double spectral_radius(const Matrix& M) { return spectrum(M).max_abs(); }

Eigen::Index rank(const Matrix& M) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(M);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  const double thresh = kRankRelTol * sv(0);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > thresh) ++r;
  return r;
}

Eigen::Index rank(const ComplexMatrix& M) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<ComplexMatrix> svd(M);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  const double thresh = kRankRelTol * sv(0);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > thresh) ++r;
  return r;
}

namespace {

// rank [A - lambda I, B] = n for every eigenvalue passing `filter`.
bool pbh(const Matrix& A, const Matrix& B, bool unstable_only) {
  require_square(A, "pbh");
  if (B.rows() != A.rows())
    throw DimensionError("pbh: row count of input map does not match state");
  const auto n = A.rows();
  for (const auto& group : spectrum(A).groups) {
    if (unstable_only && group.value.real() < -kSpectrumTol) continue;
    ComplexMatrix pencil(n, n + B.cols());
    pencil.leftCols(n) = A.cast<Complex>();
    pencil.leftCols(n).diagonal().array() -= group.value;
    pencil.rightCols(B.cols()) = B.cast<Complex>();
    if (rank(pencil) < n) return false;
  }
  return true;
}

}  // namespace

bool pbh_stabilizable(const Matrix& A, const Matrix& B) {
  return pbh(A, B, /*unstable_only=*/true);
}

bool pbh_detectable(const Matrix& A, const Matrix& C) {
  return pbh_stabilizable(A.transpose(), C.transpose());
}

bool pbh_controllable(const Matrix& A, const Matrix& B) {
  return pbh(A, B, /*unstable_only=*/false);
}

bool pbh_observable(const Matrix& A, const Matrix& C) {
  return pbh_controllable(A.transpose(), C.transpose());
}

Matrix kron(const Matrix& A, const Matrix& B) {
  Matrix K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

namespace {

Matrix solve_lyapunov_vectorized(const Matrix& L_coeff, const Matrix& Q,
                                 const char* who) {
  const auto n = Q.rows();
  Eigen::VectorXd rhs =
      -Eigen::Map<const Eigen::VectorXd>(Q.data(), Q.size());
  Eigen::FullPivLU<Matrix> lu(L_coeff);
  if (!lu.isInvertible())
    throw NumericError(std::string(who) +
                       ": singular equation (eigenvalue sum hits zero)");
  Eigen::VectorXd x = lu.solve(rhs);
  Matrix X = Eigen::Map<const Matrix>(x.data(), n, n);
  return 0.5 * (X + X.transpose());
}

}  // namespace

Matrix solve_lyapunov(const Matrix& A, const Matrix& Q) {
  require_square(A, "solve_lyapunov");
  if (Q.rows() != A.rows() || Q.cols() != A.cols())
    throw DimensionError("solve_lyapunov: Q shape mismatch");
  const auto n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  // vec(A'X + XA) = (I (x) A' + A' (x) I) vec(X)
  const Matrix coeff = kron(I, A.transpose()) + kron(A.transpose(), I);
  return solve_lyapunov_vectorized(coeff, Q, "solve_lyapunov");
}

Matrix solve_lyapunov_filter(const Matrix& A, const Matrix& Q) {
  require_square(A, "solve_lyapunov_filter");
  if (Q.rows() != A.rows() || Q.cols() != A.cols())
    throw DimensionError("solve_lyapunov_filter: Q shape mismatch");
  const auto n = A.rows();
  const Matrix I = Matrix::Identity(n, n);
  const Matrix coeff = kron(I, A) + kron(A, I);
  return solve_lyapunov_vectorized(coeff, Q, "solve_lyapunov_filter");
}

namespace {

// Deterministic real column pair for a complex eigenvector: rotate the phase
// so the largest-modulus entry is real positive, then scale so the real part
// has unit norm. Keeps the 2x2 block in canonical [[a, b], [-b, a]] form.
void append_pair_columns(const Eigen::VectorXcd& v, Matrix& T,
                         Eigen::Index col) {
  Eigen::Index k = 0;
  v.cwiseAbs().maxCoeff(&k);
  const Complex phase = std::abs(v(k)) > 0 ? std::conj(v(k)) / std::abs(v(k))
                                           : Complex(1, 0);
  const Eigen::VectorXcd w = v * phase;
  Vector re = w.real();
  Vector im = w.imag();
  const double s = re.norm();
  if (s == 0.0) throw NumericError("real eigenbasis: degenerate eigenvector");
  T.col(col) = re / s;
  T.col(col + 1) = im / s;
}

struct RealEigenBasis {
  Matrix T;       // n x m columns
  Matrix D;       // m x m canonical blocks
  Eigen::Index m; // columns used
};

// Build real eigenvector columns for the eigenvalues selected by `keep`.
// Complex pairs are consumed once via their positive-imaginary member.
RealEigenBasis real_eigen_basis(const Eigen::EigenSolver<Matrix>& es,
                                const std::function<bool(Complex)>& keep) {
  const auto n = es.eigenvalues().size();
  RealEigenBasis out{Matrix::Zero(n, n), Matrix::Zero(n, n), 0};
  for (Eigen::Index i = 0; i < n; ++i) {
    const Complex lambda = es.eigenvalues()(i);
    if (!keep(lambda)) continue;
    if (std::abs(lambda.imag()) <= kSpectrumTol) {
      Eigen::VectorXcd v = es.eigenvectors().col(i);
      Eigen::Index k = 0;
      v.cwiseAbs().maxCoeff(&k);
      const Complex phase = std::abs(v(k)) > 0
                                ? std::conj(v(k)) / std::abs(v(k))
                                : Complex(1, 0);
      Vector re = (v * phase).real();
      out.T.col(out.m) = re / re.norm();
      out.D(out.m, out.m) = lambda.real();
      out.m += 1;
    } else if (lambda.imag() > 0) {
      append_pair_columns(es.eigenvectors().col(i), out.T, out.m);
      out.D(out.m, out.m) = lambda.real();
      out.D(out.m, out.m + 1) = lambda.imag();
      out.D(out.m + 1, out.m) = -lambda.imag();
      out.D(out.m + 1, out.m + 1) = lambda.real();
      out.m += 2;
    }
    // negative-imaginary members ride along with their conjugates
  }
  return out;
}

}  // namespace

RealBlockDiag real_block_diagonalize(const Matrix& M) {
  require_square(M, "real_block_diagonalize");
  const auto n = M.rows();
  Eigen::EigenSolver<Matrix> es(M);
  if (es.info() != Eigen::Success)
    throw NumericError("real_block_diagonalize: eigensolver failed");
  auto basis = real_eigen_basis(es, [](Complex) { return true; });
  if (basis.m != n)
    throw NumericError("real_block_diagonalize: conjugate pairing failed");
  RealBlockDiag out{basis.T.leftCols(n), basis.D.topLeftCorner(n, n)};
  if (rank(out.T) < n)
    throw PreconditionError(
        "real_block_diagonalize: matrix has a defective eigenvalue "
        "(not semi-simple)");
  return out;
}

Matrix solve_lyap_marginal(const Matrix& S) {
  require_square(S, "solve_lyap_marginal");
  const auto n = S.rows();
  if (n == 0) return Matrix(0, 0);

  const Spectrum spec = spectrum(S);
  if (spec.max_real() > kSpectrumTol)
    throw PreconditionError(
        "solve_lyap_marginal: matrix is not marginally stable "
        "(eigenvalue with positive real part)");

  // Dissipative already: the identity certifies itself. Covers skew-symmetric
  // generators exactly.
  {
    const Matrix sym = S + S.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> sa(sym);
    if (sa.eigenvalues().maxCoeff() <= kSpectrumTol)
      return Matrix::Identity(n, n);
  }

  Eigen::EigenSolver<Matrix> es(S);
  if (es.info() != Eigen::Success)
    throw NumericError("solve_lyap_marginal: eigensolver failed");

  const auto is_center = [](Complex lambda) {
    return std::abs(lambda.real()) <= kSpectrumTol;
  };

  // Center part: real eigenvector columns; semi-simplicity is mandatory.
  auto center = real_eigen_basis(es, is_center);
  Eigen::Index n_center = 0;
  for (const auto& v : spec.values)
    if (std::abs(v.real()) <= kSpectrumTol) ++n_center;
  if (center.m != n_center || rank(Matrix(center.T.leftCols(center.m))) < n_center)
    throw PreconditionError(
        "solve_lyap_marginal: imaginary-axis eigenvalue is defective "
        "(marginal stability violated)");
  const Matrix Tc = center.T.leftCols(center.m);

  // Stable part: basis of the invariant subspace, obtained as the range of
  // the real polynomial in S that annihilates every center eigenvalue.
  Matrix annihilator = Matrix::Identity(n, n);
  for (const auto& group : spectrum(S).groups) {
    if (!is_center(group.value) || group.value.imag() < -kSpectrumTol)
      continue;  // negative-imag handled with its conjugate
    Matrix factor;
    if (std::abs(group.value.imag()) <= kSpectrumTol) {
      factor = S - group.value.real() * Matrix::Identity(n, n);
    } else {
      const double a = group.value.real();
      const double m2 = std::norm(group.value);
      factor = S * S - 2.0 * a * S + m2 * Matrix::Identity(n, n);
    }
    for (int k = 0; k < group.algebraic; ++k) annihilator = factor * annihilator;
  }
  const auto n_stable = n - n_center;
  Matrix P = Tc * Tc.transpose();
  if (n_stable > 0) {
    Eigen::ColPivHouseholderQR<Matrix> qr(annihilator);
    qr.setThreshold(kRankRelTol);
    if (qr.rank() != n_stable)
      throw NumericError(
          "solve_lyap_marginal: stable subspace dimension mismatch");
    const Matrix Ts =
        Matrix(qr.householderQ()).leftCols(n_stable);
    const Matrix Ms = Ts.transpose() * S * Ts;
    const Matrix Ps =
        solve_lyapunov_filter(Ms, Matrix::Identity(n_stable, n_stable));
    P += Ts * Ps * Ts.transpose();
  }
  P = 0.5 * (P + P.transpose());

  // Certify the result before handing it out.
  const Matrix defect = P * S.transpose() + S * P;
  Eigen::SelfAdjointEigenSolver<Matrix> sa(0.5 * (defect + defect.transpose()));
  if (sa.eigenvalues().maxCoeff() > 1e-8)
    throw NumericError("solve_lyap_marginal: residual check failed");
  Eigen::SelfAdjointEigenSolver<Matrix> sp(P);
  if (sp.eigenvalues().minCoeff() <= 0.0)
    throw NumericError("solve_lyap_marginal: result not positive definite");
  return P;
}

Matrix solve_are(const Matrix& A, const Matrix& B) {
  require_square(A, "solve_are");
  const auto n = A.rows();
  if (B.rows() != n)
    throw DimensionError("solve_are: input map row count mismatch");
  const Matrix I = Matrix::Identity(n, n);

  // Zero input map: the equation degenerates to A'P + PA + I = 0, which has a
  // positive definite solution only for Hurwitz A.
  if (B.cols() == 0 || B.isZero(0)) {
    if (!is_hurwitz(A))
      throw SynthesisError(
          "solve_are: stabilizability failed (zero input map, A not Hurwitz)");
    return solve_lyapunov(A, I);
  }
  if (!pbh_stabilizable(A, B))
    throw SynthesisError("solve_are: stabilizability (PBH) failed");

  const Matrix G = B * B.transpose();
  Matrix H(2 * n, 2 * n);
  H << A, -G, -I, -A.transpose();

  Eigen::EigenSolver<Matrix> es(H);
  if (es.info() != Eigen::Success)
    throw NumericError("solve_are: Hamiltonian eigensolver failed");

  std::vector<Eigen::Index> order(2 * n);
  for (Eigen::Index i = 0; i < 2 * n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return es.eigenvalues()(a).real() < es.eigenvalues()(b).real();
  });
  ComplexMatrix V(2 * n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (es.eigenvalues()(order[k]).real() >= 0.0)
      throw NumericError(
          "solve_are: Hamiltonian spectrum does not split across the axis");
    V.col(k) = es.eigenvectors().col(order[k]);
  }

  const ComplexMatrix U1 = V.topRows(n);
  const ComplexMatrix U2 = V.bottomRows(n);
  Eigen::FullPivLU<ComplexMatrix> lu(U1.transpose());
  if (!lu.isInvertible())
    throw NumericError("solve_are: stable subspace is not a graph subspace");
  Matrix P = lu.solve(U2.transpose()).transpose().real();
  P = 0.5 * (P + P.transpose());

  // Newton-Kleinman refinement from the (stabilizing) subspace solution.
  const double scale = 1.0 + P.norm();
  for (int iter = 0; iter < 12; ++iter) {
    const Matrix residual =
        A.transpose() * P + P * A - P * G * P + I;
    if (residual.norm() <= 1e-12 * scale) break;
    const Matrix Acl = A - G * P;
    if (!is_hurwitz(Acl)) break;  // refinement not applicable; validate below
    Matrix X = solve_lyapunov(Acl, I + P * G * P);
    P = 0.5 * (X + X.transpose());
  }

  const Matrix residual = A.transpose() * P + P * A - P * G * P + I;
  if (residual.norm() > 1e-8 * (1.0 + P.norm()))
    throw NumericError("solve_are: residual check failed");
  Eigen::SelfAdjointEigenSolver<Matrix> sp(P);
  if (sp.eigenvalues().minCoeff() <= 0.0)
    throw NumericError("solve_are: solution not positive definite");
  if (!is_hurwitz(A - G * P))
    throw NumericError("solve_are: closed loop not Hurwitz");
  return P;
}

MatrixSystemSolution solve_linear_matrix_system(
    const std::vector<MatrixEquation>& equations,
    const std::vector<MatrixShape>& shapes, bool allow_residual) {
  if (shapes.empty()) throw DimensionError("matrix system: no unknowns");

  std::vector<Eigen::Index> offset(shapes.size() + 1, 0);
  for (std::size_t k = 0; k < shapes.size(); ++k)
    offset[k + 1] = offset[k] + shapes[k].rows * shapes[k].cols;
  const Eigen::Index cols_total = offset.back();

  Eigen::Index rows_total = 0;
  for (const auto& eq : equations) rows_total += eq.rhs.size();
  if (rows_total == 0) throw DimensionError("matrix system: no equations");

  Matrix A = Matrix::Zero(rows_total, cols_total);
  Eigen::VectorXd b(rows_total);
  Eigen::Index row = 0;
  for (const auto& eq : equations) {
    const Eigen::Index m = eq.rhs.rows(), c = eq.rhs.cols();
    for (const auto& term : eq.terms) {
      if (term.unknown >= shapes.size())
        throw DimensionError("matrix system: unknown index out of range");
      const auto& shape = shapes[term.unknown];
      if (term.left.rows() != m || term.left.cols() != shape.rows ||
          term.right.rows() != shape.cols || term.right.cols() != c)
        throw DimensionError("matrix system: term shape mismatch");
      // vec(L X R) = (R' (x) L) vec(X)
      A.block(row, offset[term.unknown], m * c, shape.rows * shape.cols) +=
          kron(term.right.transpose(), term.left);
    }
    b.segment(row, m * c) =
        Eigen::Map<const Eigen::VectorXd>(eq.rhs.data(), eq.rhs.size());
    row += m * c;
  }

  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A);
  cod.setThreshold(kRankRelTol);
  const Eigen::VectorXd x = cod.solve(b);
  const double residual = (A * x - b).norm();
  const double tol = 1e-9 * (1.0 + b.norm());

  MatrixSystemSolution out;
  out.residual = residual;
  out.exact = residual < tol;
  if (!out.exact && !allow_residual)
    throw UnsolvableError(
        "matrix system: inconsistent (least-squares residual " +
            std::to_string(residual) + ")",
        residual);
  out.unknowns.reserve(shapes.size());
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    out.unknowns.push_back(Eigen::Map<const Matrix>(
        x.data() + offset[k], shapes[k].rows, shapes[k].cols));
  }
  return out;
}

}  // namespace coopreg::numkit
