#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace proxkit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense symmetric matrix. Construction symmetrizes (m + m')/2 after checking
// the input is square and close to symmetric.
class SymMatrix {
 public:
  explicit SymMatrix(Matrix m);
  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& mat() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

  static SymMatrix identity(int p);
  static SymMatrix zero(int p);

 private:
  Matrix m_;
};

// Eigenvalues sorted descending; eigenvector columns orthonormal with a
// deterministic sign convention: the largest-magnitude entry of each column
// is positive, ties broken by lowest index.
struct SpectralDecomp {
  Vector eigenvalues;
  Matrix eigenvectors;
};

// Symmetric positive-definite matrix defining the inner product <x,y>_W.
// Caches the Cholesky factor L (L L' = W) and the extreme eigenvalues.
class WeightMatrix {
 public:
  explicit WeightMatrix(SymMatrix m);
  int dim() const { return sym_.dim(); }
  const Matrix& mat() const { return sym_.mat(); }
  const SymMatrix& sym() const { return sym_; }
  const Matrix& chol() const { return chol_; }  // lower-triangular L
  double max_eigenvalue() const { return eig_max_; }
  double min_eigenvalue() const { return eig_min_; }
  bool is_diagonal() const { return diagonal_; }

  // sqrt(x' W x) computed through the factor, so the result is exactly
  // nonnegative even near the null vector.
  double norm(const Vector& x) const;
  double inner(const Vector& x, const Vector& y) const;

 private:
  SymMatrix sym_;
  Matrix chol_;
  double eig_max_ = 0.0;
  double eig_min_ = 0.0;
  bool diagonal_ = false;
};

// Default relative rank tolerance: dim * machine epsilon. Everywhere a
// rank_tol parameter appears, the effective spectral cutoff is
// rank_tol * sigma_max; passing a negative value selects this default.
double default_rank_tol(int dim);
double resolve_rank_tol(const SymMatrix& m, double rank_tol);

SpectralDecomp eig_sym(const SymMatrix& m);

// Moore-Penrose pseudoinverse: eigenvalues at or below rank_tol * sigma_max
// are treated as exactly zero.
SymMatrix pinv(const SymMatrix& m, double rank_tol = -1.0);

// Orthogonal projector onto range(m), i.e. m * pinv(m).
SymMatrix range_projector(const SymMatrix& m, double rank_tol = -1.0);

double weighted_norm(const Vector& x, const WeightMatrix& w);

// Symmetric PSD square root S = P diag(sqrt(sigma)) P'. Throws if an
// eigenvalue falls below -rank_tol * sigma_max.
Matrix psd_sqrt(const SymMatrix& m, double rank_tol = -1.0);

}  // namespace proxkit
