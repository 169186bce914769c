#include "proxkit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace proxkit {

SymMatrix::SymMatrix(Matrix m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw Error("SymMatrix: expected a square matrix, got " + std::to_string(m.rows()) + "x" +
                std::to_string(m.cols()));
  }
  if (!m.allFinite()) throw Error("SymMatrix: non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 * scale) {
    throw Error("SymMatrix: input is not symmetric (asymmetry " + std::to_string(asym) + ")");
  }
  m_ = 0.5 * (m + m.transpose().eval());
}

SymMatrix SymMatrix::identity(int p) { return SymMatrix(Matrix::Identity(p, p)); }
SymMatrix SymMatrix::zero(int p) { return SymMatrix(Matrix::Zero(p, p)); }

double default_rank_tol(int dim) {
  return static_cast<double>(dim) * std::numeric_limits<double>::epsilon();
}

double resolve_rank_tol(const SymMatrix& m, double rank_tol) {
  return rank_tol < 0.0 ? default_rank_tol(m.dim()) : rank_tol;
}

SpectralDecomp eig_sym(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.mat());
  if (solver.info() != Eigen::Success) {
    throw Error("eig_sym: eigensolver failed to converge (QL sweep limit reached at dim " +
                std::to_string(m.dim()) + ")");
  }
  const int p = m.dim();
  // stable descending order: ties keep the solver's (ascending-index) order,
  // so e.g. the identity matrix decomposes into the identity basis
  std::vector<int> idx(p);
  for (int j = 0; j < p; ++j) idx[j] = j;
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return solver.eigenvalues()[a] > solver.eigenvalues()[b];
  });
  SpectralDecomp out;
  out.eigenvalues.resize(p);
  out.eigenvectors.resize(p, p);
  for (int j = 0; j < p; ++j) {
    out.eigenvalues[j] = solver.eigenvalues()[idx[j]];
    out.eigenvectors.col(j) = solver.eigenvectors().col(idx[j]);
  }
  for (int j = 0; j < p; ++j) {
    int arg = 0;
    double best = -1.0;
    for (int i = 0; i < p; ++i) {
      const double a = std::abs(out.eigenvectors(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (out.eigenvectors(arg, j) < 0.0) out.eigenvectors.col(j) = -out.eigenvectors.col(j);
  }
  return out;
}

namespace {

SymMatrix rebuild(const SpectralDecomp& d, const Vector& vals) {
  Matrix m = d.eigenvectors * vals.asDiagonal() * d.eigenvectors.transpose();
  return SymMatrix(0.5 * (m + m.transpose().eval()));
}

}  // namespace

SymMatrix pinv(const SymMatrix& m, double rank_tol) {
  const SpectralDecomp d = eig_sym(m);
  const double smax = std::max(0.0, d.eigenvalues.maxCoeff());
  const double cutoff = resolve_rank_tol(m, rank_tol) * smax;
  Vector inv = Vector::Zero(m.dim());
  for (int j = 0; j < m.dim(); ++j) {
    if (d.eigenvalues[j] > cutoff) inv[j] = 1.0 / d.eigenvalues[j];
  }
  return rebuild(d, inv);
}

SymMatrix range_projector(const SymMatrix& m, double rank_tol) {
  const SpectralDecomp d = eig_sym(m);
  const double smax = std::max(0.0, d.eigenvalues.maxCoeff());
  const double cutoff = resolve_rank_tol(m, rank_tol) * smax;
  Vector ind = Vector::Zero(m.dim());
  for (int j = 0; j < m.dim(); ++j) {
    if (d.eigenvalues[j] > cutoff) ind[j] = 1.0;
  }
  return rebuild(d, ind);
}

Matrix psd_sqrt(const SymMatrix& m, double rank_tol) {
  const SpectralDecomp d = eig_sym(m);
  const double smax = std::max(0.0, d.eigenvalues.maxCoeff());
  const double cutoff = resolve_rank_tol(m, rank_tol) * smax;
  Vector root = Vector::Zero(m.dim());
  for (int j = 0; j < m.dim(); ++j) {
    const double s = d.eigenvalues[j];
    if (s < -std::max(cutoff, 0.0)) {
      throw Error("psd_sqrt: not PSD (eigenvalue " + std::to_string(s) + ")");
    }
    root[j] = s > 0.0 ? std::sqrt(s) : 0.0;
  }
  return d.eigenvectors * root.asDiagonal() * d.eigenvectors.transpose();
}

WeightMatrix::WeightMatrix(SymMatrix m) : sym_(std::move(m)) {
  const SpectralDecomp d = eig_sym(sym_);
  eig_max_ = d.eigenvalues[0];
  eig_min_ = d.eigenvalues[sym_.dim() - 1];
  if (!(eig_min_ > default_rank_tol(sym_.dim()) * std::max(0.0, eig_max_))) {
    throw Error("WeightMatrix: not positive definite (smallest eigenvalue " +
                std::to_string(eig_min_) + ")");
  }
  Eigen::LLT<Matrix> llt(sym_.mat());
  if (llt.info() != Eigen::Success) throw Error("WeightMatrix: Cholesky factorization failed");
  chol_ = llt.matrixL();
  diagonal_ = true;
  for (int i = 0; i < sym_.dim() && diagonal_; ++i) {
    for (int j = 0; j < i; ++j) {
      if (sym_(i, j) != 0.0) {
        diagonal_ = false;
        break;
      }
    }
  }
}

double WeightMatrix::norm(const Vector& x) const {
  if (x.size() != dim()) throw Error("WeightMatrix::norm: dimension mismatch");
  return (chol_.transpose() * x).norm();
}

double WeightMatrix::inner(const Vector& x, const Vector& y) const {
  if (x.size() != dim() || y.size() != dim()) {
    throw Error("WeightMatrix::inner: dimension mismatch");
  }
  return x.dot(sym_.mat() * y);
}

double weighted_norm(const Vector& x, const WeightMatrix& w) { return w.norm(x); }

}  // namespace proxkit
