#include "proxkit/prox.hpp"

#include <cmath>
#include <limits>

namespace proxkit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sqr(double v) { return v * v; }

double soft(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// One coordinate of the closed-form prox at scale t (separable kinds only).
double scalar_prox(const Penalty& f, int j, double t, double xj) {
  switch (f.kind) {
    case Penalty::Kind::Ridge:
      return xj / (1.0 + t);
    case Penalty::Kind::Lasso:
      return soft(xj, t);
    case Penalty::Kind::AdaptiveLasso:
      return std::isinf(f.weights[j]) ? 0.0 : soft(xj, t * f.weights[j]);
    case Penalty::Kind::ElasticNet:
      return soft(xj, t * f.en_w) / (1.0 + t * (1.0 - f.en_w));
    case Penalty::Kind::BoxIndicator:
      return std::clamp(xj, f.lower[j], f.upper[j]);
    default:
      throw Error("scalar_prox: non-separable penalty");
  }
}

}  // namespace

double kkt_distance(const Penalty& f, double lambda, const Vector& v, const Vector& beta) {
  if (v.size() != beta.size()) throw Error("kkt_distance: dimension mismatch");
  if (lambda == 0.0) return v.norm();
  const int p = static_cast<int>(beta.size());
  double s = 0.0;
  switch (f.kind) {
    case Penalty::Kind::Ridge:
      return (v - lambda * beta).norm();
    case Penalty::Kind::Lasso:
      for (int j = 0; j < p; ++j) {
        s += beta[j] != 0.0 ? sqr(v[j] - lambda * (beta[j] > 0.0 ? 1.0 : -1.0))
                            : sqr(std::max(std::abs(v[j]) - lambda, 0.0));
      }
      return std::sqrt(s);
    case Penalty::Kind::AdaptiveLasso:
      for (int j = 0; j < p; ++j) {
        if (std::isinf(f.weights[j])) {
          if (beta[j] != 0.0) return kInf;  // subgradient set empty off the pin
          continue;                         // pinned coordinate: any v_j admissible
        }
        const double t = lambda * f.weights[j];
        s += beta[j] != 0.0 ? sqr(v[j] - t * (beta[j] > 0.0 ? 1.0 : -1.0))
                            : sqr(std::max(std::abs(v[j]) - t, 0.0));
      }
      return std::sqrt(s);
    case Penalty::Kind::GroupLasso:
      for (const auto& g : f.groups) {
        double bn = 0.0, vn = 0.0;
        for (int j : g) {
          bn += beta[j] * beta[j];
          vn += v[j] * v[j];
        }
        bn = std::sqrt(bn);
        if (bn > 0.0) {
          double d = 0.0;
          for (int j : g) d += sqr(v[j] - lambda * beta[j] / bn);
          s += d;
        } else {
          s += sqr(std::max(std::sqrt(vn) - lambda, 0.0));
        }
      }
      return std::sqrt(s);
    case Penalty::Kind::ElasticNet:
      for (int j = 0; j < p; ++j) {
        const double quad = lambda * (1.0 - f.en_w) * beta[j];
        s += beta[j] != 0.0
                 ? sqr(v[j] - quad - lambda * f.en_w * (beta[j] > 0.0 ? 1.0 : -1.0))
                 : sqr(std::max(std::abs(v[j]) - lambda * f.en_w, 0.0));
      }
      return std::sqrt(s);
    case Penalty::Kind::BoxIndicator:
      // normal cone of the box; the positive scale lambda is immaterial
      for (int j = 0; j < p; ++j) {
        if (beta[j] < f.lower[j] || beta[j] > f.upper[j]) return kInf;
        if (f.lower[j] == f.upper[j]) continue;
        if (beta[j] == f.lower[j]) {
          s += sqr(std::max(v[j], 0.0));
        } else if (beta[j] == f.upper[j]) {
          s += sqr(std::max(-v[j], 0.0));
        } else {
          s += sqr(v[j]);
        }
      }
      return std::sqrt(s);
  }
  throw Error("kkt_distance: unknown penalty kind");
}

namespace {

ProxResult closed_form_result(const Penalty& f, double lambda, const WeightMatrix& w,
                              const Vector& x, Vector beta) {
  const Vector v = w.mat() * (x - beta);
  const double r = kkt_distance(f, lambda, v, beta);
  return ProxResult{std::move(beta), 0, r, ProxPath::ClosedForm};
}

// Accelerated proximal gradient with fixed step 1/L, monotone restart, and
// the Euclidean prox backward step. Quad provides grad(y), the certificate
// vector vopt(beta) = -grad(beta), and the smooth objective value(beta).
template <class Quad>
ProxResult run_fista(const Quad& q, const Penalty& f, double lambda, double lipschitz, Vector y0,
                     const ProxOptions& opts) {
  const double step = 1.0 / lipschitz;
  Vector y = std::move(y0);
  Vector beta_prev;
  Vector beta;
  double t = 1.0;
  double f_prev = kInf;
  double r = kInf;
  int iters = 0;
  while (iters < opts.max_iters) {
    ++iters;
    const Vector z = y - step * q.grad(y);
    beta = lambda > 0.0 ? euclidean_prox(f, step * lambda, z) : z;
    r = kkt_distance(f, lambda, q.vopt(beta), beta);
    if (r <= opts.kkt_tol) return ProxResult{beta, iters, r, ProxPath::Iterative};
    if (beta_prev.size() > 0) {
      const double rel = (beta - beta_prev).lpNorm<Eigen::Infinity>() /
                         std::max(1.0, beta_prev.lpNorm<Eigen::Infinity>());
      if (rel <= opts.rel_change_tol) return ProxResult{beta, iters, r, ProxPath::Iterative};
    }
    const double f_cur = q.value(beta) + (lambda > 0.0 ? lambda * evaluate(f, beta) : 0.0);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (f_cur > f_prev) {
      y = beta;  // restart the momentum on an objective increase
      t = 1.0;
    } else {
      y = beta_prev.size() > 0 ? (beta + ((t - 1.0) / t_next) * (beta - beta_prev)).eval() : beta;
      t = t_next;
    }
    f_prev = f_cur;
    beta_prev = beta;
  }
  throw NonConvergence("prox iteration hit max_iters=" + std::to_string(opts.max_iters) +
                           " with KKT residual " + std::to_string(r),
                       beta, r, iters);
}

struct ProxQuad {
  const Matrix& w;
  const Vector& x;
  Vector grad(const Vector& y) const { return w * (y - x); }
  Vector vopt(const Vector& b) const { return w * (x - b); }
  double value(const Vector& b) const {
    const Vector d = b - x;
    return 0.5 * d.dot(w * d);
  }
};

struct PlseQuad {
  const Matrix& q;
  const Vector& b;
  Vector grad(const Vector& y) const { return q * y - b; }
  Vector vopt(const Vector& beta) const { return b - q * beta; }
  double value(const Vector& beta) const { return 0.5 * beta.dot(q * beta) - b.dot(beta); }
};

}  // namespace

ProxResult prox(const Penalty& f, double lambda, const WeightMatrix& w, const Vector& x,
                const ProxOptions& opts) {
  if (x.size() != w.dim()) throw Error("prox: dimension mismatch");
  if (lambda < 0.0) throw Error("prox: negative lambda");
  if (lambda == 0.0) return ProxResult{x, 0, 0.0, ProxPath::ClosedForm};
  if (w.is_diagonal()) {
    const Matrix& wm = w.mat();
    bool scalar = true;
    for (int j = 1; j < w.dim(); ++j) {
      if (wm(j, j) != wm(0, 0)) {
        scalar = false;
        break;
      }
    }
    if (scalar) {
      return closed_form_result(f, lambda, w, x, euclidean_prox(f, lambda / wm(0, 0), x));
    }
    if (f.separable()) {
      Vector beta(x.size());
      for (int j = 0; j < x.size(); ++j) beta[j] = scalar_prox(f, j, lambda / wm(j, j), x[j]);
      return closed_form_result(f, lambda, w, x, std::move(beta));
    }
  }
  return run_fista(ProxQuad{w.mat(), x}, f, lambda, w.max_eigenvalue(), x, opts);
}

Vector conjugate_prox(const Penalty& f, double lambda, const WeightMatrix& w, const Vector& x,
                      const ProxOptions& opts) {
  return x - prox(f, lambda, w, x, opts).point;
}

Vector project_polyhedron(const PolyhedronSpec& c, const WeightMatrix& w, const Vector& x,
                          const ProxOptions& opts) {
  const double scale = std::max(1.0, w.mat().cwiseAbs().maxCoeff());
  if ((c.w.mat() - w.mat()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error("project_polyhedron: polyhedron is defined under a different weight matrix");
  }
  return conjugate_prox(Penalty::adaptive_lasso(c.c), 1.0, w, x, opts);
}

ProxResult plse_solve(const Matrix& x_mat, const Vector& y, const Penalty& f, double lambda,
                      const ProxOptions& opts) {
  const int n = static_cast<int>(x_mat.rows());
  const int p = static_cast<int>(x_mat.cols());
  if (n < 1 || y.size() != n) throw Error("plse_solve: dimension mismatch");
  if (!x_mat.allFinite() || !y.allFinite()) throw Error("plse_solve: non-finite data");
  if (lambda < 0.0) throw Error("plse_solve: negative lambda");
  const SymMatrix q(x_mat.transpose() * x_mat / static_cast<double>(n));
  const Vector b = x_mat.transpose() * y / static_cast<double>(n);
  const SpectralDecomp d = eig_sym(q);
  const double smax = std::max(0.0, d.eigenvalues[0]);
  if (lambda == 0.0 && d.eigenvalues[p - 1] <= default_rank_tol(p) * smax) {
    throw Error(
        "plse_solve: lambda = 0 with a rank-deficient design has no unique minimizer; "
        "use the ridgeless estimator");
  }
  if (smax <= 0.0) throw Error("plse_solve: zero design matrix");
  return run_fista(PlseQuad{q.mat(), b}, f, lambda, smax, Vector::Zero(p), opts);
}

std::function<double(const Vector&)> extended_penalty(const Penalty& f, double lambda,
                                                      const WeightMatrix& w_bar,
                                                      const SymMatrix& q) {
  if (!(lambda > 0.0)) throw Error("extended_penalty: lambda must be positive");
  if (w_bar.dim() != q.dim()) throw Error("extended_penalty: dimension mismatch");
  const Matrix diff = w_bar.mat() - q.mat();
  const SpectralDecomp d = eig_sym(SymMatrix(diff));
  const double scale = std::max(1.0, std::abs(d.eigenvalues[0]));
  if (d.eigenvalues[q.dim() - 1] < -1e-10 * scale) {
    throw Error("extended_penalty: w_bar - q is not PSD, the extended penalty is not convex");
  }
  return [f, lambda, diff](const Vector& beta) {
    return evaluate(f, beta) + 0.5 / lambda * beta.dot(diff * beta);
  };
}

bool kernel_condition(const SymMatrix& a, const SymMatrix& q, double rank_tol) {
  if (a.dim() != q.dim()) throw Error("kernel_condition: dimension mismatch");
  const SpectralDecomp d = eig_sym(a);
  const double cutoff = resolve_rank_tol(a, rank_tol) * std::max(0.0, d.eigenvalues[0]);
  for (int j = 0; j < a.dim(); ++j) {
    if (d.eigenvalues[j] > cutoff) continue;
    const Vector image = q.mat() * d.eigenvectors.col(j);
    if (image.lpNorm<Eigen::Infinity>() > 1e-9) return false;
  }
  return true;
}

}  // namespace proxkit
