#include "proxkit/asymptotics.hpp"

#include <algorithm>
#include <cmath>

#include "proxkit/prox.hpp"
#include "proxkit/stats.hpp"

namespace proxkit {

LimitLaw make_limit_law(const SymMatrix& q0, const SymMatrix& omega0, std::vector<int> support,
                        double rank_tol) {
  if (q0.dim() != omega0.dim()) throw Error("make_limit_law: dimension mismatch");
  const int p = q0.dim();
  for (int j : support) {
    if (j < 0 || j >= p) throw Error("make_limit_law: support index out of range");
  }
  std::sort(support.begin(), support.end());
  const SpectralDecomp d = eig_sym(q0);
  const double cutoff = resolve_rank_tol(q0, rank_tol) * std::max(0.0, d.eigenvalues[0]);
  Vector w0_eigs(p);
  for (int j = 0; j < p; ++j) {
    w0_eigs[j] = d.eigenvalues[j] > cutoff ? d.eigenvalues[j] : 1.0;
  }
  Matrix w0m = d.eigenvectors * w0_eigs.asDiagonal() * d.eigenvectors.transpose();
  return LimitLaw{q0,
                  omega0,
                  WeightMatrix(SymMatrix(0.5 * (w0m + w0m.transpose().eval()))),
                  std::move(support),
                  psd_sqrt(omega0, rank_tol),
                  pinv(q0, rank_tol)};
}

LimitLaw homoskedastic_limit_law(const SymMatrix& q0, double sigma_sq, std::vector<int> support,
                                 double rank_tol) {
  if (!(sigma_sq >= 0.0)) throw Error("homoskedastic_limit_law: sigma_sq must be nonnegative");
  return make_limit_law(q0, SymMatrix(sigma_sq * q0.mat()), std::move(support), rank_tol);
}

Vector sample_eta(const LimitLaw& law, Rng& rng) {
  const int p = law.q0.dim();
  Vector g(p);
  for (int j = 0; j < p; ++j) g[j] = rng.gauss();
  return law.q0_pinv.mat() * (law.omega_sqrt * g);
}

Vector limit_adaptive_projection(const Vector& eta, const LimitLaw& law) {
  const int p = law.q0.dim();
  if (eta.size() != p) throw Error("limit_adaptive_projection: dimension mismatch");
  Vector out = Vector::Zero(p);
  const int k = static_cast<int>(law.support.size());
  if (k == 0) return out;
  Matrix w_aa(k, k);
  Vector rhs(k);
  const Vector weta = law.w0.mat() * eta;
  for (int a = 0; a < k; ++a) {
    rhs[a] = weta[law.support[a]];
    for (int b = 0; b < k; ++b) w_aa(a, b) = law.w0.mat()(law.support[a], law.support[b]);
  }
  const Vector active = w_aa.llt().solve(rhs);
  for (int a = 0; a < k; ++a) out[law.support[a]] = active[a];
  return out;
}

Matrix oracle_covariance(const LimitLaw& law, double sigma_sq) {
  const int k = static_cast<int>(law.support.size());
  Matrix q_aa(k, k);
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) q_aa(a, b) = law.q0.mat()(law.support[a], law.support[b]);
  }
  if (k == 0) return q_aa;
  return sigma_sq * pinv(SymMatrix(q_aa)).mat();
}

namespace {

Matrix sample_cov(const Matrix& a) {
  const Eigen::RowVectorXd mean = a.colwise().mean();
  const Matrix centered = a.rowwise() - mean;
  return centered.transpose() * centered / static_cast<double>(a.rows() - 1);
}

}  // namespace

CompareReport compare_samples(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw Error("compare_samples: column counts differ");
  if (a.rows() < 100 || b.rows() < 100) throw Error("compare_samples: insufficient samples");
  const int p = static_cast<int>(a.cols());
  const double qs[3] = {0.25, 0.5, 0.75};
  CompareReport rep;
  rep.quantile_diff.resize(3, p);
  rep.quantile_se.resize(3, p);
  auto col = [](const Matrix& m, int j) {
    return std::vector<double>(m.col(j).data(), m.col(j).data() + m.rows());
  };
  for (int j = 0; j < p; ++j) {
    const std::vector<double> ca = col(a, j);
    const std::vector<double> cb = col(b, j);
    for (int r = 0; r < 3; ++r) {
      rep.quantile_diff(r, j) = quantile_hf8(ca, qs[r]) - quantile_hf8(cb, qs[r]);
    }
    // bootstrap standard errors of the quantile differences
    constexpr int kBoot = 200;
    Rng rng(0x6a09e667f3bcc908ULL ^ static_cast<uint64_t>(j));
    Matrix boots(kBoot, 3);
    std::vector<double> ra(ca.size()), rb(cb.size());
    for (int it = 0; it < kBoot; ++it) {
      for (size_t i = 0; i < ca.size(); ++i) {
        ra[i] = ca[rng.next_u64() % ca.size()];
      }
      for (size_t i = 0; i < cb.size(); ++i) {
        rb[i] = cb[rng.next_u64() % cb.size()];
      }
      for (int r = 0; r < 3; ++r) {
        boots(it, r) = quantile_hf8(ra, qs[r]) - quantile_hf8(rb, qs[r]);
      }
    }
    for (int r = 0; r < 3; ++r) {
      const double m = boots.col(r).mean();
      rep.quantile_se(r, j) =
          std::sqrt((boots.col(r).array() - m).square().sum() / (kBoot - 1));
    }
  }
  rep.cov_diff_inf = (sample_cov(a) - sample_cov(b)).cwiseAbs().maxCoeff();
  return rep;
}

double oracle_condition_probability(const LimitLaw& law, const PolyhedronSpec& b0, int nsamples,
                                    uint64_t seed) {
  if (nsamples < 1) throw Error("oracle_condition_probability: nsamples must be positive");
  Rng rng(seed);
  std::vector<bool> off_support(law.q0.dim(), true);
  for (int j : law.support) off_support[j] = false;
  int hits = 0;
  for (int s = 0; s < nsamples; ++s) {
    const Vector eta = sample_eta(law, rng);
    const Vector proj = project_polyhedron(b0, law.w0, eta);
    bool equal = true;
    for (int j = 0; j < eta.size(); ++j) {
      if (off_support[j] && std::abs(eta[j] - proj[j]) > 1e-9) {
        equal = false;
        break;
      }
    }
    hits += equal ? 1 : 0;
  }
  return static_cast<double>(hits) / nsamples;
}

}  // namespace proxkit
