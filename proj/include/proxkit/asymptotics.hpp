#pragma once

#include <vector>

#include "proxkit/penalty.hpp"
#include "proxkit/rng.hpp"

namespace proxkit {

// Limit-law ingredients: eta = Q0^+ Z with Z ~ N(0, Omega0), the weight
// W0 = Q0 + I - Q0 Q0^+, and the active support A.
struct LimitLaw {
  SymMatrix q0;
  SymMatrix omega0;
  WeightMatrix w0;
  std::vector<int> support;
  Matrix omega_sqrt;   // cached psd_sqrt(omega0)
  SymMatrix q0_pinv;   // cached
};

LimitLaw make_limit_law(const SymMatrix& q0, const SymMatrix& omega0, std::vector<int> support,
                        double rank_tol = -1.0);

// Homoskedastic case Omega0 = sigma_sq * Q0.
LimitLaw homoskedastic_limit_law(const SymMatrix& q0, double sigma_sq, std::vector<int> support,
                                 double rank_tol = -1.0);

Vector sample_eta(const LimitLaw& law, Rng& rng);

// W0-orthogonal projection of eta onto span{ e_j : j in A }: coordinates off
// the support are exactly 0, the active block is [(W0)_A]^{-1} (W0 eta)_A.
Vector limit_adaptive_projection(const Vector& eta, const LimitLaw& law);

// sigma_sq * [(Q0)_A]^+.
Matrix oracle_covariance(const LimitLaw& law, double sigma_sq);

// Per-coordinate quantile discrepancies (rows: 0.25 / 0.5 / 0.75) between two
// sample matrices, with bootstrap standard errors, plus the infinity norm of
// the covariance difference.
struct CompareReport {
  Matrix quantile_diff;  // 3 x p
  Matrix quantile_se;    // 3 x p
  double cov_diff_inf = 0.0;
};

CompareReport compare_samples(const Matrix& a, const Matrix& b);

// Diagnostic for the necessary selection condition: the sampled probability
// that eta and its W0-projection onto the polyhedron agree exactly (1e-9) on
// the off-support coordinates.
double oracle_condition_probability(const LimitLaw& law, const PolyhedronSpec& b0, int nsamples,
                                    uint64_t seed);

}  // namespace proxkit
