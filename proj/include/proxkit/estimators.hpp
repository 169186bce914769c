#pragma once

#include <string>
#include <utility>
#include <vector>

#include "proxkit/prox.hpp"

namespace proxkit {

struct Dataset {
  Matrix x;
  Vector y;

  Dataset(Matrix x_mat, Vector y_vec);
  int n() const { return static_cast<int>(x.rows()); }
  int p() const { return static_cast<int>(x.cols()); }

  // CSV with header "y,x1,...,xp", one observation per row. Parse errors
  // carry the 1-based line number.
  static Dataset from_csv(const std::string& path);
};

SymMatrix gram(const Dataset& d);  // X'X/n
Vector xty(const Dataset& d);      // X'Y/n

// Minimum-norm least squares: Q_n^+ X'Y/n. Lies in range(Q_n).
Vector ridgeless(const Dataset& d, double rank_tol = -1.0);
Vector ridgeless_from(const SymMatrix& q_n, const Vector& xty_vec, double rank_tol = -1.0);

// (lambda2 I + Q_n)^{-1} X'Y/n.
Vector ridge_initial(const Dataset& d, double lambda2);

// Soft-threshold of a descending spectrum: sigma_hat_j = max(sigma_j - mu, 0).
Vector spectrum_prox(const Vector& sigma, double mu);

// Spectrum-thresholded design estimate: sigma_check_j is bit-equal to 0 or to
// sigma_j(Q_n); Q_check = P diag(sigma_check) P'; W_bar = Q_check + I -
// Q_check Q_check^+ (eigenvalues: kept sigma_j, or 1 on dropped directions).
struct ModifiedDesign {
  SymMatrix q_check;
  SymMatrix q_check_pinv;
  WeightMatrix w_bar;
  std::vector<bool> kept;
  Vector sigma_hat;
  Vector sigma_check;
  int rank() const;
};

ModifiedDesign modified_design(const SymMatrix& q_n, double mu, double rank_tol = -1.0);

// Modified Ridgeless: beta_check = Q_check^+ X'Y/n.
std::pair<Vector, ModifiedDesign> modified_ridgeless(const Dataset& d, double mu,
                                                     double rank_tol = -1.0);

// Q_bar = Q + I - Q Q^+ as a positive-definite weight (the recipe applied to
// a raw Gram matrix, used for the unmodified-initial pipeline).
WeightMatrix design_weight(const SymMatrix& q, double rank_tol = -1.0);

// w_j = 1 / |aux_j|; +inf when |aux_j| < 1e-12.
Vector adaptive_weights(const Vector& aux);

std::vector<int> active_set_of(const Vector& beta);  // exact nonzeros, 0-based

struct EstimateReport {
  Vector beta;
  std::vector<int> active_set;
  Vector v_opt;  // W (initial - beta), the optimal-subgradient certificate
  Vector initial_beta;
  WeightMatrix w_used;
  ProxResult solver;
};

// beta = prox(f, lambda, w, initial); the KKT membership of v_opt is
// re-checked on construction.
EstimateReport proximal_estimate(const Vector& initial, const WeightMatrix& w, const Penalty& f,
                                 double lambda, const ProxOptions& opts = {});

}  // namespace proxkit
