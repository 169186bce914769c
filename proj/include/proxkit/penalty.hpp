#pragma once

#include <optional>
#include <vector>

#include "proxkit/linalg.hpp"

namespace proxkit {

// Penalty function f in Gamma(R^p). The tuning parameter lambda always lives
// outside the penalty (operations take lambda separately), so one object
// serves a whole tuning grid.
struct Penalty {
  enum class Kind { Ridge, Lasso, AdaptiveLasso, GroupLasso, ElasticNet, BoxIndicator };

  Kind kind = Kind::Lasso;
  Vector weights;                        // AdaptiveLasso; entries > 0, +inf pins the coordinate to 0
  std::vector<std::vector<int>> groups;  // GroupLasso; 0-based partition of 0..p-1
  double en_w = 0.5;                     // ElasticNet mixing weight in (0,1)
  Vector lower, upper;                   // BoxIndicator bounds; +-inf allowed

  static Penalty ridge();
  static Penalty lasso();
  static Penalty adaptive_lasso(Vector weights);
  static Penalty group_lasso(std::vector<std::vector<int>> groups, int p);
  static Penalty elastic_net(double w);
  static Penalty box(Vector lower, Vector upper);

  bool separable() const { return kind != Kind::GroupLasso; }
  bool sublinear() const { return kind == Kind::Lasso || kind == Kind::AdaptiveLasso; }
};

const char* penalty_kind_name(Penalty::Kind k);

// f(beta), possibly +inf (box indicator outside the box, adaptive-lasso
// penalty with an infinite weight on a nonzero coordinate).
double evaluate(const Penalty& f, const Vector& beta);

// argmin 1/2 ||x - beta||_2^2 + t f(beta), in closed form for all six kinds.
// Zeros are written exactly (literal 0.0), so active sets need no tolerance.
Vector euclidean_prox(const Penalty& f, double t, const Vector& x);

// The set C_n = { theta : |<e_j, theta>_W| <= c_j } whose indicator is the
// conjugate of lambda*f for sublinear f. c_j = +inf encodes an unconstrained
// coordinate.
struct PolyhedronSpec {
  Vector c;
  WeightMatrix w;
};

// For Lasso: c_j = lambda. For AdaptiveLasso: c_j = lambda / |aux_j| when aux
// is supplied (+inf below the 1e-12 underflow threshold), else lambda * w_j
// from the penalty's stored weights. Other kinds are not sublinear.
PolyhedronSpec conjugate_polyhedron(const Penalty& f, double lambda, const WeightMatrix& w,
                                    const std::optional<Vector>& aux = std::nullopt);

// max_j (|(W theta)_j| - c_j) over finite constraints; <= 0 means membership.
double polyhedron_violation(const PolyhedronSpec& c, const Vector& theta);

// Support A = { j : beta0_j != 0 } of the limit-penalty domain (0-based).
std::vector<int> limit_domain(const Penalty& f, const Vector& beta0);

// Euclidean subgradient set of the limit penalty at beta0.
struct LimitSubgradient {
  enum class Form { Singleton, BoxProduct, AffineSpan };
  Form form = Form::Singleton;
  std::vector<bool> fixed;  // per coordinate: pinned to value[j]?
  Vector value;             // pinned values (0 on free coordinates)
  Vector lo, hi;            // intervals on free coordinates (+-inf for AffineSpan)
};

LimitSubgradient limit_subgradient(const Penalty& f, const Vector& beta0);

// JSON form {"kind": "...", ...}; strict: unknown keys rejected.
Penalty penalty_from_json_text(const std::string& text);
std::string penalty_to_json_text(const Penalty& f);

}  // namespace proxkit
