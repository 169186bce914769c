#include "proxkit/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace proxkit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kWeightUnderflow = 1e-12;  // auxiliary estimates below this count as zero

double soft(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

}  // namespace

Penalty Penalty::ridge() {
  Penalty f;
  f.kind = Kind::Ridge;
  return f;
}

Penalty Penalty::lasso() {
  Penalty f;
  f.kind = Kind::Lasso;
  return f;
}

Penalty Penalty::adaptive_lasso(Vector weights) {
  for (int j = 0; j < weights.size(); ++j) {
    if (!(weights[j] > 0.0)) {
      throw Error("AdaptiveLasso: weights must be positive (or +inf), got " +
                  std::to_string(weights[j]) + " at coordinate " + std::to_string(j + 1));
    }
  }
  Penalty f;
  f.kind = Kind::AdaptiveLasso;
  f.weights = std::move(weights);
  return f;
}

Penalty Penalty::group_lasso(std::vector<std::vector<int>> groups, int p) {
  std::vector<int> seen(p, 0);
  for (const auto& g : groups) {
    if (g.empty()) throw Error("GroupLasso: empty group");
    for (int j : g) {
      if (j < 0 || j >= p) throw Error("GroupLasso: index out of range");
      if (seen[j]++) throw Error("GroupLasso: coordinate repeated across groups");
    }
  }
  for (int j = 0; j < p; ++j) {
    if (!seen[j]) throw Error("GroupLasso: groups must partition all coordinates");
  }
  Penalty f;
  f.kind = Kind::GroupLasso;
  f.groups = std::move(groups);
  return f;
}

Penalty Penalty::elastic_net(double w) {
  if (!(w > 0.0 && w < 1.0)) throw Error("ElasticNet: w must lie in (0,1)");
  Penalty f;
  f.kind = Kind::ElasticNet;
  f.en_w = w;
  return f;
}

Penalty Penalty::box(Vector lower, Vector upper) {
  if (lower.size() != upper.size()) throw Error("BoxIndicator: bound lengths differ");
  for (int j = 0; j < lower.size(); ++j) {
    if (!(lower[j] <= upper[j])) throw Error("BoxIndicator: lower > upper at coordinate " +
                                             std::to_string(j + 1));
  }
  Penalty f;
  f.kind = Kind::BoxIndicator;
  f.lower = std::move(lower);
  f.upper = std::move(upper);
  return f;
}

const char* penalty_kind_name(Penalty::Kind k) {
  switch (k) {
    case Penalty::Kind::Ridge: return "ridge";
    case Penalty::Kind::Lasso: return "lasso";
    case Penalty::Kind::AdaptiveLasso: return "adaptive-lasso";
    case Penalty::Kind::GroupLasso: return "group-lasso";
    case Penalty::Kind::ElasticNet: return "elastic-net";
    case Penalty::Kind::BoxIndicator: return "box";
  }
  return "?";
}

double evaluate(const Penalty& f, const Vector& beta) {
  switch (f.kind) {
    case Penalty::Kind::Ridge:
      return 0.5 * beta.squaredNorm();
    case Penalty::Kind::Lasso:
      return beta.lpNorm<1>();
    case Penalty::Kind::AdaptiveLasso: {
      if (f.weights.size() != beta.size()) throw Error("evaluate: weight length mismatch");
      double s = 0.0;
      for (int j = 0; j < beta.size(); ++j) {
        if (std::isinf(f.weights[j])) {
          if (beta[j] != 0.0) return kInf;
        } else {
          s += f.weights[j] * std::abs(beta[j]);
        }
      }
      return s;
    }
    case Penalty::Kind::GroupLasso: {
      double s = 0.0;
      for (const auto& g : f.groups) {
        double block = 0.0;
        for (int j : g) block += beta[j] * beta[j];
        s += std::sqrt(block);
      }
      return s;
    }
    case Penalty::Kind::ElasticNet:
      return f.en_w * beta.lpNorm<1>() + 0.5 * (1.0 - f.en_w) * beta.squaredNorm();
    case Penalty::Kind::BoxIndicator: {
      if (f.lower.size() != beta.size()) throw Error("evaluate: box bound length mismatch");
      for (int j = 0; j < beta.size(); ++j) {
        if (beta[j] < f.lower[j] || beta[j] > f.upper[j]) return kInf;
      }
      return 0.0;
    }
  }
  throw Error("evaluate: unknown penalty kind");
}

Vector euclidean_prox(const Penalty& f, double t, const Vector& x) {
  if (!(t > 0.0)) throw Error("euclidean_prox: t must be positive");
  const int p = static_cast<int>(x.size());
  Vector out(p);
  switch (f.kind) {
    case Penalty::Kind::Ridge:
      return x / (1.0 + t);
    case Penalty::Kind::Lasso:
      for (int j = 0; j < p; ++j) out[j] = soft(x[j], t);
      return out;
    case Penalty::Kind::AdaptiveLasso: {
      if (f.weights.size() != p) throw Error("euclidean_prox: weight length mismatch");
      for (int j = 0; j < p; ++j) {
        out[j] = std::isinf(f.weights[j]) ? 0.0 : soft(x[j], t * f.weights[j]);
      }
      return out;
    }
    case Penalty::Kind::GroupLasso: {
      out = x;
      for (const auto& g : f.groups) {
        double block = 0.0;
        for (int j : g) block += x[j] * x[j];
        const double nrm = std::sqrt(block);
        const double scale = nrm > t ? 1.0 - t / nrm : 0.0;
        for (int j : g) out[j] = scale == 0.0 ? 0.0 : scale * x[j];
      }
      return out;
    }
    case Penalty::Kind::ElasticNet: {
      // prox of t(w|.|_1 + (1-w)/2 |.|^2): the quadratic part rescales the
      // soft-threshold output, beta = soft(x, t w) / (1 + t (1-w)).
      const double denom = 1.0 + t * (1.0 - f.en_w);
      for (int j = 0; j < p; ++j) out[j] = soft(x[j], t * f.en_w) / denom;
      return out;
    }
    case Penalty::Kind::BoxIndicator: {
      if (f.lower.size() != p) throw Error("euclidean_prox: box bound length mismatch");
      for (int j = 0; j < p; ++j) out[j] = std::clamp(x[j], f.lower[j], f.upper[j]);
      return out;
    }
  }
  throw Error("euclidean_prox: unknown penalty kind");
}

PolyhedronSpec conjugate_polyhedron(const Penalty& f, double lambda, const WeightMatrix& w,
                                    const std::optional<Vector>& aux) {
  if (!(lambda > 0.0)) throw Error("conjugate_polyhedron: lambda must be positive");
  if (!f.sublinear()) {
    throw Error(std::string("conjugate_polyhedron: penalty '") + penalty_kind_name(f.kind) +
                "' is not sublinear");
  }
  const int p = w.dim();
  Vector c(p);
  if (f.kind == Penalty::Kind::Lasso) {
    c.setConstant(lambda);
  } else if (aux.has_value()) {
    if (aux->size() != p) throw Error("conjugate_polyhedron: auxiliary estimate length mismatch");
    for (int j = 0; j < p; ++j) {
      const double a = std::abs((*aux)[j]);
      c[j] = a < kWeightUnderflow ? kInf : lambda / a;
    }
  } else {
    if (f.weights.size() != p) throw Error("conjugate_polyhedron: weight length mismatch");
    for (int j = 0; j < p; ++j) c[j] = std::isinf(f.weights[j]) ? kInf : lambda * f.weights[j];
  }
  return PolyhedronSpec{std::move(c), w};
}

double polyhedron_violation(const PolyhedronSpec& c, const Vector& theta) {
  const Vector wt = c.w.mat() * theta;
  double worst = -kInf;
  for (int j = 0; j < wt.size(); ++j) {
    if (std::isinf(c.c[j])) continue;
    worst = std::max(worst, std::abs(wt[j]) - c.c[j]);
  }
  return worst == -kInf ? 0.0 : worst;
}

std::vector<int> limit_domain(const Penalty& f, const Vector& beta0) {
  if (f.kind != Penalty::Kind::AdaptiveLasso) {
    throw Error("limit_domain: defined for the adaptive lasso only");
  }
  std::vector<int> a;
  for (int j = 0; j < beta0.size(); ++j) {
    if (beta0[j] != 0.0) a.push_back(j);
  }
  return a;
}

LimitSubgradient limit_subgradient(const Penalty& f, const Vector& beta0) {
  const int p = static_cast<int>(beta0.size());
  LimitSubgradient s;
  s.fixed.assign(p, false);
  s.value = Vector::Zero(p);
  s.lo = Vector::Constant(p, -kInf);
  s.hi = Vector::Constant(p, kInf);
  switch (f.kind) {
    case Penalty::Kind::Ridge:
      s.form = LimitSubgradient::Form::Singleton;
      s.fixed.assign(p, true);
      s.value = beta0;
      return s;
    case Penalty::Kind::Lasso:
      s.form = LimitSubgradient::Form::BoxProduct;
      for (int j = 0; j < p; ++j) {
        if (beta0[j] != 0.0) {
          s.fixed[j] = true;
          s.value[j] = beta0[j] > 0.0 ? 1.0 : -1.0;
        } else {
          s.lo[j] = -1.0;
          s.hi[j] = 1.0;
        }
      }
      return s;
    case Penalty::Kind::AdaptiveLasso:
      s.form = LimitSubgradient::Form::AffineSpan;
      for (int j = 0; j < p; ++j) {
        if (beta0[j] != 0.0) {
          s.fixed[j] = true;
          s.value[j] = 1.0 / beta0[j];
        }
      }
      return s;
    default:
      throw Error(std::string("limit_subgradient: unsupported penalty '") +
                  penalty_kind_name(f.kind) + "'");
  }
}

namespace {

using nlohmann::json;

Vector vector_from_json(const json& a, const char* what) {
  if (!a.is_array()) throw Error(std::string(what) + ": expected an array");
  Vector v(a.size());
  int i = 0;
  for (const auto& e : a) {
    if (e.is_number()) {
      v[i] = e.get<double>();
    } else if (e.is_string()) {
      const std::string s = e.get<std::string>();
      if (s == "inf" || s == "+inf") {
        v[i] = kInf;
      } else if (s == "-inf") {
        v[i] = -kInf;
      } else {
        throw Error(std::string(what) + ": bad entry '" + s + "'");
      }
    } else if (e.is_null()) {
      v[i] = kInf;
    } else {
      throw Error(std::string(what) + ": entries must be numbers, 'inf', '-inf', or null");
    }
    ++i;
  }
  return v;
}

void reject_unknown_keys(const json& o, std::initializer_list<const char*> allowed) {
  for (auto it = o.begin(); it != o.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) throw Error("unknown config key '" + it.key() + "'");
  }
}

json finite_or_string(double v) {
  if (std::isinf(v)) return json(v > 0 ? "inf" : "-inf");
  return json(v);
}

}  // namespace

Penalty penalty_from_json_text(const std::string& text) {
  json o;
  try {
    o = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("penalty JSON parse error: ") + e.what());
  }
  if (!o.is_object() || !o.contains("kind") || !o["kind"].is_string()) {
    throw Error("penalty JSON must be an object with a string 'kind'");
  }
  const std::string kind = o["kind"].get<std::string>();
  if (kind == "ridge") {
    reject_unknown_keys(o, {"kind"});
    return Penalty::ridge();
  }
  if (kind == "lasso") {
    reject_unknown_keys(o, {"kind"});
    return Penalty::lasso();
  }
  if (kind == "adaptive-lasso") {
    reject_unknown_keys(o, {"kind", "weights", "from_initial"});
    if (o.value("from_initial", false)) {
      if (o.contains("weights")) throw Error("adaptive-lasso: give weights or from_initial, not both");
      Penalty f;
      f.kind = Penalty::Kind::AdaptiveLasso;  // weights filled from the initial estimate later
      return f;
    }
    if (!o.contains("weights")) throw Error("adaptive-lasso: missing 'weights'");
    return Penalty::adaptive_lasso(vector_from_json(o["weights"], "adaptive-lasso weights"));
  }
  if (kind == "group-lasso") {
    reject_unknown_keys(o, {"kind", "groups", "p"});
    if (!o.contains("groups") || !o.contains("p")) throw Error("group-lasso: needs 'groups' and 'p'");
    std::vector<std::vector<int>> groups;
    for (const auto& g : o["groups"]) {
      std::vector<int> grp;
      for (const auto& j : g) grp.push_back(j.get<int>() - 1);  // 1-based in JSON
      groups.push_back(std::move(grp));
    }
    return Penalty::group_lasso(std::move(groups), o["p"].get<int>());
  }
  if (kind == "elastic-net") {
    reject_unknown_keys(o, {"kind", "w"});
    if (!o.contains("w")) throw Error("elastic-net: missing 'w'");
    return Penalty::elastic_net(o["w"].get<double>());
  }
  if (kind == "box") {
    reject_unknown_keys(o, {"kind", "lower", "upper"});
    if (!o.contains("lower") || !o.contains("upper")) throw Error("box: needs 'lower' and 'upper'");
    Vector lo = vector_from_json(o["lower"], "box lower");
    Vector hi = vector_from_json(o["upper"], "box upper");
    for (int j = 0; j < lo.size(); ++j) {
      if (std::isinf(lo[j]) && lo[j] > 0.0) lo[j] = -kInf;  // null/"inf" in lower means unbounded below
    }
    return Penalty::box(std::move(lo), std::move(hi));
  }
  throw Error("unknown penalty kind '" + kind + "'");
}

std::string penalty_to_json_text(const Penalty& f) {
  json o;
  o["kind"] = penalty_kind_name(f.kind);
  switch (f.kind) {
    case Penalty::Kind::AdaptiveLasso: {
      json a = json::array();
      for (int j = 0; j < f.weights.size(); ++j) a.push_back(finite_or_string(f.weights[j]));
      o["weights"] = a;
      break;
    }
    case Penalty::Kind::GroupLasso: {
      json gs = json::array();
      int p = 0;
      for (const auto& g : f.groups) {
        json one = json::array();
        for (int j : g) one.push_back(j + 1);
        p += static_cast<int>(g.size());
        gs.push_back(one);
      }
      o["groups"] = gs;
      o["p"] = p;
      break;
    }
    case Penalty::Kind::ElasticNet:
      o["w"] = f.en_w;
      break;
    case Penalty::Kind::BoxIndicator: {
      json lo = json::array(), hi = json::array();
      for (int j = 0; j < f.lower.size(); ++j) {
        lo.push_back(finite_or_string(f.lower[j]));
        hi.push_back(finite_or_string(f.upper[j]));
      }
      o["lower"] = lo;
      o["upper"] = hi;
      break;
    }
    default:
      break;
  }
  return o.dump();
}

}  // namespace proxkit
