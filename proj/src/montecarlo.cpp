#include "proxkit/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <optional>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "proxkit/log.hpp"

namespace proxkit {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kTwoPi = 6.283185307179586476925287;
}  // namespace

uint64_t splitmix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t mix_seed(uint64_t base, uint64_t n, uint64_t rep) {
  return splitmix64(splitmix64(splitmix64(base) ^ n) ^ rep);
}

double Rng::gauss() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(kTwoPi * u2);
  has_spare_ = true;
  return r * std::cos(kTwoPi * u2);
}

double quantile_hf8(std::vector<double> v, double q) {
  if (v.empty()) throw Error("quantile_hf8: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw Error("quantile_hf8: q outside [0,1]");
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  const double h = (n + 1.0 / 3.0) * q + 1.0 / 3.0;
  const double hf = std::clamp(std::floor(h), 1.0, n);
  const size_t lo = static_cast<size_t>(hf) - 1;
  const size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = std::clamp(h - hf, 0.0, 1.0);
  return v[lo] + frac * (v[hi] - v[lo]);
}

double binomial_se(double p_hat, int n) {
  if (n < 1) throw Error("binomial_se: n must be positive");
  return std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n));
}

const char* design_kind_name(DesignKind k) {
  switch (k) {
    case DesignKind::Regular: return "regular";
    case DesignKind::Singular: return "singular";
    case DesignKind::NearlySingular: return "nearly-singular";
  }
  return "?";
}

DesignKind design_kind_from_string(const std::string& s) {
  if (s == "regular") return DesignKind::Regular;
  if (s == "singular") return DesignKind::Singular;
  if (s == "nearly-singular") return DesignKind::NearlySingular;
  throw Error("unknown design '" + s + "'");
}

const char* estimator_name(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::RL: return "RL";
    case EstimatorKind::MRL: return "MRL";
    case EstimatorKind::RLAL: return "RLAL";
    case EstimatorKind::MRLAL: return "MRLAL";
  }
  return "?";
}

EstimatorKind estimator_from_string(const std::string& s) {
  if (s == "RL") return EstimatorKind::RL;
  if (s == "MRL") return EstimatorKind::MRL;
  if (s == "RLAL") return EstimatorKind::RLAL;
  if (s == "MRLAL") return EstimatorKind::MRLAL;
  throw Error("unknown estimator '" + s + "'");
}

SymMatrix build_qr(int p) {
  if (p < 1) throw Error("build_qr: p must be positive");
  Matrix m(p, p);
  for (int j = 0; j < p; ++j) {
    for (int k = 0; k < p; ++k) m(j, k) = std::pow(0.5, std::abs(j - k));
  }
  return SymMatrix(std::move(m));
}

SymMatrix build_qs(const SymMatrix& qr, double a, double b) {
  const int p = qr.dim();
  if (p < 5) throw Error("build_qs: needs p >= 5");
  Matrix m = Matrix::Identity(p, p);
  m.row(4).setZero();
  m(4, 1) = a;
  m(4, 2) = b;
  Matrix qs = m * qr.mat() * m.transpose();
  return SymMatrix(0.5 * (qs + qs.transpose().eval()));
}

SymMatrix population_design(const DesignSpec& spec, long n) {
  if (n < 1) throw Error("population_design: n must be positive");
  const SymMatrix qr = build_qr(spec.p);
  switch (spec.kind) {
    case DesignKind::Regular:
      return qr;
    case DesignKind::Singular:
      return build_qs(qr, kQsCoef, kQsCoef);
    case DesignKind::NearlySingular: {
      const double w = 1.0 / std::sqrt(static_cast<double>(n));
      const SymMatrix qs = build_qs(qr, kQsCoef, kQsCoef);
      return SymMatrix(w * qr.mat() + (1.0 - w) * qs.mat());
    }
  }
  throw Error("population_design: unknown design kind");
}

SymMatrix population_limit(const DesignSpec& spec) {
  const SymMatrix qr = build_qr(spec.p);
  return spec.kind == DesignKind::Regular ? qr : build_qs(qr, kQsCoef, kQsCoef);
}

Vector study_beta0() {
  Vector b(8);
  b << 3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0;
  return b;
}

Vector beta0_plus(const DesignSpec& spec) {
  if (spec.p != 8) throw Error("beta0_plus: the study parameter is defined for p = 8");
  const Vector b0 = study_beta0();
  if (spec.kind == DesignKind::Regular) return b0;
  // project out the kernel direction of Q_s so the off-support coordinates
  // are literal zeros
  Vector k = Vector::Zero(8);
  k[1] = kQsCoef;
  k[2] = kQsCoef;
  k[4] = -1.0;
  return b0 - (k.dot(b0) / k.squaredNorm()) * k;
}

Dataset generate_sample(const DesignSpec& spec, long n, const Vector& beta0, double sigma0_sq,
                        Rng& rng) {
  if (beta0.size() != spec.p) throw Error("generate_sample: beta0 length mismatch");
  if (!(sigma0_sq >= 0.0)) throw Error("generate_sample: sigma0_sq must be nonnegative");
  const Matrix s = psd_sqrt(population_design(spec, n));
  Matrix g(n, spec.p);
  for (long i = 0; i < n; ++i) {
    for (int j = 0; j < spec.p; ++j) g(i, j) = rng.gauss();
  }
  Matrix x = g * s;  // rows X_i = S g_i (S symmetric)
  Vector y = x * beta0;
  const double sd = std::sqrt(sigma0_sq);
  for (long i = 0; i < n; ++i) y[i] += sd * rng.gauss();
  return Dataset(std::move(x), std::move(y));
}

void validate_config(const McConfig& cfg) {
  if (cfg.design.p != 8) throw Error("config: the study runner is defined for p = 8");
  if (cfg.reps < 1) throw Error("config: reps must be >= 1");
  if (cfg.n_grid.empty()) throw Error("config: n_grid must be nonempty");
  for (long n : cfg.n_grid) {
    if (n < 1) throw Error("config: sample sizes must be positive");
  }
  if (!(cfg.mu_exponent >= 0.375 && cfg.mu_exponent < 0.5)) {
    throw Error("config: mu_exponent must lie in [0.375, 0.5)");
  }
  for (double a : cfg.lambda_exponents) {
    if (!(a > 0.5 && a < 1.0)) throw Error("config: alpha exponents must lie in (0.5, 1)");
  }
  if (!(cfg.sigma0_sq > 0.0)) throw Error("config: sigma0_sq must be positive");
  if (cfg.estimators.empty()) throw Error("config: estimator set must be nonempty");
  bool penalized = false;
  for (EstimatorKind e : cfg.estimators) {
    penalized = penalized || e == EstimatorKind::RLAL || e == EstimatorKind::MRLAL;
  }
  if (penalized && cfg.lambda_exponents.empty()) {
    throw Error("config: RLAL/MRLAL requested but alpha grid is empty");
  }
}

namespace {

int rows_per_rep(const McConfig& cfg) {
  int rows = 0;
  for (EstimatorKind e : cfg.estimators) {
    rows += (e == EstimatorKind::RL || e == EstimatorKind::MRL)
                ? 1
                : static_cast<int>(cfg.lambda_exponents.size());
  }
  return rows;
}

void fill_metrics(McRecord& rec, const Vector& beta, const Vector& target,
                  const std::vector<int>& a_set, long n) {
  const double sq = (beta - target).squaredNorm();
  rec.sq_err = sq;
  rec.norm_sq_err = static_cast<double>(n) * sq;
  const std::vector<int> active = active_set_of(beta);
  rec.detect = active == a_set;
  rec.include = std::includes(active.begin(), active.end(), a_set.begin(), a_set.end());
  if (rec.detect && !rec.include) throw Error("detection without inclusion: set logic broken");
}

void run_one(const McConfig& cfg, const Vector& target, const std::vector<int>& a_set, long n,
             int rep, McRecord* out) {
  Rng rng(mix_seed(cfg.base_seed, static_cast<uint64_t>(n), static_cast<uint64_t>(rep)));
  const Dataset data = generate_sample(cfg.design, n, study_beta0(), cfg.sigma0_sq, rng);
  const SymMatrix q = gram(data);
  const Vector b = xty(data);
  const double mu = std::pow(static_cast<double>(n), -cfg.mu_exponent);

  std::optional<Vector> rl;
  std::optional<std::pair<Vector, ModifiedDesign>> mrl;
  std::optional<WeightMatrix> q_bar;
  auto ensure_rl = [&]() -> const Vector& {
    if (!rl) rl = ridgeless_from(q, b);
    return *rl;
  };
  auto ensure_mrl = [&]() -> const std::pair<Vector, ModifiedDesign>& {
    if (!mrl) {
      ModifiedDesign md = modified_design(q, mu);
      Vector beta = md.q_check_pinv.mat() * b;
      mrl.emplace(std::move(beta), std::move(md));
    }
    return *mrl;
  };

  McRecord* rec = out;
  for (EstimatorKind e : cfg.estimators) {
    const bool unpenalized = e == EstimatorKind::RL || e == EstimatorKind::MRL;
    const size_t n_alpha = unpenalized ? 1 : cfg.lambda_exponents.size();
    for (size_t ai = 0; ai < n_alpha; ++ai, ++rec) {
      rec->est = e;
      rec->n = n;
      rec->rep = rep;
      rec->alpha = unpenalized ? kNan : cfg.lambda_exponents[ai];
      try {
        switch (e) {
          case EstimatorKind::RL:
            fill_metrics(*rec, ensure_rl(), target, a_set, n);
            break;
          case EstimatorKind::MRL:
            fill_metrics(*rec, ensure_mrl().first, target, a_set, n);
            break;
          case EstimatorKind::RLAL: {
            const Vector& init = ensure_rl();
            if (!q_bar) q_bar = design_weight(q);
            const double lambda = std::pow(static_cast<double>(n), -rec->alpha);
            const EstimateReport er = proximal_estimate(
                init, *q_bar, Penalty::adaptive_lasso(adaptive_weights(init)), lambda);
            fill_metrics(*rec, er.beta, target, a_set, n);
            break;
          }
          case EstimatorKind::MRLAL: {
            const auto& [init, md] = ensure_mrl();
            const double lambda = std::pow(static_cast<double>(n), -rec->alpha);
            const EstimateReport er = proximal_estimate(
                init, md.w_bar, Penalty::adaptive_lasso(adaptive_weights(init)), lambda);
            fill_metrics(*rec, er.beta, target, a_set, n);
            break;
          }
        }
      } catch (const std::exception&) {
        rec->failed = true;
        rec->sq_err = kNan;
        rec->norm_sq_err = kNan;
        rec->detect = false;
        rec->include = false;
      }
    }
  }
}

}  // namespace

std::vector<McAggregate> summarize(const std::vector<McRecord>& records) {
  if (records.empty()) throw Error("summarize: empty report");
  using Key = std::tuple<long, int, double>;  // (n, estimator, alpha; NaN -> -1)
  std::vector<Key> order;
  std::map<Key, std::vector<const McRecord*>> groups;
  for (const McRecord& r : records) {
    const Key key{r.n, static_cast<int>(r.est), std::isnan(r.alpha) ? -1.0 : r.alpha};
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.push_back(&r);
  }
  std::vector<McAggregate> out;
  out.reserve(order.size());
  for (const Key& key : order) {
    const auto& recs = groups[key];
    McAggregate agg;
    agg.est = static_cast<EstimatorKind>(std::get<1>(key));
    agg.n = std::get<0>(key);
    agg.alpha = std::get<2>(key) < 0.0 ? kNan : std::get<2>(key);
    agg.reps = static_cast<int>(recs.size());
    std::vector<double> sq, nsq;
    int detect = 0, include = 0, ok = 0;
    for (const McRecord* r : recs) {
      if (r->failed) {
        ++agg.failures;
        continue;
      }
      ++ok;
      sq.push_back(r->sq_err);
      nsq.push_back(r->norm_sq_err);
      detect += r->detect ? 1 : 0;
      include += r->include ? 1 : 0;
    }
    if (ok > 0) {
      agg.q1_sq = quantile_hf8(sq, 0.25);
      agg.med_sq = quantile_hf8(sq, 0.5);
      agg.q3_sq = quantile_hf8(sq, 0.75);
      agg.q1_norm = quantile_hf8(nsq, 0.25);
      agg.med_norm = quantile_hf8(nsq, 0.5);
      agg.q3_norm = quantile_hf8(nsq, 0.75);
      agg.detect_prob = static_cast<double>(detect) / ok;
      agg.detect_se = binomial_se(agg.detect_prob, ok);
      agg.include_prob = static_cast<double>(include) / ok;
      agg.include_se = binomial_se(agg.include_prob, ok);
    } else {
      agg.q1_sq = agg.med_sq = agg.q3_sq = kNan;
      agg.q1_norm = agg.med_norm = agg.q3_norm = kNan;
      agg.detect_prob = agg.detect_se = agg.include_prob = agg.include_se = kNan;
    }
    out.push_back(std::move(agg));
  }
  return out;
}

McReport run_experiment(const McConfig& cfg, int workers) {
  validate_config(cfg);
  const Vector target = beta0_plus(cfg.design);
  const std::vector<int> a_set = active_set_of(target);
  const int per_rep = rows_per_rep(cfg);
  const size_t n_jobs = cfg.n_grid.size() * static_cast<size_t>(cfg.reps);

  McReport report;
  report.config = cfg;
  report.beta_target = target;
  report.records.resize(n_jobs * per_rep);
  report.hash = config_hash(cfg);

  const int n_workers = std::max(1, workers);
  log_info("running " + std::to_string(n_jobs) + " replications on " +
           std::to_string(n_workers) + " worker(s)");
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= n_jobs) return;
      const size_t ni = i / cfg.reps;
      const int rep = static_cast<int>(i % cfg.reps);
      run_one(cfg, target, a_set, cfg.n_grid[ni], rep, report.records.data() + i * per_rep);
    }
  };
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  report.aggregates = summarize(report.records);
  return report;
}

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

uint64_t config_hash(const McConfig& cfg) { return fnv1a(mc_config_to_json_text(cfg)); }

McConfig mc_config_from_json_text(const std::string& text) {
  nlohmann::json o;
  try {
    o = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("config JSON parse error: ") + e.what());
  }
  if (!o.is_object()) throw Error("config must be a JSON object");
  static const char* allowed[] = {"design",     "p",          "n_grid",    "reps",
                                  "seed",       "mu_exponent", "alpha_grid", "estimators",
                                  "sigma0_sq"};
  for (auto it = o.begin(); it != o.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok) throw Error("unknown config key '" + it.key() + "'");
  }
  McConfig cfg;
  try {
    if (o.contains("design")) cfg.design.kind = design_kind_from_string(o["design"].get<std::string>());
    if (o.contains("p")) cfg.design.p = o["p"].get<int>();
    if (o.contains("n_grid")) cfg.n_grid = o["n_grid"].get<std::vector<long>>();
    if (o.contains("reps")) cfg.reps = o["reps"].get<int>();
    if (o.contains("seed")) cfg.base_seed = o["seed"].get<uint64_t>();
    if (o.contains("mu_exponent")) cfg.mu_exponent = o["mu_exponent"].get<double>();
    if (o.contains("alpha_grid")) cfg.lambda_exponents = o["alpha_grid"].get<std::vector<double>>();
    if (o.contains("estimators")) {
      cfg.estimators.clear();
      for (const auto& e : o["estimators"]) {
        cfg.estimators.push_back(estimator_from_string(e.get<std::string>()));
      }
    }
    if (o.contains("sigma0_sq")) cfg.sigma0_sq = o["sigma0_sq"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("config JSON type error: ") + e.what());
  }
  validate_config(cfg);
  return cfg;
}

std::string mc_config_to_json_text(const McConfig& cfg) {
  nlohmann::ordered_json o;
  o["design"] = design_kind_name(cfg.design.kind);
  o["p"] = cfg.design.p;
  o["n_grid"] = cfg.n_grid;
  o["reps"] = cfg.reps;
  o["seed"] = cfg.base_seed;
  o["mu_exponent"] = cfg.mu_exponent;
  o["alpha_grid"] = cfg.lambda_exponents;
  nlohmann::ordered_json ests = nlohmann::ordered_json::array();
  for (EstimatorKind e : cfg.estimators) ests.push_back(estimator_name(e));
  o["estimators"] = ests;
  o["sigma0_sq"] = cfg.sigma0_sq;
  return o.dump();
}

}  // namespace proxkit
