// End-to-end acceptance gate: one line per criterion, exit code = number of
// failed criteria. Statistical checks use fixed seeds; the expected values
// and tolerances are frozen from independent pre-computation.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "proxkit/asymptotics.hpp"
#include "proxkit/montecarlo.hpp"

using namespace proxkit;

namespace {

int g_failures = 0;

void report(int idx, const char* name, bool pass, const std::string& detail) {
  std::printf("criterion %d (%s): %s (%s)\n", idx, name, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

Matrix random_orthogonal(int p, std::mt19937_64& g) {
  std::normal_distribution<double> gauss;
  Matrix a(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) a(i, j) = gauss(g);
  return Eigen::HouseholderQR<Matrix>(a).householderQ();
}

// PD weight with log-uniform spectrum in [0.01, 100] (condition <= 1e4)
WeightMatrix random_pd_weight(int p, std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Matrix q = random_orthogonal(p, g);
  Vector ev(p);
  for (int j = 0; j < p; ++j) ev[j] = std::exp(std::log(0.01) + u(g) * std::log(1e4));
  return WeightMatrix(SymMatrix(q * ev.asDiagonal() * q.transpose()));
}

Penalty make_kind(int which, int p, std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (which % 6) {
    case 0: return Penalty::lasso();
    case 1: return Penalty::adaptive_lasso(Vector::NullaryExpr(
                 p, [&](Eigen::Index) { return 0.2 + 3.0 * u(g); }));
    case 2: {
      std::vector<std::vector<int>> groups{{0}};
      if (p > 1) {
        groups.push_back({});
        for (int j = 1; j < p; ++j) groups.back().push_back(j);
      }
      return Penalty::group_lasso(groups, p);
    }
    case 3: return Penalty::ridge();
    case 4: return Penalty::elastic_net(0.2 + 0.6 * u(g));
    default:
      return Penalty::box(Vector::Constant(p, -0.8), Vector::Constant(p, 1.2));
  }
}

// exact weighted prox of sum_j w_j |beta_j| by sign-pattern enumeration
Vector enumerated_weighted_prox(const Matrix& w, const Vector& x, double lambda,
                                const Vector& pen_w) {
  const int p = static_cast<int>(x.size());
  const Vector wx = w * x;
  std::vector<int> pat(p, 0);
  long total = 1;
  for (int j = 0; j < p; ++j) total *= 3;
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int j = 0; j < p; ++j) {
      pat[j] = static_cast<int>(c % 3) - 1;
      c /= 3;
    }
    std::vector<int> act;
    for (int j = 0; j < p; ++j)
      if (pat[j] != 0) act.push_back(j);
    Vector beta = Vector::Zero(p);
    if (!act.empty()) {
      const int a = static_cast<int>(act.size());
      Matrix waa(a, a);
      Vector rhs(a);
      for (int i = 0; i < a; ++i) {
        rhs[i] = wx[act[i]] - lambda * pat[act[i]] * pen_w[act[i]];
        for (int j = 0; j < a; ++j) waa(i, j) = w(act[i], act[j]);
      }
      const Vector ba = waa.ldlt().solve(rhs);
      for (int i = 0; i < a; ++i) beta[act[i]] = ba[i];
    }
    bool ok = true;
    const Vector grad = w * (beta - x);
    for (int j = 0; j < p && ok; ++j) {
      if (pat[j] != 0) {
        ok = beta[j] * pat[j] > 1e-13;
      } else {
        ok = std::abs(grad[j]) <= lambda * pen_w[j] * (1.0 + 1e-9) + 1e-12;
      }
    }
    if (ok) return beta;
  }
  return Vector::Constant(p, std::numeric_limits<double>::quiet_NaN());
}

void criterion_moreau() {
  std::mt19937_64 g(101);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double max_identity = 0.0, max_violation = 0.0, max_gap = 0.0;
  for (int it = 0; it < 1000; ++it) {
    const int p = 2 + static_cast<int>(g() % 5);
    const Penalty f = make_kind(it, p, g);
    const double lambda = std::exp(std::log(1e-3) + u(g) * std::log(10.0 / 1e-3));
    const WeightMatrix w = random_pd_weight(p, g);
    Vector x(p);
    for (int j = 0; j < p; ++j) x[j] = 2.5 * gauss(g);

    const ProxResult r = prox(f, lambda, w, x);
    const Vector conj = conjugate_prox(f, lambda, w, x);
    max_identity = std::max(max_identity, (conj - (x - r.point)).lpNorm<Eigen::Infinity>());

    if (f.sublinear()) {
      const PolyhedronSpec spec = conjugate_polyhedron(f, lambda, w);
      max_violation = std::max(max_violation, polyhedron_violation(spec, conj));
      const Vector weights =
          f.kind == Penalty::Kind::Lasso ? Vector::Ones(p).eval() : f.weights;
      const Vector oracle = x - enumerated_weighted_prox(w.mat(), x, lambda, weights);
      max_gap = std::max(max_gap, (conj - oracle).lpNorm<Eigen::Infinity>());
    }
  }
  const bool pass = max_identity == 0.0 && max_violation <= 1e-9 && max_gap < 1e-7;
  report(1, "moreau-identity", pass,
         fmt("identity sup %.1e, constraint violation %.2e <= 1e-9, oracle gap %.2e < 1e-7",
             max_identity, max_violation, max_gap));
}

void criterion_plse_equivalence() {
  double max_gap = 0.0;
  for (int it = 0; it < 200; ++it) {
    Rng rng(mix_seed(7, 50, static_cast<uint64_t>(it)));
    const Dataset d =
        generate_sample(DesignSpec{DesignKind::Regular, 8}, 50, study_beta0(), 2.0, rng);
    const SymMatrix q = gram(d);
    const Vector rl = ridgeless(d);
    const double lambda = 0.01 * std::pow(50.0, 0.25 * (it % 5));
    const Penalty f = (it % 2 == 0)
                          ? Penalty::lasso()
                          : Penalty::adaptive_lasso(adaptive_weights(rl));
    const Vector direct = plse_solve(d.x, d.y, f, lambda).point;
    const Vector via_prox = prox(f, lambda, WeightMatrix(q), rl).point;
    max_gap = std::max(max_gap, (direct - via_prox).lpNorm<Eigen::Infinity>());
  }
  report(2, "plse-equivalence", max_gap < 1e-6, fmt("max gap %.2e < 1e-6", max_gap));
}

void criterion_beta0_plus() {
  const SymMatrix qs = build_qs(build_qr(8), kQsCoef, kQsCoef);
  const Vector proj = range_projector(qs).mat() * study_beta0();
  Vector ref(8);
  ref << 3.0, 1.893, 0.393, 0.0, 1.32, 0.0, 0.0, 0.0;
  const double dev = (proj - ref).lpNorm<Eigen::Infinity>();
  const double consistency =
      (proj - beta0_plus(DesignSpec{DesignKind::Singular, 8})).lpNorm<Eigen::Infinity>();
  report(3, "beta0-plus", dev <= 5e-4 && consistency < 1e-9,
         fmt("max deviation %.2e <= 5e-4 (closed-form route agrees within %.1e)", dev,
             consistency));
}

void criterion_penrose() {
  std::mt19937_64 g(104);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int it = 0; it < 1000; ++it) {
    const int p = 1 + static_cast<int>(g() % 12);
    const int r = static_cast<int>(g() % (p + 1));
    const Matrix q = random_orthogonal(p, g);
    Vector ev = Vector::Zero(p);
    for (int j = 0; j < r; ++j) ev[j] = std::exp(std::log(0.1) + u(g) * std::log(100.0));
    const SymMatrix a(q * ev.asDiagonal() * q.transpose());
    const Matrix b = pinv(a).mat();
    const Matrix am = a.mat();
    const double na = std::max(1.0, am.cwiseAbs().maxCoeff());
    const double nb = std::max(1.0, b.cwiseAbs().maxCoeff());
    const Matrix ab = am * b;
    const Matrix ba = b * am;
    worst = std::max({worst, (ab * am - am).cwiseAbs().maxCoeff() / na,
                      (ba * b - b).cwiseAbs().maxCoeff() / nb,
                      (ab.transpose() - ab).cwiseAbs().maxCoeff(),
                      (ba.transpose() - ba).cwiseAbs().maxCoeff()});
  }
  report(4, "penrose", worst <= 1e-9, fmt("worst condition residual %.2e <= 1e-9", worst));
}

const McAggregate& find_agg(const McReport& rep, EstimatorKind e, long n) {
  for (const McAggregate& a : rep.aggregates) {
    if (a.est == e && a.n == n) return a;
  }
  throw Error("aggregate lookup failed");
}

int hw_workers() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// 95% bootstrap CI for the ratio of medians between two samples
std::pair<double, double> median_ratio_ci(const std::vector<double>& num,
                                          const std::vector<double>& den, uint64_t seed) {
  std::mt19937_64 g(seed);
  auto boot_median = [&](const std::vector<double>& v) {
    std::vector<double> draw(v.size());
    for (double& d : draw) d = v[g() % v.size()];
    std::sort(draw.begin(), draw.end());
    return quantile_hf8(draw, 0.5);
  };
  std::vector<double> ratios(1000);
  for (double& r : ratios) r = boot_median(num) / boot_median(den);
  std::sort(ratios.begin(), ratios.end());
  return {quantile_hf8(ratios, 0.025), quantile_hf8(ratios, 0.975)};
}

void criterion_error_quartiles() {
  McConfig cfg;
  cfg.design = DesignSpec{DesignKind::NearlySingular, 8};
  cfg.n_grid = {100, 400, 1000};
  cfg.reps = 500;
  cfg.estimators = {EstimatorKind::RL, EstimatorKind::MRL};
  const McReport rep = run_experiment(cfg, hw_workers());
  auto norms = [&](EstimatorKind e, long n) {
    std::vector<double> out;
    for (const McRecord& r : rep.records)
      if (r.est == e && r.n == n && !r.failed) out.push_back(r.norm_sq_err);
    return out;
  };
  const double ratio_rl = find_agg(rep, EstimatorKind::RL, 1000).med_norm /
                          find_agg(rep, EstimatorKind::RL, 100).med_norm;
  const double ratio_mrl = find_agg(rep, EstimatorKind::MRL, 1000).med_norm /
                           find_agg(rep, EstimatorKind::MRL, 400).med_norm;
  const auto ci_rl = median_ratio_ci(norms(EstimatorKind::RL, 1000),
                                     norms(EstimatorKind::RL, 100), 505);
  const auto ci_mrl = median_ratio_ci(norms(EstimatorKind::MRL, 1000),
                                      norms(EstimatorKind::MRL, 400), 506);
  const bool pass = ratio_rl >= 2.0 && ratio_mrl <= 1.5 && ratio_mrl >= 1.0 / 1.5;
  report(5, "error-quartiles", pass,
         fmt("median n*err ridgeless 1000/100 = %.2f [%.2f, %.2f] (>= 2), modified 1000/400 = "
             "%.2f [%.2f, %.2f] (within 1.5)",
             ratio_rl, ci_rl.first, ci_rl.second, ratio_mrl, ci_mrl.first, ci_mrl.second));
}

void criterion_detection() {
  std::string detail;
  bool pass = true;
  for (DesignKind kind :
       {DesignKind::Regular, DesignKind::Singular, DesignKind::NearlySingular}) {
    McConfig cfg;
    cfg.design = DesignSpec{kind, 8};
    cfg.n_grid = {100, 200};
    cfg.reps = 500;
    cfg.estimators = {EstimatorKind::RLAL, EstimatorKind::MRLAL};
    cfg.lambda_exponents = {0.75};
    const McReport rep = run_experiment(cfg, hw_workers());
    const McAggregate& m100 = find_agg(rep, EstimatorKind::MRLAL, 100);
    const McAggregate& m200 = find_agg(rep, EstimatorKind::MRLAL, 200);
    const double z = (m200.detect_prob - m100.detect_prob) /
                     std::sqrt(m100.detect_se * m100.detect_se + m200.detect_se * m200.detect_se);
    pass = pass && z > 2.0;
    detail += fmt("%s z=%.2f ", design_kind_name(kind), z);
    if (kind == DesignKind::NearlySingular) {
      const McAggregate& r200 = find_agg(rep, EstimatorKind::RLAL, 200);
      const double zr =
          (m200.detect_prob - r200.detect_prob) /
          std::sqrt(m200.detect_se * m200.detect_se + r200.detect_se * r200.detect_se);
      pass = pass && zr > 2.0;
      detail += fmt("modified-vs-plain z=%.2f ", zr);
    }
  }
  report(6, "detection-monotonicity", pass, detail + "(all > 2)");
}

void criterion_limit_covariance() {
  const int reps = 2000;
  const long n = 2000;
  const Vector beta0 = study_beta0();
  const std::vector<int> a = {0, 1, 4};
  const double mu = std::pow(static_cast<double>(n), -0.375);
  const double lambda = std::pow(static_cast<double>(n), -0.75);
  Matrix rows(reps, 3);
  int clean_zero = 0;
  const DesignSpec spec{DesignKind::Regular, 8};
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(mix_seed(42, static_cast<uint64_t>(n), static_cast<uint64_t>(rep)));
    const Dataset d = generate_sample(spec, n, beta0, 2.0, rng);
    const SymMatrix q = gram(d);
    const Vector b = xty(d);
    const ModifiedDesign md = modified_design(q, mu);
    const Vector init = md.q_check_pinv.mat() * b;
    const EstimateReport er = proximal_estimate(
        init, md.w_bar, Penalty::adaptive_lasso(adaptive_weights(init)), lambda);
    const Vector diff = std::sqrt(static_cast<double>(n)) * (er.beta - beta0);
    for (int i = 0; i < 3; ++i) rows(rep, i) = diff[a[i]];
    bool zero = true;
    for (int j = 0; j < 8; ++j) {
      if (j != 0 && j != 1 && j != 4 && er.beta[j] != 0.0) zero = false;
    }
    clean_zero += zero ? 1 : 0;
  }
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  const Matrix centered = rows.rowwise() - mean;
  const Matrix cov = centered.transpose() * centered / static_cast<double>(reps - 1);

  const SymMatrix qr = build_qr(8);
  Matrix q_aa(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) q_aa(i, j) = qr.mat()(a[i], a[j]);
  const Matrix target = 2.0 * q_aa.inverse();
  const double rel = (cov - target).cwiseAbs().maxCoeff() / target.cwiseAbs().maxCoeff();
  const double zero_frac = static_cast<double>(clean_zero) / reps;
  const bool cov_ok = rel <= 0.15;
  const bool zero_ok = zero_frac >= 0.95;
  report(7, "limit-covariance", cov_ok && zero_ok,
         fmt("covariance rel err %.3f (<= 0.15: %s), exact off-support zeros %.3f (>= 0.95: %s)",
             rel, cov_ok ? "yes" : "no", zero_frac, zero_ok ? "yes" : "no"));
}

void criterion_rank_recovery() {
  const DesignSpec spec{DesignKind::NearlySingular, 8};
  double probs[2] = {0.0, 0.0};
  const long ns[2] = {100, 1000};
  for (int k = 0; k < 2; ++k) {
    const double mu = std::pow(static_cast<double>(ns[k]), -0.375);
    int hits = 0;
    for (int rep = 0; rep < 500; ++rep) {
      Rng rng(mix_seed(42, static_cast<uint64_t>(ns[k]), static_cast<uint64_t>(rep)));
      const Dataset d = generate_sample(spec, ns[k], study_beta0(), 2.0, rng);
      hits += modified_design(gram(d), mu).rank() == 7 ? 1 : 0;
    }
    probs[k] = hits / 500.0;
  }
  const bool pass = probs[1] >= probs[0] && probs[1] >= 0.9;
  report(8, "rank-recovery", pass,
         fmt("P(rank=7) at n=100: %.3f, at n=1000: %.3f (monotone and >= 0.9)", probs[0],
             probs[1]));
}

void criterion_determinism(const std::string& cli) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "proxkit_acceptance";
  fs::create_directories(dir);
  const fs::path cfg_path = dir / "config.json";
  {
    std::ofstream out(cfg_path, std::ios::binary | std::ios::trunc);
    out << R"({"design": "nearly-singular", "n_grid": [60, 120], "reps": 5, "seed": 11})";
  }
  auto run_sim = [&](const std::string& out_dir, int workers) {
    const std::string cmd = "'" + cli + "' simulate --config " + cfg_path.string() +
                            " --workers " + std::to_string(workers) + " --out " + out_dir +
                            " > /dev/null 2>&1";
    return std::system(cmd.c_str());
  };
  const std::string d1 = (dir / "w1").string();
  const std::string d4 = (dir / "w4").string();
  const int rc1 = run_sim(d1, 1);
  const int rc4 = run_sim(d4, 4);
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  const std::string a = slurp(d1 + "/report.csv");
  const std::string b = slurp(d4 + "/report.csv");
  const bool pass = rc1 == 0 && rc4 == 0 && !a.empty() && a == b;
  report(9, "determinism", pass,
         fmt("reports %zu bytes, 1 vs 4 workers %s", a.size(),
             a == b ? "byte-identical" : "DIFFER"));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <proxkit binary>\n");
    return 64;
  }
  const auto t0 = std::chrono::steady_clock::now();
  criterion_moreau();
  criterion_plse_equivalence();
  criterion_beta0_plus();
  criterion_penrose();
  criterion_error_quartiles();
  criterion_detection();
  criterion_limit_covariance();
  criterion_rank_recovery();
  criterion_determinism(argv[1]);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%d of 9 criteria passed in %.1f s\n", 9 - g_failures, secs);
  return g_failures;
}
