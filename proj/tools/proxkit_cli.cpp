#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "proxkit/asymptotics.hpp"
#include "proxkit/log.hpp"
#include "proxkit/montecarlo.hpp"

using namespace proxkit;

namespace {

// Exit codes: 0 ok, 1 failed check, 2 malformed input, 3 solver did not
// converge (or no unique minimizer).
constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kBadInput = 2;
constexpr int kNoConvergence = 3;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::ordered_json json_vector(const Vector& v) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (Eigen::Index j = 0; j < v.size(); ++j) a.push_back(v[j]);
  return a;
}

nlohmann::ordered_json json_one_based(const std::vector<int>& idx) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (int j : idx) a.push_back(j + 1);
  return a;
}

struct EstimateArgs {
  std::string data_path;
  std::string penalty_path;
  std::string out_path = "estimate.json";
  std::string mode = "proximal";
  double lambda = 0.0;
  std::string mu = "auto";  // "auto", "none", or a number
  double mu_exponent = 0.375;
};

int run_estimate(const EstimateArgs& a) {
  // input phase: anything wrong here is exit 2
  std::optional<Dataset> data;
  std::optional<Penalty> penalty;
  std::string penalty_text;
  double mu_value = -1.0;  // < 0: not used
  try {
    data.emplace(Dataset::from_csv(a.data_path));
    const bool needs_penalty = a.mode == "plse" || a.mode == "proximal";
    if (needs_penalty) {
      if (a.penalty_path.empty()) throw Error("mode '" + a.mode + "' requires --penalty");
      penalty_text = read_file(a.penalty_path);
      penalty = penalty_from_json_text(penalty_text);
    } else if (!a.penalty_path.empty()) {
      throw Error("mode '" + a.mode + "' does not use --penalty");
    }
    if (a.mode == "modified-ridgeless" || a.mode == "proximal") {
      if (a.mu == "auto") {
        mu_value = std::pow(static_cast<double>(data->n()), -a.mu_exponent);
      } else if (a.mu == "none") {
        if (a.mode == "modified-ridgeless") throw Error("--mu none is not a modified-ridgeless option");
      } else {
        char* end = nullptr;
        mu_value = std::strtod(a.mu.c_str(), &end);
        if (end == nullptr || *end != '\0' || !(mu_value >= 0.0)) {
          throw Error("--mu expects 'auto', 'none', or a nonnegative number");
        }
      }
    }
    if (!(a.lambda >= 0.0)) throw Error("--lambda must be nonnegative");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  }

  // solve phase: exit 3 on non-convergence / no unique minimizer
  nlohmann::ordered_json out;
  try {
    nlohmann::ordered_json v_opt_json;
    nlohmann::ordered_json initial_json;
    const SymMatrix q = gram(*data);
    const Vector b = xty(*data);
    nlohmann::ordered_json meta;
    meta["version"] = kVersion;
    meta["mode"] = a.mode;
    meta["n"] = data->n();
    meta["p"] = data->p();
    meta["seed"] = nullptr;  // estimation is deterministic; no randomness involved
    nlohmann::ordered_json diag;

    Vector beta;
    if (a.mode == "ridgeless") {
      beta = ridgeless_from(q, b);
    } else if (a.mode == "modified-ridgeless") {
      meta["mu"] = mu_value;
      if (a.mu == "auto") meta["mu_exponent"] = a.mu_exponent;
      const ModifiedDesign md = modified_design(q, mu_value);
      beta = md.q_check_pinv.mat() * b;
      diag["rank"] = md.rank();
    } else if (a.mode == "plse") {
      meta["lambda"] = a.lambda;
      Penalty f = *penalty;
      if (f.kind == Penalty::Kind::AdaptiveLasso && f.weights.size() == 0) {
        f = Penalty::adaptive_lasso(adaptive_weights(ridgeless_from(q, b)));
      }
      const ProxResult r = plse_solve(data->x, data->y, f, a.lambda);
      beta = r.point;
      diag["iterations"] = r.iterations;
      diag["kkt_residual"] = r.kkt_residual;
      diag["path"] = r.path == ProxPath::ClosedForm ? "closed-form" : "iterative";
      v_opt_json = json_vector(b - q.mat() * beta);
    } else if (a.mode == "proximal") {
      meta["lambda"] = a.lambda;
      Vector initial;
      std::optional<WeightMatrix> w;
      if (a.mu == "none") {
        initial = ridgeless_from(q, b);
        w.emplace(design_weight(q));
      } else {
        meta["mu"] = mu_value;
        if (a.mu == "auto") meta["mu_exponent"] = a.mu_exponent;
        ModifiedDesign md = modified_design(q, mu_value);
        initial = md.q_check_pinv.mat() * b;
        diag["rank"] = md.rank();
        w.emplace(std::move(md.w_bar));
      }
      Penalty f = *penalty;
      if (f.kind == Penalty::Kind::AdaptiveLasso && f.weights.size() == 0) {
        f = Penalty::adaptive_lasso(adaptive_weights(initial));
      }
      const EstimateReport er = proximal_estimate(initial, *w, f, a.lambda);
      beta = er.beta;
      diag["iterations"] = er.solver.iterations;
      diag["kkt_residual"] = er.solver.kkt_residual;
      diag["path"] = er.solver.path == ProxPath::ClosedForm ? "closed-form" : "iterative";
      v_opt_json = json_vector(er.v_opt);
      initial_json = json_vector(er.initial_beta);
    } else {
      std::cerr << "error: unknown mode '" << a.mode << "'\n";
      return kBadInput;
    }

    const std::string invocation = a.mode + "|" + penalty_text + "|" + format_double(a.lambda) +
                                   "|" + a.mu + "|" + format_double(a.mu_exponent);
    meta["config_hash"] = hash_hex(fnv1a(invocation));
    out["metadata"] = std::move(meta);
    out["beta"] = json_vector(beta);
    out["active_set"] = json_one_based(active_set_of(beta));
    out["v_opt"] = std::move(v_opt_json);
    out["initial"] = std::move(initial_json);
    out["diagnostics"] = std::move(diag);
  } catch (const NonConvergence& e) {
    std::cerr << "error: solver did not converge: " << e.what() << " (iterations=" << e.iterations
              << ", kkt_residual=" << e.kkt_residual << ")\n";
    return kNoConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNoConvergence;
  }

  try {
    std::ofstream f(a.out_path, std::ios::binary);
    if (!f) throw Error("cannot open '" + a.out_path + "' for writing");
    f << out.dump(2) << "\n";
    if (!f.good()) throw Error("write failed for '" + a.out_path + "'");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  }
  return kOk;
}

struct SimulateArgs {
  std::string config_path;
  std::string preset;
  std::string out_dir = ".";
  int workers = 0;  // 0: logical CPU count
  std::optional<int> reps;
  std::optional<uint64_t> seed;
  std::vector<double> alpha_grid;
  std::optional<double> mu_exponent;
};

McConfig preset_config(const std::string& name) {
  McConfig cfg;
  if (name == "paper-regular") {
    cfg.design.kind = DesignKind::Regular;
  } else if (name == "paper-singular") {
    cfg.design.kind = DesignKind::Singular;
  } else if (name == "paper-nearly-singular") {
    cfg.design.kind = DesignKind::NearlySingular;
  } else {
    throw Error("unknown preset '" + name + "'");
  }
  cfg.n_grid = {100, 200, 400};
  cfg.reps = 500;
  cfg.lambda_exponents = {0.55, 0.75};
  return cfg;
}

int run_simulate(const SimulateArgs& a) {
  McConfig cfg;
  try {
    if (a.config_path.empty() == a.preset.empty()) {
      throw Error("give exactly one of --config or --preset");
    }
    cfg = a.preset.empty() ? mc_config_from_json_text(read_file(a.config_path))
                           : preset_config(a.preset);
    if (a.reps) cfg.reps = *a.reps;
    if (a.seed) cfg.base_seed = *a.seed;
    if (!a.alpha_grid.empty()) cfg.lambda_exponents = a.alpha_grid;
    if (a.mu_exponent) cfg.mu_exponent = *a.mu_exponent;
    validate_config(cfg);
    std::filesystem::create_directories(a.out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  }

  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int workers = a.workers > 0 ? a.workers : std::max(1, hw);
  const McReport report = run_experiment(cfg, workers);

  try {
    write_report_csv(report, a.out_dir + "/report.csv");
    write_aggregates_json(report, a.out_dir + "/aggregates.json");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  }

  std::printf("%-6s %6s %6s %14s %18s %18s %5s\n", "est", "n", "alpha", "med n*sq_err",
              "P(detect)", "P(include)", "fail");
  for (const McAggregate& g : report.aggregates) {
    char alpha[16];
    if (std::isnan(g.alpha)) {
      std::snprintf(alpha, sizeof alpha, "%s", "-");
    } else {
      std::snprintf(alpha, sizeof alpha, "%.2f", g.alpha);
    }
    std::printf("%-6s %6ld %6s %14.4f %10.3f +-%5.3f %10.3f +-%5.3f %5d\n",
                estimator_name(g.est), g.n, alpha, g.med_norm, g.detect_prob, g.detect_se,
                g.include_prob, g.include_se, g.failures);
  }
  std::printf("config_hash %s  seed %llu  records %zu\n", hash_hex(report.hash).c_str(),
              static_cast<unsigned long long>(cfg.base_seed), report.records.size());
  return kOk;
}

// --- invariant suite -------------------------------------------------------

WeightMatrix random_pd_weight(int p, std::mt19937_64& g) {
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> logu(std::log(0.01), std::log(100.0));
  Matrix a(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) a(i, j) = gauss(g);
  }
  const Matrix qmat = Eigen::HouseholderQR<Matrix>(a).householderQ();
  Vector d(p);
  for (int j = 0; j < p; ++j) d[j] = std::exp(logu(g));  // condition number <= 1e4
  return WeightMatrix(SymMatrix(qmat * d.asDiagonal() * qmat.transpose()));
}

bool check_moreau(std::string& detail) {
  std::mt19937_64 g(20260814);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst_violation = 0.0;
  for (int it = 0; it < 200; ++it) {
    const int p = 2 + static_cast<int>(g() % 5);  // p in 2..6
    const double lambda = std::exp(std::log(1e-3) + unif(g) * std::log(10.0 / 1e-3));
    const WeightMatrix w = random_pd_weight(p, g);
    Vector x(p);
    for (int j = 0; j < p; ++j) x[j] = 3.0 * gauss(g);
    Penalty f;
    switch (it % 6) {
      case 0: f = Penalty::lasso(); break;
      case 1: f = Penalty::ridge(); break;
      case 2: {
        Vector wts(p);
        for (int j = 0; j < p; ++j) wts[j] = 0.1 + 2.0 * unif(g);
        f = Penalty::adaptive_lasso(wts);
        break;
      }
      case 3: {
        std::vector<std::vector<int>> groups{{0}, {}};
        for (int j = 1; j < p; ++j) groups[1].push_back(j);
        f = Penalty::group_lasso(groups, p);
        break;
      }
      case 4: f = Penalty::elastic_net(0.3 + 0.4 * unif(g)); break;
      default: {
        Vector lo = Vector::Constant(p, -1.0), hi = Vector::Constant(p, 1.5);
        f = Penalty::box(lo, hi);
        break;
      }
    }
    const ProxResult r = prox(f, lambda, w, x);
    const Vector conj = conjugate_prox(f, lambda, w, x);
    // the dual point is the primal residual, exactly (not within a tolerance)
    const double dev = (conj - (x - r.point)).lpNorm<Eigen::Infinity>();
    if (dev != 0.0) {
      detail = "decomposition identity violated (" + format_double(dev) + ")";
      return false;
    }
    if (f.sublinear()) {
      const double viol = polyhedron_violation(conjugate_polyhedron(f, lambda, w), conj);
      worst_violation = std::max(worst_violation, viol);
      if (viol > 1e-9) {
        detail = "dual point outside the constraint set (" + format_double(viol) + ")";
        return false;
      }
    }
  }
  detail = "200 instances, worst constraint violation " + format_double(worst_violation);
  return true;
}

// Random PSD with spectrum in [0.1, 10] on a random rank-r eigenbasis.
SymMatrix random_psd(int p, int r, std::mt19937_64& g) {
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> logu(std::log(0.1), std::log(10.0));
  Matrix a(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) a(i, j) = gauss(g);
  }
  const Matrix qmat = Eigen::HouseholderQR<Matrix>(a).householderQ();
  Vector d = Vector::Zero(p);
  for (int j = 0; j < r; ++j) d[j] = std::exp(logu(g));
  return SymMatrix(qmat * d.asDiagonal() * qmat.transpose());
}

double penrose_deviation(const SymMatrix& m, const SymMatrix& mp) {
  const Matrix& a = m.mat();
  const Matrix& ap = mp.mat();
  const double sa = std::max(1.0, a.lpNorm<Eigen::Infinity>());
  const double sp = std::max(1.0, ap.lpNorm<Eigen::Infinity>());
  double dev = (a * ap * a - a).lpNorm<Eigen::Infinity>() / sa;
  dev = std::max(dev, (ap * a * ap - ap).lpNorm<Eigen::Infinity>() / sp);
  dev = std::max(dev, ((a * ap).transpose() - a * ap).lpNorm<Eigen::Infinity>());
  return std::max(dev, ((ap * a).transpose() - ap * a).lpNorm<Eigen::Infinity>());
}

bool check_penrose(std::string& detail) {
  std::mt19937_64 g(91);
  double worst = 0.0;
  for (int it = 0; it < 200; ++it) {
    const int p = 1 + static_cast<int>(g() % 12);
    const int r = static_cast<int>(g() % (p + 1));
    const SymMatrix m = random_psd(p, r, g);
    worst = std::max(worst, penrose_deviation(m, pinv(m)));
  }
  detail = "200 matrices, worst deviation " + format_double(worst);
  return worst <= 1e-9;
}

bool check_plse_equivalence(std::string& detail) {
  Rng rng(mix_seed(7, 50, 0));
  double worst = 0.0;
  for (int it = 0; it < 20; ++it) {
    const Dataset d = generate_sample({DesignKind::Regular, 8}, 50, study_beta0(), 2.0, rng);
    const SymMatrix q = gram(d);
    const WeightMatrix wq(q);
    const Vector rl = ridgeless_from(q, xty(d));
    const double lambda = 0.01 * std::pow(50.0, 0.25 * (it % 5));
    const Penalty f = it % 2 == 0 ? Penalty::lasso()
                                  : Penalty::adaptive_lasso(adaptive_weights(rl));
    const Vector via_prox = prox(f, lambda, wq, rl).point;
    const Vector via_plse = plse_solve(d.x, d.y, f, lambda).point;
    worst = std::max(worst, (via_prox - via_plse).lpNorm<Eigen::Infinity>());
  }
  detail = "20 instances, worst gap " + format_double(worst);
  return worst < 1e-6;
}

bool check_beta0_plus(bool inject_fault, std::string& detail) {
  Vector computed = beta0_plus({DesignKind::Singular, 8});
  if (inject_fault) computed[1] += 1e-3;
  Vector reference(8);
  reference << 3.0, 1.893, 0.393, 0.0, 1.32, 0.0, 0.0, 0.0;
  const double dev = (computed - reference).lpNorm<Eigen::Infinity>();
  std::ostringstream ss;
  ss << "computed (";
  for (int j = 0; j < 8; ++j) ss << (j ? ", " : "") << format_double(computed[j]);
  ss << ") vs reference (3, 1.893, 0.393, 0, 1.32, 0, 0, 0), max abs deviation "
     << format_double(dev);
  detail = ss.str();
  return dev <= 5e-4;
}

int run_check(bool inject_fault) {
  int failures = 0;
  auto report = [&](const char* name, bool ok, const std::string& detail) {
    std::printf("%s: %s (%s)\n", name, ok ? "PASS" : "FAIL", detail.c_str());
    failures += ok ? 0 : 1;
  };
  std::string detail;
  report("moreau-identity", check_moreau(detail), detail);
  report("penrose", check_penrose(detail), detail);
  report("plse-equivalence", check_plse_equivalence(detail), detail);
  report("beta0plus", check_beta0_plus(inject_fault, detail), detail);
  return failures == 0 ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"proxkit: proximal estimation for penalized linear regression"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("proxkit ") + kVersion);

  EstimateArgs ea;
  CLI::App* est = app.add_subcommand("estimate", "fit one dataset from CSV");
  est->add_option("--data", ea.data_path, "input CSV (header y,x1..xp)")->required();
  est->add_option("--penalty", ea.penalty_path, "penalty JSON file");
  est->add_option("--out", ea.out_path, "output JSON path")->capture_default_str();
  est->add_option("--mode", ea.mode, "ridgeless|modified-ridgeless|plse|proximal")
      ->check(CLI::IsMember({"ridgeless", "modified-ridgeless", "plse", "proximal"}))
      ->capture_default_str();
  est->add_option("--lambda", ea.lambda, "penalty level")->capture_default_str();
  est->add_option("--mu", ea.mu, "spectral threshold: auto (n^{-mu_exponent}), none, or a number")
      ->capture_default_str();
  est->add_option("--mu-exponent", ea.mu_exponent, "exponent for --mu auto")
      ->capture_default_str();

  SimulateArgs sa;
  CLI::App* sim = app.add_subcommand("simulate", "run the simulation study");
  sim->add_option("--config", sa.config_path, "experiment config JSON");
  sim->add_option("--preset", sa.preset, "paper-regular|paper-singular|paper-nearly-singular");
  sim->add_option("--out", sa.out_dir, "output directory")->capture_default_str();
  sim->add_option("--workers", sa.workers, "worker threads (default: logical CPUs)");
  sim->add_option("--reps", sa.reps, "replications per sample size");
  sim->add_option("--seed", sa.seed, "base seed");
  sim->add_option("--alpha-grid", sa.alpha_grid, "penalty exponents, comma separated")
      ->delimiter(',');
  sim->add_option("--mu-exponent", sa.mu_exponent, "spectral threshold exponent");

  bool inject_fault = false;
  CLI::App* chk = app.add_subcommand("check", "run the built-in invariant suite");
  chk->add_flag("--inject-fault", inject_fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kBadInput;
  }

  if (*est) return run_estimate(ea);
  if (*sim) return run_simulate(sa);
  if (*chk) return run_check(inject_fault);
  return kBadInput;
}
