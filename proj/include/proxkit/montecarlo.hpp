#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "proxkit/estimators.hpp"
#include "proxkit/rng.hpp"
#include "proxkit/stats.hpp"

namespace proxkit {

inline constexpr const char* kVersion = "0.1.0";

enum class DesignKind { Regular, Singular, NearlySingular };

const char* design_kind_name(DesignKind k);
DesignKind design_kind_from_string(const std::string& s);

struct DesignSpec {
  DesignKind kind = DesignKind::Regular;
  int p = 8;  // the study dimension; the mixture rate is fixed at 1/sqrt(n)
};

// Entries 0.5^|j-k| (positive definite).
SymMatrix build_qr(int p);

// Q_s = M Q_r M' with M the identity whose fifth row is a e2' + b e3'
// (zero at position 5); kernel span{a e2 + b e3 - e5}, rank p-1.
SymMatrix build_qs(const SymMatrix& qr, double a, double b);

// The combination coefficients reproducing the study's projected parameter.
inline const double kQsCoef = 0.5773502691896257645091488;  // 1/sqrt(3)

// Q_r, Q_s, or the mixture (1/sqrt(n)) Q_r + (1 - 1/sqrt(n)) Q_s.
SymMatrix population_design(const DesignSpec& spec, long n);

// The n -> infinity limit: Q_r for Regular, Q_s otherwise.
SymMatrix population_limit(const DesignSpec& spec);

// Study parameter beta0 = (3, 1.5, 0, 0, 2, 0, 0, 0) (p = 8 only).
Vector study_beta0();

// Identified parameter beta0+ = Q0 Q0^+ beta0, computed by projecting out the
// kernel direction so off-support coordinates are bit-exact zeros.
Vector beta0_plus(const DesignSpec& spec);

// Rows X_i = psd_sqrt(Q_0n) g_i, Y = X beta0 + sigma0 eps.
Dataset generate_sample(const DesignSpec& spec, long n, const Vector& beta0, double sigma0_sq,
                        Rng& rng);

enum class EstimatorKind { RL, MRL, RLAL, MRLAL };

const char* estimator_name(EstimatorKind e);
EstimatorKind estimator_from_string(const std::string& s);

struct McConfig {
  DesignSpec design;
  std::vector<long> n_grid = {100, 200};
  int reps = 500;
  uint64_t base_seed = 42;
  double mu_exponent = 0.375;                 // mu_n = n^{-mu_exponent}
  std::vector<double> lambda_exponents = {0.75};  // lambda_n = n^{-alpha}
  std::vector<EstimatorKind> estimators = {EstimatorKind::RL, EstimatorKind::MRL,
                                           EstimatorKind::RLAL, EstimatorKind::MRLAL};
  double sigma0_sq = 2.0;
};

void validate_config(const McConfig& cfg);
uint64_t config_hash(const McConfig& cfg);

struct McRecord {
  EstimatorKind est;
  long n = 0;
  double alpha = 0.0;  // NaN for RL/MRL (no tuning parameter applies)
  int rep = 0;
  double sq_err = 0.0;       // ||beta_hat - beta0+||_2^2
  double norm_sq_err = 0.0;  // n * sq_err
  bool detect = false;       // active set == A exactly
  bool include = false;      // active set contains A
  bool failed = false;
};

struct McAggregate {
  EstimatorKind est;
  long n = 0;
  double alpha = 0.0;  // NaN for RL/MRL
  int reps = 0;
  int failures = 0;
  double q1_sq = 0.0, med_sq = 0.0, q3_sq = 0.0;
  double q1_norm = 0.0, med_norm = 0.0, q3_norm = 0.0;
  double detect_prob = 0.0, detect_se = 0.0;
  double include_prob = 0.0, include_se = 0.0;
};

struct McReport {
  McConfig config;
  Vector beta_target;
  std::vector<McRecord> records;      // deterministic (n, rep, estimator, alpha) order
  std::vector<McAggregate> aggregates;
  uint64_t hash = 0;
};

// Runs reps x n_grid replications on `workers` threads (>= 1); the record
// layout is preallocated so the output is byte-identical for any worker
// count. Per-replication estimator failures are recorded, not fatal.
McReport run_experiment(const McConfig& cfg, int workers = 1);

std::vector<McAggregate> summarize(const std::vector<McRecord>& records);

void write_report_csv(const McReport& report, const std::string& path);
void write_aggregates_json(const McReport& report, const std::string& path);
std::string format_double(double v);  // shortest round-trip (%.17g trimmed)

McConfig mc_config_from_json_text(const std::string& text);  // strict keys
std::string mc_config_to_json_text(const McConfig& cfg);

}  // namespace proxkit
