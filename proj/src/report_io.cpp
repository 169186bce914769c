#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <string>

#include <json.hpp>

#include "proxkit/log.hpp"
#include "proxkit/montecarlo.hpp"

namespace proxkit {

int log_level() {
  static const int level = [] {
    const char* v = std::getenv("PROXKIT_LOG");
    if (v == nullptr || *v == '\0') return 0;
    const std::string s(v);
    if (s == "0" || s == "off") return 0;
    if (s == "2" || s == "debug") return 2;
    return 1;  // "info", "1", or anything else explicit
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[proxkit] " << msg << "\n";
}

void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "[proxkit] " << msg << "\n";
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

namespace {

std::string hash_hex(uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);  // binary: LF endings everywhere
  if (!f) throw Error("cannot open '" + path + "' for writing");
  return f;
}

}  // namespace

void write_report_csv(const McReport& report, const std::string& path) {
  std::ofstream f = open_out(path);
  f << "# version: " << kVersion << "\n";
  f << "# config_hash: " << hash_hex(report.hash) << "\n";
  f << "# seed: " << report.config.base_seed << "\n";
  f << "estimator,n,alpha,rep,sq_err,norm_sq_err,detect,include\n";
  for (const McRecord& r : report.records) {
    f << estimator_name(r.est) << ',' << r.n << ',';
    if (!std::isnan(r.alpha)) f << format_double(r.alpha);
    f << ',' << r.rep << ',';
    if (!r.failed) f << format_double(r.sq_err);
    f << ',';
    if (!r.failed) f << format_double(r.norm_sq_err);
    f << ',' << (r.detect ? 1 : 0) << ',' << (r.include ? 1 : 0) << "\n";
  }
  if (!f.good()) throw Error("write failed for '" + path + "'");
}

void write_aggregates_json(const McReport& report, const std::string& path) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json meta;
  meta["version"] = kVersion;
  meta["config_hash"] = hash_hex(report.hash);
  meta["seed"] = report.config.base_seed;
  meta["config"] = nlohmann::ordered_json::parse(mc_config_to_json_text(report.config));
  nlohmann::ordered_json target = nlohmann::ordered_json::array();
  for (Eigen::Index j = 0; j < report.beta_target.size(); ++j) target.push_back(report.beta_target[j]);
  meta["beta_target"] = target;
  doc["metadata"] = meta;

  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  for (const McAggregate& a : report.aggregates) {
    nlohmann::ordered_json g;
    g["estimator"] = estimator_name(a.est);
    g["n"] = a.n;
    if (std::isnan(a.alpha)) {
      g["alpha"] = nullptr;
    } else {
      g["alpha"] = a.alpha;
    }
    g["reps"] = a.reps;
    g["failures"] = a.failures;
    auto num = [](double v) {
      return std::isnan(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v);
    };
    g["sq_err"] = {{"q1", num(a.q1_sq)}, {"median", num(a.med_sq)}, {"q3", num(a.q3_sq)}};
    g["norm_sq_err"] = {{"q1", num(a.q1_norm)}, {"median", num(a.med_norm)}, {"q3", num(a.q3_norm)}};
    g["detect"] = {{"prob", num(a.detect_prob)}, {"se", num(a.detect_se)}};
    g["include"] = {{"prob", num(a.include_prob)}, {"se", num(a.include_se)}};
    groups.push_back(std::move(g));
  }
  doc["groups"] = std::move(groups);

  std::ofstream f = open_out(path);
  f << doc.dump(2) << "\n";
  if (!f.good()) throw Error("write failed for '" + path + "'");
}

}  // namespace proxkit
