#include "proxkit/estimators.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace proxkit {

Dataset::Dataset(Matrix x_mat, Vector y_vec) : x(std::move(x_mat)), y(std::move(y_vec)) {
  if (x.rows() < 1 || x.cols() < 1) throw Error("Dataset: empty design matrix");
  if (y.size() != x.rows()) throw Error("Dataset: y length does not match row count");
  if (!x.allFinite() || !y.allFinite()) throw Error("Dataset: non-finite entries");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_num(const std::string& tok, int lineno) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(v)) {
    throw Error("line " + std::to_string(lineno) + ": invalid number '" + tok + "'");
  }
  return v;
}

}  // namespace

Dataset Dataset::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error("line 1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line);
  if (header.empty() || header[0] != "y") {
    throw Error("line 1: header must start with column 'y'");
  }
  const int p = static_cast<int>(header.size()) - 1;
  if (p < 1) throw Error("line 1: expected predictor columns x1..xp after 'y'");
  for (int j = 1; j <= p; ++j) {
    if (header[j] != "x" + std::to_string(j)) {
      throw Error("line 1: expected column 'x" + std::to_string(j) + "', got '" + header[j] + "'");
    }
  }
  std::vector<double> ybuf;
  std::vector<double> xbuf;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (static_cast<int>(f.size()) != p + 1) {
      throw Error("line " + std::to_string(lineno) + ": expected " + std::to_string(p + 1) +
                  " fields, got " + std::to_string(f.size()));
    }
    ybuf.push_back(parse_num(f[0], lineno));
    for (int j = 1; j <= p; ++j) xbuf.push_back(parse_num(f[j], lineno));
  }
  const int n = static_cast<int>(ybuf.size());
  if (n < 1) throw Error("no data rows");
  Matrix x(n, p);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    y[i] = ybuf[i];
    for (int j = 0; j < p; ++j) x(i, j) = xbuf[static_cast<size_t>(i) * p + j];
  }
  return Dataset(std::move(x), std::move(y));
}

SymMatrix gram(const Dataset& d) {
  return SymMatrix(d.x.transpose() * d.x / static_cast<double>(d.n()));
}

Vector xty(const Dataset& d) { return d.x.transpose() * d.y / static_cast<double>(d.n()); }

Vector ridgeless_from(const SymMatrix& q_n, const Vector& xty_vec, double rank_tol) {
  return pinv(q_n, rank_tol).mat() * xty_vec;
}

Vector ridgeless(const Dataset& d, double rank_tol) {
  return ridgeless_from(gram(d), xty(d), rank_tol);
}

Vector ridge_initial(const Dataset& d, double lambda2) {
  if (!(lambda2 > 0.0)) throw Error("ridge_initial: lambda2 must be positive");
  const SymMatrix q = gram(d);
  const Matrix a = lambda2 * Matrix::Identity(d.p(), d.p()) + q.mat();
  return a.llt().solve(xty(d));
}

Vector spectrum_prox(const Vector& sigma, double mu) {
  if (!(mu > 0.0)) throw Error("spectrum_prox: mu must be positive");
  for (int j = 0; j + 1 < sigma.size(); ++j) {
    if (sigma[j] < sigma[j + 1]) throw Error("spectrum_prox: spectrum must be descending");
  }
  if (sigma.size() > 0 && sigma[sigma.size() - 1] < 0.0) {
    throw Error("spectrum_prox: spectrum must be nonnegative");
  }
  Vector out(sigma.size());
  for (int j = 0; j < sigma.size(); ++j) out[j] = std::max(sigma[j] - mu, 0.0);
  return out;
}

int ModifiedDesign::rank() const {
  int r = 0;
  for (bool k : kept) r += k ? 1 : 0;
  return r;
}

ModifiedDesign modified_design(const SymMatrix& q_n, double mu, double rank_tol) {
  (void)rank_tol;  // the spectral threshold mu decides the kept set here
  const int p = q_n.dim();
  const SpectralDecomp d = eig_sym(q_n);
  Vector sigma = d.eigenvalues;
  for (int j = 0; j < p; ++j) sigma[j] = std::max(sigma[j], 0.0);
  const Vector sigma_hat = spectrum_prox(sigma, mu);
  std::vector<bool> kept(p);
  Vector sigma_check = Vector::Zero(p);
  Vector inv = Vector::Zero(p);
  Vector wbar_eigs(p);
  for (int j = 0; j < p; ++j) {
    kept[j] = sigma_hat[j] > 0.0;
    sigma_check[j] = kept[j] ? d.eigenvalues[j] : 0.0;  // bit-equal to sigma_j or 0
    inv[j] = kept[j] ? 1.0 / d.eigenvalues[j] : 0.0;
    wbar_eigs[j] = kept[j] ? d.eigenvalues[j] : 1.0;
  }
  auto rebuild = [&d](const Vector& vals) {
    Matrix m = d.eigenvectors * vals.asDiagonal() * d.eigenvectors.transpose();
    return SymMatrix(0.5 * (m + m.transpose().eval()));
  };
  return ModifiedDesign{rebuild(sigma_check), rebuild(inv), WeightMatrix(rebuild(wbar_eigs)),
                        std::move(kept), sigma_hat, std::move(sigma_check)};
}

std::pair<Vector, ModifiedDesign> modified_ridgeless(const Dataset& d, double mu,
                                                     double rank_tol) {
  ModifiedDesign md = modified_design(gram(d), mu, rank_tol);
  Vector beta = md.q_check_pinv.mat() * xty(d);
  return {std::move(beta), std::move(md)};
}

WeightMatrix design_weight(const SymMatrix& q, double rank_tol) {
  const SpectralDecomp d = eig_sym(q);
  const double cutoff = resolve_rank_tol(q, rank_tol) * std::max(0.0, d.eigenvalues[0]);
  Vector vals(q.dim());
  for (int j = 0; j < q.dim(); ++j) {
    vals[j] = d.eigenvalues[j] > cutoff ? d.eigenvalues[j] : 1.0;
  }
  Matrix m = d.eigenvectors * vals.asDiagonal() * d.eigenvectors.transpose();
  return WeightMatrix(SymMatrix(0.5 * (m + m.transpose().eval())));
}

Vector adaptive_weights(const Vector& aux) {
  Vector w(aux.size());
  for (int j = 0; j < aux.size(); ++j) {
    const double a = std::abs(aux[j]);
    w[j] = a < 1e-12 ? std::numeric_limits<double>::infinity() : 1.0 / a;
  }
  return w;
}

std::vector<int> active_set_of(const Vector& beta) {
  std::vector<int> a;
  for (int j = 0; j < beta.size(); ++j) {
    if (beta[j] != 0.0) a.push_back(j);
  }
  return a;
}

EstimateReport proximal_estimate(const Vector& initial, const WeightMatrix& w, const Penalty& f,
                                 double lambda, const ProxOptions& opts) {
  ProxResult solved = prox(f, lambda, w, initial, opts);
  Vector v_opt = w.mat() * (initial - solved.point);
  const double recheck = kkt_distance(f, lambda, v_opt, solved.point);
  if (recheck > std::max(opts.kkt_tol, 2.0 * solved.kkt_residual)) {
    throw NonConvergence("proximal_estimate: certificate re-check failed with residual " +
                             std::to_string(recheck),
                         solved.point, recheck, solved.iterations);
  }
  std::vector<int> active = active_set_of(solved.point);
  return EstimateReport{solved.point, std::move(active), std::move(v_opt), initial, w,
                        std::move(solved)};
}

}  // namespace proxkit
