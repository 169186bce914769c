#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "proxkit/estimators.hpp"
#include "proxkit/montecarlo.hpp"

using namespace proxkit;

namespace {

constexpr double kInfd = std::numeric_limits<double>::infinity();

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Eigen::Index>(v.size()));
  int j = 0;
  for (double e : v) x[j++] = e;
  return x;
}

std::string write_temp(const std::string& name, const std::string& text) {
  const std::string path = "/tmp/proxkit_test_" + name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  return path;
}

}  // namespace

TEST_CASE("ridgeless") {
  SUBCASE("orthonormal design interpolates exactly") {
    const int n = 8;
    Matrix a(n, n);
    std::mt19937_64 g(41);
    std::normal_distribution<double> gauss;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = gauss(g);
    const Matrix q = Eigen::HouseholderQR<Matrix>(a).householderQ();
    const Matrix x = std::sqrt(static_cast<double>(n)) * q;  // X'X/n = I
    const Vector beta0 = vec({3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0});
    const Dataset d(x, x * beta0);
    CHECK((ridgeless(d) - beta0).lpNorm<Eigen::Infinity>() < 1e-12);
  }

  SUBCASE("duplicated column splits the coefficient evenly") {
    const int n = 20;
    Matrix x(n, 2);
    std::mt19937_64 g(42);
    std::normal_distribution<double> gauss;
    for (int i = 0; i < n; ++i) {
      x(i, 0) = gauss(g);
      x(i, 1) = x(i, 0);
    }
    const Dataset d(x, x.col(0));
    const Vector b = ridgeless(d);
    CHECK(b[0] == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(b[1] == doctest::Approx(0.5).epsilon(1e-10));

    // min-norm solution lies in range(Q_n)
    const SymMatrix q = gram(d);
    const Matrix resid = Matrix::Identity(2, 2) - range_projector(q).mat();
    CHECK((resid * b).lpNorm<Eigen::Infinity>() < 1e-9);
  }

  SUBCASE("ridgeless_from matches the dataset route") {
    DesignSpec spec{DesignKind::Regular, 8};
    Rng rng(mix_seed(7, 50, 3));
    const Dataset d = generate_sample(spec, 50, study_beta0(), 2.0, rng);
    CHECK((ridgeless(d) - ridgeless_from(gram(d), xty(d))).lpNorm<Eigen::Infinity>() == 0.0);
  }

  SUBCASE("consistency on the regular design") {
    DesignSpec spec{DesignKind::Regular, 8};
    const Vector beta0 = study_beta0();
    int close = 0;
    for (int rep = 0; rep < 200; ++rep) {
      Rng rng(mix_seed(1001, 100, static_cast<uint64_t>(rep)));
      const Dataset d = generate_sample(spec, 100, beta0, 2.0, rng);
      if ((ridgeless(d) - beta0).norm() < 1.0) ++close;
    }
    CHECK(close >= 190);
  }
}

TEST_CASE("ridge_initial") {
  std::mt19937_64 g(43);
  std::normal_distribution<double> gauss;
  const int n = 30, p = 4;
  Matrix x(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) x(i, j) = gauss(g);
  Vector y(n);
  for (int i = 0; i < n; ++i) y[i] = x(i, 0) - 2.0 * x(i, 3) + 0.3 * gauss(g);
  const Dataset d(x, y);

  CHECK(ridge_initial(d, 1e8).lpNorm<Eigen::Infinity>() < 1e-6);

  const Vector ols = gram(d).mat().ldlt().solve(xty(d));
  CHECK((ridge_initial(d, 1e-12) - ols).lpNorm<Eigen::Infinity>() < 1e-6);

  // duplicated column: the ridge solution is symmetric in the two copies
  Matrix xd(n, 2);
  xd.col(0) = x.col(0);
  xd.col(1) = x.col(0);
  const Dataset dd(xd, x.col(0));
  const Vector rb = ridge_initial(dd, 0.5);
  CHECK(rb[0] == doctest::Approx(rb[1]).epsilon(1e-12));
}

TEST_CASE("spectrum_prox") {
  const Vector s = spectrum_prox(vec({3.0, 1.0, 0.1}), 0.5);
  CHECK(s[0] == 2.5);
  CHECK(s[1] == 0.5);
  CHECK(s[2] == 0.0);

  CHECK(spectrum_prox(vec({3.0, 1.0}), 5.0).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((spectrum_prox(vec({3.0, 1.0}), 1e-15) - vec({3.0, 1.0})).lpNorm<Eigen::Infinity>() <
        1e-14);
  CHECK_THROWS_AS(spectrum_prox(vec({1.0, 2.0}), 0.5), Error);
}

TEST_CASE("modified_design") {
  SUBCASE("spectrum above the threshold leaves the design unchanged") {
    const SymMatrix q = build_qr(6);
    const SpectralDecomp dec = eig_sym(q);
    const double mu = 0.5 * dec.eigenvalues[5];
    const ModifiedDesign md = modified_design(q, mu);
    CHECK(md.rank() == 6);
    for (int j = 0; j < 6; ++j) {
      CHECK(md.kept[j]);
      CHECK(md.sigma_check[j] == dec.eigenvalues[j]);  // bit-equal, no rounding
    }
    const double scale = q.mat().cwiseAbs().maxCoeff();
    CHECK((md.q_check.mat() - q.mat()).cwiseAbs().maxCoeff() < 1e-12 * scale);
    CHECK((md.w_bar.mat() - q.mat()).cwiseAbs().maxCoeff() < 1e-12 * scale);
  }

  SUBCASE("singular population design keeps its range") {
    const SymMatrix qs = build_qs(build_qr(8), kQsCoef, kQsCoef);
    const ModifiedDesign md = modified_design(qs, 0.1);
    CHECK(md.rank() == 7);
    CHECK((range_projector(md.q_check).mat() - range_projector(qs).mat()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(md.sigma_check[7] == 0.0);
  }

  SUBCASE("thresholded spectrum is bit-equal to kept eigenvalues or zero") {
    DesignSpec spec{DesignKind::NearlySingular, 8};
    Rng rng(mix_seed(5, 300, 0));
    const Dataset d = generate_sample(spec, 300, study_beta0(), 2.0, rng);
    const SymMatrix q = gram(d);
    const double mu = std::pow(300.0, -0.375);
    const ModifiedDesign md = modified_design(q, mu);
    const SpectralDecomp dec = eig_sym(q);
    CHECK((md.sigma_hat - spectrum_prox(dec.eigenvalues, mu)).lpNorm<Eigen::Infinity>() == 0.0);
    for (int j = 0; j < 8; ++j) {
      if (md.kept[j]) {
        CHECK(md.sigma_check[j] == dec.eigenvalues[j]);
        CHECK(dec.eigenvalues[j] > mu);
      } else {
        CHECK(md.sigma_check[j] == 0.0);
      }
    }

    // W_bar spectrum: kept sigma_j on the range, 1 on the dropped directions
    Vector expected(8);
    for (int j = 0; j < 8; ++j) expected[j] = md.kept[j] ? dec.eigenvalues[j] : 1.0;
    std::sort(expected.data(), expected.data() + 8, std::greater<double>());
    const SpectralDecomp wd = eig_sym(SymMatrix(md.w_bar.mat()));
    CHECK((wd.eigenvalues - expected).lpNorm<Eigen::Infinity>() < 1e-9);
  }

  SUBCASE("recovers the limit rank on nearly singular samples") {
    DesignSpec spec{DesignKind::NearlySingular, 8};
    const double mu = std::pow(400.0, -0.375);
    int rank7 = 0;
    for (int rep = 0; rep < 100; ++rep) {
      Rng rng(mix_seed(1002, 400, static_cast<uint64_t>(rep)));
      const Dataset d = generate_sample(spec, 400, study_beta0(), 2.0, rng);
      if (modified_design(gram(d), mu).rank() == 7) ++rank7;
    }
    CHECK(rank7 >= 90);
  }
}

TEST_CASE("modified_ridgeless") {
  SUBCASE("no-op threshold reproduces ridgeless") {
    DesignSpec spec{DesignKind::Regular, 8};
    Rng rng(mix_seed(9, 200, 1));
    const Dataset d = generate_sample(spec, 200, study_beta0(), 2.0, rng);
    const SpectralDecomp dec = eig_sym(gram(d));
    const double mu = 0.5 * dec.eigenvalues[7];
    const auto [beta, md] = modified_ridgeless(d, mu);
    CHECK(md.rank() == 8);
    CHECK((beta - ridgeless(d)).lpNorm<Eigen::Infinity>() < 1e-12);
  }

  SUBCASE("threshold above the top eigenvalue zeroes the estimate") {
    DesignSpec spec{DesignKind::Regular, 8};
    Rng rng(mix_seed(9, 100, 2));
    const Dataset d = generate_sample(spec, 100, study_beta0(), 2.0, rng);
    const auto [beta, md] = modified_ridgeless(d, 1e3);
    CHECK(md.rank() == 0);
    CHECK(beta.lpNorm<Eigen::Infinity>() == 0.0);
  }

  SUBCASE("beats ridgeless on nearly singular designs") {
    DesignSpec spec{DesignKind::NearlySingular, 8};
    const Vector target = beta0_plus(spec);
    const double mu = std::pow(200.0, -0.375);
    std::vector<double> rl_err, mrl_err;
    for (int rep = 0; rep < 200; ++rep) {
      Rng rng(mix_seed(42, 200, static_cast<uint64_t>(rep)));
      const Dataset d = generate_sample(spec, 200, study_beta0(), 2.0, rng);
      rl_err.push_back((ridgeless(d) - target).squaredNorm());
      mrl_err.push_back((modified_ridgeless(d, mu).first - target).squaredNorm());
    }
    CHECK(quantile_hf8(mrl_err, 0.5) < quantile_hf8(rl_err, 0.5));
  }
}

TEST_CASE("adaptive_weights") {
  const Vector w = adaptive_weights(vec({2.0, -0.5}));
  CHECK(w[0] == 0.5);
  CHECK(w[1] == 2.0);
  const Vector w2 = adaptive_weights(vec({1.0, 0.0}));
  CHECK(w2[0] == 1.0);
  CHECK(w2[1] == kInfd);

  DesignSpec spec{DesignKind::NearlySingular, 8};
  for (int rep = 0; rep < 100; ++rep) {
    Rng rng(mix_seed(77, 150, static_cast<uint64_t>(rep)));
    const Dataset d = generate_sample(spec, 150, study_beta0(), 2.0, rng);
    const auto [beta, md] = modified_ridgeless(d, std::pow(150.0, -0.375));
    CHECK(adaptive_weights(beta).allFinite());
  }
}

TEST_CASE("active_set_of") {
  CHECK(active_set_of(vec({3.0, 0.0, -1e-300, 0.0})) == std::vector<int>{0, 2});
  CHECK(active_set_of(Vector::Zero(3)).empty());
}

TEST_CASE("proximal_estimate") {
  SUBCASE("lambda = 0 returns the initial point with a zero certificate") {
    const Vector init = vec({1.0, -2.0, 0.5});
    const WeightMatrix w(build_qr(3));
    const EstimateReport er = proximal_estimate(init, w, Penalty::lasso(), 0.0);
    CHECK((er.beta - init).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(er.v_opt.lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(er.active_set == std::vector<int>{0, 1, 2});
  }

  SUBCASE("infinite weight with a zero initial pins the coordinate") {
    const Vector init = vec({1.5, 0.0, -0.7});
    const WeightMatrix w(build_qr(3));
    const Penalty f = Penalty::adaptive_lasso(vec({0.5, kInfd, 0.5}));
    const EstimateReport er = proximal_estimate(init, w, f, 0.05);
    CHECK(er.beta[1] == 0.0);
    CHECK(er.active_set == std::vector<int>{0, 2});
    CHECK((er.v_opt - w.mat() * (init - er.beta)).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(kkt_distance(f, 0.05, er.v_opt, er.beta) <= 1e-8);
  }

  SUBCASE("full pipeline on a regular design equals the one-shot solve") {
    DesignSpec spec{DesignKind::Regular, 8};
    Rng rng(mix_seed(11, 120, 4));
    const Dataset d = generate_sample(spec, 120, study_beta0(), 2.0, rng);
    const SymMatrix q = gram(d);
    for (double lambda : {0.02, 0.1}) {
      const EstimateReport er =
          proximal_estimate(ridgeless(d), design_weight(q), Penalty::lasso(), lambda);
      const Vector direct = plse_solve(d.x, d.y, Penalty::lasso(), lambda).point;
      CHECK((er.beta - direct).lpNorm<Eigen::Infinity>() < 1e-6);
    }
  }

  SUBCASE("detection rates on the regular design at the study tuning") {
    DesignSpec spec{DesignKind::Regular, 8};
    const std::vector<int> truth{0, 1, 4};
    const double mu = std::pow(200.0, -0.375);
    int hits_slow = 0, hits_fast = 0;
    const int reps = 500;
    for (int rep = 0; rep < reps; ++rep) {
      Rng rng(mix_seed(42, 200, static_cast<uint64_t>(rep)));
      const Dataset d = generate_sample(spec, 200, study_beta0(), 2.0, rng);
      const auto [init, md] = modified_ridgeless(d, mu);
      const Penalty f = Penalty::adaptive_lasso(adaptive_weights(init));
      const EstimateReport slow =
          proximal_estimate(init, md.w_bar, f, std::pow(200.0, -0.75));
      const EstimateReport fast =
          proximal_estimate(init, md.w_bar, f, std::pow(200.0, -0.55));
      hits_slow += slow.active_set == truth;
      hits_fast += fast.active_set == truth;
    }
    // lambda = n^{-0.75} selects conservatively at n = 200; the heavier
    // n^{-0.55} tuning is already reliable
    CHECK(hits_slow >= reps / 4);
    CHECK(hits_slow <= reps / 2);
    CHECK(hits_fast >= 8 * reps / 10);
  }
}

TEST_CASE("design_weight") {
  // full rank: Q Q^+ = I so the weight is Q itself
  const SymMatrix q = build_qr(5);
  CHECK((design_weight(q).mat() - q.mat()).cwiseAbs().maxCoeff() < 1e-12);

  // singular: identity on the kernel
  Matrix d10 = Matrix::Zero(2, 2);
  d10(0, 0) = 3.0;
  const WeightMatrix w = design_weight(SymMatrix(d10));
  CHECK(w.mat()(0, 0) == doctest::Approx(3.0));
  CHECK(w.mat()(1, 1) == doctest::Approx(1.0));
  CHECK(std::abs(w.mat()(0, 1)) < 1e-12);
}

TEST_CASE("Dataset") {
  const std::string good = "y,x1,x2\n1.5,2.0,3.0\n-0.5,1.0,0.0\n2.5,0.5,-1.0\n";
  const Dataset d = Dataset::from_csv(write_temp("good.csv", good));
  CHECK(d.n() == 3);
  CHECK(d.p() == 2);
  CHECK(d.y[0] == 1.5);
  CHECK(d.x(0, 0) == 2.0);
  CHECK(d.x(2, 1) == -1.0);

  CHECK_THROWS_WITH_AS(Dataset::from_csv(write_temp("hdr.csv", "a,b\n1,2\n")),
                       doctest::Contains("header"), Error);
  CHECK_THROWS_WITH_AS(
      Dataset::from_csv(write_temp("bad.csv", "y,x1\n1.0,2.0\n1.0,abc\n")),
      doctest::Contains("line 3"), Error);
  CHECK_THROWS_WITH_AS(Dataset::from_csv(write_temp("wide.csv", "y,x1\n1.0,2.0,9.0\n")),
                       doctest::Contains("line 2"), Error);
  CHECK_THROWS_AS(Dataset::from_csv("/tmp/proxkit_no_such_file.csv"), Error);
  CHECK_THROWS_AS(Dataset(Matrix::Zero(3, 2), Vector::Zero(4)), Error);
}
