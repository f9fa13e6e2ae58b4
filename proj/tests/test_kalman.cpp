/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "forestval/errors.hpp"
#include "forestval/kalman.hpp"

using namespace forestval;

namespace {

// Joint (all contracts at once) filter, written from the state-space form.
double dense_loglik(const FuturesPanel& panel, const TwoFactorTheta& th, double dt) {
  const auto& p = th.model;
  const int k = panel.contracts;
  Eigen::Vector2d c(p.kappa_d * p.mu_d * dt, (p.r - 0.5 * p.sigma_p * p.sigma_p) * dt);
  Eigen::Matrix2d F;
  F << 1.0 - p.kappa_d * dt, 0.0, -dt, 1.0;
  Eigen::Matrix2d Q;
  Q << p.sigma_d * p.sigma_d, p.rho * p.sigma_d * p.sigma_p, p.rho * p.sigma_d * p.sigma_p,
      p.sigma_p * p.sigma_p;
  Q *= dt;
  Eigen::Vector2d m(p.mu_d, std::log(panel.price(0, 0)));
  Eigen::Matrix2d P = Eigen::Matrix2d::Zero();
  P(0, 0) = p.sigma_d * p.sigma_d / (2.0 * p.kappa_d);
  P(1, 1) = 1.0;
  double ll = 0.0;
  for (std::size_t d = 0; d < panel.size(); ++d) {
    if (d > 0) {
      m = c + F * m;
      P = F * P * F.transpose() + Q;
    }
    Eigen::MatrixXd H(k, 2);
    Eigen::VectorXd a(k), y(k);
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(k, k);
    for (int j = 0; j < k; ++j) {
      const double tau = panel.maturity(d, j);
      const double b = (1.0 - std::exp(-p.kappa_d * tau)) / p.kappa_d;
      const double sd = p.sigma_d, sp = p.sigma_p, kk = p.kappa_d;
      a[j] = (p.r - p.mu_d + 0.5 * sd * sd / (kk * kk) - sp * sd * p.rho / kk) * tau +
             0.25 * sd * sd * (1.0 - std::exp(-2.0 * kk * tau)) / (kk * kk * kk) +
             (p.mu_d * kk + sp * sd * p.rho - sd * sd / kk) * (1.0 - std::exp(-kk * tau)) /
                 (kk * kk);
      H(j, 0) = -b;
      H(j, 1) = 1.0;
      y[j] = std::log(panel.price(d, j));
      R(j, j) = th.noise[j] * th.noise[j];
    }
    const Eigen::VectorXd v = y - a - H * m;
    const Eigen::MatrixXd S = H * P * H.transpose() + R;
    const Eigen::LLT<Eigen::MatrixXd> llt(S);
    const Eigen::VectorXd Sv = llt.solve(v);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    ll += -0.5 * (k * std::log(2.0 * M_PI) + logdet + v.dot(Sv));
    const Eigen::MatrixXd K = P * H.transpose() * S.inverse();
    m += K * v;
    P = P - K * H * P;
  }
  return ll;
}

FuturesPanel scaled(const FuturesPanel& in, double factor) {
  FuturesPanel out = in;
  for (double& v : out.prices) v *= factor;
  return out;
}

std::string temp_file(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / ("fv_kalman_" + name);
  std::ofstream(path) << body;
  return path.string();
}

}  // namespace

TEST_CASE("futures price") {
  const ModelParams p;
  CHECK(futures_price({0.1, 321.0}, 0.0, p) == 321.0);
  CHECK(futures_intercept(0.0, p) == 0.0);
  CHECK_THROWS_AS(futures_price({0.1, 321.0}, -1.0, p), Error);

  SUBCASE("no volatility: forward equals the deterministic spot path") {
    ModelParams q = p;
    q.sigma_p = 1e-12;
    q.sigma_d = 1e-12;
    q.mu_d = 0.03;
    const double d0 = -0.05, p0 = 500.0, tau = 1.7;
    const double exact = p0 * std::exp((q.r - q.mu_d) * tau -
                                       (d0 - q.mu_d) * (1.0 - std::exp(-q.kappa_d * tau)) /
                                           q.kappa_d);
    CHECK(futures_price({d0, p0}, tau, q) == doctest::Approx(exact).epsilon(1e-10));
    // delta at its mean: P e^{(r - delta) tau} for every kappa.
    for (double k : {0.1, 1.0, 10.0}) {
      q.kappa_d = k;
      CHECK(futures_price({q.mu_d, p0}, tau, q) ==
            doctest::Approx(p0 * std::exp((q.r - q.mu_d) * tau)).epsilon(1e-10));
    }
  }

  SUBCASE("fast mean reversion limit") {
    ModelParams q = p;
    q.sigma_p = 1e-12;
    q.sigma_d = 1e-12;
    q.mu_d = 0.0;
    const double tau = 0.8, p0 = 200.0;
    double prev = HUGE_VAL;
    for (double k : {1e1, 1e2, 1e3, 1e4, 1e5}) {
      q.kappa_d = k;
      const double gap =
          std::abs(std::log(futures_price({0.3, p0}, tau, q)) - std::log(p0 * std::exp(q.r * tau)));
      CHECK(gap < prev);
      CHECK(gap == doctest::Approx(0.3 / k).epsilon(1e-3));
      prev = gap;
    }
  }

  SUBCASE("log F is affine in (delta, log P) with the stated loadings") {
    const double tau = 0.37, h = 1e-5;
    const StateVec x{0.05, 400.0};
    const double dd = (std::log(futures_price({x.delta + h, x.price}, tau, p)) -
                       std::log(futures_price({x.delta - h, x.price}, tau, p))) /
                      (2.0 * h);
    CHECK(dd == doctest::Approx(futures_delta_loading(tau, p.kappa_d)).epsilon(1e-8));
    const double dp = (std::log(futures_price({x.delta, x.price * std::exp(h)}, tau, p)) -
                       std::log(futures_price({x.delta, x.price * std::exp(-h)}, tau, p))) /
                      (2.0 * h);
    CHECK(dp == doctest::Approx(1.0).epsilon(1e-8));
    // Second differences vanish.
    const double f0 = std::log(futures_price(x, tau, p));
    const double fp = std::log(futures_price({x.delta + 0.1, x.price}, tau, p));
    const double fm = std::log(futures_price({x.delta - 0.1, x.price}, tau, p));
    CHECK(std::abs(fp - 2.0 * f0 + fm) < 1e-12);
  }
}

TEST_CASE("kalman likelihood") {
  TwoFactorTheta th;
  const FuturesPanel panel = synthetic_panel(th, 300, 17);

  SUBCASE("sequential updates equal the joint Gaussian likelihood") {
    CHECK(kalman_loglik(panel, th) ==
          doctest::Approx(dense_loglik(panel, th, kWeeklyDt)).epsilon(1e-10));
    TwoFactorTheta other = th;
    other.model.kappa_d = 1.7;
    other.model.rho = -0.3;
    other.model.mu_d = 0.05;
    CHECK(kalman_loglik(panel, other) ==
          doctest::Approx(dense_loglik(panel, other, kWeeklyDt)).epsilon(1e-10));
  }

  SUBCASE("common shift of all log prices") {
    const double base = kalman_loglik(panel, th);
    for (double c : {-2.0, 0.5, 3.0})
      CHECK(kalman_loglik(scaled(panel, std::exp(c)), th) == doctest::Approx(base).epsilon(1e-10));
  }

  SUBCASE("order of dates matters") {
    FuturesPanel perm = panel;
    const int k = perm.contracts;
    for (int j = 0; j < k; ++j) {
      std::swap(perm.prices[10 * k + j], perm.prices[200 * k + j]);
      std::swap(perm.ttm[10 * k + j], perm.ttm[200 * k + j]);
    }
    CHECK(kalman_loglik(perm, th) != kalman_loglik(panel, th));
  }

  SUBCASE("inadmissible candidates score -inf") {
    TwoFactorTheta bad = th;
    bad.model.rho = 1.0;
    CHECK(std::isinf(kalman_loglik(panel, bad)));
    bad = th;
    bad.noise[2] = 0.0;
    CHECK(std::isinf(kalman_loglik(panel, bad)));
    bad = th;
    bad.noise.pop_back();
    CHECK(std::isinf(kalman_loglik(panel, bad)));
  }

  SUBCASE("huge measurement noise: flat limit independent of the state") {
    FuturesPanel one;
    one.contracts = 1;
    one.dates = {"2000-01-05"};
    one.prices = {350.0};
    one.ttm = {0.2};
    FuturesPanel two = one;
    two.prices = {0.35};
    two.ttm = {2.5};
    TwoFactorTheta t1;
    double prev_gap = HUGE_VAL;
    for (double d : {1e2, 1e4, 1e6}) {
      t1.noise = {d};
      const double flat = -0.5 * std::log(2.0 * M_PI) - std::log(d);
      const double gap = std::max(std::abs(kalman_loglik(one, t1) - flat),
                                  std::abs(kalman_loglik(two, t1) - flat));
      CHECK(gap < prev_gap);
      prev_gap = gap;
    }
    CHECK(prev_gap < 1e-9);
  }
}

TEST_CASE("filter covariance stays symmetric PSD over random parameters") {
  FuturesPanel panel;
  panel.contracts = 2;
  std::mt19937_64 rng(123);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int d = 0; d < 100; ++d) {
    panel.dates.push_back("d");
    panel.prices.push_back(300.0 * std::exp(0.1 * gauss(rng)));
    panel.prices.push_back(300.0 * std::exp(0.1 * gauss(rng)));
    panel.ttm.push_back(0.05 + 0.01 * (d % 5));
    panel.ttm.push_back(0.6 + 0.01 * (d % 5));
  }
  std::uniform_real_distribution<double> lsig(std::log(0.01), std::log(3.0)),
      lkap(std::log(0.01), std::log(20.0)), urho(-0.999, 0.999), lnoise(std::log(1e-4), 0.0),
      umu(-0.5, 0.5);
  long bad = 0;
  for (int draw = 0; draw < 1000000; ++draw) {
    TwoFactorTheta th;
    th.model.sigma_p = std::exp(lsig(rng));
    th.model.sigma_d = std::exp(lsig(rng));
    th.model.kappa_d = std::exp(lkap(rng));
    th.model.rho = urho(rng);
    th.model.mu_d = umu(rng);
    th.noise = {std::exp(lnoise(rng)), std::exp(lnoise(rng))};
    const KalmanRun run = run_kalman(panel, th, kWeeklyDt, true);
    for (const auto& s : run.filtered) {
      const auto& c = s.cov;
      const double tol = 1e-12 * std::max(1.0, c.trace());
      if (c(0, 1) != c(1, 0) || c(0, 0) < -tol || c(1, 1) < -tol ||
          c(0, 0) * c(1, 1) - c(0, 1) * c(0, 1) < -tol * c.trace())
        ++bad;
    }
  }
  CHECK(bad == 0);
}

TEST_CASE("maximum likelihood on a synthetic panel") {
  TwoFactorTheta truth;
  const FuturesPanel panel = synthetic_panel(truth, 1520, 99);
  OptimizerConfig cfg;
  const EstimationResult res = estimate_two_factor(panel, truth, cfg);
  const auto names = EstimationResult::names(panel.contracts);
  std::vector<double> tv{truth.model.sigma_p, truth.model.sigma_d, truth.model.kappa_d,
                         truth.model.mu_d, truth.model.rho};
  tv.insert(tv.end(), truth.noise.begin(), truth.noise.end());
  REQUIRE(res.estimates.size() == tv.size());
  for (std::size_t k = 0; k < tv.size(); ++k) {
    CAPTURE(names[k]);
    CHECK(res.std_errors[k] >= 0.0);
    CHECK(std::abs(res.estimates[k] - tv[k]) <= 3.0 * res.std_errors[k]);
    CHECK(res.ci_lo[k] == doctest::Approx(res.estimates[k] - 1.96 * res.std_errors[k]));
    CHECK(res.ci_hi[k] == doctest::Approx(res.estimates[k] + 1.96 * res.std_errors[k]));
  }
  CHECK(res.loglik >= kalman_loglik(panel, truth));
  CHECK(res.hessian_ok);

  SUBCASE("deterministic") {
    const EstimationResult again = estimate_two_factor(panel, truth, cfg);
    CHECK(again.loglik == res.loglik);
    CHECK(again.estimates == res.estimates);
  }

  SUBCASE("fixing mu at its true value") {
    OptimizerConfig fixed = cfg;
    fixed.fix_mu = true;
    fixed.fixed_mu = truth.model.mu_d;
    const EstimationResult r0 = estimate_two_factor(panel, truth, fixed);
    CHECK(r0.mu_fixed);
    CHECK(r0.estimates[3] == truth.model.mu_d);
    CHECK(r0.std_errors[3] == 0.0);
    CHECK(r0.loglik <= res.loglik + 1e-6);
    // Likelihood-ratio and Wald statistics for mu agree to first order.
    const double lr = 2.0 * (res.loglik - r0.loglik);
    const double wald = std::pow((res.estimates[3] - truth.model.mu_d) / res.std_errors[3], 2);
    CHECK(lr == doctest::Approx(wald).epsilon(0.25));
    for (std::size_t k : {0u, 1u, 2u, 4u}) {
      CAPTURE(names[k]);
      CHECK(std::abs(r0.estimates[k] - res.estimates[k]) <= res.std_errors[k]);
    }
  }

  SUBCASE("non-convergence is reported with the best point") {
    OptimizerConfig tiny = cfg;
    tiny.max_iterations = 2;
    tiny.starts = 1;
    TwoFactorTheta off = truth;
    off.model.kappa_d = 3.0;
    off.model.sigma_d = 1.5;
    try {
      estimate_two_factor(panel, off, tiny);
      FAIL("expected EstimationFailure");
    } catch (const EstimationFailure& e) {
      CHECK(std::isfinite(e.best().loglik));
      CHECK(e.best().estimates.size() == tv.size());
    }
  }

  CHECK_THROWS_AS(estimate_two_factor(panel, TwoFactorTheta{{0.3, 0.4, -1.0}}, cfg), Error);
}

TEST_CASE("confidence intervals cover the truth") {
  TwoFactorTheta truth;
  OptimizerConfig cfg;
  cfg.starts = 1;
  cfg.skip_simplex = true;
  const int reps = 50;
  std::vector<int> hits(11, 0);
  for (int rep = 0; rep < reps; ++rep) {
    const FuturesPanel panel = synthetic_panel(truth, 520, 1000 + rep);
    const EstimationResult r = estimate_two_factor(panel, truth, cfg);
    std::vector<double> tv{truth.model.sigma_p, truth.model.sigma_d, truth.model.kappa_d,
                           truth.model.mu_d, truth.model.rho};
    tv.insert(tv.end(), truth.noise.begin(), truth.noise.end());
    for (std::size_t k = 0; k < tv.size(); ++k)
      if (r.ci_lo[k] <= tv[k] && tv[k] <= r.ci_hi[k]) ++hits[k];
  }
  const auto names = EstimationResult::names(6);
  for (std::size_t k = 0; k < hits.size(); ++k) {
    CAPTURE(names[k]);
    CAPTURE(hits[k]);
    CHECK(hits[k] >= 0.85 * reps);
  }
}

TEST_CASE("uncertainty box from estimates") {
  EstimationResult r;
  r.estimates = {0.3304, 0.4640, 0.9441, 0.0, 0.7061};
  r.std_errors = {0.0061, 0.0131, 0.0641, 0.0206, 0.0156};
  for (std::size_t k = 0; k < 5; ++k) {
    r.ci_lo.push_back(r.estimates[k] - 1.96 * r.std_errors[k]);
    r.ci_hi.push_back(r.estimates[k] + 1.96 * r.std_errors[k]);
  }
  const UncertaintyBox b = build_uncertainty_box(r, {-0.1020, 0.0090}, {0.1255, 0.3528});
  CHECK(b.kappa_lo == doctest::Approx(0.8185).epsilon(1e-4));
  CHECK(b.kappa_hi == doctest::Approx(1.0697).epsilon(1e-4));
  CHECK(std::abs(b.kappa_lo - 0.8183) < 5e-4);
  CHECK(std::abs(b.kappa_hi - 1.0699) < 5e-4);
  CHECK(b.mu_lo == -0.1020);
  CHECK(b.lambda_hi == 0.3528);
  CHECK(b.kappa_lo <= 0.9441);
  CHECK(0.9441 <= b.kappa_hi);

  r.std_errors.assign(5, 0.0);
  r.ci_lo = r.estimates;
  r.ci_hi = r.estimates;
  const UncertaintyBox d = build_uncertainty_box(r, {0.0, 0.0}, {0.2392, 0.2392});
  CHECK(d.degenerate());
}

TEST_CASE("futures CSV") {
  TwoFactorTheta th;
  const FuturesPanel panel = synthetic_panel(th, 20, 4);
  const auto path = (std::filesystem::temp_directory_path() / "fv_kalman_rt.csv").string();
  write_futures_csv(panel, path);
  const FuturesPanel back = read_futures_csv(path);
  CHECK(back.dates == panel.dates);
  CHECK(back.prices == panel.prices);
  CHECK(back.ttm == panel.ttm);

  const std::string header = "date,price_f1,ttm_f1,price_f2,ttm_f2\n";
  auto message = [](const std::string& file, bool drop = false) {
    try {
      read_futures_csv(file, drop);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Data);
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message(temp_file("empty.csv", "")).find("empty") != std::string::npos);
  CHECK(message(temp_file("hdr.csv", "date,price,ttm\n2000-01-05,1,2\n")).find("header") !=
        std::string::npos);
  const std::string bad_cell =
      message(temp_file("cell.csv", header + "2000-01-05,300,0.1,abc,0.2\n"));
  CHECK(bad_cell.find("row 2") != std::string::npos);
  CHECK(bad_cell.find("price_f2") != std::string::npos);
  CHECK(message(temp_file("mat.csv", header + "2000-01-05,300,0.3,310,0.2\n"))
            .find("maturities") != std::string::npos);
  CHECK(message(temp_file("order.csv",
                          header + "2000-01-12,300,0.1,310,0.2\n2000-01-05,300,0.1,310,0.2\n"))
            .find("ascending") != std::string::npos);
  CHECK(message(temp_file("date.csv", header + "05/01/2000,300,0.1,310,0.2\n"))
            .find("YYYY-MM-DD") != std::string::npos);
  const std::string gap = temp_file(
      "gap.csv", header + "2000-01-05,300,0.1,310,0.2\n2000-01-12,,0.1,310,0.2\n"
                          "2000-01-19,301,0.1,311,0.2\n");
  CHECK(message(gap).find("empty cells") != std::string::npos);
  CHECK(read_futures_csv(gap, true).size() == 2);
}
