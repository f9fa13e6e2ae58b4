/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include <doctest.h>

#include <cmath>
#include <random>

#include "forestval/errors.hpp"
#include "forestval/model.hpp"

using namespace forestval;

namespace {

// Generator written out from its definition, independent of the library.
double oracle_f(double t, double delta, double y, double z1, double z2, double ku, double mu,
                double lu, const EconomicParams& e, const ModelParams& p) {
  const double a1 = (ku * mu - p.kappa_d * p.mu_d - (ku - p.kappa_d) * delta) / p.sigma_d;
  const double a2 = -p.rho * a1 / std::sqrt(1.0 - p.rho * p.rho);
  const double hazard = t >= e.grace_age ? lu : 0.0;
  return e.amenity - (p.r + hazard) * y + a1 * z1 + a2 * z2;
}

}  // namespace

TEST_CASE("growth curve") {
  CHECK(growth(49.0) == 0.0);
  CHECK(growth(64.0) == doctest::Approx(127.875).epsilon(1e-14));
  CHECK(growth(120.0) == growth(103.0));
  CHECK(growth(0.0) == 0.0);

  SUBCASE("jump at the lower knot and continuity at the upper knot") {
    const double g50 = 792.0 - 5313.0 / std::sqrt(50.0);
    CHECK(growth(std::nextafter(50.0, 0.0)) == 0.0);
    CHECK(growth(50.0) == doctest::Approx(g50).epsilon(1e-14));
    CHECK(growth(std::nextafter(103.0, 0.0)) == doctest::Approx(growth(103.0)).epsilon(1e-12));
    CHECK(growth(std::nextafter(103.0, 200.0)) == growth(103.0));
  }

  SUBCASE("nondecreasing") {
    double prev = growth(0.0);
    for (double a = 0.0; a <= 150.0; a += 0.01) {
      const double g = growth(a);
      CHECK(g >= prev);
      prev = g;
    }
  }
}

TEST_CASE("payoff") {
  EconomicParams e;
  CHECK(payoff(40.0, {0.0, 600.0}, e) == doctest::Approx(-127.74));
  CHECK(payoff(64.0, {-0.01, 600.0}, e) == doctest::Approx(76597.26).epsilon(1e-12));
  CHECK(payoff(64.0, {0.0, 1e-300}, e) == doctest::Approx(-127.74));
  e.volume_factor = 0.5;
  CHECK(payoff(64.0, {0.0, 600.0}, e) == doctest::Approx(300.0 * 127.875 - 127.74));
}

TEST_CASE("survival") {
  CHECK(survival(10.0, 10.0, 0.2392, 50.0) == 1.0);
  CHECK(survival(0.0, 50.0, 0.2392, 50.0) == 1.0);
  CHECK(survival(50.0, 53.0, 0.2392, 50.0) == doctest::Approx(std::exp(-0.7176)).epsilon(1e-14));
  CHECK(survival(50.0, 53.0, 0.2392, 50.0) == doctest::Approx(0.487922).epsilon(1e-6));
  CHECK(survival(2.0, 7.0, 0.3, 0.0) == doctest::Approx(std::exp(-1.5)));
  CHECK(survival(40.0, 60.0, 0.1, 50.0) == doctest::Approx(std::exp(-1.0)));
  CHECK_THROWS_AS(survival(5.0, 4.0, 0.2, 50.0), Error);
}

TEST_CASE("alpha") {
  const ModelParams p;
  for (double d : {-1.0, -0.01, 0.0, 0.3}) {
    const Alpha a = alpha(reference_control(p), d, p);
    CHECK(a.a1 == 0.0);
    CHECK(a.a2 == 0.0);
  }

  SUBCASE("kappa at reference, shifted mean") {
    const double c = 0.05;
    const Alpha a = alpha({p.kappa_d, p.mu_d + c, 0.2}, 0.4, p);
    CHECK(a.a1 == doctest::Approx(p.kappa_d * c / p.sigma_d).epsilon(1e-13));
    CHECK(a.a2 == doctest::Approx(-p.rho * p.kappa_d * c /
                                  (std::sqrt(1.0 - p.rho * p.rho) * p.sigma_d))
                      .epsilon(1e-13));
  }

  SUBCASE("upper box corner at delta = -0.01") {
    const Alpha a = alpha({1.0699, 0.0090, 0.3}, -0.01, p);
    const double a1 = (1.0699 * 0.0090 - 0.9441 * 0.0 - (1.0699 - 0.9441) * (-0.01)) / 0.4640;
    CHECK(a.a1 == doctest::Approx(a1).epsilon(1e-14));
    CHECK(a.a1 == doctest::Approx(0.0234636).epsilon(1e-5));
    CHECK(a.a2 == doctest::Approx(-0.7061 * a1 / std::sqrt(1.0 - 0.7061 * 0.7061)));
  }

  SUBCASE("affine in delta") {
    const ControlPoint u{1.0, -0.05, 0.2};
    const double d0 = -0.3, d1 = 0.7;
    const Alpha a0 = alpha(u, d0, p), a1 = alpha(u, d1, p), am = alpha(u, 0.5 * (d0 + d1), p);
    CHECK(am.a1 == doctest::Approx(0.5 * (a0.a1 + a1.a1)).epsilon(1e-13));
    CHECK(am.a2 == doctest::Approx(0.5 * (a0.a2 + a1.a2)).epsilon(1e-13));
  }
}

TEST_CASE("driver_f") {
  const ModelParams p;
  const EconomicParams e;
  const ControlPoint ref = reference_control(p);
  CHECK(driver_f(60.0, {0.1, 500.0}, 1000.0, {3.0, -2.0}, ref, e, p) ==
        doctest::Approx(8.0 - (p.r + p.lambda_q) * 1000.0));
  CHECK(driver_f(60.0, {0.1, 500.0}, 0.0, {0.0, 0.0}, {1.0, 0.0, 0.3}, e, p) == 8.0);
  CHECK(driver_f(60.0, {-0.01, 600.0}, 1000.0, {0.0, 0.0}, {0.9441, 0.0, 0.2392}, e, p) ==
        doctest::Approx(-254.3).epsilon(1e-12));
  // Hazard gated before the grace age.
  CHECK(driver_f(30.0, {0.0, 600.0}, 1000.0, {0.0, 0.0}, ref, e, p) ==
        doctest::Approx(8.0 - p.r * 1000.0));

  SUBCASE("superposition in (y, z)") {
    const ControlPoint u{1.05, -0.08, 0.3};
    const StateVec x{0.2, 300.0};
    auto g = [&](double y, double z1, double z2) {
      return driver_f(70.0, x, y, {z1, z2}, u, e, p) - e.amenity;
    };
    CHECK(g(3.0 + 5.0, 1.0 - 2.0, 4.0 + 0.5) ==
          doctest::Approx(g(3.0, 1.0, 4.0) + g(5.0, -2.0, 0.5)).epsilon(1e-12));
    CHECK(g(2.5 * 7.0, 2.5 * 3.0, 2.5 * -1.0) == doctest::Approx(2.5 * g(7.0, 3.0, -1.0)));
  }
}

TEST_CASE("driver_extremal") {
  const ModelParams p;
  const EconomicParams e;
  const UncertaintyBox box;

  SUBCASE("degenerate box equals the point generator in both modes") {
    UncertaintyBox pt;
    pt.kappa_lo = pt.kappa_hi = 1.01;
    pt.mu_lo = pt.mu_hi = -0.03;
    pt.lambda_lo = pt.lambda_hi = 0.2;
    const StateVec x{0.15, 420.0};
    const double f = driver_f(80.0, x, 900.0, {12.0, -4.0}, {1.01, -0.03, 0.2}, e, p);
    CHECK(driver_extremal(Extremum::Sup, 80.0, x, 900.0, {12.0, -4.0}, pt, e, p) == f);
    CHECK(driver_extremal(Extremum::Inf, 80.0, x, 900.0, {12.0, -4.0}, pt, e, p) == f);
  }

  SUBCASE("envelope over corners and random points") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uy(-500.0, 5000.0), uz(-3000.0, 3000.0),
        ud(-1.0, 1.0), ut(0.0, 150.0), u01(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
      const double t = ut(rng), y = uy(rng), d = ud(rng);
      const ZPair z{uz(rng), uz(rng)};
      const StateVec x{d, 500.0};
      const double hi = driver_extremal(Extremum::Sup, t, x, y, z, box, e, p);
      const double lo = driver_extremal(Extremum::Inf, t, x, y, z, box, e, p);
      CHECK(hi >= lo);
      for (const auto& c : corners(box)) {
        const double f = driver_f(t, x, y, z, c, e, p);
        CHECK(f <= hi);
        CHECK(f >= lo);
      }
      const ControlPoint inner{box.kappa_lo + u01(rng) * (box.kappa_hi - box.kappa_lo),
                               box.mu_lo + u01(rng) * (box.mu_hi - box.mu_lo),
                               box.lambda_lo + u01(rng) * (box.lambda_hi - box.lambda_lo)};
      const double f = driver_f(t, x, y, z, inner, e, p);
      CHECK(f <= hi + 1e-12 * std::abs(hi));
      CHECK(f >= lo - 1e-12 * std::abs(lo));
    }
  }

  SUBCASE("corner extremum equals a 21^3 grid search") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uy(-1000.0, 1e5), uz(-1e4, 1e4), ud(-2.0, 2.0),
        ut(0.0, 150.0);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const double t = ut(rng), y = uy(rng), d = ud(rng), z1 = uz(rng), z2 = uz(rng);
      double gmax = -HUGE_VAL, gmin = HUGE_VAL;
      for (int a = 0; a <= 20; ++a)
        for (int b = 0; b <= 20; ++b)
          for (int c = 0; c <= 20; ++c) {
            const double ku = box.kappa_lo + (box.kappa_hi - box.kappa_lo) * a / 20.0;
            const double mu = box.mu_lo + (box.mu_hi - box.mu_lo) * b / 20.0;
            const double lu = box.lambda_lo + (box.lambda_hi - box.lambda_lo) * c / 20.0;
            const double f = oracle_f(t, d, y, z1, z2, ku, mu, lu, e, p);
            gmax = std::max(gmax, f);
            gmin = std::min(gmin, f);
          }
      const StateVec x{d, 300.0};
      const double hi = driver_extremal(Extremum::Sup, t, x, y, {z1, z2}, box, e, p);
      const double lo = driver_extremal(Extremum::Inf, t, x, y, {z1, z2}, box, e, p);
      worst = std::max(worst, std::abs(hi - gmax) / std::max(1.0, std::abs(gmax)));
      worst = std::max(worst, std::abs(lo - gmin) / std::max(1.0, std::abs(gmin)));
    }
    CHECK(worst <= 1e-10);
  }

  SUBCASE("sup equals inf only when nothing is uncertain") {
    const StateVec x{0.1, 300.0};
    // y = 0 and z = 0 remove every uncertain term.
    CHECK(driver_extremal(Extremum::Sup, 60.0, x, 0.0, {0.0, 0.0}, box, e, p) ==
          driver_extremal(Extremum::Inf, 60.0, x, 0.0, {0.0, 0.0}, box, e, p));
    CHECK(driver_extremal(Extremum::Sup, 60.0, x, 10.0, {0.0, 0.0}, box, e, p) >
          driver_extremal(Extremum::Inf, 60.0, x, 10.0, {0.0, 0.0}, box, e, p));
  }
}

TEST_CASE("parameter validation") {
  ModelParams p;
  CHECK_NOTHROW(p.validate());
  p.rho = 1.0;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.sigma_d = 0.0;
  CHECK_THROWS_AS(p.validate(), Error);
  UncertaintyBox b;
  CHECK_NOTHROW(b.validate());
  b.kappa_lo = 2.0;
  CHECK_THROWS_AS(b.validate(), Error);
  EconomicParams e;
  e.volume_factor = 0.0;
  CHECK_THROWS_AS(e.validate(), Error);
  // Reference point inside the default box.
  const UncertaintyBox box;
  const ModelParams ref;
  CHECK(box.kappa_lo <= ref.kappa_d);
  CHECK(ref.kappa_d <= box.kappa_hi);
  CHECK(box.mu_lo <= ref.mu_d);
  CHECK(ref.mu_d <= box.mu_hi);
  CHECK(box.lambda_lo <= ref.lambda_q);
  CHECK(ref.lambda_q <= box.lambda_hi);
}
