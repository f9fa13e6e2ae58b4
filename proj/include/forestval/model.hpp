/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#pragma once

#include <array>
#include <string_view>

namespace forestval {

/// Two-factor convenience-yield model under the market measure, plus the
/// risk-free rate and the reference catastrophe intensity.
struct ModelParams {
  double sigma_p = 0.3304;   // spot-price volatility
  double sigma_d = 0.4640;   // convenience-yield volatility
  double kappa_d = 0.9441;   // mean-reversion speed of delta
  double mu_d = 0.0;         // risk-neutral long-run convenience yield
  double rho = 0.7061;       // correlation of the two factors
  double r = 0.0231;         // risk-free rate
  double lambda_q = 0.2392;  // catastrophe intensity (events/year)

  /// Throws a usage error if any invariant is violated.
  void validate() const;
};

/// State (delta, P). Prices are strictly positive.
struct StateVec {
  double delta = 0.0;
  double price = 1.0;
};

/// Admissible values of (kappa^u, mu^u, lambda^u).
struct UncertaintyBox {
  double kappa_lo = 0.8183, kappa_hi = 1.0699;
  double mu_lo = -0.1020, mu_hi = 0.0090;
  double lambda_lo = 0.1255, lambda_hi = 0.3528;

  void validate() const;
  bool degenerate() const {
    return kappa_lo == kappa_hi && mu_lo == mu_hi && lambda_lo == lambda_hi;
  }
};

/// One point of the uncertainty box.
struct ControlPoint {
  double kappa_u = 0.0;
  double mu_u = 0.0;
  double lambda_u = 0.0;
};

/// The eight vertices of the box.
std::array<ControlPoint, 8> corners(const UncertaintyBox& box);

/// Control point that reproduces the market measure.
inline ControlPoint reference_control(const ModelParams& p) {
  return {p.kappa_d, p.mu_d, p.lambda_q};
}

/// Logistic merchantable-volume curve G(t) = a - b t^exponent on
/// [lower_age, upper_age], zero below and flat above.
struct GrowthCurve {
  double a = 792.0;
  double b = 5313.0;
  double exponent = -0.5;
  double lower_age = 50.0;
  double upper_age = 103.0;

  void validate() const;
};

struct EconomicParams {
  double harvest_cost = 127.74;  // K, dollars
  double amenity = 8.0;          // A, dollars/hectare/year
  double grace_age = 50.0;       // no growth and no catastrophe before this age
  double volume_factor = 1.0;    // multiplies G before pricing
  GrowthCurve growth{};

  void validate() const;
};

/// Girsanov density generator pair for a control point.
struct Alpha {
  double a1 = 0.0;
  double a2 = 0.0;
};

/// Z components against the two independent Brownian motions.
struct ZPair {
  double z1 = 0.0;
  double z2 = 0.0;
};

enum class Extremum { Sup, Inf };

double growth(double age, const GrowthCurve& curve = {});

/// Instant harvesting revenue P * vf * G(t) - K.
double payoff(double t, const StateVec& state, const EconomicParams& econ);

/// Conditional survival probability between ages s <= t; the hazard only
/// runs after grace_age.
double survival(double s, double t, double lambda, double grace_age);

Alpha alpha(const ControlPoint& u, double delta, const ModelParams& params);

/// Generator A - (r + lambda^u 1{t >= grace}) y + alpha . z.
double driver_f(double t, const StateVec& state, double y, const ZPair& z,
                const ControlPoint& u, const EconomicParams& econ,
                const ModelParams& params);

/// Exact sup/inf of driver_f over the box, via its eight corners.
double driver_extremal(Extremum mode, double t, const StateVec& state, double y,
                       const ZPair& z, const UncertaintyBox& box,
                       const EconomicParams& econ, const ModelParams& params);

}  // namespace forestval
