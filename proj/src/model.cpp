/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include "forestval/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "forestval/errors.hpp"

namespace forestval {

void ModelParams::validate() const {
  if (!(sigma_p > 0.0)) throw usage_error("model: sigma_p must be > 0");
  if (!(sigma_d > 0.0)) throw usage_error("model: sigma_d must be > 0");
  if (!(kappa_d > 0.0)) throw usage_error("model: kappa_d must be > 0");
  if (!(lambda_q > 0.0)) throw usage_error("model: lambda_q must be > 0");
  if (!(rho > -1.0 && rho < 1.0)) throw usage_error("model: rho must lie in (-1, 1)");
  if (!std::isfinite(mu_d) || !std::isfinite(r))
    throw usage_error("model: mu_d and r must be finite");
}

void UncertaintyBox::validate() const {
  if (!(kappa_lo <= kappa_hi && mu_lo <= mu_hi && lambda_lo <= lambda_hi))
    throw usage_error("box: each lower bound must not exceed its upper bound");
  if (!(kappa_lo > 0.0)) throw usage_error("box: kappa_lo must be > 0");
  if (!(lambda_lo > 0.0)) throw usage_error("box: lambda_lo must be > 0");
}

void GrowthCurve::validate() const {
  if (!(lower_age > 0.0 && lower_age <= upper_age))
    throw usage_error("growth: need 0 < lower_age <= upper_age");
}

void EconomicParams::validate() const {
  if (!(harvest_cost >= 0.0)) throw usage_error("economics: harvest_cost must be >= 0");
  if (!(grace_age >= 0.0)) throw usage_error("economics: grace_age must be >= 0");
  if (!(volume_factor > 0.0)) throw usage_error("economics: volume_factor must be > 0");
  if (!std::isfinite(amenity)) throw usage_error("economics: amenity must be finite");
  growth.validate();
}

std::array<ControlPoint, 8> corners(const UncertaintyBox& box) {
  std::array<ControlPoint, 8> out{};
  for (int c = 0; c < 8; ++c) {
    out[c] = {(c & 1) ? box.kappa_hi : box.kappa_lo, (c & 2) ? box.mu_hi : box.mu_lo,
              (c & 4) ? box.lambda_hi : box.lambda_lo};
  }
  return out;
}

double growth(double age, const GrowthCurve& curve) {
  if (age < curve.lower_age) return 0.0;
  const double t = std::min(age, curve.upper_age);
  return curve.a - curve.b * std::pow(t, curve.exponent);
}

double payoff(double t, const StateVec& state, const EconomicParams& econ) {
  return state.price * econ.volume_factor * growth(t, econ.growth) - econ.harvest_cost;
}

double survival(double s, double t, double lambda, double grace_age) {
  if (s > t) throw usage_error("survival: need s <= t");
  const double exposed = std::max(t - grace_age, 0.0) - std::max(s - grace_age, 0.0);
  return std::exp(-lambda * exposed);
}

namespace {

// Shared by alpha/driver_f/driver_extremal so every route evaluates the
// generator with the same floating-point expression.
inline Alpha alpha_with(const ControlPoint& u, double delta, const ModelParams& params,
                        double rho_complement) {
  const double drift_gap = u.kappa_u * u.mu_u - params.kappa_d * params.mu_d -
                           (u.kappa_u - params.kappa_d) * delta;
  const double a1 = drift_gap / params.sigma_d;
  const double a2 = -params.rho * a1 / rho_complement;
  return {a1, a2};
}

inline double driver_with(double t, const StateVec& state, double y, const ZPair& z,
                          const ControlPoint& u, const EconomicParams& econ,
                          const ModelParams& params, double rho_complement) {
  const Alpha a = alpha_with(u, state.delta, params, rho_complement);
  const double hazard = t >= econ.grace_age ? u.lambda_u : 0.0;
  return econ.amenity - (params.r + hazard) * y + a.a1 * z.z1 + a.a2 * z.z2;
}

}  // namespace

Alpha alpha(const ControlPoint& u, double delta, const ModelParams& params) {
  return alpha_with(u, delta, params, std::sqrt(1.0 - params.rho * params.rho));
}

double driver_f(double t, const StateVec& state, double y, const ZPair& z,
                const ControlPoint& u, const EconomicParams& econ,
                const ModelParams& params) {
  return driver_with(t, state, y, z, u, econ, params,
                     std::sqrt(1.0 - params.rho * params.rho));
}

double driver_extremal(Extremum mode, double t, const StateVec& state, double y,
                       const ZPair& z, const UncertaintyBox& box,
                       const EconomicParams& econ, const ModelParams& params) {
  const double rc = std::sqrt(1.0 - params.rho * params.rho);
  double best = mode == Extremum::Sup ? -std::numeric_limits<double>::infinity()
                                      : std::numeric_limits<double>::infinity();
  for (const auto& u : corners(box)) {
    const double v = driver_with(t, state, y, z, u, econ, params, rc);
    best = mode == Extremum::Sup ? std::max(best, v) : std::min(best, v);
  }
  return best;
}

}  // namespace forestval
