/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "forestval/model.hpp"

namespace forestval {

/// Weekly panel of futures prices and times to maturity, one column pair per
/// contract, dates ascending.
struct FuturesPanel {
  std::vector<std::string> dates;
  int contracts = 6;
  std::vector<double> prices;  // [date * contracts + j]
  std::vector<double> ttm;     // years

  std::size_t size() const { return dates.size(); }
  double price(std::size_t d, int j) const { return prices[d * contracts + j]; }
  double maturity(std::size_t d, int j) const { return ttm[d * contracts + j]; }
  void validate() const;
};

/// Reads `date,price_f1,ttm_f1,...`. Rows with empty cells are dropped when
/// drop_incomplete is set and rejected otherwise.
FuturesPanel read_futures_csv(const std::string& path, bool drop_incomplete = false);
void write_futures_csv(const FuturesPanel& panel, const std::string& path);

/// Parameters the filter needs: the model block (sigma_p, sigma_d, kappa_d,
/// mu_d, rho and the fixed r) and one measurement noise sd per contract.
struct TwoFactorTheta {
  ModelParams model{};
  std::vector<double> noise{0.0364, 0.0150, 0.0238, 0.0137, 0.0224, 0.0083};
};

/// Deterministic log-futures intercept D(tau).
double futures_intercept(double tau, const ModelParams& params);
/// Loading of log F on delta: -(1 - e^{-kappa tau}) / kappa.
double futures_delta_loading(double tau, double kappa);
double futures_price(const StateVec& state, double tau, const ModelParams& params);

struct KalmanState {
  Eigen::Vector2d mean;  // (delta, log P)
  Eigen::Matrix2d cov;
};

struct KalmanRun {
  double loglik = 0.0;
  std::vector<KalmanState> filtered;  // only filled on request
};

constexpr double kWeeklyDt = 1.0 / 52.0;

KalmanRun run_kalman(const FuturesPanel& panel, const TwoFactorTheta& theta,
                     double dt = kWeeklyDt, bool keep_states = false);
/// Gaussian log-likelihood of the panel; -inf for inadmissible candidates.
double kalman_loglik(const FuturesPanel& panel, const TwoFactorTheta& theta,
                     double dt = kWeeklyDt);

struct OptimizerConfig {
  int starts = 5;
  int max_iterations = 4000;
  bool fix_mu = false;
  double fixed_mu = 0.0;
  double dt = kWeeklyDt;
  double start_spread = 0.15;  // sd of start perturbations, transformed scale
  double gradient_tolerance = 0.05;
  std::uint64_t seed = 42;
  bool skip_simplex = false;  // straight to quasi-Newton (warm starts)
};

/// Point estimates, standard errors and 95% intervals in the order
/// (sigma_p, sigma_d, kappa_d, mu_d, rho, d_1..d_K).
struct EstimationResult {
  TwoFactorTheta theta{};
  std::vector<double> estimates;
  std::vector<double> std_errors;
  std::vector<double> ci_lo, ci_hi;
  double loglik = 0.0;
  bool mu_fixed = false;
  bool hessian_ok = true;
  int iterations = 0;
  int starts_used = 0;
  double gradient_norm = 0.0;

  static std::vector<std::string> names(int contracts);
};

/// Thrown on non-convergence; carries the best point found.
class EstimationFailure : public std::runtime_error {
 public:
  EstimationFailure(const std::string& what, EstimationResult best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const EstimationResult& best() const { return best_; }

 private:
  EstimationResult best_;
};

EstimationResult estimate_two_factor(const FuturesPanel& panel, const TwoFactorTheta& init,
                                     const OptimizerConfig& config = {});

/// kappa bounds from the 95% interval of kappa_d; mu and lambda bounds as given.
UncertaintyBox build_uncertainty_box(const EstimationResult& result,
                                     std::array<double, 2> mu_range,
                                     std::array<double, 2> lambda_ci);

/// Panel drawn exactly from the filter's state-space model. Maturities follow
/// a rolling pattern around 0.042 + 0.0834 j years.
FuturesPanel synthetic_panel(const TwoFactorTheta& theta, std::size_t dates, std::uint64_t seed,
                             double dt = kWeeklyDt, double initial_price = 350.0);

}  // namespace forestval
