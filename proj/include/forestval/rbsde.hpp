/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forestval/forward_sim.hpp"
#include "forestval/model.hpp"

namespace forestval {

enum class Scenario { Conservative, NoUncertainty, Optimistic };

std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view name);

/// What the backward solver needs to know about a reflected BSDE: the
/// obstacle, the generator, and one Euler step of the forward state.
class BackwardProblem {
 public:
  virtual ~BackwardProblem() = default;
  virtual double obstacle(double t, const StateVec& x) const = 0;
  virtual double driver(double t, const StateVec& x, double y, const ZPair& z) const = 0;
  virtual StateVec step(const StateVec& x, double dt, double g1, double g2,
                        std::uint64_t* floor_events) const = 0;
};

/// How Z is read off the one-step increments.
///  Plain:    regress y_{i+1} dW / dt on the basis.
///  Centered: regress (y_{i+1} - c(X_i)) dW / dt, with c the cube's affine fit
///            of y_{i+1}; same conditional expectation, far less noise.
enum class ZEstimator { Plain, Centered };

struct SolverConfig {
  TimeGrid grid{};
  Stratification strat{};
  int basis_order = 1;  // 0: cube mean, 1: local affine
  Scenario scenario = Scenario::NoUncertainty;
  UncertaintyBox box{};
  EconomicParams econ{};
  ModelParams params{};
  std::uint64_t seed = 42;
  double price_floor = 1e-8;
  double tol_reflect = 1e-9;
  bool keep_z = true;
  ZEstimator z_estimator = ZEstimator::Plain;
  std::uint64_t config_hash = 0;

  int basis_dim() const { return basis_order == 0 ? 1 : 3; }
  void validate() const;
};

/// The forest lease: obstacle P vf G - K, generator f / f+ / f- by scenario,
/// Euler dynamics under the market measure.
class ForestProblem final : public BackwardProblem {
 public:
  explicit ForestProblem(const SolverConfig& config);
  double obstacle(double t, const StateVec& x) const override;
  double driver(double t, const StateVec& x, double y, const ZPair& z) const override;
  StateVec step(const StateVec& x, double dt, double g1, double g2,
                std::uint64_t* floor_events) const override;

 private:
  Scenario scenario_;
  UncertaintyBox box_;
  EconomicParams econ_;
  ModelParams params_;
  ControlPoint reference_;
  double price_floor_;
};

struct SolverDiagnostics {
  std::uint64_t mean_fallbacks = 0;  // rank-deficient cubes fitted by their mean
  std::uint64_t ridge_fits = 0;      // ill-conditioned cubes fitted with a ridge
  std::uint64_t floor_events = 0;    // Euler steps that hit the price floor
  std::uint64_t euler_steps = 0;
};

using ObstacleFn = std::function<double(double t, const StateVec& x)>;

/// Per (time index, cube) regression coefficients for i = 0..N-1; i = N is the
/// terminal rule y = obstacle.
struct RegressionStack {
  TimeGrid grid{};
  Stratification strat{};
  int basis_dim = 3;
  std::uint64_t config_hash = 0;
  bool has_z = true;
  double tol_reflect = 1e-9;
  std::vector<double> by;  // [(i * J + j) * basis_dim + k]
  std::vector<double> bz;  // [((i * J + j) * 2 + c) * basis_dim + k]
  ObstacleFn obstacle;
  SolverDiagnostics diagnostics{};

  std::span<const double> coef_y(int i, int cube) const;
  std::span<const double> coef_z(int i, int cube, int component) const;
};

/// Basis at x for cube j, in cube-normalised (log P, delta) coordinates
/// clamped to [-1, 1].
void basis(const StateVec& x, int cube, const Stratification& strat, int basis_dim,
           std::span<double> out);

RegressionStack solve(const SolverConfig& config);

struct SolverSettings {
  TimeGrid grid{};
  Stratification strat{};
  int basis_order = 1;
  std::uint64_t seed = 42;
  double tol_reflect = 1e-9;
  bool keep_z = true;
  ZEstimator z_estimator = ZEstimator::Plain;
  std::uint64_t config_hash = 0;
};

/// Stratified regression one-step dynamic programming for any problem.
RegressionStack solve(const BackwardProblem& problem, const SolverSettings& settings);

/// Regression estimate b_y . phi(x) before reflection (i < N).
double continuation_value(const RegressionStack& stack, int i, const StateVec& x);
/// max(continuation, obstacle); the obstacle itself at i = N.
double recover_value(const RegressionStack& stack, int i, const StateVec& x);
ZPair recover_z(const RegressionStack& stack, int i, const StateVec& x);
/// True when the recovered value equals the obstacle within tol_reflect
/// relative to max(1, |obstacle|).
bool is_stop(const RegressionStack& stack, int i, const StateVec& x);

struct BoundarySpec {
  double price_min = 50.0, price_max = 1500.0;
  int price_points = 60;
  double delta_min = -0.5, delta_max = 0.5;
  int delta_points = 41;
};

struct BoundaryNode {
  double price, delta, payoff, value;
  bool stop;
};

struct BoundaryGrid {
  int index = 0;
  double time = 0.0;
  BoundarySpec spec{};
  std::vector<BoundaryNode> nodes;  // price-major
};

BoundaryGrid extract_boundary(const RegressionStack& stack, int i, const BoundarySpec& spec);

/// Binary dump: magic, header (N, J_p, J_d, basis dim, config hash, ...), then
/// one row per (i, j): i, j, b_y..., b_z1..., b_z2... Round-trips exactly.
void save_stack(const RegressionStack& stack, const std::string& path);
RegressionStack load_stack(const std::string& path, ObstacleFn obstacle);

}  // namespace forestval
