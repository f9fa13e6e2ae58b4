/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "forestval/forward_sim.hpp"
#include "forestval/kalman.hpp"
#include "forestval/model.hpp"
#include "forestval/rbsde.hpp"
#include "forestval/valuation.hpp"

namespace forestval {

struct EstimationSettings {
  OptimizerConfig optimizer{};
  std::vector<double> noise_init{0.0364, 0.0150, 0.0238, 0.0137, 0.0224, 0.0083};
  bool drop_incomplete = false;
};

struct IntensitySettings {
  bool allow_gaps = false;
  double lambda_floor = 1e-6;
};

/// Every tunable of every module. Loaded from an INI-style file
/// (`[section]`, `key = value`, `;` or `#` comment lines).
struct RunConfig {
  ModelParams model{};
  UncertaintyBox box{};
  EconomicParams econ{};
  double carbon_amenity = 47.54;
  TimeGrid grid{};
  StateVec initial{-0.01, 600.0};
  Stratification strat{};
  int basis_order = 1;
  double price_floor = 1e-8;
  double tol_reflect = 1e-9;
  ZEstimator z_estimator = ZEstimator::Plain;
  std::size_t stopping_paths = 100000;
  int runs = 10;
  std::size_t paths_per_run = 1000;
  ValuationConvention convention = ValuationConvention::NoGraceCredit;
  std::vector<double> boundary_times{50.0, 70.0, 100.0};
  BoundarySpec boundary{};
  EstimationSettings estimation{};
  IntensitySettings intensity{};
  std::uint64_t seed = 42;
  int threads = 0;  // 0: OpenMP default

  void validate() const;
  /// Canonical text form; load_config_text(dump()) reproduces *this.
  std::string dump() const;
  /// FNV-1a of dump().
  std::uint64_t hash() const;
  /// Solver inputs for one scenario.
  SolverConfig solver_config(Scenario scenario) const;
  ScenarioRunSpec scenario_spec(const std::vector<Scenario>& scenarios) const;
};

RunConfig load_config(const std::string& path);
RunConfig load_config_text(const std::string& text, const std::string& origin = "<text>");

/// Shrinks the run by factor s in (0, 1]: N and path counts by s, cells per
/// dimension by 2^{log10 s}, samples per cube by 4^{log10 s}.
void apply_scale(RunConfig& cfg, double s);

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace forestval
