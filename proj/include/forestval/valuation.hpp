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
#include "forestval/model.hpp"
#include "forestval/rbsde.hpp"

namespace forestval {

/// Per-path harvest times under one scenario's stopping rule.
struct StoppingSample {
  Scenario scenario = Scenario::NoUncertainty;
  std::vector<double> tau;        // years, on the grid; T if never stopped
  std::vector<StateVec> at_stop;  // state at tau
  std::uint64_t floor_events = 0;

  std::size_t size() const { return tau.size(); }
  double mean_tau() const;
  double std_tau() const;
};

/// First grid index where the recovered value touches the obstacle.
int first_stop_index(const RegressionStack& stack, std::span<const StateVec> path);

StoppingSample estimate_stopping_times(const RegressionStack& stack, const PathSet& paths,
                                       Scenario scenario);
/// Streaming form: paths 0..n_paths-1 of the simulator, never all in memory.
StoppingSample estimate_stopping_times(const RegressionStack& stack, const PathSimulator& sim,
                                       std::size_t n_paths, Scenario scenario);

/// Survival convention for the amenity stream between the grace age and tau.
///  NoGraceCredit:   amenity hazard term without the grace credit e^{grace lambda}.
///  GraceConsistent: amenity and harvest revenue share e^{-lambda (t - grace)+}.
enum class ValuationConvention { NoGraceCredit, GraceConsistent };

std::string_view to_string(ValuationConvention c);
ValuationConvention parse_convention(std::string_view name);

/// Discounted, survival-weighted value of harvesting at tau in state x plus the
/// amenity stream up to tau, with lambda = params.lambda_q.
double path_lease_value(double tau, const StateVec& x, const EconomicParams& econ,
                        const ModelParams& params, ValuationConvention convention);

/// Mean of path_lease_value over the sample. Throws a numerical error if any
/// tau lies before the grace age.
double lease_value(const StoppingSample& sample, const EconomicParams& econ,
                   const ModelParams& params, ValuationConvention convention);

struct ValuationReport {
  Scenario scenario = Scenario::NoUncertainty;
  double mean = 0.0;
  double std = 0.0;  // across runs
  double ci_lo = 0.0, ci_hi = 0.0;
  double div = 0.0;  // vs NoUncertainty; NaN when that scenario was not run
  int runs = 0;
  std::size_t paths_per_run = 0;
  std::uint64_t seed = 0;
  std::vector<double> run_estimates;
};

/// mean, std and CI = mean +- 1.96 std / sqrt(runs) from per-run estimates.
ValuationReport summarize_runs(Scenario scenario, std::vector<double> run_estimates,
                               std::size_t paths_per_run, std::uint64_t seed);

/// (z2 - z1) / z1.
double div_ratio(double z1, double z2);

/// Collapses the kappa and mu segments to the reference point.
UncertaintyBox intensity_only_box(const UncertaintyBox& base, const ModelParams& params);

struct ScenarioRunSpec {
  SolverConfig solver{};  // scenario field is overwritten per scenario
  std::vector<Scenario> scenarios{Scenario::Conservative, Scenario::NoUncertainty,
                                  Scenario::Optimistic};
  StateVec initial{-0.01, 600.0};
  std::size_t stopping_paths = 100000;
  int runs = 10;
  std::size_t paths_per_run = 1000;
  ValuationConvention convention = ValuationConvention::NoGraceCredit;
  std::vector<double> boundary_times{50.0, 70.0, 100.0};
  BoundarySpec boundary{};
  bool keep_stopping_samples = false;
};

struct ScenarioOutcome {
  Scenario scenario = Scenario::NoUncertainty;
  double mean_tau = 0.0, std_tau = 0.0;
  std::size_t stopping_paths = 0;
  StoppingSample stopping;  // filled only when requested
  ValuationReport report{};
  std::vector<BoundaryGrid> boundaries;
  SolverDiagnostics diagnostics{};
};

/// Solves one scenario at a time (only one stack alive), with common random
/// numbers: solver draws, stopping paths and valuation paths are shared
/// across scenarios. DIV is filled when NoUncertainty is among the scenarios.
std::vector<ScenarioOutcome> run_scenarios(const ScenarioRunSpec& spec);

// CSV artifacts.
void write_stopping_times_csv(const std::vector<ScenarioOutcome>& outcomes,
                              const std::string& path);
void write_valuation_csv(const std::vector<ScenarioOutcome>& outcomes, const std::string& path);
void write_report_csv(const std::vector<ScenarioOutcome>& outcomes, const std::string& path);
void write_harvest_summary_csv(const std::vector<ScenarioOutcome>& outcomes,
                               const std::string& path);
void write_boundary_csv(const BoundaryGrid& grid, const std::string& path);

}  // namespace forestval
