/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include "forestval/valuation.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "forestval/csv.hpp"
#include "forestval/errors.hpp"

namespace forestval {

double StoppingSample::mean_tau() const {
  if (tau.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(tau.begin(), tau.end(), 0.0) / static_cast<double>(tau.size());
}

double StoppingSample::std_tau() const {
  if (tau.size() < 2) return 0.0;
  const double m = mean_tau();
  double ss = 0.0;
  for (double t : tau) ss += (t - m) * (t - m);
  return std::sqrt(ss / static_cast<double>(tau.size() - 1));
}

int first_stop_index(const RegressionStack& stack, std::span<const StateVec> path) {
  const int n = stack.grid.steps;
  if (path.size() != static_cast<std::size_t>(n) + 1)
    throw usage_error("stopping times: path and stack grids differ");
  for (int i = 0; i < n; ++i)
    if (is_stop(stack, i, path[i])) return i;
  return n;
}

StoppingSample estimate_stopping_times(const RegressionStack& stack, const PathSet& paths,
                                       Scenario scenario) {
  if (paths.grid.steps != stack.grid.steps || paths.grid.horizon != stack.grid.horizon)
    throw usage_error("stopping times: path and stack grids differ");
  StoppingSample out;
  out.scenario = scenario;
  out.tau.resize(paths.n_paths);
  out.at_stop.resize(paths.n_paths);
  out.floor_events = paths.floor_events;
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < static_cast<std::int64_t>(paths.n_paths); ++p) {
    const auto path = paths.path(static_cast<std::size_t>(p));
    const int i = first_stop_index(stack, path);
    out.tau[p] = stack.grid.time(i);
    out.at_stop[p] = path[i];
  }
  return out;
}

StoppingSample estimate_stopping_times(const RegressionStack& stack, const PathSimulator& sim,
                                       std::size_t n_paths, Scenario scenario) {
  if (sim.grid().steps != stack.grid.steps || sim.grid().horizon != stack.grid.horizon)
    throw usage_error("stopping times: path and stack grids differ");
  StoppingSample out;
  out.scenario = scenario;
  out.tau.resize(n_paths);
  out.at_stop.resize(n_paths);
  const auto len = static_cast<std::size_t>(stack.grid.steps) + 1;
  std::uint64_t floors = 0;
#pragma omp parallel reduction(+ : floors)
  {
    std::vector<StateVec> buffer(len);
#pragma omp for schedule(static)
    for (std::int64_t p = 0; p < static_cast<std::int64_t>(n_paths); ++p) {
      floors += sim.simulate(static_cast<std::uint64_t>(p), buffer);
      const int i = first_stop_index(stack, buffer);
      out.tau[p] = stack.grid.time(i);
      out.at_stop[p] = buffer[i];
    }
  }
  out.floor_events = floors;
  return out;
}

std::string_view to_string(ValuationConvention c) {
  return c == ValuationConvention::NoGraceCredit ? "paper" : "grace-consistent";
}

ValuationConvention parse_convention(std::string_view name) {
  if (name == "paper") return ValuationConvention::NoGraceCredit;
  if (name == "grace-consistent") return ValuationConvention::GraceConsistent;
  throw usage_error("unknown valuation convention '" + std::string(name) +
                    "' (expected paper|grace-consistent)");
}

double path_lease_value(double tau, const StateVec& x, const EconomicParams& econ,
                        const ModelParams& params, ValuationConvention convention) {
  const double g = econ.grace_age;
  if (tau < g)
    throw numerical_error(fmt::format(
        "harvest at age {} precedes the grace age {}: stopping rule is defective", tau, g));
  const double r = params.r, lam = params.lambda_q, a = econ.amenity;
  const double rl = r + lam;
  const double harvest = std::exp((g - tau) * rl - g * r) * payoff(tau, x, econ);
  double hazard = a * (std::exp(-g * rl) - std::exp(-rl * tau)) / rl;
  if (convention == ValuationConvention::GraceConsistent) hazard *= std::exp(g * lam);
  const double safe = r == 0.0 ? a * g : -a * std::expm1(-g * r) / r;
  return harvest + hazard + safe;
}

double lease_value(const StoppingSample& sample, const EconomicParams& econ,
                   const ModelParams& params, ValuationConvention convention) {
  if (sample.tau.empty()) throw usage_error("lease_value: empty stopping sample");
  const auto n = static_cast<std::int64_t>(sample.tau.size());
  std::vector<double> values(sample.tau.size());
  bool bad = false;
#pragma omp parallel for schedule(static) reduction(|| : bad)
  for (std::int64_t p = 0; p < n; ++p) {
    if (sample.tau[p] < econ.grace_age) {
      bad = true;
      continue;
    }
    values[p] = path_lease_value(sample.tau[p], sample.at_stop[p], econ, params, convention);
  }
  if (bad) {
    for (std::int64_t p = 0; p < n; ++p)
      path_lease_value(sample.tau[p], sample.at_stop[p], econ, params, convention);
  }
  // Serial sum: the result does not depend on the thread schedule.
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
}

ValuationReport summarize_runs(Scenario scenario, std::vector<double> run_estimates,
                               std::size_t paths_per_run, std::uint64_t seed) {
  if (run_estimates.empty()) throw usage_error("valuation: need at least one run");
  ValuationReport rep;
  rep.scenario = scenario;
  rep.runs = static_cast<int>(run_estimates.size());
  rep.paths_per_run = paths_per_run;
  rep.seed = seed;
  rep.mean = std::accumulate(run_estimates.begin(), run_estimates.end(), 0.0) / rep.runs;
  double ss = 0.0;
  for (double v : run_estimates) ss += (v - rep.mean) * (v - rep.mean);
  rep.std = rep.runs > 1 ? std::sqrt(ss / (rep.runs - 1)) : 0.0;
  const double half = 1.96 * rep.std / std::sqrt(static_cast<double>(rep.runs));
  rep.ci_lo = rep.mean - half;
  rep.ci_hi = rep.mean + half;
  rep.div = std::numeric_limits<double>::quiet_NaN();
  rep.run_estimates = std::move(run_estimates);
  return rep;
}

double div_ratio(double z1, double z2) {
  if (z1 == 0.0) throw numerical_error("DIV undefined: reference lease value is zero");
  return (z2 - z1) / z1;
}

UncertaintyBox intensity_only_box(const UncertaintyBox& base, const ModelParams& params) {
  base.validate();
  UncertaintyBox box = base;
  box.kappa_lo = box.kappa_hi = params.kappa_d;
  box.mu_lo = box.mu_hi = params.mu_d;
  return box;
}

std::vector<ScenarioOutcome> run_scenarios(const ScenarioRunSpec& spec) {
  if (spec.scenarios.empty()) throw usage_error("run_scenarios: no scenarios requested");
  if (spec.runs < 1) throw usage_error("run_scenarios: runs must be >= 1");
  if (spec.paths_per_run < 1 || spec.stopping_paths < 1)
    throw usage_error("run_scenarios: path counts must be >= 1");
  spec.solver.validate();
  const TimeGrid& grid = spec.solver.grid;
  std::vector<int> boundary_index;
  for (double t : spec.boundary_times) {
    const int i = grid.index_of(t);
    if (i < 1 || i > grid.steps - 1)
      throw usage_error(fmt::format("boundary time {} must lie strictly inside the grid", t));
    boundary_index.push_back(i);
  }

  std::vector<ScenarioOutcome> outcomes;
  for (Scenario sc : spec.scenarios) {
    SolverConfig cfg = spec.solver;
    cfg.scenario = sc;
    // Z is only needed inside the backward pass.
    cfg.keep_z = false;
    const RegressionStack stack = solve(cfg);

    ScenarioOutcome out;
    out.scenario = sc;
    out.diagnostics = stack.diagnostics;

    const PathSimulator stop_sim(grid, spec.initial, cfg.params, cfg.seed, Stream::StoppingPaths,
                                 0, cfg.price_floor);
    StoppingSample stops = estimate_stopping_times(stack, stop_sim, spec.stopping_paths, sc);
    out.mean_tau = stops.mean_tau();
    out.std_tau = stops.std_tau();
    out.stopping_paths = stops.size();
    if (spec.keep_stopping_samples) out.stopping = std::move(stops);

    std::vector<double> estimates;
    for (int run = 0; run < spec.runs; ++run) {
      const PathSimulator sim(grid, spec.initial, cfg.params, cfg.seed, Stream::ValuationPaths,
                              static_cast<std::uint64_t>(run), cfg.price_floor);
      const StoppingSample s = estimate_stopping_times(stack, sim, spec.paths_per_run, sc);
      estimates.push_back(lease_value(s, cfg.econ, cfg.params, spec.convention));
    }
    out.report = summarize_runs(sc, std::move(estimates), spec.paths_per_run, cfg.seed);

    for (int i : boundary_index) out.boundaries.push_back(extract_boundary(stack, i, spec.boundary));
    outcomes.push_back(std::move(out));
  }

  for (const auto& ref : outcomes) {
    if (ref.scenario != Scenario::NoUncertainty) continue;
    for (auto& o : outcomes) o.report.div = div_ratio(ref.report.mean, o.report.mean);
  }
  return outcomes;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw data_error("cannot open " + path + " for writing");
  return os;
}

std::string num(double v) { return std::isnan(v) ? std::string("nan") : csv::format(v); }

}  // namespace

void write_stopping_times_csv(const std::vector<ScenarioOutcome>& outcomes,
                              const std::string& path) {
  auto os = open_out(path);
  os << "scenario,path,tau_years,price_at_tau,delta_at_tau\n";
  for (const auto& o : outcomes) {
    const auto& s = o.stopping;
    for (std::size_t p = 0; p < s.size(); ++p)
      os << to_string(o.scenario) << ',' << p << ',' << num(s.tau[p]) << ','
         << num(s.at_stop[p].price) << ',' << num(s.at_stop[p].delta) << '\n';
  }
}

void write_valuation_csv(const std::vector<ScenarioOutcome>& outcomes, const std::string& path) {
  auto os = open_out(path);
  os << "scenario,run,estimate\n";
  for (const auto& o : outcomes)
    for (std::size_t r = 0; r < o.report.run_estimates.size(); ++r)
      os << to_string(o.scenario) << ',' << r << ',' << num(o.report.run_estimates[r]) << '\n';
}

void write_report_csv(const std::vector<ScenarioOutcome>& outcomes, const std::string& path) {
  auto os = open_out(path);
  os << "scenario,mean,std,ci_lo,ci_hi,div\n";
  for (const auto& o : outcomes) {
    const auto& r = o.report;
    os << to_string(o.scenario) << ',' << num(r.mean) << ',' << num(r.std) << ','
       << num(r.ci_lo) << ',' << num(r.ci_hi) << ',' << num(r.div) << '\n';
  }
}

void write_harvest_summary_csv(const std::vector<ScenarioOutcome>& outcomes,
                               const std::string& path) {
  auto os = open_out(path);
  os << "scenario,mean_tau,std_tau,se_tau,paths\n";
  for (const auto& o : outcomes) {
    const double se = o.std_tau / std::sqrt(static_cast<double>(std::max<std::size_t>(
                                      o.stopping_paths, 1)));
    os << to_string(o.scenario) << ',' << num(o.mean_tau) << ',' << num(o.std_tau) << ','
       << num(se) << ',' << o.stopping_paths << '\n';
  }
}

void write_boundary_csv(const BoundaryGrid& grid, const std::string& path) {
  auto os = open_out(path);
  os << "p_grid,delta_grid,payoff,value,stop_flag\n";
  for (const auto& n : grid.nodes)
    os << num(n.price) << ',' << num(n.delta) << ',' << num(n.payoff) << ',' << num(n.value)
       << ',' << (n.stop ? 1 : 0) << '\n';
}

}  // namespace forestval
