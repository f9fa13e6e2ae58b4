/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include "forestval/forestval.h"

#include <fmt/format.h>
#include <omp.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <string>

#include "forestval/config.hpp"
#include "forestval/csv.hpp"
#include "forestval/errors.hpp"
#include "forestval/intensity.hpp"
#include "forestval/kalman.hpp"
#include "forestval/rbsde.hpp"
#include "forestval/valuation.hpp"

struct fv_config {
  forestval::RunConfig cfg;
};

struct fv_stack {
  forestval::RegressionStack stack;
  forestval::Scenario scenario;
};

struct fv_results {
  std::vector<forestval::ScenarioOutcome> outcomes;
  std::vector<double> boundary_times;
};

namespace {

using namespace forestval;

thread_local std::string g_last_error;

fv_status fail(fv_status code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

template <typename F>
fv_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return FV_OK;
  } catch (const EstimationFailure& e) {
    return fail(FV_ERR_NUMERICAL, e.what());
  } catch (const Error& e) {
    return fail(static_cast<fv_status>(static_cast<int>(e.kind())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(FV_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(FV_ERR_INTERNAL, e.what());
  }
}

void need(const void* p, const char* what) {
  if (!p) throw usage_error(std::string(what) + " must not be null");
}

void apply_threads(const RunConfig& cfg) {
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
}

std::vector<Scenario> parse_scenarios(const char* text) {
  need(text, "scenario list");
  const std::string s(text);
  if (s == "all") return {Scenario::Conservative, Scenario::NoUncertainty, Scenario::Optimistic};
  std::vector<Scenario> out;
  for (const auto& item : csv::split(s)) out.push_back(parse_scenario(item));
  if (out.empty()) throw usage_error("empty scenario list");
  return out;
}

std::string time_label(double t) { return fmt::format("{}", t); }

std::filesystem::path ensure_dir(const char* dir) {
  need(dir, "output directory");
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw data_error("cannot create directory " + p.string() + ": " + ec.message());
  return p;
}

}  // namespace

extern "C" {

const char* fv_last_error(void) { return g_last_error.c_str(); }

const char* fv_version(void) { return "1.0.0"; }

fv_status fv_config_default(fv_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new fv_config{};
  });
}

fv_status fv_config_load(const char* path, fv_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new fv_config{load_config(path)};
  });
}

void fv_config_free(fv_config* cfg) { delete cfg; }

fv_status fv_config_apply_scale(fv_config* cfg, double scale) {
  return guarded([&] {
    need(cfg, "config");
    apply_scale(cfg->cfg, scale);
  });
}

fv_status fv_config_set_seed(fv_config* cfg, uint64_t seed) {
  return guarded([&] {
    need(cfg, "config");
    cfg->cfg.seed = seed;
    cfg->cfg.estimation.optimizer.seed = seed;
  });
}

fv_status fv_config_set_threads(fv_config* cfg, int threads) {
  return guarded([&] {
    need(cfg, "config");
    if (threads < 0) throw usage_error("threads must be >= 0");
    cfg->cfg.threads = threads;
  });
}

fv_status fv_config_use_carbon(fv_config* cfg) {
  return guarded([&] {
    need(cfg, "config");
    cfg->cfg.econ.amenity = cfg->cfg.carbon_amenity;
  });
}

fv_status fv_config_use_intensity_only(fv_config* cfg) {
  return guarded([&] {
    need(cfg, "config");
    cfg->cfg.box = intensity_only_box(cfg->cfg.box, cfg->cfg.model);
  });
}

fv_status fv_config_set_convention(fv_config* cfg, const char* name) {
  return guarded([&] {
    need(cfg, "config");
    need(name, "convention");
    cfg->cfg.convention = parse_convention(name);
  });
}

fv_status fv_config_set_stopping_paths(fv_config* cfg, size_t paths) {
  return guarded([&] {
    need(cfg, "config");
    if (paths < 1) throw usage_error("stopping paths must be >= 1");
    cfg->cfg.stopping_paths = paths;
  });
}

fv_status fv_config_hash(const fv_config* cfg, uint64_t* out) {
  return guarded([&] {
    need(cfg, "config");
    need(out, "out");
    *out = cfg->cfg.hash();
  });
}

fv_status fv_config_save(const fv_config* cfg, const char* path) {
  return guarded([&] {
    need(cfg, "config");
    need(path, "path");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error(std::string("cannot open ") + path + " for writing");
    os << cfg->cfg.dump();
  });
}

fv_status fv_config_grid(const fv_config* cfg, double* horizon, int* steps) {
  return guarded([&] {
    need(cfg, "config");
    if (horizon) *horizon = cfg->cfg.grid.horizon;
    if (steps) *steps = cfg->cfg.grid.steps;
  });
}

fv_status fv_config_boundary_times(const fv_config* cfg, double* times, size_t capacity,
                                   size_t* count) {
  return guarded([&] {
    need(cfg, "config");
    need(count, "count");
    const auto& bt = cfg->cfg.boundary_times;
    *count = bt.size();
    if (capacity > 0) need(times, "times");
    for (size_t k = 0; k < bt.size() && k < capacity; ++k) times[k] = bt[k];
  });
}

fv_status fv_estimate_futures(const fv_config* cfg, const char* panel_csv, int fix_mu,
                              const char* out_csv, fv_estimation_summary* summary) {
  return guarded([&] {
    need(cfg, "config");
    need(panel_csv, "panel path");
    need(out_csv, "output path");
    const RunConfig& rc = cfg->cfg;
    apply_threads(rc);
    const FuturesPanel panel = read_futures_csv(panel_csv, rc.estimation.drop_incomplete);
    TwoFactorTheta init;
    init.model = rc.model;
    init.noise = rc.estimation.noise_init;
    init.noise.resize(static_cast<std::size_t>(panel.contracts), init.noise.back());
    OptimizerConfig oc = rc.estimation.optimizer;
    if (fix_mu) oc.fix_mu = true;

    EstimationResult res;
    bool converged = true;
    std::string failure;
    try {
      res = estimate_two_factor(panel, init, oc);
    } catch (const EstimationFailure& e) {
      res = e.best();
      converged = false;
      failure = e.what();
    }
    std::ofstream os(out_csv);
    if (!os) throw data_error(std::string("cannot open ") + out_csv + " for writing");
    os << "parameter,estimate,std_error,ci_lo,ci_hi\n";
    const auto names = EstimationResult::names(panel.contracts);
    for (std::size_t k = 0; k < names.size(); ++k) {
      const bool fixed = res.mu_fixed && k == 3;
      os << names[k] << ',' << csv::format(res.estimates[k]) << ','
         << (fixed ? std::string("fixed") : csv::format(res.std_errors[k])) << ','
         << csv::format(res.ci_lo[k]) << ',' << csv::format(res.ci_hi[k]) << '\n';
    }
    os << "loglik," << csv::format(res.loglik) << ",,,\n";
    if (summary) {
      summary->loglik = res.loglik;
      summary->gradient_norm = res.gradient_norm;
      summary->iterations = res.iterations;
      summary->converged = converged ? 1 : 0;
      summary->hessian_ok = res.hessian_ok ? 1 : 0;
    }
    if (!converged) throw numerical_error(failure);
  });
}

fv_status fv_estimate_intensity(const fv_config* cfg, const char* counts_csv, const char* out_csv,
                                fv_intensity_summary* summary) {
  return guarded([&] {
    need(cfg, "config");
    need(counts_csv, "counts path");
    const DisasterCounts counts = read_disaster_csv(counts_csv, cfg->cfg.intensity.allow_gaps);
    const IntensityEstimate est = estimate_intensity(counts);
    const auto seg = lambda_ci_to_box_segment(est, cfg->cfg.intensity.lambda_floor);
    if (out_csv) {
      std::ofstream os(out_csv);
      if (!os) throw data_error(std::string("cannot open ") + out_csv + " for writing");
      os << "lambda,se,ci_lo,ci_hi,box_lo,box_hi,events,years\n"
         << csv::format(est.lambda) << ',' << csv::format(est.se) << ','
         << csv::format(est.ci_lo) << ',' << csv::format(est.ci_hi) << ','
         << csv::format(seg[0]) << ',' << csv::format(seg[1]) << ',' << est.events << ','
         << csv::format(est.years) << '\n';
    }
    if (summary) {
      summary->lambda = est.lambda;
      summary->se = est.se;
      summary->ci_lo = est.ci_lo;
      summary->ci_hi = est.ci_hi;
      summary->events = est.events;
      summary->years = est.years;
      summary->zero_events = est.zero_events ? 1 : 0;
    }
  });
}

fv_status fv_solve(const fv_config* cfg, const char* scenario, fv_stack** out) {
  return guarded([&] {
    need(cfg, "config");
    need(scenario, "scenario");
    need(out, "out");
    apply_threads(cfg->cfg);
    const Scenario sc = parse_scenario(scenario);
    SolverConfig sc_cfg = cfg->cfg.solver_config(sc);
    *out = new fv_stack{solve(sc_cfg), sc};
  });
}

void fv_stack_free(fv_stack* stack) { delete stack; }

fv_status fv_stack_save(const fv_stack* stack, const char* path) {
  return guarded([&] {
    need(stack, "stack");
    need(path, "path");
    save_stack(stack->stack, path);
  });
}

fv_status fv_stack_load(const fv_config* cfg, const char* path, fv_stack** out) {
  return guarded([&] {
    need(cfg, "config");
    need(path, "path");
    need(out, "out");
    const EconomicParams econ = cfg->cfg.econ;
    RegressionStack st =
        load_stack(path, [econ](double t, const StateVec& x) { return payoff(t, x, econ); });
    // The hash covers every parameter except the scenario, which only changes the
    // driver; the caller tracks which scenario a file belongs to.
    if (st.config_hash != cfg->cfg.hash())
      throw data_error(std::string(path) + ": stack was solved under a different configuration");
    *out = new fv_stack{std::move(st), Scenario::NoUncertainty};
  });
}

fv_status fv_stack_value(const fv_stack* stack, int time_index, double delta, double price,
                         double* value) {
  return guarded([&] {
    need(stack, "stack");
    need(value, "value");
    if (!(price > 0.0)) throw usage_error("price must be > 0");
    *value = recover_value(stack->stack, time_index, {delta, price});
  });
}

fv_status fv_stack_is_stop(const fv_stack* stack, int time_index, double delta, double price,
                           int* stop) {
  return guarded([&] {
    need(stack, "stack");
    need(stop, "stop");
    if (time_index < 0 || time_index > stack->stack.grid.steps)
      throw usage_error("time index out of range");
    *stop = is_stop(stack->stack, time_index, {delta, price}) ? 1 : 0;
  });
}

fv_status fv_stack_write_boundaries(const fv_config* cfg, const fv_stack* stack,
                                    const char* scenario, const double* times, size_t n_times,
                                    const char* out_dir) {
  return guarded([&] {
    need(cfg, "config");
    need(stack, "stack");
    need(scenario, "scenario");
    if (n_times > 0) need(times, "times");
    const Scenario sc = parse_scenario(scenario);
    std::vector<int> idx;
    for (size_t k = 0; k < n_times; ++k) {
      const int i = stack->stack.grid.index_of(times[k]);
      if (i < 1 || i > stack->stack.grid.steps - 1)
        throw usage_error(fmt::format("boundary time {} must lie strictly inside the grid",
                                      times[k]));
      idx.push_back(i);
    }
    if (idx.empty()) return;
    const auto dir = ensure_dir(out_dir);
    for (size_t k = 0; k < idx.size(); ++k) {
      const BoundaryGrid g = extract_boundary(stack->stack, idx[k], cfg->cfg.boundary);
      write_boundary_csv(g, (dir / fmt::format("boundary_{}_{}.csv", time_label(times[k]),
                                               to_string(sc)))
                                .string());
    }
  });
}

fv_status fv_run_scenarios(const fv_config* cfg, const char* scenarios, fv_results** out) {
  return guarded([&] {
    need(cfg, "config");
    need(out, "out");
    apply_threads(cfg->cfg);
    ScenarioRunSpec spec = cfg->cfg.scenario_spec(parse_scenarios(scenarios));
    spec.keep_stopping_samples = true;
    auto outcomes = run_scenarios(spec);
    *out = new fv_results{std::move(outcomes), spec.boundary_times};
  });
}

void fv_results_free(fv_results* res) { delete res; }

size_t fv_results_count(const fv_results* res) { return res ? res->outcomes.size() : 0; }

fv_status fv_results_get(const fv_results* res, size_t index, fv_scenario_summary* out) {
  return guarded([&] {
    need(res, "results");
    need(out, "out");
    if (index >= res->outcomes.size()) throw usage_error("result index out of range");
    const auto& o = res->outcomes[index];
    std::memset(out, 0, sizeof(*out));
    const auto name = to_string(o.scenario);
    std::memcpy(out->scenario, name.data(), std::min(name.size(), sizeof(out->scenario) - 1));
    out->mean_tau = o.mean_tau;
    out->std_tau = o.std_tau;
    out->stopping_paths = o.stopping_paths;
    out->mean = o.report.mean;
    out->std = o.report.std;
    out->ci_lo = o.report.ci_lo;
    out->ci_hi = o.report.ci_hi;
    out->div = o.report.div;
    out->runs = o.report.runs;
    out->paths_per_run = o.report.paths_per_run;
    out->mean_fallbacks = o.diagnostics.mean_fallbacks;
    out->ridge_fits = o.diagnostics.ridge_fits;
    out->floor_events = o.diagnostics.floor_events;
  });
}

fv_status fv_results_write(const fv_results* res, const char* out_dir) {
  return guarded([&] {
    need(res, "results");
    const auto dir = ensure_dir(out_dir);
    write_stopping_times_csv(res->outcomes, (dir / "stopping_times.csv").string());
    write_valuation_csv(res->outcomes, (dir / "valuation.csv").string());
    write_report_csv(res->outcomes, (dir / "report.csv").string());
    write_harvest_summary_csv(res->outcomes, (dir / "harvest_summary.csv").string());
    for (const auto& o : res->outcomes)
      for (std::size_t k = 0; k < o.boundaries.size(); ++k)
        write_boundary_csv(o.boundaries[k],
                           (dir / fmt::format("boundary_{}_{}.csv",
                                              time_label(res->boundary_times[k]),
                                              to_string(o.scenario)))
                               .string());
  });
}

fv_status fv_simulate(const fv_config* cfg, size_t n_paths, int stride, const char* out_csv) {
  return guarded([&] {
    need(cfg, "config");
    need(out_csv, "output path");
    if (stride < 1) throw usage_error("stride must be >= 1");
    const RunConfig& rc = cfg->cfg;
    apply_threads(rc);
    const PathSet ps =
        simulate_paths(n_paths, rc.grid, rc.initial, rc.model, rc.seed, rc.price_floor);
    std::ofstream os(out_csv);
    if (!os) throw data_error(std::string("cannot open ") + out_csv + " for writing");
    os << "path,step,t,price,delta\n";
    for (std::size_t p = 0; p < ps.n_paths; ++p) {
      const auto path = ps.path(p);
      for (int i = 0; i <= rc.grid.steps; i += stride)
        os << p << ',' << i << ',' << csv::format(rc.grid.time(i)) << ','
           << csv::format(path[i].price) << ',' << csv::format(path[i].delta) << '\n';
    }
  });
}

}  // extern "C"
