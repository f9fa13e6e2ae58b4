/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
// Command-line front end. Talks to the library only through forestval.h.
#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "forestval/forestval.h"

namespace {

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string scenario = "all";
  bool carbon = false;
  bool intensity_only = false;
  double scale = 1.0;
  std::string out_dir = "out";
  std::string convention;
  int threads = -1;

  std::string input;
  bool fix_mu = false;
  std::string times;
  bool times_set = false;
  std::string stack_dir;
  std::size_t paths = 100;
  int stride = 20;
};

class Failure {
 public:
  explicit Failure(fv_status s) : status(s) {}
  fv_status status;
};

void check(fv_status s, const std::string& context) {
  if (s == FV_OK) return;
  std::fprintf(stderr, "forestval: %s: %s\n", context.c_str(), fv_last_error());
  throw Failure(s);
}

using ConfigPtr = std::unique_ptr<fv_config, decltype(&fv_config_free)>;

ConfigPtr make_config(const Options& o) {
  fv_config* raw = nullptr;
  if (o.config.empty())
    check(fv_config_default(&raw), "default configuration");
  else
    check(fv_config_load(o.config.c_str(), &raw), "loading " + o.config);
  ConfigPtr cfg(raw, &fv_config_free);
  if (o.scale != 1.0) check(fv_config_apply_scale(cfg.get(), o.scale), "--scale");
  if (o.seed_set) check(fv_config_set_seed(cfg.get(), o.seed), "--seed");
  if (o.carbon) check(fv_config_use_carbon(cfg.get()), "--carbon");
  if (o.intensity_only) check(fv_config_use_intensity_only(cfg.get()), "--intensity-only");
  if (!o.convention.empty())
    check(fv_config_set_convention(cfg.get(), o.convention.c_str()), "--valuation-convention");
  if (o.threads >= 0) check(fv_config_set_threads(cfg.get(), o.threads), "--threads");
  return cfg;
}

std::vector<std::string> scenario_names(const std::string& s) {
  if (s == "all") return {"conservative", "none", "optimistic"};
  return {s};
}

std::string out_path(const Options& o, const std::string& file) {
  std::error_code ec;
  std::filesystem::create_directories(o.out_dir, ec);
  if (ec) {
    std::fprintf(stderr, "forestval: cannot create %s: %s\n", o.out_dir.c_str(),
                 ec.message().c_str());
    throw Failure(FV_ERR_DATA);
  }
  return (std::filesystem::path(o.out_dir) / file).string();
}

std::vector<double> parse_times(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("");
    } catch (const std::exception&) {
      std::fprintf(stderr, "forestval: --times: '%s' is not a number\n", item.c_str());
      throw Failure(FV_ERR_USAGE);
    }
  }
  return out;
}

void cmd_estimate_futures(const Options& o) {
  auto cfg = make_config(o);
  fv_estimation_summary s{};
  const std::string out = out_path(o, "estimation.csv");
  const fv_status st = fv_estimate_futures(cfg.get(), o.input.c_str(), o.fix_mu ? 1 : 0,
                                           out.c_str(), &s);
  if (st == FV_ERR_NUMERICAL)
    std::fprintf(stderr, "best point written to %s (log-likelihood %.4f)\n", out.c_str(),
                 s.loglik);
  check(st, "estimate-futures");
  std::printf("log-likelihood %.4f, %d iterations, gradient norm %.3g%s\n", s.loglik,
              s.iterations, s.gradient_norm,
              s.hessian_ok ? "" : " (Hessian not positive definite; SEs approximate)");
  std::printf("wrote %s\n", out.c_str());
}

void cmd_estimate_intensity(const Options& o) {
  auto cfg = make_config(o);
  fv_intensity_summary s{};
  const std::string out = out_path(o, "intensity.csv");
  check(fv_estimate_intensity(cfg.get(), o.input.c_str(), out.c_str(), &s),
        "estimate-intensity");
  if (s.zero_events)
    std::fprintf(stderr, "warning: no events recorded; lambda = 0 is not a valid intensity\n");
  std::printf("lambda %.4f per year (SE %.4f), 95%% CI [%.4f, %.4f], %lld events over %.2f "
              "years\n",
              s.lambda, s.se, s.ci_lo, s.ci_hi, static_cast<long long>(s.events), s.years);
  std::printf("wrote %s\n", out.c_str());
}

void cmd_solve(const Options& o) {
  auto cfg = make_config(o);
  for (const auto& name : scenario_names(o.scenario)) {
    fv_stack* raw = nullptr;
    check(fv_solve(cfg.get(), name.c_str(), &raw), "solve " + name);
    std::unique_ptr<fv_stack, decltype(&fv_stack_free)> stack(raw, &fv_stack_free);
    const std::string path = out_path(o, "stack_" + name + ".bin");
    check(fv_stack_save(stack.get(), path.c_str()), "saving " + path);
    std::printf("wrote %s\n", path.c_str());
  }
  check(fv_config_save(cfg.get(), out_path(o, "effective_config.ini").c_str()), "config dump");
}

void print_table(const fv_results* res) {
  std::printf("\n%-14s %12s %10s %12s %10s %25s %9s\n", "scenario", "harvest (yr)", "sd",
              "lease value", "std", "95% CI", "DIV");
  for (std::size_t k = 0; k < fv_results_count(res); ++k) {
    fv_scenario_summary s{};
    check(fv_results_get(res, k, &s), "results");
    char ci[64];
    std::snprintf(ci, sizeof ci, "[%.2f, %.2f]", s.ci_lo, s.ci_hi);
    char div[32];
    if (std::isnan(s.div))
      std::snprintf(div, sizeof div, "-");
    else
      std::snprintf(div, sizeof div, "%.2f%%", 100.0 * s.div);
    std::printf("%-14s %12.2f %10.2f %12.2f %10.2f %25s %9s\n", s.scenario, s.mean_tau,
                s.std_tau, s.mean, s.std, ci, div);
  }
  std::printf("\n");
}

void cmd_value(const Options& o) {
  auto cfg = make_config(o);
  fv_results* raw = nullptr;
  check(fv_run_scenarios(cfg.get(), o.scenario.c_str(), &raw), "value");
  std::unique_ptr<fv_results, decltype(&fv_results_free)> res(raw, &fv_results_free);
  check(fv_results_write(res.get(), o.out_dir.c_str()), "writing results");
  check(fv_config_save(cfg.get(), out_path(o, "effective_config.ini").c_str()), "config dump");
  print_table(res.get());
  std::printf("wrote results to %s\n", o.out_dir.c_str());
}

void cmd_boundary(const Options& o) {
  auto cfg = make_config(o);
  std::vector<double> times;
  if (o.times_set) {
    times = parse_times(o.times);
  } else {
    std::size_t n = 0;
    check(fv_config_boundary_times(cfg.get(), nullptr, 0, &n), "config");
    times.resize(n);
    check(fv_config_boundary_times(cfg.get(), times.data(), n, &n), "config");
  }
  double horizon = 0.0;
  check(fv_config_grid(cfg.get(), &horizon, nullptr), "config");
  for (double t : times) {
    if (!(t > 0.0 && t < horizon)) {
      std::fprintf(stderr, "forestval: boundary time %g lies outside the grid (0, %g)\n", t,
                   horizon);
      throw Failure(FV_ERR_USAGE);
    }
  }
  if (times.empty()) {
    std::printf("no boundary times requested\n");
    return;
  }
  for (const auto& name : scenario_names(o.scenario)) {
    fv_stack* raw = nullptr;
    const auto cached = std::filesystem::path(o.stack_dir) / ("stack_" + name + ".bin");
    if (!o.stack_dir.empty() && std::filesystem::exists(cached))
      check(fv_stack_load(cfg.get(), cached.string().c_str(), &raw), "loading " + cached.string());
    else
      check(fv_solve(cfg.get(), name.c_str(), &raw), "solve " + name);
    std::unique_ptr<fv_stack, decltype(&fv_stack_free)> stack(raw, &fv_stack_free);
    check(fv_stack_write_boundaries(cfg.get(), stack.get(), name.c_str(), times.data(),
                                    times.size(), o.out_dir.c_str()),
          "boundary " + name);
  }
  std::printf("wrote boundaries to %s\n", o.out_dir.c_str());
}

void cmd_simulate(const Options& o) {
  auto cfg = make_config(o);
  const std::string out = out_path(o, "paths.csv");
  check(fv_simulate(cfg.get(), o.paths, o.stride, out.c_str()), "simulate");
  std::printf("wrote %s\n", out.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forest lease valuation under catastrophe risk and parameter uncertainty"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", fv_version());

  Options o;
  app.add_option("--config", o.config, "Run configuration file (INI)")->check(CLI::ExistingFile);
  app.add_option_function<std::uint64_t>(
      "--seed", [&o](const std::uint64_t& s) { o.seed = s; o.seed_set = true; }, "Master seed");
  app.add_option("--scenario", o.scenario, "Scenario to run")
      ->check(CLI::IsMember({"conservative", "none", "optimistic", "all"}));
  app.add_flag("--carbon", o.carbon, "Use the carbon-sequestration amenity");
  app.add_flag("--intensity-only", o.intensity_only, "Uncertainty in the intensity only");
  app.add_option("--scale", o.scale, "Shrink grid, cubes, samples and paths by this factor");
  app.add_option("--out-dir", o.out_dir, "Output directory");
  app.add_option("--valuation-convention", o.convention, "Survival convention for valuation")
      ->check(CLI::IsMember({"paper", "grace-consistent"}));
  app.add_option("--threads", o.threads, "OpenMP threads (0: runtime default)");

  auto* ef = app.add_subcommand("estimate-futures", "Kalman-filter MLE of the two-factor model");
  ef->add_option("--input", o.input, "Futures panel CSV")->required();
  ef->add_flag("--fix-mu", o.fix_mu, "Hold mu at estimation.fixed_mu");
  auto* ei = app.add_subcommand("estimate-intensity", "Poisson MLE of the catastrophe intensity");
  ei->add_option("--input", o.input, "Disaster counts CSV")->required();
  auto* so = app.add_subcommand("solve", "Solve and save the regression stacks");
  auto* va = app.add_subcommand("value", "Solve, estimate harvest times and value the lease");
  auto* bo = app.add_subcommand("boundary", "Write stopping/continuation grids");
  bo->add_option_function<std::string>(
      "--times", [&o](const std::string& t) { o.times = t; o.times_set = true; },
      "Comma-separated ages; empty for none")
      ->expected(0, 1)
      ->default_str("");
  bo->add_option("--stack-dir", o.stack_dir, "Reuse stacks saved by `solve`");
  auto* si = app.add_subcommand("simulate", "Simulate market-measure paths");
  si->add_option("--paths", o.paths, "Number of paths")->check(CLI::PositiveNumber);
  si->add_option("--stride", o.stride, "Write every n-th grid node")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return FV_ERR_USAGE;
  }

  try {
    if (ef->parsed()) cmd_estimate_futures(o);
    else if (ei->parsed()) cmd_estimate_intensity(o);
    else if (so->parsed()) cmd_solve(o);
    else if (va->parsed()) cmd_value(o);
    else if (bo->parsed()) cmd_boundary(o);
    else if (si->parsed()) cmd_simulate(o);
  } catch (const Failure& f) {
    return static_cast<int>(f.status);
  }
  return 0;
}
