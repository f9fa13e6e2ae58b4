/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include "forestval/config.hpp"

#include <fmt/format.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "forestval/errors.hpp"

namespace forestval {

namespace pt = boost::property_tree;

namespace {

std::string fmt_double(double v) { return fmt::format("{}", v); }

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? ", " : "") + fmt_double(v[k]);
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

class Reader {
 public:
  Reader(const pt::ptree& tree, std::string origin) : tree_(tree), origin_(std::move(origin)) {}

  void num(const std::string& key, double& out) {
    if (const auto v = get(key)) out = to_double(key, *v);
  }
  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (const auto v = get(key)) {
      long long x = 0;
      const auto [end, ec] = std::from_chars(v->data(), v->data() + v->size(), x);
      if (ec != std::errc{} || end != v->data() + v->size())
        throw usage_error(fmt::format("{}: {} = '{}' is not an integer", origin_, key, *v));
      if (x < 0 && std::is_unsigned_v<Int>)
        throw usage_error(fmt::format("{}: {} must be nonnegative", origin_, key));
      out = static_cast<Int>(x);
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (const auto v = get(key)) {
      if (*v == "true" || *v == "1") out = true;
      else if (*v == "false" || *v == "0") out = false;
      else throw usage_error(fmt::format("{}: {} = '{}' is not a boolean", origin_, key, *v));
    }
  }
  void list(const std::string& key, std::vector<double>& out) {
    if (const auto v = get(key)) {
      out.clear();
      std::stringstream ss(*v);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(to_double(key, item));
      }
    }
  }
  void text(const std::string& key, std::string& out) {
    if (const auto v = get(key)) out = *v;
  }

  // Every key present in the file must have been read.
  void reject_unknown() const {
    for (const auto& [section, body] : tree_) {
      if (body.empty() && !body.data().empty())
        throw usage_error(fmt::format("{}: key '{}' outside any section", origin_, section));
      for (const auto& [key, value] : body) {
        const std::string full = section + "." + key;
        if (!seen_.count(full))
          throw usage_error(fmt::format("{}: unknown key '{}' in section [{}]", origin_, key,
                                        section));
      }
    }
  }

 private:
  std::optional<std::string> get(const std::string& key) {
    seen_.insert(key);
    const auto node = tree_.get_child_optional(pt::ptree::path_type(key, '.'));
    if (!node) return std::nullopt;
    return trim(node->data());
  }
  double to_double(const std::string& key, const std::string& v) const {
    double x = 0.0;
    const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || end != v.data() + v.size() || !std::isfinite(x))
      throw usage_error(fmt::format("{}: {} = '{}' is not a finite number", origin_, key, v));
    return x;
  }

  const pt::ptree& tree_;
  std::string origin_;
  std::set<std::string> seen_;
};

}  // namespace

void RunConfig::validate() const {
  model.validate();
  box.validate();
  econ.validate();
  if (!(carbon_amenity >= 0.0)) throw usage_error("economics.carbon_amenity must be >= 0");
  grid.validate();
  if (!(initial.price > 0.0) || !std::isfinite(initial.delta))
    throw usage_error("initial.price must be > 0 and initial.delta finite");
  solver_config(Scenario::NoUncertainty).validate();
  if (stopping_paths < 1 || paths_per_run < 1 || runs < 1)
    throw usage_error("valuation: path and run counts must be >= 1");
  if (boundary.price_points < 1 || boundary.delta_points < 1 ||
      !(boundary.price_min > 0.0 && boundary.price_max >= boundary.price_min) ||
      !(boundary.delta_max >= boundary.delta_min))
    throw usage_error("boundary: invalid grid specification");
  for (double t : boundary_times) grid.index_of(t);
  const auto& o = estimation.optimizer;
  if (o.starts < 1 || o.max_iterations < 1 || !(o.start_spread >= 0.0) ||
      !(o.gradient_tolerance > 0.0))
    throw usage_error("estimation: invalid optimizer settings");
  for (double d : estimation.noise_init)
    if (!(d > 0.0)) throw usage_error("estimation.noise must be positive");
  if (!(intensity.lambda_floor > 0.0)) throw usage_error("intensity.lambda_floor must be > 0");
  if (threads < 0) throw usage_error("run.threads must be >= 0");
}

std::string RunConfig::dump() const {
  std::string s;
  auto kv = [&s](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
  auto num = [&](const std::string& k, double v) { kv(k, fmt_double(v)); };
  auto sect = [&s](const std::string& name) { s += (s.empty() ? "[" : "\n[") + name + "]\n"; };

  sect("model");
  num("sigma_p", model.sigma_p);
  num("sigma_d", model.sigma_d);
  num("kappa_d", model.kappa_d);
  num("mu_d", model.mu_d);
  num("rho", model.rho);
  num("r", model.r);
  num("lambda_q", model.lambda_q);
  sect("box");
  num("kappa_lo", box.kappa_lo);
  num("kappa_hi", box.kappa_hi);
  num("mu_lo", box.mu_lo);
  num("mu_hi", box.mu_hi);
  num("lambda_lo", box.lambda_lo);
  num("lambda_hi", box.lambda_hi);
  sect("economics");
  num("harvest_cost", econ.harvest_cost);
  num("amenity", econ.amenity);
  num("carbon_amenity", carbon_amenity);
  num("grace_age", econ.grace_age);
  num("volume_factor", econ.volume_factor);
  sect("growth");
  num("a", econ.growth.a);
  num("b", econ.growth.b);
  num("exponent", econ.growth.exponent);
  num("lower_age", econ.growth.lower_age);
  num("upper_age", econ.growth.upper_age);
  sect("grid");
  num("horizon", grid.horizon);
  kv("steps", std::to_string(grid.steps));
  sect("initial");
  num("price", initial.price);
  num("delta", initial.delta);
  sect("strat");
  num("log_price_lo", strat.log_price_lo);
  num("log_price_hi", strat.log_price_hi);
  num("delta_lo", strat.delta_lo);
  num("delta_hi", strat.delta_hi);
  kv("cells_price", std::to_string(strat.cells_price));
  kv("cells_delta", std::to_string(strat.cells_delta));
  kv("samples_per_cube", std::to_string(strat.samples_per_cube));
  num("tail_quantile", strat.tail_quantile);
  sect("solver");
  kv("basis_order", std::to_string(basis_order));
  num("price_floor", price_floor);
  num("tol_reflect", tol_reflect);
  kv("z_estimator", z_estimator == ZEstimator::Plain ? "plain" : "centered");
  sect("valuation");
  kv("stopping_paths", std::to_string(stopping_paths));
  kv("runs", std::to_string(runs));
  kv("paths_per_run", std::to_string(paths_per_run));
  kv("convention", std::string(to_string(convention)));
  sect("boundary");
  kv("times", fmt_list(boundary_times));
  num("price_min", boundary.price_min);
  num("price_max", boundary.price_max);
  kv("price_points", std::to_string(boundary.price_points));
  num("delta_min", boundary.delta_min);
  num("delta_max", boundary.delta_max);
  kv("delta_points", std::to_string(boundary.delta_points));
  sect("estimation");
  const auto& o = estimation.optimizer;
  kv("starts", std::to_string(o.starts));
  kv("max_iterations", std::to_string(o.max_iterations));
  kv("fix_mu", o.fix_mu ? "true" : "false");
  num("fixed_mu", o.fixed_mu);
  num("start_spread", o.start_spread);
  num("gradient_tolerance", o.gradient_tolerance);
  kv("noise", fmt_list(estimation.noise_init));
  kv("drop_incomplete", estimation.drop_incomplete ? "true" : "false");
  sect("intensity");
  kv("allow_gaps", intensity.allow_gaps ? "true" : "false");
  num("lambda_floor", intensity.lambda_floor);
  sect("run");
  kv("seed", std::to_string(seed));
  kv("threads", std::to_string(threads));
  return s;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t RunConfig::hash() const { return fnv1a(dump()); }

SolverConfig RunConfig::solver_config(Scenario scenario) const {
  SolverConfig c;
  c.grid = grid;
  c.strat = strat;
  c.basis_order = basis_order;
  c.scenario = scenario;
  c.box = box;
  c.econ = econ;
  c.params = model;
  c.seed = seed;
  c.price_floor = price_floor;
  c.tol_reflect = tol_reflect;
  c.z_estimator = z_estimator;
  c.config_hash = hash();
  return c;
}

ScenarioRunSpec RunConfig::scenario_spec(const std::vector<Scenario>& scenarios) const {
  ScenarioRunSpec spec;
  spec.solver = solver_config(Scenario::NoUncertainty);
  spec.scenarios = scenarios;
  spec.initial = initial;
  spec.stopping_paths = stopping_paths;
  spec.runs = runs;
  spec.paths_per_run = paths_per_run;
  spec.convention = convention;
  spec.boundary_times = boundary_times;
  spec.boundary = boundary;
  return spec;
}

RunConfig load_config_text(const std::string& text, const std::string& origin) {
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw usage_error(fmt::format("{}: line {}: {}", origin, e.line(), e.message()));
  }
  Reader rd(tree, origin);
  RunConfig c;
  rd.num("model.sigma_p", c.model.sigma_p);
  rd.num("model.sigma_d", c.model.sigma_d);
  rd.num("model.kappa_d", c.model.kappa_d);
  rd.num("model.mu_d", c.model.mu_d);
  rd.num("model.rho", c.model.rho);
  rd.num("model.r", c.model.r);
  rd.num("model.lambda_q", c.model.lambda_q);
  rd.num("box.kappa_lo", c.box.kappa_lo);
  rd.num("box.kappa_hi", c.box.kappa_hi);
  rd.num("box.mu_lo", c.box.mu_lo);
  rd.num("box.mu_hi", c.box.mu_hi);
  rd.num("box.lambda_lo", c.box.lambda_lo);
  rd.num("box.lambda_hi", c.box.lambda_hi);
  rd.num("economics.harvest_cost", c.econ.harvest_cost);
  rd.num("economics.amenity", c.econ.amenity);
  rd.num("economics.carbon_amenity", c.carbon_amenity);
  rd.num("economics.grace_age", c.econ.grace_age);
  rd.num("economics.volume_factor", c.econ.volume_factor);
  rd.num("growth.a", c.econ.growth.a);
  rd.num("growth.b", c.econ.growth.b);
  rd.num("growth.exponent", c.econ.growth.exponent);
  rd.num("growth.lower_age", c.econ.growth.lower_age);
  rd.num("growth.upper_age", c.econ.growth.upper_age);
  rd.num("grid.horizon", c.grid.horizon);
  rd.integer("grid.steps", c.grid.steps);
  rd.num("initial.price", c.initial.price);
  rd.num("initial.delta", c.initial.delta);
  rd.num("strat.log_price_lo", c.strat.log_price_lo);
  rd.num("strat.log_price_hi", c.strat.log_price_hi);
  rd.num("strat.delta_lo", c.strat.delta_lo);
  rd.num("strat.delta_hi", c.strat.delta_hi);
  rd.integer("strat.cells_price", c.strat.cells_price);
  rd.integer("strat.cells_delta", c.strat.cells_delta);
  rd.integer("strat.samples_per_cube", c.strat.samples_per_cube);
  rd.num("strat.tail_quantile", c.strat.tail_quantile);
  rd.integer("solver.basis_order", c.basis_order);
  rd.num("solver.price_floor", c.price_floor);
  rd.num("solver.tol_reflect", c.tol_reflect);
  std::string zest = c.z_estimator == ZEstimator::Plain ? "plain" : "centered";
  rd.text("solver.z_estimator", zest);
  if (zest == "plain") c.z_estimator = ZEstimator::Plain;
  else if (zest == "centered") c.z_estimator = ZEstimator::Centered;
  else throw usage_error(origin + ": solver.z_estimator must be plain or centered");
  rd.integer("valuation.stopping_paths", c.stopping_paths);
  rd.integer("valuation.runs", c.runs);
  rd.integer("valuation.paths_per_run", c.paths_per_run);
  std::string conv(to_string(c.convention));
  rd.text("valuation.convention", conv);
  c.convention = parse_convention(conv);
  rd.list("boundary.times", c.boundary_times);
  rd.num("boundary.price_min", c.boundary.price_min);
  rd.num("boundary.price_max", c.boundary.price_max);
  rd.integer("boundary.price_points", c.boundary.price_points);
  rd.num("boundary.delta_min", c.boundary.delta_min);
  rd.num("boundary.delta_max", c.boundary.delta_max);
  rd.integer("boundary.delta_points", c.boundary.delta_points);
  auto& o = c.estimation.optimizer;
  rd.integer("estimation.starts", o.starts);
  rd.integer("estimation.max_iterations", o.max_iterations);
  rd.boolean("estimation.fix_mu", o.fix_mu);
  rd.num("estimation.fixed_mu", o.fixed_mu);
  rd.num("estimation.start_spread", o.start_spread);
  rd.num("estimation.gradient_tolerance", o.gradient_tolerance);
  rd.list("estimation.noise", c.estimation.noise_init);
  rd.boolean("estimation.drop_incomplete", c.estimation.drop_incomplete);
  rd.boolean("intensity.allow_gaps", c.intensity.allow_gaps);
  rd.num("intensity.lambda_floor", c.intensity.lambda_floor);
  rd.integer("run.seed", c.seed);
  rd.integer("run.threads", c.threads);
  rd.reject_unknown();
  o.seed = c.seed;
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw usage_error("cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return load_config_text(ss.str(), path);
}

void apply_scale(RunConfig& cfg, double s) {
  if (!(s > 0.0 && s <= 1.0)) throw usage_error("--scale must lie in (0, 1]");
  const double lg = std::log10(s);
  auto scaled = [](double base, double factor) {
    return std::max<long long>(1, std::llround(base * factor));
  };
  cfg.grid.steps = static_cast<int>(scaled(cfg.grid.steps, s));
  cfg.stopping_paths = static_cast<std::size_t>(scaled(static_cast<double>(cfg.stopping_paths), s));
  cfg.paths_per_run = static_cast<std::size_t>(scaled(static_cast<double>(cfg.paths_per_run), s));
  cfg.strat.cells_price = static_cast<int>(scaled(cfg.strat.cells_price, std::pow(2.0, lg)));
  cfg.strat.cells_delta = static_cast<int>(scaled(cfg.strat.cells_delta, std::pow(2.0, lg)));
  cfg.strat.samples_per_cube =
      static_cast<int>(scaled(cfg.strat.samples_per_cube, std::pow(4.0, lg)));
  cfg.validate();
}

}  // namespace forestval
