/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include "forestval/forward_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "forestval/errors.hpp"

namespace forestval {

int TimeGrid::index_of(double t) const {
  const double h = dt();
  if (!(t >= -0.5 * h && t <= horizon + 0.5 * h))
    throw usage_error("time " + std::to_string(t) + " lies outside the grid [0, " +
                      std::to_string(horizon) + "]");
  return std::clamp(static_cast<int>(std::lround(t / h)), 0, steps);
}

void TimeGrid::validate() const {
  if (steps < 1) throw usage_error("grid: steps must be >= 1");
  if (!(horizon > 0.0)) throw usage_error("grid: horizon must be > 0");
}

void Stratification::validate(int basis_dim) const {
  if (!(log_price_lo < log_price_hi)) throw usage_error("strat: need log_price_lo < log_price_hi");
  if (!(delta_lo < delta_hi)) throw usage_error("strat: need delta_lo < delta_hi");
  if (cells_price < 1 || cells_delta < 1) throw usage_error("strat: cube counts must be >= 1");
  if (samples_per_cube < 2 * basis_dim)
    throw usage_error("strat: samples_per_cube must be at least twice the basis dimension");
  if (!(tail_quantile > 0.0 && tail_quantile < 0.5))
    throw usage_error("strat: tail_quantile must lie in (0, 0.5)");
}

Logistic Logistic::covering(double lo, double hi, double tail_quantile) {
  const double half = 0.5 * (hi - lo);
  return {0.5 * (lo + hi), half / std::log((1.0 - tail_quantile) / tail_quantile)};
}

double Logistic::cdf(double x) const { return 1.0 / (1.0 + std::exp(-(x - location) / scale)); }

double Logistic::quantile(double u) const { return location + scale * std::log(u / (1.0 - u)); }

CubeBounds cube_bounds(int cube, const Stratification& strat) {
  if (cube < 0 || cube >= strat.cube_count())
    throw usage_error("cube index " + std::to_string(cube) + " out of range");
  const int ip = cube / strat.cells_delta;
  const int id = cube % strat.cells_delta;
  const double wp = strat.price_width(), wd = strat.delta_width();
  return {strat.log_price_lo + ip * wp, strat.log_price_lo + (ip + 1) * wp,
          strat.delta_lo + id * wd, strat.delta_lo + (id + 1) * wd};
}

StateVec euler_step(const StateVec& state, double dt, double g1, double g2,
                    const ModelParams& params, double price_floor,
                    std::uint64_t* floor_events) {
  const double rc = std::sqrt(1.0 - params.rho * params.rho);
  StateVec next;
  next.delta = state.delta + params.kappa_d * (params.mu_d - state.delta) * dt +
               params.sigma_d * g1;
  next.price = state.price + (params.r - state.delta) * state.price * dt +
               params.sigma_p * state.price * (params.rho * g1 + rc * g2);
  if (!(next.price > price_floor)) {
    next.price = price_floor;
    if (floor_events) ++*floor_events;
  }
  return next;
}

PathSimulator::PathSimulator(TimeGrid grid, StateVec initial, ModelParams params,
                             std::uint64_t seed, Stream stream, std::uint64_t run,
                             double price_floor)
    : grid_(grid), initial_(initial), params_(params), seed_(seed), stream_(stream),
      run_(run), price_floor_(price_floor) {}

std::uint64_t PathSimulator::simulate(std::uint64_t path, std::span<StateVec> out) const {
  const int n = grid_.steps;
  if (out.size() != static_cast<std::size_t>(n) + 1)
    throw usage_error("PathSimulator: output span has the wrong length");
  const double dt = grid_.dt();
  Engine engine = make_engine(seed_, stream_, {run_, path});
  std::normal_distribution<double> gauss(0.0, std::sqrt(dt));
  std::uint64_t floors = 0;
  out[0] = initial_;
  for (int i = 0; i < n; ++i) {
    const double g1 = gauss(engine);
    const double g2 = gauss(engine);
    out[i + 1] = euler_step(out[i], dt, g1, g2, params_, price_floor_, &floors);
  }
  return floors;
}

PathSet simulate_paths(std::size_t n_paths, const TimeGrid& grid, const StateVec& initial,
                       const ModelParams& params, std::uint64_t seed, double price_floor) {
  if (n_paths < 1) throw usage_error("simulate_paths: need at least one path");
  grid.validate();
  PathSet set;
  set.grid = grid;
  set.n_paths = n_paths;
  set.seed = seed;
  const auto len = static_cast<std::size_t>(grid.steps) + 1;
  set.states.resize(n_paths * len);
  const PathSimulator sim(grid, initial, params, seed, Stream::StoppingPaths, 0, price_floor);
  std::uint64_t floors = 0;
#pragma omp parallel for schedule(static) reduction(+ : floors)
  for (std::int64_t p = 0; p < static_cast<std::int64_t>(n_paths); ++p) {
    floors += sim.simulate(static_cast<std::uint64_t>(p),
                           {set.states.data() + static_cast<std::size_t>(p) * len, len});
  }
  set.floor_events = floors;
  return set;
}

namespace {

inline int cell_of(double x, double lo, double width, int cells) {
  const double k = std::floor((x - lo) / width);
  if (!(k >= 0.0)) return 0;  // also catches NaN
  return k >= cells ? cells - 1 : static_cast<int>(k);
}

// Draw from the logistic law conditioned on [lo, hi) by inverse CDF.
double truncated_logistic(const Logistic& law, double lo, double hi, Engine& engine) {
  const double flo = law.cdf(lo), fhi = law.cdf(hi);
  std::uniform_real_distribution<double> unif(flo, fhi);
  double x = law.quantile(unif(engine));
  if (!(x >= lo)) x = lo;
  if (!(x < hi)) x = std::nextafter(hi, lo);
  return x;
}

// Moves x toward the cell centre by single ulps until locate() agrees. Only
// ever needed for draws within a few ulps of a cell edge.
template <class Locate>
double nudge_into_cell(double x, double centre, int want, Locate&& locate) {
  for (int guard = 0; guard < 256 && locate(x) != want; ++guard) {
    x = std::nextafter(x, centre);
  }
  return x;
}

}  // namespace

std::vector<StateVec> stratified_sample(int cube, int count, const Stratification& strat,
                                        Engine& engine) {
  const CubeBounds b = cube_bounds(cube, strat);
  const int want_p = cube / strat.cells_delta;
  const int want_d = cube % strat.cells_delta;
  const Logistic law_p =
      Logistic::covering(strat.log_price_lo, strat.log_price_hi, strat.tail_quantile);
  const Logistic law_d = Logistic::covering(strat.delta_lo, strat.delta_hi, strat.tail_quantile);
  const double wp = strat.price_width(), wd = strat.delta_width();
  const double cp = 0.5 * (b.p_lo + b.p_hi), cd = 0.5 * (b.d_lo + b.d_hi);

  std::vector<StateVec> out(static_cast<std::size_t>(count));
  for (auto& s : out) {
    double p = truncated_logistic(law_p, b.p_lo, b.p_hi, engine);
    double d = truncated_logistic(law_d, b.d_lo, b.d_hi, engine);
    p = nudge_into_cell(p, cp, want_p, [&](double x) {
      return cell_of(std::log(std::exp(x)), strat.log_price_lo, wp, strat.cells_price);
    });
    d = nudge_into_cell(d, cd, want_d,
                        [&](double x) { return cell_of(x, strat.delta_lo, wd, strat.cells_delta); });
    s = {d, std::exp(p)};
  }
  return out;
}

std::vector<StateVec> stratified_sample(int cube, int count, const Stratification& strat,
                                        std::uint64_t seed) {
  Engine engine = make_engine(seed, Stream::StratifiedStates, {static_cast<std::uint64_t>(cube)});
  return stratified_sample(cube, count, strat, engine);
}

int locate_cube(const StateVec& state, const Stratification& strat) {
  const int ip = cell_of(std::log(state.price), strat.log_price_lo, strat.price_width(),
                         strat.cells_price);
  const int id = cell_of(state.delta, strat.delta_lo, strat.delta_width(), strat.cells_delta);
  return strat.cube_index(ip, id);
}

}  // namespace forestval
