/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "forestval/model.hpp"
#include "forestval/rng.hpp"

namespace forestval {

/// Equidistant grid t_i = i * dt on [0, horizon].
struct TimeGrid {
  double horizon = 150.0;
  int steps = 3000;

  double dt() const { return horizon / steps; }
  double time(int i) const { return i * dt(); }
  /// Index of the grid node closest to t; throws if t is outside [0, horizon].
  int index_of(double t) const;
  void validate() const;
};

/// Partition of the (log P, delta) domain into cubes, each sampled from a
/// logistic law truncated to the cube.
struct Stratification {
  double log_price_lo = -2.5, log_price_hi = 8.5;
  double delta_lo = -2.0, delta_hi = 2.0;
  int cells_price = 80;
  int cells_delta = 80;
  int samples_per_cube = 1000;
  /// Tail mass left outside the domain on each side by the logistic law.
  double tail_quantile = 0.001;

  int cube_count() const { return cells_price * cells_delta; }
  double price_width() const { return (log_price_hi - log_price_lo) / cells_price; }
  double delta_width() const { return (delta_hi - delta_lo) / cells_delta; }
  /// Cube index j = price_cell * cells_delta + delta_cell.
  int cube_index(int price_cell, int delta_cell) const {
    return price_cell * cells_delta + delta_cell;
  }
  void validate(int basis_dim) const;
};

/// Logistic law with the domain's tail quantiles at the endpoints.
struct Logistic {
  double location;
  double scale;

  static Logistic covering(double lo, double hi, double tail_quantile);
  double cdf(double x) const;
  double quantile(double u) const;
};

/// Rectangle of cube j in (log P, delta) coordinates.
struct CubeBounds {
  double p_lo, p_hi, d_lo, d_hi;
};
CubeBounds cube_bounds(int cube, const Stratification& strat);

StateVec euler_step(const StateVec& state, double dt, double g1, double g2,
                    const ModelParams& params, double price_floor = 1e-8,
                    std::uint64_t* floor_events = nullptr);

/// Paths stored row-major: states[path * (steps + 1) + i].
struct PathSet {
  TimeGrid grid;
  std::size_t n_paths = 0;
  std::uint64_t seed = 0;
  std::uint64_t floor_events = 0;
  std::vector<StateVec> states;

  std::span<const StateVec> path(std::size_t p) const {
    const auto len = static_cast<std::size_t>(grid.steps) + 1;
    return {states.data() + p * len, len};
  }
};

/// Generates path p of a stream on demand; path p depends only on
/// (seed, stream, run, p).
class PathSimulator {
 public:
  PathSimulator(TimeGrid grid, StateVec initial, ModelParams params, std::uint64_t seed,
                Stream stream = Stream::StoppingPaths, std::uint64_t run = 0,
                double price_floor = 1e-8);

  /// Writes steps + 1 states into out; returns the number of floor events.
  std::uint64_t simulate(std::uint64_t path, std::span<StateVec> out) const;
  const TimeGrid& grid() const { return grid_; }

 private:
  TimeGrid grid_;
  StateVec initial_;
  ModelParams params_;
  std::uint64_t seed_;
  Stream stream_;
  std::uint64_t run_;
  double price_floor_;
};

PathSet simulate_paths(std::size_t n_paths, const TimeGrid& grid, const StateVec& initial,
                       const ModelParams& params, std::uint64_t seed,
                       double price_floor = 1e-8);

/// M draws inside cube j. The engine overload is what the solver uses; the
/// seeded form keys its own stream by (seed, j).
std::vector<StateVec> stratified_sample(int cube, int count, const Stratification& strat,
                                        Engine& engine);
std::vector<StateVec> stratified_sample(int cube, int count, const Stratification& strat,
                                        std::uint64_t seed);

/// Cube containing (log P, delta); outside points clamp to the boundary cube.
int locate_cube(const StateVec& state, const Stratification& strat);

}  // namespace forestval
