/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include "forestval/rbsde.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

#include "forestval/errors.hpp"
#include "forestval/rng.hpp"

namespace forestval {

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::Conservative: return "conservative";
    case Scenario::NoUncertainty: return "none";
    case Scenario::Optimistic: return "optimistic";
  }
  return "none";
}

Scenario parse_scenario(std::string_view name) {
  if (name == "conservative") return Scenario::Conservative;
  if (name == "none") return Scenario::NoUncertainty;
  if (name == "optimistic") return Scenario::Optimistic;
  throw usage_error("unknown scenario '" + std::string(name) +
                    "' (expected conservative|none|optimistic)");
}

void SolverConfig::validate() const {
  grid.validate();
  if (basis_order != 0 && basis_order != 1) throw usage_error("solver: basis_order must be 0 or 1");
  strat.validate(basis_dim());
  box.validate();
  econ.validate();
  params.validate();
  if (!(price_floor > 0.0)) throw usage_error("solver: price_floor must be > 0");
  if (!(tol_reflect >= 0.0)) throw usage_error("solver: tol_reflect must be >= 0");
}

ForestProblem::ForestProblem(const SolverConfig& config)
    : scenario_(config.scenario),
      box_(config.box),
      econ_(config.econ),
      params_(config.params),
      reference_(reference_control(config.params)),
      price_floor_(config.price_floor) {}

double ForestProblem::obstacle(double t, const StateVec& x) const { return payoff(t, x, econ_); }

double ForestProblem::driver(double t, const StateVec& x, double y, const ZPair& z) const {
  switch (scenario_) {
    case Scenario::Conservative:
      return driver_extremal(Extremum::Inf, t, x, y, z, box_, econ_, params_);
    case Scenario::Optimistic:
      return driver_extremal(Extremum::Sup, t, x, y, z, box_, econ_, params_);
    case Scenario::NoUncertainty:
      break;
  }
  return driver_f(t, x, y, z, reference_, econ_, params_);
}

StateVec ForestProblem::step(const StateVec& x, double dt, double g1, double g2,
                             std::uint64_t* floor_events) const {
  return euler_step(x, dt, g1, g2, params_, price_floor_, floor_events);
}

std::span<const double> RegressionStack::coef_y(int i, int cube) const {
  const auto off = (static_cast<std::size_t>(i) * strat.cube_count() + cube) * basis_dim;
  return {by.data() + off, static_cast<std::size_t>(basis_dim)};
}

std::span<const double> RegressionStack::coef_z(int i, int cube, int component) const {
  const auto off =
      ((static_cast<std::size_t>(i) * strat.cube_count() + cube) * 2 + component) * basis_dim;
  return {bz.data() + off, static_cast<std::size_t>(basis_dim)};
}

void basis(const StateVec& x, int cube, const Stratification& strat, int basis_dim,
           std::span<double> out) {
  out[0] = 1.0;
  if (basis_dim == 1) return;
  const int ip = cube / strat.cells_delta;
  const int id = cube % strat.cells_delta;
  const double hp = 0.5 * strat.price_width(), hd = 0.5 * strat.delta_width();
  const double cp = strat.log_price_lo + (2 * ip + 1) * hp;
  const double cd = strat.delta_lo + (2 * id + 1) * hd;
  // Points outside the cube (only possible beyond the domain edge) see the
  // fit held constant from the nearest face instead of extrapolated.
  out[1] = std::clamp((std::log(x.price) - cp) / hp, -1.0, 1.0);
  out[2] = std::clamp((x.delta - cd) / hd, -1.0, 1.0);
}

namespace {

constexpr int kMaxBasis = 3;

inline double dot(std::span<const double> b, const std::array<double, kMaxBasis>& phi) {
  double s = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) s += b[k] * phi[k];
  return s;
}

enum class FitKind { Full, Ridge, Mean };

// Least squares on the shared Gram matrix, for several right-hand sides.
struct CubeRegression {
  int dim;
  Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
  FitKind kind = FitKind::Full;
  Eigen::LDLT<Eigen::Matrix3d> ldlt;

  explicit CubeRegression(int d) : dim(d) {}

  void add(const std::array<double, kMaxBasis>& phi) {
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b) gram(a, b) += phi[a] * phi[b];
  }

  void factorize() {
    double lmin = gram(0, 0), lmax = gram(0, 0);
    if (dim == 3) {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig;
      eig.computeDirect(gram, Eigen::EigenvaluesOnly);
      lmin = eig.eigenvalues().minCoeff();
      lmax = eig.eigenvalues().maxCoeff();
    }
    if (!(lmax > 0.0) || !(lmin > 1e-14 * lmax)) {
      kind = FitKind::Mean;
      return;
    }
    Eigen::Matrix3d work = Eigen::Matrix3d::Identity();
    work.topLeftCorner(dim, dim) = gram.topLeftCorner(dim, dim);
    if (lmax / lmin > 1e12) {
      kind = FitKind::Ridge;
      for (int a = 0; a < dim; ++a) work(a, a) += 1e-10 * gram(a, a);
    }
    ldlt.compute(work);
  }

  // rhs holds sum phi * target; sum_target / count gives the mean fallback.
  void solve(const std::array<double, kMaxBasis>& rhs, double sum_target, double count,
             double* out) const {
    if (kind == FitKind::Mean) {
      out[0] = sum_target / count;
      for (int a = 1; a < dim; ++a) out[a] = 0.0;
      return;
    }
    Eigen::Vector3d v(rhs[0], dim > 1 ? rhs[1] : 0.0, dim > 2 ? rhs[2] : 0.0);
    const Eigen::Vector3d b = ldlt.solve(v);
    for (int a = 0; a < dim; ++a) out[a] = b[a];
  }
};

struct CubeScratch {
  std::vector<std::array<double, kMaxBasis>> phi;
  std::vector<StateVec> x;
  std::vector<double> y_next, g1, g2;
  void resize(std::size_t m) {
    phi.resize(m);
    x.resize(m);
    y_next.resize(m);
    g1.resize(m);
    g2.resize(m);
  }
};

}  // namespace

double continuation_value(const RegressionStack& stack, int i, const StateVec& x) {
  const int cube = locate_cube(x, stack.strat);
  std::array<double, kMaxBasis> phi{};
  basis(x, cube, stack.strat, stack.basis_dim, phi);
  return dot(stack.coef_y(i, cube), phi);
}

double recover_value(const RegressionStack& stack, int i, const StateVec& x) {
  if (i < 0 || i > stack.grid.steps) throw usage_error("recover_value: time index out of range");
  const double s = stack.obstacle(stack.grid.time(i), x);
  if (i == stack.grid.steps) return s;
  return std::max(continuation_value(stack, i, x), s);
}

ZPair recover_z(const RegressionStack& stack, int i, const StateVec& x) {
  if (!stack.has_z) throw usage_error("recover_z: stack was solved without keeping Z");
  if (i < 0 || i >= stack.grid.steps) throw usage_error("recover_z: time index out of range");
  const int cube = locate_cube(x, stack.strat);
  std::array<double, kMaxBasis> phi{};
  basis(x, cube, stack.strat, stack.basis_dim, phi);
  return {dot(stack.coef_z(i, cube, 0), phi), dot(stack.coef_z(i, cube, 1), phi)};
}

bool is_stop(const RegressionStack& stack, int i, const StateVec& x) {
  const double s = stack.obstacle(stack.grid.time(i), x);
  if (i == stack.grid.steps) return true;
  const double v = std::max(continuation_value(stack, i, x), s);
  return v - s <= stack.tol_reflect * std::max(1.0, std::abs(s));
}

RegressionStack solve(const SolverConfig& config) {
  config.validate();
  const ForestProblem problem(config);
  SolverSettings settings;
  settings.grid = config.grid;
  settings.strat = config.strat;
  settings.basis_order = config.basis_order;
  settings.seed = config.seed;
  settings.tol_reflect = config.tol_reflect;
  settings.keep_z = config.keep_z;
  settings.z_estimator = config.z_estimator;
  settings.config_hash = config.config_hash;
  RegressionStack stack = solve(problem, settings);
  const EconomicParams econ = config.econ;
  stack.obstacle = [econ](double t, const StateVec& x) { return payoff(t, x, econ); };
  return stack;
}

RegressionStack solve(const BackwardProblem& problem, const SolverSettings& settings) {
  const TimeGrid& grid = settings.grid;
  const Stratification& strat = settings.strat;
  const int bd = settings.basis_order == 0 ? 1 : 3;
  grid.validate();
  strat.validate(bd);

  RegressionStack stack;
  stack.grid = grid;
  stack.strat = strat;
  stack.basis_dim = bd;
  stack.config_hash = settings.config_hash;
  stack.has_z = settings.keep_z;
  stack.tol_reflect = settings.tol_reflect;
  const int n = grid.steps;
  const int cubes = strat.cube_count();
  const int m = strat.samples_per_cube;
  stack.by.assign(static_cast<std::size_t>(n) * cubes * bd, 0.0);
  if (settings.keep_z) stack.bz.assign(static_cast<std::size_t>(n) * cubes * 2 * bd, 0.0);

  // Z coefficients of the step being fitted; kept separately so keep_z=false
  // still has them while the step is processed.
  std::vector<double> bz_step(static_cast<std::size_t>(cubes) * 2 * bd);

  const double dt = grid.dt();
  const double sqdt = std::sqrt(dt);
  SolverDiagnostics diag;

  for (int i = n - 1; i >= 0; --i) {
    const double t = grid.time(i);
    const double t_next = grid.time(i + 1);
    const bool terminal_next = (i + 1 == n);
    std::uint64_t fallbacks = 0, ridges = 0, floors = 0;

#pragma omp parallel reduction(+ : fallbacks, ridges, floors)
    {
      CubeScratch scratch;
      scratch.resize(static_cast<std::size_t>(m));
#pragma omp for schedule(static)
      for (int j = 0; j < cubes; ++j) {
        Engine engine = make_engine(settings.seed, Stream::SolverIncrements,
                                    {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)});
        const std::vector<StateVec> xs = stratified_sample(j, m, strat, engine);
        std::normal_distribution<double> gauss(0.0, sqdt);

        CubeRegression reg(bd);
        std::array<double, kMaxBasis> rhs_y{}, rhs_z1{}, rhs_z2{};
        double sum_y = 0.0, sum_z1 = 0.0, sum_z2 = 0.0;

        // Step 2: one Euler step per sample; y_{i+1} at the landing point.
        for (int s = 0; s < m; ++s) {
          const StateVec& x = xs[s];
          const double g1 = gauss(engine);
          const double g2 = gauss(engine);
          const StateVec xn = problem.step(x, dt, g1, g2, &floors);
          double yn = problem.obstacle(t_next, xn);
          if (!terminal_next) {
            const int cn = locate_cube(xn, strat);
            std::array<double, kMaxBasis> phin{};
            basis(xn, cn, strat, bd, phin);
            yn = std::max(dot(stack.coef_y(i + 1, cn), phin), yn);
          }
          auto& phi = scratch.phi[s];
          phi = {};
          basis(x, j, strat, bd, phi);
          reg.add(phi);
          scratch.x[s] = x;
          scratch.y_next[s] = yn;
          scratch.g1[s] = g1;
          scratch.g2[s] = g2;
        }
        reg.factorize();
        if (reg.kind == FitKind::Mean) ++fallbacks;
        if (reg.kind == FitKind::Ridge) ++ridges;

        // Optional centring of y_{i+1} by its own cube fit before the Z step.
        std::array<double, kMaxBasis> centre{};
        if (settings.z_estimator == ZEstimator::Centered) {
          std::array<double, kMaxBasis> rhs{};
          double sum = 0.0;
          for (int s = 0; s < m; ++s) {
            for (int a = 0; a < bd; ++a) rhs[a] += scratch.phi[s][a] * scratch.y_next[s];
            sum += scratch.y_next[s];
          }
          reg.solve(rhs, sum, m, centre.data());
        }

        // Step 3a: Z = E[y_{i+1} dW] / dt.
        for (int s = 0; s < m; ++s) {
          const auto& phi = scratch.phi[s];
          const double base = scratch.y_next[s] -
                              (settings.z_estimator == ZEstimator::Centered
                                   ? dot(std::span<const double>(centre.data(), bd), phi)
                                   : 0.0);
          const double t1 = base * scratch.g1[s] / dt;
          const double t2 = base * scratch.g2[s] / dt;
          for (int a = 0; a < bd; ++a) {
            rhs_z1[a] += phi[a] * t1;
            rhs_z2[a] += phi[a] * t2;
          }
          sum_z1 += t1;
          sum_z2 += t2;
        }
        double* bz1 = bz_step.data() + (static_cast<std::size_t>(j) * 2 + 0) * bd;
        double* bz2 = bz_step.data() + (static_cast<std::size_t>(j) * 2 + 1) * bd;
        reg.solve(rhs_z1, sum_z1, m, bz1);
        reg.solve(rhs_z2, sum_z2, m, bz2);

        // Steps 3b/3c: generator at (t_i, X_i, y_{i+1}, z(X_i)), then the
        // continuation regression.
        for (int s = 0; s < m; ++s) {
          const auto& phi = scratch.phi[s];
          const ZPair z{dot(std::span<const double>(bz1, bd), phi),
                        dot(std::span<const double>(bz2, bd), phi)};
          const double target =
              scratch.y_next[s] + problem.driver(t, scratch.x[s], scratch.y_next[s], z) * dt;
          for (int a = 0; a < bd; ++a) rhs_y[a] += phi[a] * target;
          sum_y += target;
        }
        double* out_y = stack.by.data() + (static_cast<std::size_t>(i) * cubes + j) * bd;
        reg.solve(rhs_y, sum_y, m, out_y);
      }
    }

    if (settings.keep_z) {
      std::copy(bz_step.begin(), bz_step.end(),
                stack.bz.begin() + static_cast<std::ptrdiff_t>(i) * cubes * 2 * bd);
    }
    diag.mean_fallbacks += fallbacks;
    diag.ridge_fits += ridges;
    diag.floor_events += floors;
    diag.euler_steps += static_cast<std::uint64_t>(cubes) * m;
  }
  stack.diagnostics = diag;
  return stack;
}

BoundaryGrid extract_boundary(const RegressionStack& stack, int i, const BoundarySpec& spec) {
  if (i < 1 || i > stack.grid.steps - 1)
    throw usage_error("extract_boundary: time index must lie in [1, N-1]");
  if (spec.price_points < 1 || spec.delta_points < 1 || !(spec.price_min > 0.0))
    throw usage_error("extract_boundary: invalid grid specification");
  BoundaryGrid out;
  out.index = i;
  out.time = stack.grid.time(i);
  out.spec = spec;
  const auto lin = [](double lo, double hi, int k, int count) {
    return count == 1 ? lo : lo + (hi - lo) * k / (count - 1);
  };
  out.nodes.reserve(static_cast<std::size_t>(spec.price_points) * spec.delta_points);
  for (int a = 0; a < spec.price_points; ++a) {
    for (int b = 0; b < spec.delta_points; ++b) {
      const StateVec x{lin(spec.delta_min, spec.delta_max, b, spec.delta_points),
                       lin(spec.price_min, spec.price_max, a, spec.price_points)};
      const double s = stack.obstacle(out.time, x);
      const double v = recover_value(stack, i, x);
      out.nodes.push_back({x.price, x.delta, s, v, is_stop(stack, i, x)});
    }
  }
  return out;
}

namespace {

constexpr char kMagic[8] = {'F', 'V', 'S', 'T', 'A', 'C', 'K', '1'};

template <class T>
void put(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw data_error("stack file truncated");
  return v;
}

}  // namespace

void save_stack(const RegressionStack& stack, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));
  put<std::int32_t>(os, stack.grid.steps);
  put<std::int32_t>(os, stack.strat.cells_price);
  put<std::int32_t>(os, stack.strat.cells_delta);
  put<std::int32_t>(os, stack.basis_dim);
  put<std::uint64_t>(os, stack.config_hash);
  put<std::uint8_t>(os, stack.has_z ? 1 : 0);
  put<double>(os, stack.grid.horizon);
  put<double>(os, stack.strat.log_price_lo);
  put<double>(os, stack.strat.log_price_hi);
  put<double>(os, stack.strat.delta_lo);
  put<double>(os, stack.strat.delta_hi);
  put<std::int32_t>(os, stack.strat.samples_per_cube);
  put<double>(os, stack.strat.tail_quantile);
  put<double>(os, stack.tol_reflect);
  const int cubes = stack.strat.cube_count();
  for (int i = 0; i < stack.grid.steps; ++i) {
    for (int j = 0; j < cubes; ++j) {
      put<std::int32_t>(os, i);
      put<std::int32_t>(os, j);
      for (double v : stack.coef_y(i, j)) put<double>(os, v);
      if (stack.has_z) {
        for (int c = 0; c < 2; ++c)
          for (double v : stack.coef_z(i, j, c)) put<double>(os, v);
      }
    }
  }
  if (!os) throw data_error("write failed for " + path);
}

RegressionStack load_stack(const std::string& path, ObstacleFn obstacle) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw data_error(path + " is not a regression stack file");
  RegressionStack stack;
  stack.grid.steps = get<std::int32_t>(is);
  stack.strat.cells_price = get<std::int32_t>(is);
  stack.strat.cells_delta = get<std::int32_t>(is);
  stack.basis_dim = get<std::int32_t>(is);
  stack.config_hash = get<std::uint64_t>(is);
  stack.has_z = get<std::uint8_t>(is) != 0;
  stack.grid.horizon = get<double>(is);
  stack.strat.log_price_lo = get<double>(is);
  stack.strat.log_price_hi = get<double>(is);
  stack.strat.delta_lo = get<double>(is);
  stack.strat.delta_hi = get<double>(is);
  stack.strat.samples_per_cube = get<std::int32_t>(is);
  stack.strat.tail_quantile = get<double>(is);
  stack.tol_reflect = get<double>(is);
  if (stack.grid.steps < 1 || stack.strat.cells_price < 1 || stack.strat.cells_delta < 1 ||
      (stack.basis_dim != 1 && stack.basis_dim != 3))
    throw data_error(path + ": corrupt header");
  const int cubes = stack.strat.cube_count();
  const int bd = stack.basis_dim;
  stack.by.resize(static_cast<std::size_t>(stack.grid.steps) * cubes * bd);
  if (stack.has_z) stack.bz.resize(static_cast<std::size_t>(stack.grid.steps) * cubes * 2 * bd);
  for (int i = 0; i < stack.grid.steps; ++i) {
    for (int j = 0; j < cubes; ++j) {
      if (get<std::int32_t>(is) != i || get<std::int32_t>(is) != j)
        throw data_error(path + ": rows out of order");
      double* y = stack.by.data() + (static_cast<std::size_t>(i) * cubes + j) * bd;
      for (int k = 0; k < bd; ++k) y[k] = get<double>(is);
      if (stack.has_z) {
        double* z = stack.bz.data() + (static_cast<std::size_t>(i) * cubes + j) * 2 * bd;
        for (int k = 0; k < 2 * bd; ++k) z[k] = get<double>(is);
      }
    }
  }
  stack.obstacle = std::move(obstacle);
  return stack;
}

}  // namespace forestval
