/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include "forestval/kalman.hpp"

#include <fmt/format.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "forestval/csv.hpp"
#include "forestval/errors.hpp"
#include "forestval/rng.hpp"

namespace forestval {

namespace {

bool iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (int k : {0, 1, 2, 3, 5, 6, 8, 9})
    if (s[k] < '0' || s[k] > '9') return false;
  const int month = std::stoi(s.substr(5, 2)), day = std::stoi(s.substr(8, 2));
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

}  // namespace

void FuturesPanel::validate() const {
  if (contracts < 1) throw data_error("futures panel: no contracts");
  if (dates.empty()) throw data_error("futures panel: no dates");
  if (prices.size() != dates.size() * contracts || ttm.size() != prices.size())
    throw data_error("futures panel: inconsistent dimensions");
  for (std::size_t d = 0; d < dates.size(); ++d) {
    if (d > 0 && !(dates[d - 1] < dates[d]))
      throw data_error(fmt::format("futures panel: dates not strictly ascending at row {}", d + 2));
    for (int j = 0; j < contracts; ++j) {
      if (!(price(d, j) > 0.0))
        throw data_error(fmt::format("futures panel: row {}: price_f{} must be positive", d + 2, j + 1));
      if (!(maturity(d, j) > 0.0))
        throw data_error(fmt::format("futures panel: row {}: ttm_f{} must be positive", d + 2, j + 1));
      if (j > 0 && !(maturity(d, j) > maturity(d, j - 1)))
        throw data_error(fmt::format(
            "futures panel: row {}: maturities must increase across contracts", d + 2));
    }
  }
}

FuturesPanel read_futures_csv(const std::string& path, bool drop_incomplete) {
  const auto lines = csv::read_lines(path);
  if (lines.empty() || lines.front().empty()) throw data_error(path + ": empty file");
  const auto header = csv::split(lines.front());
  if (header.size() < 3 || (header.size() - 1) % 2 != 0 || header[0] != "date")
    throw data_error(path + ": header must be date,price_f1,ttm_f1,...");
  const int k = static_cast<int>((header.size() - 1) / 2);
  for (int j = 0; j < k; ++j) {
    if (header[1 + 2 * j] != fmt::format("price_f{}", j + 1) ||
        header[2 + 2 * j] != fmt::format("ttm_f{}", j + 1))
      throw data_error(fmt::format("{}: header column {} should be price_f{} / ttm_f{}", path,
                                   2 + 2 * j, j + 1, j + 1));
  }
  FuturesPanel panel;
  panel.contracts = k;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    if (lines[row].empty()) continue;
    const auto cells = csv::split(lines[row]);
    const std::size_t line_no = row + 1;
    if (cells.size() != header.size())
      throw data_error(fmt::format("{}: row {} has {} columns, expected {}", path, line_no,
                                   cells.size(), header.size()));
    bool gap = false;
    for (const auto& c : cells) gap = gap || c.empty();
    if (gap) {
      if (drop_incomplete) continue;
      throw data_error(fmt::format("{}: row {} has empty cells", path, line_no));
    }
    if (!iso_date(cells[0]))
      throw data_error(fmt::format("{}: row {}, column 'date': '{}' is not YYYY-MM-DD", path,
                                   line_no, cells[0]));
    panel.dates.push_back(cells[0]);
    for (int j = 0; j < k; ++j) {
      panel.prices.push_back(csv::parse_number(cells[1 + 2 * j], path, line_no, header[1 + 2 * j]));
      panel.ttm.push_back(csv::parse_number(cells[2 + 2 * j], path, line_no, header[2 + 2 * j]));
    }
  }
  if (panel.dates.empty()) throw data_error(path + ": no data rows");
  panel.validate();
  return panel;
}

void write_futures_csv(const FuturesPanel& panel, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw data_error("cannot open " + path + " for writing");
  os << "date";
  for (int j = 0; j < panel.contracts; ++j) os << ",price_f" << j + 1 << ",ttm_f" << j + 1;
  os << '\n';
  for (std::size_t d = 0; d < panel.size(); ++d) {
    os << panel.dates[d];
    for (int j = 0; j < panel.contracts; ++j)
      os << ',' << csv::format(panel.price(d, j)) << ',' << csv::format(panel.maturity(d, j));
    os << '\n';
  }
}

double futures_delta_loading(double tau, double kappa) {
  return -(1.0 - std::exp(-kappa * tau)) / kappa;
}

double futures_intercept(double tau, const ModelParams& p) {
  const double k = p.kappa_d, sd = p.sigma_d, sp = p.sigma_p;
  const double linear =
      (p.r - p.mu_d + 0.5 * (sd / k) * (sd / k) - sp * sd * p.rho / k) * tau;
  const double quad = 0.25 * sd * sd * (1.0 - std::exp(-2.0 * k * tau)) / (k * k * k);
  const double mixed = (p.mu_d * k + sp * sd * p.rho - sd * sd / k) *
                       (1.0 - std::exp(-k * tau)) / (k * k);
  return linear + quad + mixed;
}

double futures_price(const StateVec& state, double tau, const ModelParams& params) {
  if (tau < 0.0) throw usage_error("futures_price: tau must be >= 0");
  return state.price * std::exp(state.delta * futures_delta_loading(tau, params.kappa_d) +
                                futures_intercept(tau, params));
}

namespace {

bool admissible(const TwoFactorTheta& th, int contracts) {
  const auto& m = th.model;
  if (!(m.sigma_p > 0.0 && m.sigma_d > 0.0 && m.kappa_d > 0.0 && m.rho > -1.0 && m.rho < 1.0))
    return false;
  if (!std::isfinite(m.mu_d)) return false;
  if (static_cast<int>(th.noise.size()) != contracts) return false;
  for (double d : th.noise)
    if (!(d > 0.0) || !std::isfinite(d)) return false;
  return true;
}

constexpr double kLog2Pi = 1.8378770664093454836;

}  // namespace

KalmanRun run_kalman(const FuturesPanel& panel, const TwoFactorTheta& theta, double dt,
                     bool keep_states) {
  KalmanRun run;
  if (!admissible(theta, panel.contracts)) {
    run.loglik = -std::numeric_limits<double>::infinity();
    return run;
  }
  const ModelParams& p = theta.model;
  const double k = p.kappa_d;
  const Eigen::Vector2d c(k * p.mu_d * dt, (p.r - 0.5 * p.sigma_p * p.sigma_p) * dt);
  Eigen::Matrix2d f;
  f << 1.0 - k * dt, 0.0, -dt, 1.0;
  Eigen::Matrix2d q;
  q << p.sigma_d * p.sigma_d, p.rho * p.sigma_d * p.sigma_p, p.rho * p.sigma_d * p.sigma_p,
      p.sigma_p * p.sigma_p;
  q *= dt;

  Eigen::Vector2d m(p.mu_d, std::log(panel.price(0, 0)));
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  cov(0, 0) = p.sigma_d * p.sigma_d / (2.0 * k);
  cov(1, 1) = 1.0;

  if (keep_states) run.filtered.reserve(panel.size());
  double ll = 0.0;
  for (std::size_t d = 0; d < panel.size(); ++d) {
    if (d > 0) {
      m = c + f * m;
      cov = f * cov * f.transpose() + q;
    }
    // Diagonal measurement noise: process the contracts one at a time; the
    // summed univariate terms equal the joint Gaussian log-density.
    for (int j = 0; j < panel.contracts; ++j) {
      const double tau = panel.maturity(d, j);
      const Eigen::Vector2d h(futures_delta_loading(tau, k), 1.0);
      const double pred = futures_intercept(tau, p) + h.dot(m);
      const double v = std::log(panel.price(d, j)) - pred;
      const Eigen::Vector2d ph = cov * h;
      const double s = h.dot(ph) + theta.noise[j] * theta.noise[j];
      if (!(s > 0.0) || !std::isfinite(s)) {
        run.loglik = -std::numeric_limits<double>::infinity();
        return run;
      }
      const Eigen::Vector2d gain = ph / s;
      m += gain * v;
      cov -= gain * ph.transpose();
      ll += -0.5 * (kLog2Pi + std::log(s) + v * v / s);
    }
    cov = 0.5 * (cov + cov.transpose()).eval();
    if (keep_states) run.filtered.push_back({m, cov});
  }
  run.loglik = std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
  return run;
}

double kalman_loglik(const FuturesPanel& panel, const TwoFactorTheta& theta, double dt) {
  return run_kalman(panel, theta, dt, false).loglik;
}

std::vector<std::string> EstimationResult::names(int contracts) {
  std::vector<std::string> out{"sigma_p", "sigma_d", "kappa_d", "mu_d", "rho"};
  for (int j = 0; j < contracts; ++j) out.push_back(fmt::format("d{}", j + 1));
  return out;
}

namespace {

// Unconstrained coordinates: log for positive parameters, atanh for rho,
// identity for mu (dropped when mu is fixed).
struct Transform {
  int contracts;
  bool fix_mu;
  double fixed_mu;
  ModelParams base;

  int size() const { return (fix_mu ? 4 : 5) + contracts; }

  std::vector<double> to_free(const TwoFactorTheta& th) const {
    std::vector<double> x{std::log(th.model.sigma_p), std::log(th.model.sigma_d),
                          std::log(th.model.kappa_d)};
    if (!fix_mu) x.push_back(th.model.mu_d);
    x.push_back(std::atanh(th.model.rho));
    for (double d : th.noise) x.push_back(std::log(d));
    return x;
  }

  TwoFactorTheta from_free(const double* x) const {
    TwoFactorTheta th;
    th.model = base;
    int k = 0;
    th.model.sigma_p = std::exp(x[k++]);
    th.model.sigma_d = std::exp(x[k++]);
    th.model.kappa_d = std::exp(x[k++]);
    th.model.mu_d = fix_mu ? fixed_mu : x[k++];
    th.model.rho = std::tanh(x[k++]);
    th.noise.resize(contracts);
    for (int j = 0; j < contracts; ++j) th.noise[j] = std::exp(x[k++]);
    return th;
  }

  // d(natural)/d(free) for each free coordinate, and the natural-parameter
  // slot (0..4+K) it maps to.
  std::vector<std::pair<int, double>> jacobian(const TwoFactorTheta& th) const {
    std::vector<std::pair<int, double>> out{
        {0, th.model.sigma_p}, {1, th.model.sigma_d}, {2, th.model.kappa_d}};
    if (!fix_mu) out.emplace_back(3, 1.0);
    out.emplace_back(4, 1.0 - th.model.rho * th.model.rho);
    for (int j = 0; j < contracts; ++j) out.emplace_back(5 + j, th.noise[j]);
    return out;
  }
};

struct Objective {
  const FuturesPanel* panel;
  const Transform* transform;
  double dt;

  double operator()(const double* x) const {
    const double ll = kalman_loglik(*panel, transform->from_free(x), dt);
    return std::isfinite(ll) ? -ll : 1e30;
  }
};

double gsl_f(const gsl_vector* v, void* params) {
  return (*static_cast<Objective*>(params))(v->data);
}

constexpr double kGradStep = 1e-4;

void numeric_gradient(const Objective& obj, std::vector<double> x, double* grad) {
  for (std::size_t a = 0; a < x.size(); ++a) {
    const double x0 = x[a];
    x[a] = x0 + kGradStep;
    const double fp = obj(x.data());
    x[a] = x0 - kGradStep;
    const double fm = obj(x.data());
    x[a] = x0;
    grad[a] = (fp - fm) / (2.0 * kGradStep);
  }
}

void gsl_df(const gsl_vector* v, void* params, gsl_vector* g) {
  std::vector<double> x(v->data, v->data + v->size);
  numeric_gradient(*static_cast<Objective*>(params), std::move(x), g->data);
}

void gsl_fdf(const gsl_vector* v, void* params, double* f, gsl_vector* g) {
  *f = gsl_f(v, params);
  gsl_df(v, params, g);
}

struct StartOutcome {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  double grad_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

StartOutcome run_start(Objective obj, std::vector<double> x0, const OptimizerConfig& cfg) {
  const std::size_t n = x0.size();
  StartOutcome out;
  gsl_vector* x = gsl_vector_alloc(n);
  for (std::size_t a = 0; a < n; ++a) gsl_vector_set(x, a, x0[a]);

  if (!cfg.skip_simplex) {
    gsl_multimin_function fn{&gsl_f, n, &obj};
    gsl_vector* step = gsl_vector_alloc(n);
    gsl_vector_set_all(step, 0.1);
    gsl_multimin_fminimizer* nm =
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
    gsl_multimin_fminimizer_set(nm, &fn, x, step);
    int status = GSL_CONTINUE;
    for (int it = 0; it < cfg.max_iterations && status == GSL_CONTINUE; ++it, ++out.iterations) {
      if (gsl_multimin_fminimizer_iterate(nm)) break;
      status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(nm), 1e-6);
    }
    gsl_vector_memcpy(x, gsl_multimin_fminimizer_x(nm));
    gsl_multimin_fminimizer_free(nm);
    gsl_vector_free(step);
  }

  gsl_multimin_function_fdf fdf{&gsl_f, &gsl_df, &gsl_fdf, n, &obj};
  gsl_multimin_fdfminimizer* qn =
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, n);
  gsl_multimin_fdfminimizer_set(qn, &fdf, x, 0.01, 0.1);
  int status = GSL_CONTINUE;
  for (int it = 0; it < cfg.max_iterations && status == GSL_CONTINUE; ++it, ++out.iterations) {
    if (gsl_multimin_fdfminimizer_iterate(qn)) break;
    status = gsl_multimin_test_gradient(gsl_multimin_fdfminimizer_gradient(qn),
                                        cfg.gradient_tolerance);
  }
  const gsl_vector* best = gsl_multimin_fdfminimizer_x(qn);
  out.x.assign(best->data, best->data + n);
  out.value = obj(out.x.data());
  gsl_multimin_fdfminimizer_free(qn);
  gsl_vector_free(x);

  std::vector<double> g(n);
  numeric_gradient(obj, out.x, g.data());
  double norm = 0.0;
  for (double v : g) norm += v * v;
  out.grad_norm = std::sqrt(norm);
  return out;
}

Eigen::MatrixXd numeric_hessian(const Objective& obj, std::vector<double> x) {
  const int n = static_cast<int>(x.size());
  const double h = 1e-3;
  const double f0 = obj(x.data());
  Eigen::MatrixXd hess(n, n);
  for (int a = 0; a < n; ++a) {
    const double xa = x[a];
    x[a] = xa + h;
    const double fp = obj(x.data());
    x[a] = xa - h;
    const double fm = obj(x.data());
    x[a] = xa;
    hess(a, a) = (fp - 2.0 * f0 + fm) / (h * h);
    for (int b = 0; b < a; ++b) {
      const double xb = x[b];
      double acc = 0.0;
      for (int sa : {1, -1}) {
        for (int sb : {1, -1}) {
          x[a] = xa + sa * h;
          x[b] = xb + sb * h;
          acc += sa * sb * obj(x.data());
        }
      }
      x[a] = xa;
      x[b] = xb;
      hess(a, b) = hess(b, a) = acc / (4.0 * h * h);
    }
  }
  return hess;
}

}  // namespace

EstimationResult estimate_two_factor(const FuturesPanel& panel, const TwoFactorTheta& init,
                                     const OptimizerConfig& cfg) {
  panel.validate();
  if (cfg.starts < 1) throw usage_error("estimation: starts must be >= 1");
  if (static_cast<int>(init.noise.size()) != panel.contracts)
    throw usage_error(fmt::format("estimation: {} noise parameters for {} contracts",
                                  init.noise.size(), panel.contracts));
  TwoFactorTheta start = init;
  if (cfg.fix_mu) start.model.mu_d = cfg.fixed_mu;
  if (!admissible(start, panel.contracts))
    throw usage_error("estimation: initial parameters outside their bounds");

  gsl_set_error_handler_off();
  const Transform tf{panel.contracts, cfg.fix_mu, cfg.fixed_mu, start.model};
  const Objective obj{&panel, &tf, cfg.dt};
  const std::vector<double> x_init = tf.to_free(start);

  std::vector<StartOutcome> outcomes(static_cast<std::size_t>(cfg.starts));
#pragma omp parallel for schedule(dynamic)
  for (int s = 0; s < cfg.starts; ++s) {
    std::vector<double> x0 = x_init;
    if (s > 0) {
      Engine engine = make_engine(cfg.seed, Stream::MultiStart, {static_cast<std::uint64_t>(s)});
      std::normal_distribution<double> jitter(0.0, cfg.start_spread);
      for (double& v : x0) v += jitter(engine);
    }
    outcomes[s] = run_start(obj, std::move(x0), cfg);
  }
  std::size_t best = 0;
  for (std::size_t s = 1; s < outcomes.size(); ++s)
    if (outcomes[s].value < outcomes[best].value) best = s;
  const StartOutcome& win = outcomes[best];

  EstimationResult res;
  res.theta = tf.from_free(win.x.data());
  res.loglik = -win.value;
  res.mu_fixed = cfg.fix_mu;
  res.iterations = win.iterations;
  res.starts_used = cfg.starts;
  res.gradient_norm = win.grad_norm;
  const auto& m = res.theta.model;
  res.estimates = {m.sigma_p, m.sigma_d, m.kappa_d, m.mu_d, m.rho};
  for (double d : res.theta.noise) res.estimates.push_back(d);

  // Standard errors: inverse Hessian of -loglik in free coordinates, mapped to
  // natural parameters with the (diagonal) Jacobian of the transform.
  const Eigen::MatrixXd hess = numeric_hessian(obj, win.x);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
  Eigen::MatrixXd cov_free;
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
      (ldlt.vectorD().array() > 0.0).all()) {
    cov_free = ldlt.solve(Eigen::MatrixXd::Identity(hess.rows(), hess.cols()));
  } else {
    res.hessian_ok = false;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess);
    Eigen::VectorXd inv = eig.eigenvalues().cwiseAbs().cwiseMax(1e-12).cwiseInverse();
    cov_free = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  }
  const std::size_t np = res.estimates.size();
  res.std_errors.assign(np, 0.0);
  const auto jac = tf.jacobian(res.theta);
  for (std::size_t a = 0; a < jac.size(); ++a) {
    const auto [slot, dj] = jac[a];
    res.std_errors[slot] = std::abs(dj) * std::sqrt(std::max(cov_free(a, a), 0.0));
  }
  for (std::size_t a = 0; a < np; ++a) {
    res.ci_lo.push_back(res.estimates[a] - 1.96 * res.std_errors[a]);
    res.ci_hi.push_back(res.estimates[a] + 1.96 * res.std_errors[a]);
  }

  if (!(win.grad_norm <= cfg.gradient_tolerance * 10.0) || !std::isfinite(res.loglik)) {
    throw EstimationFailure(
        fmt::format("estimation did not converge after {} iterations (best log-likelihood {}, "
                    "gradient norm {})",
                    win.iterations, res.loglik, win.grad_norm),
        res);
  }
  return res;
}

UncertaintyBox build_uncertainty_box(const EstimationResult& result,
                                     std::array<double, 2> mu_range,
                                     std::array<double, 2> lambda_ci) {
  if (result.estimates.size() < 5) throw usage_error("build_uncertainty_box: empty result");
  UncertaintyBox box;
  box.kappa_lo = result.ci_lo[2];
  box.kappa_hi = result.ci_hi[2];
  box.mu_lo = mu_range[0];
  box.mu_hi = mu_range[1];
  box.lambda_lo = lambda_ci[0];
  box.lambda_hi = lambda_ci[1];
  return box;
}

FuturesPanel synthetic_panel(const TwoFactorTheta& theta, std::size_t dates, std::uint64_t seed,
                             double dt, double initial_price) {
  const ModelParams& p = theta.model;
  const int k = static_cast<int>(theta.noise.size());
  FuturesPanel panel;
  panel.contracts = k;
  Engine engine = make_engine(seed, Stream::SyntheticPanel, {});
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::Matrix2d q;
  q << p.sigma_d * p.sigma_d, p.rho * p.sigma_d * p.sigma_p, p.rho * p.sigma_d * p.sigma_p,
      p.sigma_p * p.sigma_p;
  const Eigen::Matrix2d chol = (q * dt).llt().matrixL();
  Eigen::Vector2d x(p.mu_d, std::log(initial_price));

  using namespace std::chrono;
  sys_days day = sys_days{year{1993} / September / 8};
  for (std::size_t d = 0; d < dates; ++d) {
    if (d > 0) {
      const Eigen::Vector2d eta = chol * Eigen::Vector2d(gauss(engine), gauss(engine));
      const double delta = x[0];
      x[0] = p.kappa_d * p.mu_d * dt + (1.0 - p.kappa_d * dt) * delta + eta[0];
      x[1] = (p.r - 0.5 * p.sigma_p * p.sigma_p) * dt - dt * delta + x[1] + eta[1];
    }
    const year_month_day ymd{day};
    panel.dates.push_back(fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                                      static_cast<unsigned>(ymd.month()),
                                      static_cast<unsigned>(ymd.day())));
    day += days{7};
    const double roll = 0.03 * (static_cast<double>(d % 4) - 1.5) / 1.5;
    for (int j = 0; j < k; ++j) {
      const double tau = 0.042 + 0.0834 * j + roll + 0.012;
      const double logf = futures_intercept(tau, p) + futures_delta_loading(tau, p.kappa_d) * x[0] +
                          x[1] + theta.noise[j] * gauss(engine);
      panel.prices.push_back(std::exp(logf));
      panel.ttm.push_back(tau);
    }
  }
  return panel;
}

}  // namespace forestval
