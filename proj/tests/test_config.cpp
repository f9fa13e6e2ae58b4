/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#include <doctest.h>

#include "forestval/config.hpp"
#include "forestval/errors.hpp"

using namespace forestval;

namespace {

std::string usage_message(const std::string& text) {
  try {
    load_config_text(text, "t.ini");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Usage);
    return e.what();
  }
  return "no error";
}

bool contains(const std::string& s, const std::string& part) {
  return s.find(part) != std::string::npos;
}

}  // namespace

TEST_CASE("defaults describe the full-resolution run") {
  const RunConfig c;
  CHECK(c.grid.horizon == 150.0);
  CHECK(c.grid.steps == 3000);
  CHECK(c.grid.dt() == doctest::Approx(0.05));
  CHECK(c.strat.cells_price == 80);
  CHECK(c.strat.cells_delta == 80);
  CHECK(c.strat.samples_per_cube == 1000);
  CHECK(c.strat.log_price_lo == -2.5);
  CHECK(c.strat.log_price_hi == 8.5);
  CHECK(c.initial.price == 600.0);
  CHECK(c.initial.delta == -0.01);
  CHECK(c.stopping_paths == 100000);
  CHECK(c.runs == 10);
  CHECK(c.paths_per_run == 1000);
  CHECK(c.carbon_amenity == 47.54);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("text round trip and hash") {
  const RunConfig c;
  const std::string text = c.dump();
  const RunConfig back = load_config_text(text);
  CHECK(back.dump() == text);
  CHECK(back.hash() == c.hash());
  CHECK(c.hash() == fnv1a(text));
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);

  RunConfig d = c;
  d.seed = 43;
  CHECK(d.hash() != c.hash());
  d = c;
  d.model.sigma_p = std::nextafter(d.model.sigma_p, 1.0);
  CHECK(d.hash() != c.hash());
  CHECK(load_config_text(d.dump()).model.sigma_p == d.model.sigma_p);

  CHECK(load_config(FV_SOURCE_DIR "/configs/full.ini").dump() == text);
  RunConfig desk = c;
  apply_scale(desk, 0.1);
  CHECK(load_config(FV_SOURCE_DIR "/configs/desk.ini").dump() == desk.dump());
}

TEST_CASE("partial files override defaults only where given") {
  const RunConfig c = load_config_text(
      "; comment\n# other comment\n[grid]\nsteps = 60\n[valuation]\nconvention = "
      "grace-consistent\n[boundary]\ntimes = 55\n[solver]\nz_estimator = centered\n"
      "[estimation]\nfix_mu = true\nnoise = 0.1, 0.2\n");
  CHECK(c.grid.steps == 60);
  CHECK(c.grid.horizon == 150.0);
  CHECK(c.convention == ValuationConvention::GraceConsistent);
  CHECK(c.boundary_times == std::vector<double>{55.0});
  CHECK(c.z_estimator == ZEstimator::Centered);
  CHECK(c.estimation.optimizer.fix_mu);
  CHECK(c.estimation.noise_init == std::vector<double>{0.1, 0.2});
  CHECK(c.model.rho == RunConfig{}.model.rho);
}

TEST_CASE("malformed configurations") {
  CHECK(contains(usage_message("[model]\nsigma_q = 1\n"), "unknown key 'sigma_q'"));
  CHECK(contains(usage_message("[modle]\nsigma_p = 1\n"), "modle"));
  CHECK(contains(usage_message("[model]\nsigma_p = abc\n"), "not a finite number"));
  CHECK(contains(usage_message("[model]\nsigma_p = -1\n"), "sigma_p"));
  CHECK(contains(usage_message("[grid]\nsteps = 2.5\n"), "not an integer"));
  CHECK(contains(usage_message("[estimation]\nfix_mu = perhaps\n"), "boolean"));
  CHECK(contains(usage_message("[valuation]\nconvention = other\n"), "convention"));
  CHECK(contains(usage_message("[solver]\nz_estimator = fancy\n"), "z_estimator"));
  CHECK(contains(usage_message("[box]\nkappa_lo = 2\n"), "box"));
  CHECK(contains(usage_message("[model]\nsigma_p\n"), "t.ini"));
  CHECK_THROWS_AS(load_config("/nonexistent/forestval.ini"), Error);
}

TEST_CASE("scale presets") {
  RunConfig c;
  apply_scale(c, 0.1);
  CHECK(c.grid.steps == 300);
  CHECK(c.grid.horizon == 150.0);
  CHECK(c.strat.cells_price == 40);
  CHECK(c.strat.cells_delta == 40);
  CHECK(c.strat.samples_per_cube == 250);
  CHECK(c.stopping_paths == 10000);
  CHECK(c.paths_per_run == 100);
  CHECK(c.runs == 10);

  RunConfig one;
  apply_scale(one, 1.0);
  CHECK(one.dump() == RunConfig{}.dump());

  RunConfig tiny;
  apply_scale(tiny, 0.01);
  CHECK(tiny.grid.steps == 30);
  CHECK(tiny.strat.cells_price == 20);
  CHECK(tiny.strat.samples_per_cube == 63);

  for (double bad : {0.0, -0.5, 1.5}) {
    RunConfig x;
    CHECK_THROWS_AS(apply_scale(x, bad), Error);
  }
}

TEST_CASE("derived solver and scenario settings") {
  RunConfig c;
  apply_scale(c, 0.1);
  const SolverConfig s = c.solver_config(Scenario::Optimistic);
  CHECK(s.scenario == Scenario::Optimistic);
  CHECK(s.config_hash == c.hash());
  CHECK(s.grid.steps == 300);
  CHECK(s.seed == c.seed);
  const ScenarioRunSpec spec = c.scenario_spec({Scenario::NoUncertainty});
  CHECK(spec.stopping_paths == 10000);
  CHECK(spec.scenarios.size() == 1);
  CHECK(spec.boundary_times == c.boundary_times);
}
