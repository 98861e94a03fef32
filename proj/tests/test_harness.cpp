#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gradlab/benchmarks.hpp"
#include "gradlab/harness.hpp"
#include "gradlab/trace_io.hpp"

using namespace gradlab;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig config_from_string(const std::string& text) {
  return parse_experiment_config(Json::parse(text));
}

const char* kQuadRun = R"({
  "objective": {"name": "half_sq_norm", "params": {"dim": 2, "box_radius": 4.0, "x0": [1.0, -1.0]}},
  "optimizer": {"method": "nag", "alpha": 0.1, "mu": 0.9},
  "max_steps": 50,
  "out_dir": "test_out"
})";

}  // namespace

TEST_CASE("config parsing: diagnostics name the offending field") {
  CHECK_THROWS_WITH_AS(config_from_string("{}"), doctest::Contains("objective"), ConfigError);
  CHECK_THROWS_WITH_AS(
      config_from_string(R"({"objective": {"name": "half_sq_norm"}})"),
      doctest::Contains("optimizer"), ConfigError);
  CHECK_THROWS_WITH_AS(
      config_from_string(
          R"({"objective": {"name": "x"}, "optimizer": {"method": "sgd"}})"),
      doctest::Contains("optimizer.method"), ConfigError);
  CHECK_THROWS_WITH_AS(
      config_from_string(
          R"({"objective": {"name": "x"}, "optimizer": {"method": "nag", "alpha": "big"}})"),
      doctest::Contains("optimizer.alpha"), ConfigError);
  CHECK_THROWS_WITH_AS(
      config_from_string(
          R"({"objective": {"name": "x"}, "optimizer": {"method": "nag"}, "budget": {"theorem": "rmsprop_det", "epsilon": 0.1}})"),
      doctest::Contains("exactly one"), ConfigError);
  CHECK_THROWS_WITH_AS(
      config_from_string(
          R"({"objective": {"name": "x"}, "optimizer": {"method": "nag"}, "seeds": []})"),
      doctest::Contains("seeds"), ConfigError);

  // Unknown objective names surface at problem-build time.
  const auto cfg = config_from_string(
      R"({"objective": {"name": "mystery"}, "optimizer": {"method": "nag"}})");
  CHECK_THROWS_WITH_AS(build_problem(cfg, 1), doctest::Contains("objective.name"), ConfigError);
}

TEST_CASE("trace io: round trip, empty trace, byte determinism") {
  std::filesystem::create_directories("test_out");

  std::vector<TraceRecord> trace;
  TraceRecord a;
  a.t = 1;
  a.f = 1.0 / 3.0;
  a.grad_norm = 0.70710678118654746;
  a.alpha = 1e-17;
  a.grad_norm_min = a.grad_norm;
  TraceRecord b;
  b.t = 2;
  b.f = -2.5e-300;
  b.grad_norm = 3.14159265358979312;
  b.alpha = 0.1;
  b.lambda_min = -0.125;
  b.f_test = 42.0;
  b.grad_norm_min = a.grad_norm;
  trace = {a, b};

  write_trace(trace, "test_out/trace_roundtrip.csv");
  const auto back = read_trace("test_out/trace_roundtrip.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].t == 1);
  CHECK(back[0].f == a.f);
  CHECK(back[0].grad_norm == a.grad_norm);
  CHECK(back[0].alpha == a.alpha);
  CHECK(!back[0].lambda_min.has_value());
  CHECK(back[1].f == b.f);
  CHECK(*back[1].lambda_min == -0.125);
  CHECK(*back[1].f_test == 42.0);

  write_trace({}, "test_out/trace_empty.csv");
  CHECK(slurp("test_out/trace_empty.csv") == "t,f,grad_norm,alpha,lambda_min,f_test\n");

  const auto cfg = config_from_string(kQuadRun);
  run_and_write(cfg, 7, "det_a");
  run_and_write(cfg, 7, "det_b");
  CHECK(slurp("test_out/det_a.csv") == slurp("test_out/det_b.csv"));
}

TEST_CASE("run_experiment: budget runs and plain runs") {
  const auto cfg = config_from_string(kQuadRun);
  const RunResult r = run_experiment(cfg, 3);
  CHECK(r.trace.size() <= 50);
  CHECK(r.trace.front().t == 1);
  CHECK(r.trace.front().f == doctest::Approx(1.0));  // 0.5*|x0|^2

  // Strided recording keeps the first and last iterates.
  auto cfg2 = cfg;
  cfg2.record_stride = 7;
  const RunResult r2 = run_experiment(cfg2, 3);
  CHECK(r2.trace.front().t == 1);
  CHECK(r2.trace.back().t == 50);
  for (std::size_t i = 0; i + 1 < r2.trace.size(); ++i)
    CHECK(((r2.trace[i].t - 1) % 7 == 0 || r2.trace[i].t == 50));
}

TEST_CASE("select_step_size: interior rule examples") {
  {
    const auto sel = select_step_size({{1e-3, 0.5}, {1e-4, 0.3}, {1e-5, 0.4}});
    CHECK(sel.best_alpha == 1e-4);
    CHECK(!sel.at_low_edge);
    CHECK(!sel.at_high_edge);
  }
  {
    const auto sel = select_step_size({{1e-3, 0.2}, {1e-4, 0.3}, {1e-5, 0.4}});
    CHECK(sel.best_alpha == 1e-3);
    CHECK(sel.at_high_edge);
    CHECK(!sel.at_low_edge);
  }
  {  // ties break toward the smaller step size
    const auto sel = select_step_size({{1e-3, 0.2}, {1e-4, 0.2}, {1e-5, 0.4}});
    CHECK(sel.best_alpha == 1e-4);
  }
  {  // diverged cells are ignored
    const auto sel = select_step_size(
        {{1e-3, std::numeric_limits<double>::infinity()}, {1e-4, 0.3}, {1e-5, 0.4}});
    CHECK(sel.best_alpha == 1e-4);
  }
  CHECK_THROWS_AS(
      select_step_size({{1e-3, std::numeric_limits<double>::infinity()},
                        {1e-4, std::numeric_limits<double>::infinity()}}),
      RunFailure);
}

TEST_CASE("grid_search: enumeration oracle and order invariance") {
  // Single mu axis at fixed alpha: the grid must agree with running the two
  // cells by hand.
  auto base = config_from_string(R"({
    "objective": {"name": "half_sq_norm", "params": {"dim": 1, "box_radius": 4.0, "x0": [1.0]}},
    "optimizer": {"method": "nag", "alpha": 0.05, "mu": 0.9},
    "max_steps": 40,
    "out_dir": "test_out"
  })");

  GridSpec grid;
  grid.axes["alpha"] = {0.05};
  grid.axes["mu"] = {0.9, 0.99};
  grid.interior_rule = false;

  const GridResult result = grid_search(grid, base);
  REQUIRE(result.cells.size() == 2);

  double best_loss = std::numeric_limits<double>::infinity();
  double best_mu = -1.0;
  for (double mu : {0.9, 0.99}) {
    auto cfg = base;
    cfg.optimizer->mu = mu;
    const RunResult r = run_experiment(cfg, base.seeds.front());
    if (r.trace.back().f < best_loss) {
      best_loss = r.trace.back().f;
      best_mu = mu;
    }
  }
  CHECK(result.best.at("mu") == best_mu);
  CHECK(result.best_loss == best_loss);

  GridSpec shuffled = grid;
  shuffled.axes["mu"] = {0.99, 0.9};
  const GridResult again = grid_search(shuffled, base);
  CHECK(again.best.at("mu") == best_mu);
  CHECK(again.best_loss == best_loss);
}

TEST_CASE("grid_search: edge extension until interior") {
  // On f = |x|^2/2 with plain gradient steps the final loss keeps improving
  // up to alpha = 1 (where it hits the minimum exactly) and explodes past
  // alpha = 2, so a grid topping out at 0.1 must extend upward to 1 and stop
  // once 10 diverges.
  auto base = config_from_string(R"({
    "objective": {"name": "half_sq_norm", "params": {"dim": 1, "box_radius": 4.0, "x0": [1.0]}},
    "optimizer": {"method": "nag", "alpha": 0.01, "mu": 0.0},
    "max_steps": 30,
    "out_dir": "test_out"
  })");

  GridSpec grid;
  grid.axes["alpha"] = {0.001, 0.01, 0.1};
  grid.max_extensions = 3;

  const GridResult result = grid_search(grid, base);
  CHECK(result.extensions_used == 2);
  CHECK(result.interior);
  CHECK(result.best.at("alpha") == doctest::Approx(1.0));
  CHECK(result.best_loss == 0.0);
  CHECK(result.cells.size() == 5);

  int blown_up = 0;  // the alpha = 10 probe oscillates outward: (1-10)^t growth
  for (const auto& cell : result.cells)
    if (!std::isfinite(cell.final_loss) || cell.final_loss > 1e10) ++blown_up;
  CHECK(blown_up >= 1);
}

TEST_CASE("certify: deterministic RMSProp on the quadratic") {
  auto cfg = config_from_string(R"({
    "objective": {"name": "half_sq_norm", "params": {"dim": 2, "box_radius": 2.0, "x0": [1.0, 1.0]}},
    "budget": {"theorem": "rmsprop_det", "epsilon": 0.1, "beta2": 0.9, "xi": 1.0},
    "out_dir": "test_out"
  })");
  const CertReport report = certify_budget(cfg);
  CHECK(!report.advisory);
  CHECK(report.hit);
  CHECK(report.certified());
  CHECK(report.t_star >= 1);
  CHECK(report.t_star <= report.cap);
  CHECK(report.decrease_violations == 0);
  CHECK(report.precond_violations == 0);
  CHECK(report.achieved <= 0.1);

  // Tolerance above the starting gradient norm: immediate hit.
  auto easy = cfg;
  easy.raw["budget"]["epsilon"] = 10.0;
  easy.budget->epsilon = 10.0;
  const CertReport trivial = certify_budget(easy);
  CHECK(trivial.hit);
  CHECK(trivial.t_star == 1);
}

TEST_CASE("certify: stochastic certificate and sign audit voiding") {
  auto good = config_from_string(R"({
    "objective": {"name": "scaled_softplus_sum",
                  "params": {"dim": 4, "pairs": 2, "scale": 0.5, "k": 5, "seed": 3, "x0_radius": 1.0}},
    "budget": {"theorem": "rmsprop_stoch", "epsilon": 0.6, "beta2": 0.9, "xi": 1.0},
    "seeds": [1, 2, 3, 4, 5],
    "out_dir": "test_out"
  })");
  const CertReport report = certify_budget(good);
  CHECK(report.sign_violations == 0);
  CHECK(report.hit);
  CHECK(report.certified());
  CHECK(report.per_seed.size() == 5);
  CHECK(report.achieved <= report.target);

  // Shifted quadratics disagree on gradient signs between their centers:
  // the certificate is voided but not errored.
  auto bad = config_from_string(R"({
    "objective": {"name": "shifted_quadratic_sum",
                  "params": {"dim": 2, "k": 4, "spread": 1.0, "box_radius": 3.0, "x0": [0.2, -0.1]}},
    "budget": {"theorem": "rmsprop_stoch", "epsilon": 0.8, "beta2": 0.9, "xi": 1.0},
    "seeds": [1, 2, 3],
    "out_dir": "test_out"
  })");
  const CertReport voided = certify_budget(bad);
  CHECK(voided.sign_violations > 0);
  CHECK(!voided.certified());

  // The seed list fully determines the stochastic report, also under the
  // parallel seed runner.
  const CertReport again = certify_budget(good);
  CHECK(again.achieved == report.achieved);
  CHECK(again.t_star == report.t_star);
  REQUIRE(again.min_curve.size() == report.min_curve.size());
  for (std::size_t t = 0; t < report.min_curve.size(); ++t)
    CHECK(again.min_curve[t] == report.min_curve[t]);
}

TEST_CASE("certify: estimated metadata downgrades to an advisory report") {
  auto cfg = config_from_string(R"({
    "objective": {"name": "autoencoder",
                  "params": {"ell": 1, "hidden": 4,
                              "data": {"source": "synthetic", "side": 4, "train": 30, "test": 0, "seed": 2}}},
    "budget": {"theorem": "rmsprop_det", "epsilon": 1.0, "beta2": 0.9, "xi": 1.0},
    "out_dir": "test_out"
  })");
  const CertReport report = certify_budget(cfg);
  CHECK(report.advisory);
  CHECK(!report.certified());  // advisory reports never certify
}

TEST_CASE("certify: no-shift variant reports the empirical hitting time") {
  auto cfg = config_from_string(R"({
    "objective": {"name": "half_sq_norm", "params": {"dim": 2, "box_radius": 2.0, "x0": [1.0, 1.0]}},
    "budget": {"theorem": "rmsprop_noshift", "epsilon": 0.05, "beta2": 0.9, "alpha0": 0.5},
    "max_steps": 5000,
    "out_dir": "test_out"
  })");
  const CertReport report = certify_budget(cfg);
  CHECK(!report.budget.max_steps.has_value());
  CHECK(report.cap == 5000);
  CHECK(report.hit);
  CHECK(report.t_star >= 1);
}

TEST_CASE("certify: deterministic ADAM with the theorem step rule") {
  auto cfg = config_from_string(R"({
    "objective": {"name": "half_sq_norm", "params": {"dim": 1, "box_radius": 1.0, "x0": [1.0]}},
    "budget": {"theorem": "adam_det", "epsilon": 1.0},
    "out_dir": "test_out"
  })");
  const CertReport report = certify_budget(cfg);
  CHECK(report.hit);
  CHECK(report.t_star == 1);  // eps = sigma means every point is critical
  CHECK(report.cap <= 9);
  CHECK(report.budget.derived.at("beta1") == doctest::Approx(1.0 / 3.0));
  CHECK(report.budget.derived.at("xi") == 2.0);
}

TEST_CASE("xi sweep: single value equals a plain run; ADAM displacement bound") {
  auto base = config_from_string(R"({
    "objective": {"name": "half_sq_norm", "params": {"dim": 2, "box_radius": 2.0, "x0": [1.0, -0.5]}},
    "optimizer": {"method": "adam", "alpha": 0.05, "alpha_rule": "constant",
                   "beta1": 0.9, "beta2": 0.999, "xi": 100.0},
    "max_steps": 60,
    "out_dir": "test_out/xis"
  })");

  const XiSweepResult one = xi_sweep(base, {100.0}, false, std::nullopt);
  REQUIRE(one.rows.size() == 1);
  const RunResult plain = run_experiment(base, base.seeds.front());
  CHECK(one.rows[0].final_train == plain.trace.back().f);
  CHECK(one.rows[0].final_grad == plain.trace.back().grad_norm);

  // Large xi caps the step: |x_{t+1} - x_t| <= alpha_t |m_t| / xi.
  {
    const auto obj = make_half_sq_norm(2, 2.0);
    OptimizerConfig ocfg = base.optimizer->to_config();
    auto s = make_state(Vector::Constant(2, 1.0));
    for (int t = 0; t < 40; ++t) {
      const Vector g = obj.gradient(s.x);
      const Vector x_before = s.x;
      adam_update(s, ocfg.beta1, ocfg.beta2, ocfg.xi, 0.05, g);
      CHECK((s.x - x_before).norm() <= 0.05 * s.m.norm() / ocfg.xi + 1e-15);
    }
  }

  const XiSweepResult two = xi_sweep(base, {1e-10, 1e-4}, false, std::nullopt);
  REQUIRE(two.rows.size() == 2);
  const std::string first = slurp(two.rows[0].trace_path);
  const XiSweepResult again = xi_sweep(base, {1e-10, 1e-4}, false, std::nullopt);
  CHECK(slurp(again.rows[0].trace_path) == first);

  CHECK_THROWS_AS(xi_sweep(config_from_string(kQuadRun), {1.0}, false, std::nullopt),
                  ConfigError);
}

TEST_CASE("compare: tiny autoencoder smoke test") {
  auto base = config_from_string(R"({
    "objective": {"name": "autoencoder",
                  "params": {"ell": 1, "hidden": 4,
                              "data": {"source": "synthetic", "side": 4, "train": 40, "test": 10, "seed": 5}}},
    "optimizer": {"method": "nag"},
    "batch": {"mode": "minibatch", "size": 10},
    "max_steps": 60,
    "record_stride": 10,
    "out_dir": "test_out/cmp"
  })");

  const CompareResult result = compare(base, default_compare_variants());
  CHECK(result.runs.size() == 5);
  CHECK(result.figure_paths.size() == 3);
  for (const auto& f : result.figure_paths) {
    CHECK(std::filesystem::exists(f));
    CHECK(std::filesystem::exists(f + ".dat"));
  }
  CHECK(std::filesystem::exists(result.summary_path));
  CHECK(result.summary.contains("observations"));
  for (const auto& r : result.runs) {
    CHECK(std::filesystem::exists(r.trace_path));
    CHECK(r.final_test.has_value());
  }

  // Fixed seed: byte-identical traces across invocations.
  const std::string before = slurp(result.runs[0].trace_path);
  const CompareResult again = compare(base, default_compare_variants());
  CHECK(slurp(again.runs[0].trace_path) == before);
}

TEST_CASE("run_experiment honors a theorem budget's rule and cap") {
  auto cfg = config_from_string(R"({
    "objective": {"name": "half_sq_norm", "params": {"dim": 2, "box_radius": 2.0, "x0": [1.0, 1.0]}},
    "optimizer": {"method": "nag", "alpha": 0.1},
    "out_dir": "test_out"
  })");
  ObjectiveMeta meta;
  meta.lipschitz = 1.0;
  meta.grad_bound = 2.0 * std::sqrt(2.0);
  const auto budget = rmsprop_det_budget(meta, 1.0, 0.9, 1.0, 0.2);
  const RunResult r = run_experiment(cfg, 1, budget);
  CHECK(r.status == RunStatus::kHitTolerance);
  REQUIRE(!r.trace.empty());
  CHECK(r.trace.back().grad_norm <= 0.2);
  CHECK(r.trace.back().t <= *budget.max_steps);
  CHECK(r.trace.front().alpha == budget.derived.at("alpha"));
}

TEST_CASE("xi sweep with per-xi step-size re-tuning") {
  auto base = config_from_string(R"({
    "objective": {"name": "half_sq_norm", "params": {"dim": 1, "box_radius": 4.0, "x0": [1.0]}},
    "optimizer": {"method": "rmsprop", "alpha": 0.001, "beta2": 0.9, "xi": 1e-8},
    "max_steps": 50,
    "out_dir": "test_out/xis_retune"
  })");
  GridSpec grid;
  grid.axes["alpha"] = {0.001, 0.01, 0.1};
  grid.interior_rule = false;
  const XiSweepResult sweep = xi_sweep(base, {1e-8, 1.0}, true, grid);
  REQUIRE(sweep.rows.size() == 2);
  // Re-tuning picked something from the grid, not necessarily the base alpha.
  for (const auto& row : sweep.rows) {
    CHECK((row.alpha == 0.001 || row.alpha == 0.01 || row.alpha == 0.1));
    CHECK(row.status == RunStatus::kExhaustedBudget);
  }
  CHECK_THROWS_AS(xi_sweep(base, {1e-8}, true, std::nullopt), ConfigError);
}

TEST_CASE("spectrum experiment defaults the stride when unset") {
  auto cfg = config_from_string(R"({
    "objective": {"name": "quadratic", "params": {"diag": [2.0, 1.0], "box_radius": 5.0, "x0": [1.0, 1.0]}},
    "optimizer": {"method": "nag", "alpha": 0.05, "mu": 0.9},
    "max_steps": 50,
    "out_dir": "test_out/spec_default",
    "run_name": "defaulted"
  })");
  const SpectrumResult result = spectrum_experiment(cfg);
  int rows = 0;
  for (const auto& rec : result.run.result.trace)
    if (rec.lambda_min) ++rows;
  CHECK(rows == 10);  // stride defaults to max_steps / 10
}

TEST_CASE("spectrum experiment produces lambda_min rows and figures") {
  auto cfg = config_from_string(R"({
    "objective": {"name": "quadratic", "params": {"diag": [3.0, 0.5, 2.0], "box_radius": 5.0, "x0": [1.0, 1.0, 1.0]}},
    "optimizer": {"method": "nag", "alpha": 0.05, "mu": 0.9},
    "max_steps": 40,
    "lambda_min_stride": 10,
    "out_dir": "test_out/spec",
    "run_name": "quad"
  })");
  const SpectrumResult result = spectrum_experiment(cfg);
  int rows = 0;
  for (const auto& rec : result.run.result.trace) {
    if (rec.lambda_min) {
      ++rows;
      CHECK(*rec.lambda_min == doctest::Approx(0.5).epsilon(1e-8));
    }
  }
  CHECK(rows == 4);
  for (const auto& f : result.figure_paths) CHECK(std::filesystem::exists(f));
}
