#include "gradlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "gradlab/benchmarks.hpp"
#include "gradlab/data.hpp"
#include "gradlab/lanczos.hpp"
#include "gradlab/svg_plot.hpp"
#include "gradlab/trace_io.hpp"

namespace gradlab {

namespace {

constexpr std::uint64_t kStreamX0 = 1;
constexpr std::uint64_t kStreamOracle = 2;
constexpr std::uint64_t kStreamInit = 3;
constexpr std::uint64_t kStreamLanczos = 4;

[[noreturn]] void cfg_fail(const std::string& path, const std::string& what) {
  throw ConfigError("config error at '" + path + "': " + what);
}

double param_double(const Json& p, const std::string& key, std::optional<double> fallback,
                    const std::string& path) {
  if (!p.contains(key)) {
    if (fallback) return *fallback;
    cfg_fail(path + "." + key, "missing required field");
  }
  if (!p.at(key).is_number()) cfg_fail(path + "." + key, "expected a number");
  return p.at(key).get<double>();
}

std::int64_t param_int(const Json& p, const std::string& key, std::optional<std::int64_t> fallback,
                       const std::string& path) {
  if (!p.contains(key)) {
    if (fallback) return *fallback;
    cfg_fail(path + "." + key, "missing required field");
  }
  if (!p.at(key).is_number_integer()) cfg_fail(path + "." + key, "expected an integer");
  return p.at(key).get<std::int64_t>();
}

// Runs fn(0..n-1) on a small worker pool; job i writes only slot i, so
// parallel and serial execution produce identical results.
template <typename T, typename F>
std::vector<T> parallel_map(std::size_t n, F&& fn) {
  std::vector<T> out(n);
  if (n == 0) return out;
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(n, hw));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) out[i] = fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

Vector seeded_sphere_point(int dim, double radius, std::uint64_t seed) {
  Rng rng(seed);
  Vector x(dim);
  for (int i = 0; i < dim; ++i) x[i] = rng.normal();
  const double n = x.norm();
  if (n > 0.0) x *= radius / n;
  return x;
}

Vector benchmark_start_point(const Json& params, int dim, const std::string& path) {
  if (params.contains("x0")) {
    const Json& arr = params.at("x0");
    if (!arr.is_array() || static_cast<int>(arr.size()) != dim)
      cfg_fail(path + ".x0", "expected an array of length " + std::to_string(dim));
    Vector x(dim);
    for (int i = 0; i < dim; ++i) x[i] = arr.at(i).get<double>();
    return x;
  }
  const double radius = param_double(params, "x0_radius", 1.0, path);
  const auto seed =
      static_cast<std::uint64_t>(param_int(params, "x0_seed", 12345, path));
  return seeded_sphere_point(dim, radius, Rng::derive(seed, kStreamX0).next_u64());
}

struct DataSplit {
  std::shared_ptr<const Eigen::MatrixXd> train;
  std::shared_ptr<const Eigen::MatrixXd> test;  // may be null
};

DataSplit load_data(const Json& data, const std::string& path) {
  const std::string source =
      data.contains("source") ? data.at("source").get<std::string>() : "synthetic";
  const int train_n = static_cast<int>(param_int(data, "train", 5500, path));
  const int test_n = static_cast<int>(param_int(data, "test", 1000, path));
  if (train_n < 1) cfg_fail(path + ".train", "must be >= 1");
  if (test_n < 0) cfg_fail(path + ".test", "must be >= 0");

  DataSplit split;
  if (source == "synthetic") {
    const int side = static_cast<int>(param_int(data, "side", 8, path));
    const auto seed = static_cast<std::uint64_t>(param_int(data, "seed", 7, path));
    const Eigen::MatrixXd pool = synthetic_bump_images(side, train_n + test_n, seed);
    split.train = std::make_shared<Eigen::MatrixXd>(pool.leftCols(train_n));
    if (test_n > 0) split.test = std::make_shared<Eigen::MatrixXd>(pool.rightCols(test_n));
  } else if (source == "idx") {
    if (!data.contains("path")) cfg_fail(path + ".path", "missing required field");
    const std::string file = data.at("path").get<std::string>();
    const bool crop = data.contains("crop") && data.at("crop").get<bool>();
    const Eigen::MatrixXd pool = read_idx_images(file, crop ? 3 : 0, train_n + test_n);
    if (pool.cols() < train_n)
      throw RunFailure("idx file '" + file + "' holds fewer images than the requested split");
    split.train = std::make_shared<Eigen::MatrixXd>(pool.leftCols(train_n));
    if (pool.cols() >= train_n + test_n && test_n > 0)
      split.test = std::make_shared<Eigen::MatrixXd>(pool.middleCols(train_n, test_n));
  } else {
    cfg_fail(path + ".source", "expected synthetic|idx");
  }
  return split;
}

GradOracle make_component_oracle(std::shared_ptr<FiniteSumObjective> fsum, int draws,
                                 std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(Rng::derive(seed, kStreamOracle));
  return [fsum, draws, rng](const Vector& x) {
    Vector g = sample_stochastic_gradient(*fsum, x, *rng);
    for (int k = 1; k < draws; ++k) g += sample_stochastic_gradient(*fsum, x, *rng);
    return Vector(g / draws);
  };
}

GradOracle make_minibatch_oracle(const AutoencoderShape& shape,
                                 std::shared_ptr<const Eigen::MatrixXd> train, int batch_size,
                                 std::uint64_t seed) {
  struct ShuffleState {
    std::vector<int> order;
    std::size_t pos = 0;
    Rng rng;
    explicit ShuffleState(Rng r) : rng(r) {}
  };
  auto st = std::make_shared<ShuffleState>(Rng::derive(seed, kStreamOracle));
  const int n = static_cast<int>(train->cols());
  const int b = std::min(batch_size, n);
  st->order.resize(n);
  std::iota(st->order.begin(), st->order.end(), 0);
  st->pos = static_cast<std::size_t>(n);  // force a shuffle on first use

  return [st, shape, train, b, n](const Vector& x) {
    if (st->pos + b > static_cast<std::size_t>(n)) {
      for (int i = n - 1; i > 0; --i) {
        const auto j = static_cast<int>(st->rng.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(st->order[i], st->order[j]);
      }
      st->pos = 0;
    }
    Eigen::MatrixXd chunk(train->rows(), b);
    for (int k = 0; k < b; ++k) chunk.col(k) = train->col(st->order[st->pos + k]);
    st->pos += b;
    return batch_loss_and_grad(shape, x, Batch{std::move(chunk)}).second;
  };
}

Json budget_to_json(const TheoremBudget& b) {
  Json j;
  j["theorem"] = theorem_name(b.id);
  j["epsilon"] = b.epsilon;
  if (b.max_steps)
    j["max_steps"] = *b.max_steps;
  else
    j["max_steps"] = nullptr;
  j["already_critical"] = b.already_critical;
  j["derived"] = Json::object();
  for (const auto& [k, v] : b.derived) j["derived"][k] = v;
  return j;
}

}  // namespace

Problem build_problem(const ExperimentConfig& cfg, std::uint64_t seed) {
  Problem problem;
  const std::string& name = cfg.objective.name;
  const Json& p = cfg.objective.params;
  const std::string path = "objective.params";

  if (name == "half_sq_norm" || name == "quadratic") {
    const double box = param_double(p, "box_radius", 1.0, path);
    ObjectiveHandle obj;
    if (name == "half_sq_norm") {
      const int dim = static_cast<int>(param_int(p, "dim", std::nullopt, path));
      obj = make_half_sq_norm(dim, box);
    } else {
      if (!p.contains("diag") || !p.at("diag").is_array() || p.at("diag").empty())
        cfg_fail(path + ".diag", "expected a non-empty array");
      Vector diag(p.at("diag").size());
      for (Eigen::Index i = 0; i < diag.size(); ++i) diag[i] = p.at("diag").at(i).get<double>();
      obj = make_quadratic(diag, box);
    }
    problem.x0 = benchmark_start_point(p, obj.dim, path);
    problem.objective = std::move(obj);
  } else if (name == "softplus_sum") {
    const int dim = static_cast<int>(param_int(p, "dim", std::nullopt, path));
    const int pairs = static_cast<int>(param_int(p, "pairs", 3, path));
    const double scale = param_double(p, "scale", 0.5, path);
    const auto oseed = static_cast<std::uint64_t>(param_int(p, "seed", 1, path));
    const bool axes = p.contains("axes") && p.at("axes").get<bool>();
    problem.objective = make_symmetric_softplus_sum(dim, pairs, scale, oseed, axes);
    problem.x0 = benchmark_start_point(p, dim, path);
  } else if (name == "shifted_quadratic_sum") {
    const int dim = static_cast<int>(param_int(p, "dim", std::nullopt, path));
    const int k = static_cast<int>(param_int(p, "k", 4, path));
    const double spread = param_double(p, "spread", 1.0, path);
    const double box = param_double(p, "box_radius", 2.0, path);
    const auto oseed = static_cast<std::uint64_t>(param_int(p, "seed", 1, path));
    auto fsum = std::make_shared<FiniteSumObjective>(
        make_shifted_quadratic_sum(dim, k, spread, box, oseed));
    problem.objective = fsum->mean;
    problem.finite_sum = fsum;
    problem.x0 = benchmark_start_point(p, dim, path);
    if (cfg.batch_mode == BatchMode::kMiniBatch)
      problem.stochastic_oracle = make_component_oracle(fsum, cfg.batch_size, seed);
  } else if (name == "scaled_softplus_sum") {
    const int dim = static_cast<int>(param_int(p, "dim", std::nullopt, path));
    const int pairs = static_cast<int>(param_int(p, "pairs", 2, path));
    const double scale = param_double(p, "scale", 0.5, path);
    const int k = static_cast<int>(param_int(p, "k", 10, path));
    const double c_lo = param_double(p, "c_lo", 0.5, path);
    const double c_hi = param_double(p, "c_hi", 1.5, path);
    const auto oseed = static_cast<std::uint64_t>(param_int(p, "seed", 1, path));
    const bool axes = p.contains("axes") && p.at("axes").get<bool>();
    auto fsum = std::make_shared<FiniteSumObjective>(
        make_scaled_softplus_sum(dim, pairs, scale, k, c_lo, c_hi, oseed, axes));
    problem.objective = fsum->mean;
    problem.finite_sum = fsum;
    problem.x0 = benchmark_start_point(p, dim, path);
    if (cfg.batch_mode == BatchMode::kMiniBatch)
      problem.stochastic_oracle = make_component_oracle(fsum, cfg.batch_size, seed);
  } else if (name == "autoencoder") {
    AutoencoderShape shape;
    shape.ell = static_cast<int>(param_int(p, "ell", std::nullopt, path));
    shape.hidden = static_cast<int>(param_int(p, "hidden", std::nullopt, path));
    if (!p.contains("data")) cfg_fail(path + ".data", "missing required field");
    const DataSplit split = load_data(p.at("data"), path + ".data");
    shape.input_dim = static_cast<int>(split.train->rows());
    shape.validate();

    const auto probe_seed = static_cast<std::uint64_t>(param_int(p, "probe_seed", 99, path));
    problem.objective = make_autoencoder_objective(shape, split.train, probe_seed);
    problem.is_autoencoder = true;
    problem.shape = shape;
    Rng init_rng = Rng::derive(seed, kStreamInit);
    problem.x0 = glorot_init(shape, init_rng);
    if (split.test) {
      auto test = split.test;
      problem.test_loss = [shape, test](const Vector& x) {
        return batch_loss(shape, x, Batch{*test});
      };
    }
    if (cfg.batch_mode == BatchMode::kMiniBatch)
      problem.stochastic_oracle =
          make_minibatch_oracle(shape, split.train, cfg.batch_size, seed);
  } else {
    cfg_fail("objective.name", "unknown objective '" + name + "'");
  }
  return problem;
}

RunResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed,
                         const std::optional<TheoremBudget>& budget) {
  Problem problem = build_problem(cfg, seed);
  OptimizerConfig ocfg;
  double stop_eps = cfg.epsilon;
  std::int64_t cap = cfg.max_steps;
  if (budget) {
    ocfg = budget->make_config();
    stop_eps = budget->epsilon;
    if (budget->max_steps) cap = std::min(cap, *budget->max_steps);
  } else if (cfg.optimizer) {
    ocfg = cfg.optimizer->to_config();
  } else {
    throw ConfigError("config error at 'optimizer': run requires an optimizer (or use certify)");
  }

  RunHooks hooks;
  hooks.oracle = problem.stochastic_oracle;
  hooks.test_loss = problem.test_loss;
  hooks.record_stride = cfg.record_stride;
  if (cfg.lambda_min_stride > 0) {
    hooks.lambda_min_stride = cfg.lambda_min_stride;
    hooks.min_eig = make_min_eig_tracker(problem.objective,
                                         Rng::derive(seed, kStreamLanczos).next_u64());
  }
  return run(make_state(problem.x0), ocfg, problem.objective, StopRule{cap, stop_eps},
             std::move(hooks));
}

namespace {

Json run_summary_json(const RunResult& r) {
  Json s;
  s["status"] = run_status_name(r.status);
  s["hit_t"] = r.hit_t;
  s["min_grad_norm"] = r.min_grad_norm;
  s["min_grad_t"] = r.min_grad_t;
  s["precond_violations"] = r.precond_violations;
  s["rows"] = r.trace.size();
  if (!r.trace.empty()) {
    s["final_t"] = r.trace.back().t;
    s["final_f"] = r.trace.back().f;
    s["final_grad_norm"] = r.trace.back().grad_norm;
  }
  if (!r.diagnostic.empty()) s["diagnostic"] = r.diagnostic;
  return s;
}

void write_meta(const std::string& path, const ExperimentConfig& cfg, std::uint64_t seed,
                const std::string& name, const RunResult& result,
                const std::optional<TheoremBudget>& budget) {
  Json meta;
  meta["run_name"] = name;
  meta["seed"] = seed;
  meta["config"] = cfg.raw.is_null() ? Json::object() : cfg.raw;
  if (budget) meta["budget"] = budget_to_json(*budget);
  meta["summary"] = run_summary_json(result);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RunFailure("cannot open for writing: " + path);
  out << meta.dump(2) << '\n';
}

}  // namespace

SingleRunOutput run_and_write(const ExperimentConfig& cfg, std::uint64_t seed,
                              const std::string& name,
                              const std::optional<TheoremBudget>& budget) {
  SingleRunOutput out;
  out.result = run_experiment(cfg, seed, budget);
  std::filesystem::create_directories(cfg.out_dir);
  out.trace_path = cfg.out_dir + "/" + name + ".csv";
  out.meta_path = cfg.out_dir + "/" + name + ".meta.json";
  write_trace(out.result.trace, out.trace_path);
  write_meta(out.meta_path, cfg, seed, name, out.result, budget);
  return out;
}

// ---- Grid search ---------------------------------------------------------

GridSelection select_step_size(const std::vector<std::pair<double, double>>& alpha_loss) {
  if (alpha_loss.empty()) throw std::invalid_argument("select_step_size: empty table");
  std::vector<double> alphas;
  GridSelection sel;
  double best_loss = std::numeric_limits<double>::infinity();
  bool found = false;
  for (const auto& [alpha, loss] : alpha_loss) {
    alphas.push_back(alpha);
    if (!std::isfinite(loss)) continue;
    if (loss < best_loss || (loss == best_loss && alpha < sel.best_alpha)) {
      best_loss = loss;
      sel.best_alpha = alpha;
      found = true;
    }
  }
  if (!found) throw RunFailure("grid search: every step size diverged");
  const auto [lo, hi] = std::minmax_element(alphas.begin(), alphas.end());
  sel.at_low_edge = sel.best_alpha == *lo;
  sel.at_high_edge = sel.best_alpha == *hi;
  return sel;
}

namespace {

std::vector<std::map<std::string, double>> cartesian_cells(
    const std::map<std::string, std::vector<double>>& axes) {
  std::vector<std::map<std::string, double>> cells{{}};
  for (const auto& [axis, values] : axes) {
    std::vector<std::map<std::string, double>> next;
    next.reserve(cells.size() * values.size());
    for (const auto& cell : cells) {
      for (double v : values) {
        auto c = cell;
        c[axis] = v;
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

ExperimentConfig apply_cell(const ExperimentConfig& base,
                            const std::map<std::string, double>& point) {
  ExperimentConfig cfg = base;
  OptimizerSpec& opt = *cfg.optimizer;
  for (const auto& [axis, v] : point) {
    if (axis == "alpha") opt.alpha = v;
    else if (axis == "mu") opt.mu = v;
    else if (axis == "beta1") opt.beta1 = v;
    else if (axis == "beta2") opt.beta2 = v;
    else if (axis == "xi") opt.xi = v;
    else cfg_fail("grid.axes." + axis, "unknown hyperparameter axis");
  }
  return cfg;
}

std::string point_to_string(const std::map<std::string, double>& point) {
  std::ostringstream ss;
  bool first = true;
  for (const auto& [k, v] : point) {
    if (!first) ss << ", ";
    ss << k << "=" << v;
    first = false;
  }
  return ss.str();
}

}  // namespace

GridResult grid_search(const GridSpec& grid, const ExperimentConfig& base) {
  if (!base.optimizer)
    throw ConfigError("config error at 'optimizer': grid search tunes an explicit optimizer");
  for (const auto& [axis, values] : grid.axes) {
    if (values.empty()) cfg_fail("grid.axes." + axis, "empty axis");
  }

  GridResult result;
  std::vector<double> alphas = grid.axes.at("alpha");
  std::sort(alphas.begin(), alphas.end());
  std::map<std::string, std::vector<double>> other_axes = grid.axes;
  other_axes.erase("alpha");

  const std::uint64_t seed = base.seeds.front();
  auto run_alpha_wave = [&](const std::vector<double>& wave_alphas) {
    std::map<std::string, std::vector<double>> axes = other_axes;
    axes["alpha"] = wave_alphas;
    const auto cells = cartesian_cells(axes);
    const auto outcomes = parallel_map<GridCell>(cells.size(), [&](std::size_t i) {
      GridCell cell;
      cell.point = cells[i];
      const RunResult r = run_experiment(apply_cell(base, cells[i]), seed);
      cell.status = r.status;
      cell.final_loss = (r.status == RunStatus::kDiverged || r.trace.empty())
                            ? std::numeric_limits<double>::infinity()
                            : r.trace.back().f;
      if (!std::isfinite(cell.final_loss))
        cell.final_loss = std::numeric_limits<double>::infinity();
      return cell;
    });
    result.cells.insert(result.cells.end(), outcomes.begin(), outcomes.end());
  };

  run_alpha_wave(alphas);

  while (true) {
    // Selection: minimum final loss; ties toward the smaller step size, then
    // lexicographically by the remaining axes so cell order cannot matter.
    const GridCell* best = nullptr;
    for (const auto& cell : result.cells) {
      if (!std::isfinite(cell.final_loss)) continue;
      if (!best || cell.final_loss < best->final_loss ||
          (cell.final_loss == best->final_loss && cell.point < best->point)) {
        best = &cell;
      }
    }
    if (!best) {
      std::string detail = "grid search: all cells diverged:";
      for (const auto& cell : result.cells) detail += "\n  " + point_to_string(cell.point);
      throw RunFailure(detail);
    }

    result.best = best->point;
    result.best_loss = best->final_loss;
    const double ba = best->point.at("alpha");
    const bool at_low = ba == alphas.front();
    const bool at_high = ba == alphas.back();
    result.interior = !(at_low || at_high);
    if (!grid.interior_rule || result.interior || result.extensions_used >= grid.max_extensions)
      break;

    const double ratio = alphas.size() > 1 ? alphas[1] / alphas[0] : 10.0;
    const double next_alpha = at_high ? alphas.back() * ratio : alphas.front() / ratio;
    alphas.insert(at_high ? alphas.end() : alphas.begin(), next_alpha);
    ++result.extensions_used;
    run_alpha_wave({next_alpha});
  }
  return result;
}

// ---- Certification -------------------------------------------------------

Json CertReport::to_json() const {
  Json j;
  j["budget"] = budget_to_json(budget);
  j["advisory"] = advisory;
  j["hit"] = hit;
  j["certified"] = certified();
  j["t_star"] = t_star;
  j["cap"] = cap;
  j["achieved"] = achieved;
  j["target"] = target;
  j["mc_slack"] = mc_slack;
  if (decrease_violations >= 0) j["decrease_violations"] = decrease_violations;
  j["precond_violations"] = precond_violations;
  if (sign_violations >= 0) j["sign_violations"] = sign_violations;
  if (!per_seed.empty()) {
    j["per_seed"] = Json::array();
    for (const auto& s : per_seed) {
      j["per_seed"].push_back(Json{{"seed", s.seed},
                                   {"status", run_status_name(s.status)},
                                   {"hit_t", s.hit_t},
                                   {"min_grad_norm", s.min_grad_norm}});
    }
  }
  return j;
}

std::string CertReport::summary_line() const {
  std::ostringstream ss;
  ss << theorem_name(budget.id) << " eps=" << budget.epsilon << " cap=" << cap << " "
     << (hit ? "HIT" : "MISS") << " t*=" << t_star << " achieved=" << achieved
     << " target=" << target;
  if (advisory) ss << " [advisory: estimated metadata]";
  if (sign_violations > 0) ss << " [VOID: sign condition violated]";
  return ss.str();
}

namespace {

std::int64_t audit_decrease(const std::vector<TraceRecord>& trace, double delta_sq, double alpha) {
  std::int64_t violations = 0;
  for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
    if (trace[i + 1].t != trace[i].t + 1) continue;
    const double drop = trace[i + 1].f - trace[i].f;
    const double required = -delta_sq * alpha * trace[i].grad_norm * trace[i].grad_norm;
    if (drop > required + 1e-9 * (1.0 + std::abs(trace[i].f))) ++violations;
  }
  return violations;
}

CertReport certify_deterministic_rmsprop(const Problem& problem, const BudgetSpec& bs) {
  const ObjectiveHandle& obj = problem.objective;
  const double f1 = eval(obj, problem.x0);
  CertReport report;
  report.budget = rmsprop_det_budget(obj.meta, f1, bs.beta2, bs.xi, bs.epsilon);
  report.advisory = obj.meta.grad_bound_estimated;
  report.cap = *report.budget.max_steps;

  const OptimizerConfig ocfg = report.budget.make_config();
  RunResult r = run(make_state(problem.x0), ocfg, obj, StopRule{report.cap, bs.epsilon});
  report.hit = r.status == RunStatus::kHitTolerance;
  report.t_star = r.hit_t;
  report.achieved = r.min_grad_norm;
  report.target = bs.epsilon;
  report.precond_violations = r.precond_violations;
  report.decrease_violations = audit_decrease(r.trace, report.budget.derived.at("delta_sq"),
                                              report.budget.derived.at("alpha"));
  report.min_curve.reserve(r.trace.size());
  for (const auto& row : r.trace) report.min_curve.push_back(row.grad_norm_min);
  report.trace = std::move(r.trace);
  return report;
}

CertReport certify_noshift_rmsprop(const ExperimentConfig& cfg, const Problem& problem,
                                   const BudgetSpec& bs) {
  const ObjectiveHandle& obj = problem.objective;
  const double alpha0 = bs.alpha0 > 0.0 ? bs.alpha0 : 1.0 / obj.meta.lipschitz;
  CertReport report;
  report.budget = rmsprop_noshift_budget(alpha0, bs.beta2, bs.epsilon);
  report.advisory = obj.meta.grad_bound_estimated;
  report.cap = cfg.max_steps;  // no explicit constant: observe the hitting time

  const OptimizerConfig ocfg = report.budget.make_config();
  RunResult r = run(make_state(problem.x0), ocfg, obj, StopRule{report.cap, bs.epsilon});
  report.hit = r.status == RunStatus::kHitTolerance;
  report.t_star = r.hit_t;
  report.achieved = r.min_grad_norm;
  report.target = bs.epsilon;
  report.min_curve.reserve(r.trace.size());
  for (const auto& row : r.trace) report.min_curve.push_back(row.grad_norm_min);
  report.trace = std::move(r.trace);
  return report;
}

CertReport certify_stochastic_rmsprop(const ExperimentConfig& cfg, const Problem& problem,
                                      const BudgetSpec& bs) {
  if (!problem.finite_sum)
    throw ConfigError("config error at 'objective': rmsprop_stoch needs a finite-sum objective");
  const auto fsum = problem.finite_sum;
  const ObjectiveHandle& obj = problem.objective;
  const double f1 = eval(obj, problem.x0);

  CertReport report;
  report.budget = rmsprop_stoch_budget(obj.meta, f1, bs.beta2, bs.xi, bs.epsilon);
  report.advisory = obj.meta.grad_bound_estimated;
  report.mc_slack = bs.mc_slack;
  const std::int64_t T = *report.budget.max_steps;
  report.cap = T;
  report.target = bs.mc_slack * bs.epsilon * bs.epsilon;

  const OptimizerConfig ocfg = report.budget.make_config();
  struct SeedOutcome {
    CertSeedResult seed_result;
    std::vector<double> grad_sq;  // per t
    std::int64_t sign_bad = 0;
    std::int64_t precond = 0;
  };
  const auto outcomes = parallel_map<SeedOutcome>(cfg.seeds.size(), [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    RunHooks hooks;
    hooks.oracle = make_component_oracle(fsum, 1, seed);
    hooks.collect_iterates = true;
    // The expectation claim is about the algorithm's full horizon: run all
    // T steps with the stop test disabled.
    RunResult r = run(make_state(problem.x0), ocfg, obj, StopRule{T, -1.0}, std::move(hooks));
    SeedOutcome out;
    out.seed_result = {seed, r.status, -1, r.min_grad_norm};
    out.grad_sq.reserve(r.trace.size());
    for (const auto& row : r.trace) {
      out.grad_sq.push_back(row.grad_norm * row.grad_norm);
      if (out.seed_result.hit_t < 0 && row.grad_norm <= bs.epsilon)
        out.seed_result.hit_t = row.t;
    }
    out.precond = r.precond_violations;
    const auto audit = check_sign_condition(*fsum, r.iterates);
    out.sign_bad = audit.consistent ? 0 : 1;
    return out;
  });

  std::size_t rows = 0;
  for (const auto& o : outcomes) rows = std::max(rows, o.grad_sq.size());
  report.min_curve.assign(rows, 0.0);
  for (const auto& o : outcomes) {
    for (std::size_t t = 0; t < rows; ++t)
      report.min_curve[t] += t < o.grad_sq.size() ? o.grad_sq[t] : 0.0;
    report.per_seed.push_back(o.seed_result);
    report.sign_violations = std::max<std::int64_t>(report.sign_violations, 0) + o.sign_bad;
    report.precond_violations += o.precond;
  }
  for (auto& v : report.min_curve) v /= static_cast<double>(outcomes.size());

  report.achieved = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < rows; ++t) {
    if (report.min_curve[t] < report.achieved) report.achieved = report.min_curve[t];
    if (report.t_star < 0 && report.min_curve[t] <= report.target)
      report.t_star = static_cast<std::int64_t>(t) + 1;
  }
  report.hit = report.achieved <= report.target;
  if (report.sign_violations < 0) report.sign_violations = 0;
  return report;
}

CertReport certify_deterministic_adam(const Problem& problem, const BudgetSpec& bs) {
  const ObjectiveHandle& obj = problem.objective;
  // The configuration (beta1, xi, step rule) is independent of the cap, which
  // needs the value at the second iterate: take one step first.
  const double f1 = eval(obj, problem.x0);
  TheoremBudget pre = adam_theorem_params(obj.meta, f1, bs.epsilon, bs.adam_beta2);
  const OptimizerConfig ocfg = pre.make_config();

  RunResult first = run(make_state(problem.x0), ocfg, obj, StopRule{1, -1.0});
  const double f2 = eval(obj, first.final_state.x);

  CertReport report;
  report.budget = adam_theorem_params(obj.meta, f2, bs.epsilon, bs.adam_beta2);
  report.advisory = obj.meta.grad_bound_estimated;
  const std::int64_t T = *report.budget.max_steps;
  report.cap = T;
  report.target = bs.epsilon;

  std::vector<TraceRecord> trace = first.trace;
  if (T >= 2) {
    RunResult rest = run(std::move(first.final_state), ocfg, obj, StopRule{T, bs.epsilon});
    trace.insert(trace.end(), rest.trace.begin(), rest.trace.end());
  }
  report.achieved = std::numeric_limits<double>::infinity();
  double min_so_far = std::numeric_limits<double>::infinity();
  for (auto& row : trace) {
    min_so_far = std::min(min_so_far, row.grad_norm);
    row.grad_norm_min = min_so_far;
    if (row.t <= T && row.grad_norm < report.achieved) report.achieved = row.grad_norm;
    if (report.t_star < 0 && row.t <= T && row.grad_norm <= bs.epsilon) report.t_star = row.t;
    report.min_curve.push_back(min_so_far);
  }
  report.hit = report.t_star >= 0;
  report.trace = std::move(trace);
  return report;
}

}  // namespace

CertReport certify_budget(const ExperimentConfig& cfg) {
  if (!cfg.budget)
    throw ConfigError("config error at 'budget': certify requires a budget block");
  Problem problem = build_problem(cfg, cfg.seeds.front());
  const BudgetSpec& bs = *cfg.budget;
  const TheoremId id = theorem_from_name(bs.theorem);
  switch (id) {
    case TheoremId::kRmsDet: return certify_deterministic_rmsprop(problem, bs);
    case TheoremId::kRmsNoShift: return certify_noshift_rmsprop(cfg, problem, bs);
    case TheoremId::kRmsStoch: return certify_stochastic_rmsprop(cfg, problem, bs);
    case TheoremId::kAdamDet: return certify_deterministic_adam(problem, bs);
  }
  throw std::logic_error("certify: unreachable");
}

// ---- Sensitivity sweep ----------------------------------------------------

XiSweepResult xi_sweep(const ExperimentConfig& base, const std::vector<double>& xis, bool retune,
                       const std::optional<GridSpec>& grid) {
  if (!base.optimizer) throw ConfigError("config error at 'optimizer': xi sweep needs one");
  if (base.optimizer->method == Method::kNag)
    throw ConfigError("config error at 'optimizer.method': xi sweep applies to rmsprop|adam");
  if (xis.empty()) throw ConfigError("config error: xi sweep needs at least one xi value");
  if (retune && !grid) throw ConfigError("config error: re-tuning needs a grid block");

  XiSweepResult sweep;
  struct XiOutcome {
    XiSweepRow row;
    std::vector<TraceRecord> trace;
  };
  const auto outcomes = parallel_map<XiOutcome>(xis.size(), [&](std::size_t i) {
    ExperimentConfig cfg = base;
    cfg.optimizer->xi = xis[i];
    if (retune) {
      const GridResult tuned = grid_search(*grid, cfg);
      cfg.optimizer->alpha = tuned.best.at("alpha");
    }
    XiOutcome out;
    const RunResult r = run_experiment(cfg, cfg.seeds.front());
    out.row.xi = xis[i];
    out.row.alpha = cfg.optimizer->alpha;
    out.row.status = r.status;
    out.row.final_train = r.trace.empty() ? std::numeric_limits<double>::quiet_NaN()
                                          : r.trace.back().f;
    if (!r.trace.empty() && r.trace.back().f_test) out.row.final_test = *r.trace.back().f_test;
    out.row.final_grad =
        r.trace.empty() ? std::numeric_limits<double>::quiet_NaN() : r.trace.back().grad_norm;
    out.row.min_grad = r.min_grad_norm;
    out.trace = r.trace;
    return out;
  });

  std::filesystem::create_directories(base.out_dir);
  std::vector<PlotSeries> train, test, gradn;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    XiSweepRow row = outcomes[i].row;
    char label[48];
    std::snprintf(label, sizeof(label), "xi_%g", row.xi);
    row.trace_path = base.out_dir + "/" + label + ".csv";
    write_trace(outcomes[i].trace, row.trace_path);
    PlotSeries st{label, {}, {}}, ste{label, {}, {}}, sg{label, {}, {}};
    for (const auto& rec : outcomes[i].trace) {
      st.x.push_back(static_cast<double>(rec.t));
      st.y.push_back(rec.f);
      sg.x.push_back(static_cast<double>(rec.t));
      sg.y.push_back(rec.grad_norm);
      if (rec.f_test) {
        ste.x.push_back(static_cast<double>(rec.t));
        ste.y.push_back(*rec.f_test);
      }
    }
    train.push_back(std::move(st));
    if (!ste.x.empty()) test.push_back(std::move(ste));
    gradn.push_back(std::move(sg));
    sweep.rows.push_back(std::move(row));
  }

  const std::string base_path = base.out_dir + "/xi_sweep_";
  emit_figure(base_path + "train_loss.svg", {"Training loss vs shift", "t", "train loss", true},
              train);
  sweep.figure_paths.push_back(base_path + "train_loss.svg");
  if (!test.empty()) {
    emit_figure(base_path + "test_loss.svg", {"Test loss vs shift", "t", "test loss", true}, test);
    sweep.figure_paths.push_back(base_path + "test_loss.svg");
  }
  emit_figure(base_path + "grad_norm.svg",
              {"Gradient norm vs shift", "t", "gradient norm", true}, gradn);
  sweep.figure_paths.push_back(base_path + "grad_norm.svg");
  return sweep;
}

// ---- Comparison -----------------------------------------------------------

std::vector<CompareVariant> default_compare_variants() {
  std::vector<CompareVariant> variants;
  for (double b1 : {0.9, 0.99}) {
    OptimizerSpec adam = default_optimizer_spec(Method::kAdam);
    adam.beta1 = b1;
    char label[32];
    std::snprintf(label, sizeof(label), "adam_b1_%g", b1);
    variants.push_back({label, adam});
  }
  for (double mu : {0.9, 0.99}) {
    OptimizerSpec nag = default_optimizer_spec(Method::kNag);
    nag.mu = mu;
    char label[32];
    std::snprintf(label, sizeof(label), "nag_mu_%g", mu);
    variants.push_back({label, nag});
  }
  variants.push_back({"rmsprop", default_optimizer_spec(Method::kRmsProp)});
  return variants;
}

CompareResult compare(const ExperimentConfig& base, const std::vector<CompareVariant>& variants) {
  if (variants.empty()) throw ConfigError("config error: compare needs at least one variant");

  struct Outcome {
    CompareRun run;
    std::vector<TraceRecord> trace;
  };
  const auto outcomes = parallel_map<Outcome>(variants.size(), [&](std::size_t i) {
    ExperimentConfig cfg = base;
    cfg.optimizer = variants[i].optimizer;
    const RunResult r = run_experiment(cfg, cfg.seeds.front());
    Outcome out;
    out.run.label = variants[i].label;
    out.run.status = r.status;
    out.run.final_train =
        r.trace.empty() ? std::numeric_limits<double>::quiet_NaN() : r.trace.back().f;
    if (!r.trace.empty() && r.trace.back().f_test) out.run.final_test = *r.trace.back().f_test;
    out.run.final_grad =
        r.trace.empty() ? std::numeric_limits<double>::quiet_NaN() : r.trace.back().grad_norm;
    out.run.min_grad = r.min_grad_norm;
    out.trace = r.trace;
    return out;
  });

  CompareResult result;
  std::filesystem::create_directories(base.out_dir);
  std::vector<PlotSeries> train, test, gradn;
  for (const auto& o : outcomes) {
    CompareRun run_row = o.run;
    run_row.trace_path = base.out_dir + "/" + run_row.label + ".csv";
    write_trace(o.trace, run_row.trace_path);
    PlotSeries st{run_row.label, {}, {}}, ste{run_row.label, {}, {}}, sg{run_row.label, {}, {}};
    for (const auto& rec : o.trace) {
      st.x.push_back(static_cast<double>(rec.t));
      st.y.push_back(rec.f);
      sg.x.push_back(static_cast<double>(rec.t));
      sg.y.push_back(rec.grad_norm);
      if (rec.f_test) {
        ste.x.push_back(static_cast<double>(rec.t));
        ste.y.push_back(*rec.f_test);
      }
    }
    train.push_back(std::move(st));
    if (!ste.x.empty()) test.push_back(std::move(ste));
    gradn.push_back(std::move(sg));
    result.runs.push_back(std::move(run_row));
  }

  // Metadata sidecars per variant (config + per-run summary).
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    ExperimentConfig cfg = base;
    cfg.optimizer = variants[i].optimizer;
    Json raw = base.raw.is_null() ? Json::object() : base.raw;
    raw["optimizer"] = variants[i].optimizer.to_json();
    cfg.raw = raw;
    RunResult shim;
    shim.trace = outcomes[i].trace;
    shim.status = outcomes[i].run.status;
    shim.min_grad_norm = outcomes[i].run.min_grad;
    write_meta(base.out_dir + "/" + variants[i].label + ".meta.json", cfg, base.seeds.front(),
               variants[i].label, shim, std::nullopt);
  }

  const std::string prefix = base.out_dir + "/compare_";
  emit_figure(prefix + "train_loss.svg", {"Training loss", "t", "train loss", true}, train);
  result.figure_paths.push_back(prefix + "train_loss.svg");
  if (!test.empty()) {
    emit_figure(prefix + "test_loss.svg", {"Test loss", "t", "test loss", true}, test);
    result.figure_paths.push_back(prefix + "test_loss.svg");
  }
  emit_figure(prefix + "grad_norm.svg", {"Gradient norm", "t", "gradient norm", true}, gradn);
  result.figure_paths.push_back(prefix + "grad_norm.svg");

  // Observations are reported, never asserted.
  auto best_by = [&](auto key) -> std::string {
    std::string label;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : result.runs) {
      const double v = key(r);
      if (std::isfinite(v) && v < best) {
        best = v;
        label = r.label;
      }
    }
    return label;
  };
  result.summary["runs"] = Json::array();
  for (const auto& r : result.runs) {
    Json row{{"label", r.label},           {"status", run_status_name(r.status)},
             {"final_train", r.final_train}, {"final_grad_norm", r.final_grad},
             {"min_grad_norm", r.min_grad},  {"trace", r.trace_path}};
    if (r.final_test) row["final_test"] = *r.final_test;
    result.summary["runs"].push_back(row);
  }
  result.summary["observations"] = {
      {"lowest_final_train", best_by([](const CompareRun& r) { return r.final_train; })},
      {"lowest_final_test", best_by([](const CompareRun& r) {
         return r.final_test ? *r.final_test : std::numeric_limits<double>::infinity();
       })},
      {"lowest_min_grad_norm", best_by([](const CompareRun& r) { return r.min_grad; })}};

  result.summary_path = base.out_dir + "/compare_summary.json";
  std::ofstream out(result.summary_path, std::ios::binary);
  if (!out) throw RunFailure("cannot open for writing: " + result.summary_path);
  out << result.summary.dump(2) << '\n';
  return result;
}

// ---- Spectrum -------------------------------------------------------------

SpectrumResult spectrum_experiment(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  if (cfg.lambda_min_stride <= 0)
    cfg.lambda_min_stride = std::max<std::int64_t>(1, cfg.max_steps / 10);

  SpectrumResult result;
  result.run = run_and_write(cfg, cfg.seeds.front(), cfg.run_name + "_spectrum");

  PlotSeries lmin{"lambda_min", {}, {}}, gnorm{"grad_norm", {}, {}};
  for (const auto& rec : result.run.result.trace) {
    if (rec.lambda_min) {
      lmin.x.push_back(static_cast<double>(rec.t));
      lmin.y.push_back(*rec.lambda_min);
    }
    gnorm.x.push_back(static_cast<double>(rec.t));
    gnorm.y.push_back(rec.grad_norm);
  }
  const std::string prefix = cfg.out_dir + "/" + cfg.run_name + "_";
  emit_figure(prefix + "lambda_min.svg",
              {"Smallest Hessian eigenvalue", "t", "lambda_min", false}, {lmin});
  result.figure_paths.push_back(prefix + "lambda_min.svg");
  emit_figure(prefix + "grad_norm.svg", {"Gradient norm", "t", "gradient norm", true}, {gnorm});
  result.figure_paths.push_back(prefix + "grad_norm.svg");
  return result;
}

}  // namespace gradlab
