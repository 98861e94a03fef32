#include "gradlab/optimizer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gradlab {

const char* method_name(Method m) {
  switch (m) {
    case Method::kNag: return "nag";
    case Method::kRmsProp: return "rmsprop";
    case Method::kAdam: return "adam";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "nag") return Method::kNag;
  if (name == "rmsprop") return Method::kRmsProp;
  if (name == "adam") return Method::kAdam;
  throw std::invalid_argument("unknown method '" + name + "' (expected nag|rmsprop|adam)");
}

const char* run_status_name(RunStatus s) {
  switch (s) {
    case RunStatus::kHitTolerance: return "hit_tolerance";
    case RunStatus::kExhaustedBudget: return "exhausted_budget";
    case RunStatus::kDiverged: return "diverged";
  }
  return "?";
}

void OptimizerConfig::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v < 1.0; };
  if (!in_unit(mu)) throw std::invalid_argument("config: mu must be in [0,1)");
  if (!in_unit(beta1)) throw std::invalid_argument("config: beta1 must be in [0,1)");
  if (!in_unit(beta2)) throw std::invalid_argument("config: beta2 must be in [0,1)");
  if (xi < 0.0) throw std::invalid_argument("config: xi must be >= 0");
  if (method == Method::kAdam && !(xi > 0.0))
    throw std::invalid_argument("config: ADAM requires xi > 0");
  std::visit(
      [](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, ConstantStep>) {
          if (!(r.alpha > 0.0)) throw std::invalid_argument("config: alpha must be > 0");
        } else if constexpr (std::is_same_v<T, InvSqrtStep>) {
          if (!(r.alpha0 > 0.0)) throw std::invalid_argument("config: alpha0 must be > 0");
        } else if constexpr (std::is_same_v<T, BiasCorrectedStep>) {
          if (!(r.alpha > 0.0)) throw std::invalid_argument("config: alpha must be > 0");
        } else {
          if (!(r.epsilon > 0.0 && r.sigma > 0.0 && r.lipschitz > 0.0))
            throw std::invalid_argument("config: theorem step rule needs positive constants");
        }
      },
      alpha_rule);
}

double step_size(const StepRule& rule, const OptimizerConfig& cfg, std::int64_t t,
                 const Vector& g) {
  if (t < 1) throw std::invalid_argument("step_size: t must be >= 1");
  return std::visit(
      [&](const auto& r) -> double {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, ConstantStep>) {
          return r.alpha;
        } else if constexpr (std::is_same_v<T, InvSqrtStep>) {
          return r.alpha0 / std::sqrt(static_cast<double>(t));
        } else if constexpr (std::is_same_v<T, BiasCorrectedStep>) {
          const double td = static_cast<double>(t);
          return r.alpha * std::sqrt(1.0 - std::pow(cfg.beta2, td)) /
                 (1.0 - std::pow(cfg.beta1, td));
        } else {
          const double bc = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
          const double es = r.epsilon + 2.0 * r.sigma;
          return g.squaredNorm() / (r.lipschitz * bc * bc) * (4.0 * r.epsilon) / (3.0 * es * es);
        }
      },
      rule);
}

OptimizerState make_state(const Vector& x0) {
  OptimizerState s;
  s.x = x0;
  s.m = Vector::Zero(x0.size());
  s.v = Vector::Zero(x0.size());
  s.t = 1;
  return s;
}

Vector penrose_sqrt_inv_apply(const Vector& v, const Vector& g) {
  if (v.size() != g.size()) throw std::invalid_argument("penrose: size mismatch");
  if ((v.array() < 0.0).any())
    throw std::invalid_argument("penrose: negative entry in the accumulator");
  Vector w(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) w[i] = v[i] > 0.0 ? g[i] / std::sqrt(v[i]) : 0.0;
  return w;
}

void nag_update(OptimizerState& state, double mu, double alpha, const Vector& g) {
  state.v = mu * state.v + g;
  state.x -= alpha * (g + mu * state.v);
  ++state.t;
}

void rmsprop_update(OptimizerState& state, double beta2, double xi, double alpha,
                    const Vector& g) {
  state.v = beta2 * state.v +
            (1.0 - beta2) * (g.array().square() + xi).matrix();
  state.x -= alpha * penrose_sqrt_inv_apply(state.v, g);
  ++state.t;
}

void adam_update(OptimizerState& state, double beta1, double beta2, double xi, double alpha,
                 const Vector& g) {
  state.m = beta1 * state.m + (1.0 - beta1) * g;
  state.v = beta2 * state.v + (1.0 - beta2) * g.array().square().matrix();
  // xi is added outside the square root here, unlike the RMSProp recursion.
  state.x -= alpha * (state.m.array() / (state.v.array().sqrt() + xi)).matrix();
  ++state.t;
}

namespace {

OptimizerState one_step(OptimizerState state, const OptimizerConfig& cfg, const GradOracle& oracle,
                        Method expected) {
  if (cfg.method != expected) throw std::invalid_argument("step: config method mismatch");
  cfg.validate();
  const Vector g = oracle(state.x);
  const double alpha = step_size(cfg.alpha_rule, cfg, state.t, g);
  switch (cfg.method) {
    case Method::kNag: nag_update(state, cfg.mu, alpha, g); break;
    case Method::kRmsProp: rmsprop_update(state, cfg.beta2, cfg.xi, alpha, g); break;
    case Method::kAdam: adam_update(state, cfg.beta1, cfg.beta2, cfg.xi, alpha, g); break;
  }
  return state;
}

}  // namespace

OptimizerState nag_step(OptimizerState state, const OptimizerConfig& cfg,
                        const GradOracle& oracle) {
  return one_step(std::move(state), cfg, oracle, Method::kNag);
}

OptimizerState rmsprop_step(OptimizerState state, const OptimizerConfig& cfg,
                            const GradOracle& oracle) {
  return one_step(std::move(state), cfg, oracle, Method::kRmsProp);
}

OptimizerState adam_step(OptimizerState state, const OptimizerConfig& cfg,
                         const GradOracle& oracle) {
  return one_step(std::move(state), cfg, oracle, Method::kAdam);
}

OptimizerState step(OptimizerState state, const OptimizerConfig& cfg, const GradOracle& oracle) {
  return one_step(std::move(state), cfg, oracle, cfg.method);
}

RunResult run(OptimizerState init, const OptimizerConfig& cfg, const ObjectiveHandle& obj,
              const StopRule& stop, RunHooks hooks) {
  cfg.validate();
  if (stop.max_steps < 1) throw std::invalid_argument("run: max_steps must be >= 1");
  if (hooks.record_stride < 1) throw std::invalid_argument("run: record_stride must be >= 1");
  if (init.x.size() != obj.dim) throw std::invalid_argument("run: state/objective dim mismatch");

  RunResult result;
  result.min_grad_norm = std::numeric_limits<double>::infinity();
  OptimizerState state = std::move(init);

  // Accumulator bounds audited on RMSProp runs with an exact gradient bound.
  const bool audit_precond = cfg.method == Method::kRmsProp && cfg.xi > 0.0 &&
                             !obj.meta.grad_bound_estimated;
  const double v_low = (1.0 - cfg.beta2) * cfg.xi;
  const double v_high = obj.meta.grad_bound * obj.meta.grad_bound + cfg.xi;

  while (true) {
    const std::int64_t t = state.t;
    if (t > stop.max_steps) {
      result.status = RunStatus::kExhaustedBudget;
      break;
    }
    if (hooks.collect_iterates) result.iterates.push_back(state.x);
    const bool recorded = (t - 1) % hooks.record_stride == 0 || t == stop.max_steps;

    if (recorded) {
      double f_val, gn;
      Vector g_full;
      try {
        f_val = obj.value(state.x);
        g_full = obj.gradient(state.x);
        gn = g_full.norm();
      } catch (const std::exception& e) {
        result.status = RunStatus::kDiverged;
        result.diagnostic = std::string("objective evaluation failed at t=") +
                            std::to_string(t) + ": " + e.what();
        break;
      }

      TraceRecord rec;
      rec.t = t;
      rec.f = f_val;
      rec.grad_norm = gn;
      if (std::isfinite(gn) && gn < result.min_grad_norm) {
        result.min_grad_norm = gn;
        result.min_grad_t = t;
      }
      rec.grad_norm_min = result.min_grad_norm;
      if (hooks.test_loss) rec.f_test = hooks.test_loss(state.x);
      if (hooks.min_eig && hooks.lambda_min_stride > 0 && t % hooks.lambda_min_stride == 0) {
        rec.lambda_min = hooks.min_eig(state.x);
      }

      if (!std::isfinite(f_val) || !g_full.allFinite()) {
        rec.alpha = 0.0;
        result.trace.push_back(rec);
        result.status = RunStatus::kDiverged;
        result.diagnostic = "non-finite objective or gradient at t=" + std::to_string(t);
        break;
      }

      // The stop test always uses the full gradient, also under stochastic oracles.
      if (gn <= stop.epsilon) {
        rec.alpha = step_size(cfg.alpha_rule, cfg, t, g_full);
        result.trace.push_back(rec);
        result.status = RunStatus::kHitTolerance;
        result.hit_t = t;
        break;
      }

      Vector g_step = hooks.oracle ? hooks.oracle(state.x) : std::move(g_full);
      if (!g_step.allFinite()) {
        rec.alpha = 0.0;
        result.trace.push_back(rec);
        result.status = RunStatus::kDiverged;
        result.diagnostic = "non-finite oracle gradient at t=" + std::to_string(t);
        break;
      }
      const double alpha = step_size(cfg.alpha_rule, cfg, t, g_step);
      rec.alpha = alpha;
      result.trace.push_back(rec);

      switch (cfg.method) {
        case Method::kNag: nag_update(state, cfg.mu, alpha, g_step); break;
        case Method::kRmsProp: rmsprop_update(state, cfg.beta2, cfg.xi, alpha, g_step); break;
        case Method::kAdam: adam_update(state, cfg.beta1, cfg.beta2, cfg.xi, alpha, g_step); break;
      }
    } else {
      Vector g_step;
      try {
        g_step = hooks.oracle ? hooks.oracle(state.x) : obj.gradient(state.x);
      } catch (const std::exception& e) {
        result.status = RunStatus::kDiverged;
        result.diagnostic = std::string("oracle failed at t=") + std::to_string(t) + ": " +
                            e.what();
        break;
      }
      if (!g_step.allFinite()) {
        result.status = RunStatus::kDiverged;
        result.diagnostic = "non-finite oracle gradient at t=" + std::to_string(t);
        break;
      }
      const double alpha = step_size(cfg.alpha_rule, cfg, t, g_step);
      switch (cfg.method) {
        case Method::kNag: nag_update(state, cfg.mu, alpha, g_step); break;
        case Method::kRmsProp: rmsprop_update(state, cfg.beta2, cfg.xi, alpha, g_step); break;
        case Method::kAdam: adam_update(state, cfg.beta1, cfg.beta2, cfg.xi, alpha, g_step); break;
      }
    }

    if (audit_precond) {
      // 1e-12 relative slack absorbs the rounding of the recursion itself.
      for (Eigen::Index i = 0; i < state.v.size(); ++i) {
        if (state.v[i] < v_low * (1.0 - 1e-12) || state.v[i] > v_high * (1.0 + 1e-12)) {
          ++result.precond_violations;
        }
      }
    }
  }

  result.final_state = std::move(state);
  return result;
}

}  // namespace gradlab
