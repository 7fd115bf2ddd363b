#include "transopt/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <fmt/format.h>

#include "transopt/error.hpp"

namespace transopt {

namespace {

void require_shapes(const OptimizerState& state, const ParamVector& theta, const ParamVector& g) {
  if (theta.size() != g.size() || theta.size() != state.m.size() || theta.size() != state.v.size()) {
    throw DimensionError(fmt::format("shape mismatch: theta={} g={} state={}", theta.size(), g.size(),
                                     state.m.size()));
  }
}

void require_beta(double beta, std::string_view name) {
  if (!(beta >= 0.0 && beta < 1.0)) throw DomainError(fmt::format("{} must lie in [0, 1), got {}", name, beta));
}

struct Moments {
  std::vector<double> m;
  std::vector<double> v;
};

Moments averaged(const OptimizerState& s, const ParamVector& g, double beta1, double beta2) {
  const std::size_t d = g.size();
  Moments out{std::vector<double>(d), std::vector<double>(d)};
  for (std::size_t i = 0; i < d; ++i) {
    out.m[i] = beta1 * s.m[i] + (1.0 - beta1) * g[i];
    out.v[i] = beta2 * s.v[i] + (1.0 - beta2) * g[i] * g[i];
  }
  return out;
}

void commit(OptimizerState& s, Moments&& mv, double beta1, double beta2) {
  s.m = ParamVector(std::move(mv.m));
  s.v = ParamVector(std::move(mv.v));
  s.t += 1;
  s.beta1_product *= beta1;
  s.beta2_product *= beta2;
}

double decay(const StepConfig& cfg, StepIndex t) {
  return cfg.sqrt_decay ? 1.0 / std::sqrt(static_cast<double>(t)) : 1.0;
}

double adaptive_rate(double alpha, double second_moment, double epsilon, std::size_t i) {
  const double denom = std::sqrt(second_moment) + epsilon;
  if (denom == 0.0) {
    throw DomainError(fmt::format("zero second moment at coordinate {} with epsilon = 0", i));
  }
  return alpha / denom;
}

// theta - eta * direction, projected with metric diag(1 / eta).
ParamVector descend(const ParamVector& theta, const std::vector<double>& eta, const std::vector<double>& direction,
                    const FeasibleBox& box) {
  const std::size_t d = theta.size();
  std::vector<double> y(d);
  std::vector<double> metric(d);
  for (std::size_t i = 0; i < d; ++i) {
    y[i] = theta[i] - eta[i] * direction[i];
    metric[i] = 1.0 / eta[i];
  }
  return project_box(ParamVector(std::move(y)), box, ParamVector(std::move(metric)));
}

// Shared tail of the Adam-family steps: per-coordinate eta from (possibly
// bias-corrected) moments, then the projected update.
template <typename RateFn>
ParamVector adaptive_update(OptimizerState& state, const ParamVector& theta, const StepConfig& cfg,
                            const std::vector<double>& direction, RateFn&& base_rate, const FeasibleBox& box) {
  const std::size_t d = theta.size();
  const double scale = decay(cfg, state.t);
  std::vector<double> base(d);
  std::vector<double> eta(d);
  for (std::size_t i = 0; i < d; ++i) {
    base[i] = base_rate(i);
    eta[i] = base[i] * scale;
  }
  ParamVector next = descend(theta, eta, direction, box);
  state.last_base_lr = ParamVector(std::move(base));
  state.last_effective_lr = ParamVector(std::move(eta));
  return next;
}

}  // namespace

FeasibleBox FeasibleBox::cube(std::size_t d, double lo, double hi) {
  return from_bounds(ParamVector::filled(d, lo), ParamVector::filled(d, hi));
}

FeasibleBox FeasibleBox::from_bounds(ParamVector lo, ParamVector hi) {
  FeasibleBox box{std::move(lo), std::move(hi)};
  box.validate(box.lo->size());
  return box;
}

std::optional<double> FeasibleBox::diameter_inf() const {
  if (!is_bounded()) return std::nullopt;
  double diam = 0.0;
  for (std::size_t i = 0; i < lo->size(); ++i) diam = std::max(diam, (*hi)[i] - (*lo)[i]);
  return diam;
}

bool FeasibleBox::contains(const ParamVector& x, double tol) const {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (lo && x[i] < (*lo)[i] - tol) return false;
    if (hi && x[i] > (*hi)[i] + tol) return false;
  }
  return true;
}

void FeasibleBox::validate(std::size_t d) const {
  if ((lo && lo->size() != d) || (hi && hi->size() != d)) {
    throw DimensionError(fmt::format("box dimension does not match parameter dimension {}", d));
  }
  if (lo && hi) {
    for (std::size_t i = 0; i < d; ++i) {
      if (!((*lo)[i] <= (*hi)[i])) throw DomainError(fmt::format("box lo > hi at coordinate {}", i));
    }
  }
}

OptimizerState OptimizerState::zeros(std::size_t d, bool track_v_max) {
  OptimizerState s{ParamVector::zeros(d), ParamVector::zeros(d), std::nullopt, 0, std::nullopt, std::nullopt, 1.0, 1.0, 0.0};
  if (track_v_max) s.v_max = ParamVector::zeros(d);
  return s;
}

ParamVector project_box(const ParamVector& y, const FeasibleBox& box, const ParamVector& metric) {
  if (metric.size() != y.size()) {
    throw DimensionError(fmt::format("metric length {} does not match {}", metric.size(), y.size()));
  }
  for (std::size_t i = 0; i < metric.size(); ++i) {
    if (!(metric[i] > 0.0)) throw DomainError(fmt::format("metric entry {} at coordinate {} is not positive", metric[i], i));
  }
  box.validate(y.size());
  std::vector<double> out(y.to_vector());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (box.lo) out[i] = std::max(out[i], (*box.lo)[i]);
    if (box.hi) out[i] = std::min(out[i], (*box.hi)[i]);
  }
  return ParamVector(std::move(out));
}

ParamVector sgdm_step(OptimizerState& state, const ParamVector& theta, const ParamVector& g, const StepConfig& cfg,
                      double lr, double momentum, const FeasibleBox& box, double dampening) {
  require_shapes(state, theta, g);
  if (!(lr > 0.0)) throw DomainError(fmt::format("lr must be > 0, got {}", lr));
  require_beta(momentum, "momentum");
  if (!(dampening >= 0.0 && dampening <= 1.0)) throw DomainError("dampening must lie in [0, 1]");

  const std::size_t d = theta.size();
  std::vector<double> m(d);
  for (std::size_t i = 0; i < d; ++i) m[i] = momentum * state.m[i] + (1.0 - dampening) * g[i];
  state.m = ParamVector(m);
  state.t += 1;

  const double rate = lr * decay(cfg, state.t);
  std::vector<double> eta(d, rate);
  ParamVector next = descend(theta, eta, m, box);
  state.last_base_lr = ParamVector::filled(d, lr);
  state.last_effective_lr = ParamVector(std::move(eta));
  return next;
}

ParamVector adam_step(OptimizerState& state, const ParamVector& theta, const ParamVector& g, const StepConfig& cfg,
                      double beta1, double beta2, const FeasibleBox& box) {
  require_shapes(state, theta, g);
  require_beta(beta1, "beta1");
  require_beta(beta2, "beta2");
  commit(state, averaged(state, g, beta1, beta2), beta1, beta2);

  const double c1 = cfg.bias_correction ? 1.0 - state.beta1_product : 1.0;
  const double c2 = cfg.bias_correction ? 1.0 - state.beta2_product : 1.0;
  std::vector<double> direction(theta.size());
  for (std::size_t i = 0; i < direction.size(); ++i) direction[i] = state.m[i] / c1;
  return adaptive_update(
      state, theta, cfg, direction,
      [&](std::size_t i) { return adaptive_rate(cfg.alpha, state.v[i] / c2, cfg.epsilon, i); }, box);
}

ParamVector amsgrad_step(OptimizerState& state, const ParamVector& theta, const ParamVector& g, const StepConfig& cfg,
                         double beta1, double beta2, const FeasibleBox& box) {
  require_shapes(state, theta, g);
  require_beta(beta1, "beta1");
  require_beta(beta2, "beta2");
  commit(state, averaged(state, g, beta1, beta2), beta1, beta2);
  state.v_max = state.v_max ? max(*state.v_max, state.v) : state.v;

  const double c1 = cfg.bias_correction ? 1.0 - state.beta1_product : 1.0;
  const double c2 = cfg.bias_correction ? 1.0 - state.beta2_product : 1.0;
  std::vector<double> direction(theta.size());
  for (std::size_t i = 0; i < direction.size(); ++i) direction[i] = state.m[i] / c1;
  const ParamVector& vmax = *state.v_max;
  return adaptive_update(
      state, theta, cfg, direction, [&](std::size_t i) { return adaptive_rate(cfg.alpha, vmax[i] / c2, cfg.epsilon, i); },
      box);
}

namespace {

ParamVector clipped_update(OptimizerState& state, const ParamVector& theta, const StepConfig& cfg,
                           const LrBounds& bounds, const FeasibleBox& box) {
  std::vector<double> direction(state.m.to_vector());
  return adaptive_update(
      state, theta, cfg, direction,
      [&](std::size_t i) {
        const double lo = bounds.lower_at(i);
        const double hi = bounds.upper_at(i);
        if (!(lo <= hi)) throw DomainError(fmt::format("lower bound exceeds upper bound at coordinate {}", i));
        return std::clamp(adaptive_rate(cfg.alpha, state.v[i], cfg.epsilon, i), lo, hi);
      },
      box);
}

}  // namespace

ParamVector generic_transition_step(OptimizerState& state, const ParamVector& theta, const ParamVector& g,
                                    const StepConfig& cfg, const BoundFunctionSpec& bounds, double beta1t,
                                    double beta2t, const FeasibleBox& box) {
  require_shapes(state, theta, g);
  require_beta(beta1t, "beta1t");
  require_beta(beta2t, "beta2t");
  commit(state, averaged(state, g, beta1t, beta2t), beta1t, beta2t);
  const ParamVector abs_m = abs(state.m);
  state.running_max_abs_m = std::max(state.running_max_abs_m, norms(abs_m).linf);
  const LrBounds lr_bounds = eval_bounds(bounds, state.t, MomentStats{abs_m.values(), state.running_max_abs_m});
  return clipped_update(state, theta, cfg, lr_bounds, box);
}

ParamVector generic_transition_step(OptimizerState& state, const ParamVector& theta, const ParamVector& g,
                                    const StepConfig& cfg, const LrBounds& bounds, double beta1t, double beta2t,
                                    const FeasibleBox& box) {
  require_shapes(state, theta, g);
  require_beta(beta1t, "beta1t");
  require_beta(beta2t, "beta2t");
  commit(state, averaged(state, g, beta1t, beta2t), beta1t, beta2t);
  state.running_max_abs_m = std::max(state.running_max_abs_m, norms(state.m).linf);
  return clipped_update(state, theta, cfg, bounds, box);
}

ParamVector dstadam_step(OptimizerState& state, const ParamVector& theta, const ParamVector& g,
                         const TransitionSchedule& sched, const StepConfig& cfg, const FeasibleBox& box) {
  require_shapes(state, theta, g);
  const StepIndex t = state.t + 1;
  if (t > sched.horizon) {
    throw RangeError(fmt::format("step {} exceeds the schedule horizon {}", t, sched.horizon));
  }
  const double beta1t = beta1_at(sched, t);
  const double beta2t = beta2_at(sched, t);
  const double r = r_at(sched, t);
  const double rho = rho_at(sched, t);
  commit(state, averaged(state, g, beta1t, beta2t), beta1t, beta2t);

  const double c1 = cfg.bias_correction ? 1.0 - state.beta1_product : 1.0;
  const double c2 = cfg.bias_correction ? 1.0 - state.beta2_product : 1.0;
  std::vector<double> direction(theta.size());
  for (std::size_t i = 0; i < direction.size(); ++i) direction[i] = state.m[i] / c1;
  return adaptive_update(
      state, theta, cfg, direction,
      [&](std::size_t i) {
        const double eta_hat = rho * (adaptive_rate(cfg.alpha, state.v[i] / c2, cfg.epsilon, i) - r) + r;
        if (!(eta_hat > 0.0)) {
          throw InvariantError(fmt::format("non-positive scaled learning rate {} at step {} coordinate {}", eta_hat, t, i));
        }
        return eta_hat;
      },
      box);
}

ParamVector effective_lr(const OptimizerState& state) {
  if (!state.last_effective_lr) throw StateError("effective_lr requested before the first step");
  return *state.last_effective_lr;
}

std::string_view method_name(const OptimizerMethod& method) {
  struct Visitor {
    std::string_view operator()(const SgdmSpec&) const { return "sgdm"; }
    std::string_view operator()(const AdamSpec&) const { return "adam"; }
    std::string_view operator()(const AmsgradSpec&) const { return "amsgrad"; }
    std::string_view operator()(const TransitionSpec&) const { return "transition"; }
    std::string_view operator()(const DstadamSpec&) const { return "dstadam"; }
  };
  return std::visit(Visitor{}, method);
}

ParamVector apply_step(const OptimizerSpec& spec, OptimizerState& state, const ParamVector& theta,
                       const ParamVector& g, const FeasibleBox& box) {
  const StepConfig& cfg = spec.step;
  const StepIndex next = state.t + 1;
  struct Visitor {
    OptimizerState& state;
    const ParamVector& theta;
    const ParamVector& g;
    const StepConfig& cfg;
    const FeasibleBox& box;
    StepIndex next;

    ParamVector operator()(const SgdmSpec& s) const {
      return sgdm_step(state, theta, g, cfg, s.lr, s.momentum, box, s.dampening);
    }
    ParamVector operator()(const AdamSpec& s) const { return adam_step(state, theta, g, cfg, s.beta1, s.beta2, box); }
    ParamVector operator()(const AmsgradSpec& s) const {
      return amsgrad_step(state, theta, g, cfg, s.beta1, s.beta2, box);
    }
    ParamVector operator()(const TransitionSpec& s) const {
      return generic_transition_step(state, theta, g, cfg, s.bounds, beta1_at(s.beta1, next), s.beta2, box);
    }
    ParamVector operator()(const DstadamSpec& s) const { return dstadam_step(state, theta, g, s.schedule, cfg, box); }
  };
  return std::visit(Visitor{state, theta, g, cfg, box, next}, spec.method);
}

}  // namespace transopt
