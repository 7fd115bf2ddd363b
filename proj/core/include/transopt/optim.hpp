#pragma once

#include <optional>
#include <string_view>
#include <variant>

#include "transopt/numkit.hpp"
#include "transopt/schedule.hpp"

namespace transopt {

/// Axis-aligned feasible set. An absent side is unbounded.
struct FeasibleBox {
  std::optional<ParamVector> lo;
  std::optional<ParamVector> hi;

  static FeasibleBox unbounded() { return {}; }
  static FeasibleBox cube(std::size_t d, double lo, double hi);
  static FeasibleBox from_bounds(ParamVector lo, ParamVector hi);

  [[nodiscard]] bool is_bounded() const noexcept { return lo.has_value() && hi.has_value(); }
  /// max_i (hi[i] - lo[i]); absent for unbounded boxes.
  [[nodiscard]] std::optional<double> diameter_inf() const;
  [[nodiscard]] bool contains(const ParamVector& x, double tol = 0.0) const;

  void validate(std::size_t d) const;
};

struct StepConfig {
  double alpha = 0.001;
  double epsilon = 1e-8;
  bool bias_correction = false;
  bool sqrt_decay = false;  ///< divide the step's learning rate by sqrt(t)
  friend bool operator==(const StepConfig&, const StepConfig&) = default;
};

/// Mutable per-run optimizer state. Owned by exactly one run.
struct OptimizerState {
  ParamVector m;
  ParamVector v;
  std::optional<ParamVector> v_max;  ///< AMSGrad only
  StepIndex t = 0;
  std::optional<ParamVector> last_effective_lr;  ///< eta_t multiplying the momentum
  std::optional<ParamVector> last_base_lr;       ///< eta_t before the 1/sqrt(t) decay
  double beta1_product = 1.0;                    ///< prod_k beta1k, for bias correction
  double beta2_product = 1.0;
  double running_max_abs_m = 0.0;  ///< running max of ||m_t||_inf (adadb bounds)

  static OptimizerState zeros(std::size_t d, bool track_v_max = false);
};

/// Weighted projection onto the box: argmin_{x in box} ||diag(metric)^{1/2} (x - y)||.
/// For a diagonal metric and a box this is the coordinatewise clamp.
ParamVector project_box(const ParamVector& y, const FeasibleBox& box, const ParamVector& metric);

/// Heavy-ball SGD: m <- momentum m + (1 - dampening) g; theta <- theta - lr m.
ParamVector sgdm_step(OptimizerState& state, const ParamVector& theta, const ParamVector& g,
                      const StepConfig& cfg, double lr, double momentum, const FeasibleBox& box,
                      double dampening = 0.0);

ParamVector adam_step(OptimizerState& state, const ParamVector& theta, const ParamVector& g,
                      const StepConfig& cfg, double beta1, double beta2, const FeasibleBox& box);

/// Adam with the denominator taken from the coordinatewise running max of v.
ParamVector amsgrad_step(OptimizerState& state, const ParamVector& theta, const ParamVector& g,
                         const StepConfig& cfg, double beta1, double beta2, const FeasibleBox& box);

/// Clipped transition step: eta_t = clip(alpha / (sqrt(v_t) + eps), lower(t), upper(t)),
/// theta <- project(theta - eta_t m_t).
ParamVector generic_transition_step(OptimizerState& state, const ParamVector& theta, const ParamVector& g,
                                    const StepConfig& cfg, const BoundFunctionSpec& bounds, double beta1t,
                                    double beta2t, const FeasibleBox& box);

/// Same step with bounds supplied directly (scalars may be 0 or +inf).
ParamVector generic_transition_step(OptimizerState& state, const ParamVector& theta, const ParamVector& g,
                                    const StepConfig& cfg, const LrBounds& bounds, double beta1t,
                                    double beta2t, const FeasibleBox& box);

/// DSTAdam: eta_hat_t = rho_t (alpha / (sqrt(v_t) + eps) - r_t) + r_t,
/// theta <- project(theta - eta_t m_t) with eta_t = eta_hat_t (or eta_hat_t / sqrt(t)).
ParamVector dstadam_step(OptimizerState& state, const ParamVector& theta, const ParamVector& g,
                         const TransitionSchedule& sched, const StepConfig& cfg, const FeasibleBox& box);

/// Learning rates applied at the most recent step. Throws StateError before the first step.
ParamVector effective_lr(const OptimizerState& state);

// Run-level optimizer description used by the experiment harness.

struct SgdmSpec {
  double lr = 0.1;
  double momentum = 0.9;
  double dampening = 0.0;
  friend bool operator==(const SgdmSpec&, const SgdmSpec&) = default;
};

struct AdamSpec {
  double beta1 = 0.9;
  double beta2 = 0.999;
  friend bool operator==(const AdamSpec&, const AdamSpec&) = default;
};

struct AmsgradSpec {
  double beta1 = 0.9;
  double beta2 = 0.999;
  friend bool operator==(const AmsgradSpec&, const AmsgradSpec&) = default;
};

struct TransitionSpec {
  BoundFunctionSpec bounds;
  Beta1Schedule beta1;
  double beta2 = 0.999;
  friend bool operator==(const TransitionSpec&, const TransitionSpec&) = default;
};

struct DstadamSpec {
  TransitionSchedule schedule;
  friend bool operator==(const DstadamSpec&, const DstadamSpec&) = default;
};

using OptimizerMethod = std::variant<SgdmSpec, AdamSpec, AmsgradSpec, TransitionSpec, DstadamSpec>;

struct OptimizerSpec {
  StepConfig step;
  OptimizerMethod method;
  friend bool operator==(const OptimizerSpec&, const OptimizerSpec&) = default;
};

std::string_view method_name(const OptimizerMethod& method);

/// Dispatches one step of whichever method `spec` names.
ParamVector apply_step(const OptimizerSpec& spec, OptimizerState& state, const ParamVector& theta,
                       const ParamVector& g, const FeasibleBox& box);

}  // namespace transopt
