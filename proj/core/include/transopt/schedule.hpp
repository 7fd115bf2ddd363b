#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "transopt/numkit.hpp"

namespace transopt {

/// Optimizer step index. Steps are numbered from 1; 0 is invalid everywhere.
using StepIndex = std::int64_t;

/// Scaling factor rho_t that pulls the adaptive rate toward the SGD target.
struct RhoSchedule {
  enum class Kind { exponential, constant, custom };

  Kind kind = Kind::exponential;
  double rho = 0.999764;
  std::vector<double> sequence;  ///< custom kind: value for step t at index t-1

  static RhoSchedule exponential(double rho) { return {Kind::exponential, rho, {}}; }
  static RhoSchedule constant(double rho) { return {Kind::constant, rho, {}}; }
  static RhoSchedule custom(std::vector<double> values);

  /// Upper bound of rho_t over every step (the rho of the convergence theory).
  [[nodiscard]] double sup() const;
  friend bool operator==(const RhoSchedule&, const RhoSchedule&) = default;
};

struct Beta1Schedule {
  enum class Kind { constant, geometric, harmonic };

  Kind kind = Kind::constant;
  double beta1 = 0.9;
  double lambda = 0.99;  ///< geometric kind only

  static Beta1Schedule constant(double beta1) { return {Kind::constant, beta1, 0.99}; }
  static Beta1Schedule geometric(double beta1, double lambda) { return {Kind::geometric, beta1, lambda}; }
  static Beta1Schedule harmonic(double beta1) { return {Kind::harmonic, beta1, 0.99}; }
  friend bool operator==(const Beta1Schedule&, const Beta1Schedule&) = default;
};

/// Every time-varying scalar DSTAdam consumes. Defaults are the CIFAR
/// hyperparameters (alpha lives in StepConfig).
struct TransitionSchedule {
  RhoSchedule rho;
  double r_lower = 0.005;
  double r_upper = 5.0;
  StepIndex horizon = 78200;
  Beta1Schedule beta1;
  double beta2 = 0.999;

  /// Throws DomainError naming the violated invariant.
  void validate() const;
  friend bool operator==(const TransitionSchedule&, const TransitionSchedule&) = default;
};

double rho_at(const TransitionSchedule& s, StepIndex t);

/// The rho in (0, 1) with rho^horizon == target.
double rho_from_horizon(StepIndex horizon, double target = 1e-8);

/// Linearly decreasing SGD target rate, r_upper at t = 0 down to r_lower at t = horizon.
double r_at(const TransitionSchedule& s, StepIndex t);

double beta1_at(const TransitionSchedule& s, StepIndex t);
double beta1_at(const Beta1Schedule& s, StepIndex t);
double beta2_at(const TransitionSchedule& s, StepIndex t);

/// Lower/upper learning-rate bound pair of the clipped transition framework.
struct BoundFunctionSpec {
  enum class Kind { swats, adabound, adadb, lu };

  Kind kind = Kind::adabound;
  double alpha_star = 0.1;
  double beta2 = 0.999;       ///< adabound, lu
  double gamma = 1e-3;        ///< adadb
  StepIndex horizon = 78200;  ///< lu

  static BoundFunctionSpec swats(double alpha_star);
  static BoundFunctionSpec adabound(double alpha_star, double beta2);
  static BoundFunctionSpec adadb(double alpha_star, double gamma);
  static BoundFunctionSpec lu(double alpha_star, double beta2, StepIndex horizon);

  void validate() const;
  friend bool operator==(const BoundFunctionSpec&, const BoundFunctionSpec&) = default;
};

/// A bound that is either broadcast to every coordinate or given per coordinate.
/// Scalars may be infinite; per-coordinate bounds are finite.
using BoundValue = std::variant<double, ParamVector>;

struct LrBounds {
  BoundValue lower = 0.0;
  BoundValue upper = 0.0;

  [[nodiscard]] double lower_at(std::size_t i) const;
  [[nodiscard]] double upper_at(std::size_t i) const;
};

/// Momentum statistics for data-dependent bounds (adadb).
struct MomentStats {
  std::span<const double> abs_m;  ///< |m_t| per coordinate
  double running_max = 0.0;       ///< running max over time of ||m_t||_inf
};

/// Evaluates one row of the bound-function table at step t.
LrBounds eval_bounds(const BoundFunctionSpec& b, StepIndex t,
                     const std::optional<MomentStats>& aux = std::nullopt);

std::string_view to_string(RhoSchedule::Kind k);
std::string_view to_string(Beta1Schedule::Kind k);
std::string_view to_string(BoundFunctionSpec::Kind k);

}  // namespace transopt
