#include "transopt/schedule.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "transopt/error.hpp"

namespace transopt {

namespace {

void require_step(StepIndex t) {
  if (t < 1) throw RangeError(fmt::format("step index must be >= 1, got {}", t));
}

}  // namespace

RhoSchedule RhoSchedule::custom(std::vector<double> values) {
  return {Kind::custom, 0.0, std::move(values)};
}

double RhoSchedule::sup() const {
  if (kind == Kind::custom) {
    return sequence.empty() ? 0.0 : *std::max_element(sequence.begin(), sequence.end());
  }
  return rho;
}

void TransitionSchedule::validate() const {
  if (rho.kind == RhoSchedule::Kind::custom) {
    if (rho.sequence.empty()) throw DomainError("rho: custom sequence is empty");
    for (double r : rho.sequence) {
      if (!(r >= 0.0 && r <= 1.0)) throw DomainError(fmt::format("rho: custom value {} outside [0, 1]", r));
    }
  } else if (!(rho.rho > 0.0 && rho.rho < 1.0)) {
    throw DomainError(fmt::format("rho: must lie in (0, 1), got {}", rho.rho));
  }
  if (!(r_lower > 0.0)) throw DomainError(fmt::format("r_lower: must be > 0, got {}", r_lower));
  if (!(r_lower <= r_upper)) {
    throw DomainError(fmt::format("r_lower <= r_upper violated: r_lower={} r_upper={}", r_lower, r_upper));
  }
  if (horizon < 1) throw DomainError(fmt::format("horizon: must be >= 1, got {}", horizon));
  if (!(beta1.beta1 >= 0.0 && beta1.beta1 < 1.0)) {
    throw DomainError(fmt::format("beta1: must lie in [0, 1), got {}", beta1.beta1));
  }
  if (beta1.kind == Beta1Schedule::Kind::geometric && !(beta1.lambda > 0.0 && beta1.lambda < 1.0)) {
    throw DomainError(fmt::format("lambda: must lie in (0, 1), got {}", beta1.lambda));
  }
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw DomainError(fmt::format("beta2: must lie in [0, 1), got {}", beta2));
}

double rho_at(const TransitionSchedule& s, StepIndex t) {
  require_step(t);
  switch (s.rho.kind) {
    case RhoSchedule::Kind::exponential:
      return std::pow(s.rho.rho, static_cast<double>(t));
    case RhoSchedule::Kind::constant:
      return s.rho.rho;
    case RhoSchedule::Kind::custom:
      if (static_cast<std::size_t>(t) > s.rho.sequence.size()) {
        throw RangeError(fmt::format("rho: step {} beyond custom sequence of length {}", t, s.rho.sequence.size()));
      }
      return s.rho.sequence[static_cast<std::size_t>(t - 1)];
  }
  return s.rho.rho;
}

double rho_from_horizon(StepIndex horizon, double target) {
  if (horizon < 1) throw DomainError(fmt::format("horizon must be >= 1, got {}", horizon));
  if (!(target > 0.0 && target < 1.0)) throw DomainError(fmt::format("target must lie in (0, 1), got {}", target));
  return std::pow(target, 1.0 / static_cast<double>(horizon));
}

double r_at(const TransitionSchedule& s, StepIndex t) {
  require_step(t);
  if (t > s.horizon) {
    throw RangeError(fmt::format("step {} exceeds declared horizon {}", t, s.horizon));
  }
  const double frac = static_cast<double>(t) / static_cast<double>(s.horizon);
  return (s.r_upper - s.r_lower) * (1.0 - frac) + s.r_lower;
}

double beta1_at(const Beta1Schedule& s, StepIndex t) {
  require_step(t);
  switch (s.kind) {
    case Beta1Schedule::Kind::constant:
      return s.beta1;
    case Beta1Schedule::Kind::geometric:
      return s.beta1 * std::pow(s.lambda, static_cast<double>(t - 1));
    case Beta1Schedule::Kind::harmonic:
      return s.beta1 / static_cast<double>(t);
  }
  return s.beta1;
}

double beta1_at(const TransitionSchedule& s, StepIndex t) { return beta1_at(s.beta1, t); }

double beta2_at(const TransitionSchedule& s, StepIndex t) {
  require_step(t);
  return s.beta2;
}

BoundFunctionSpec BoundFunctionSpec::swats(double alpha_star) {
  BoundFunctionSpec b;
  b.kind = Kind::swats;
  b.alpha_star = alpha_star;
  return b;
}

BoundFunctionSpec BoundFunctionSpec::adabound(double alpha_star, double beta2) {
  BoundFunctionSpec b;
  b.kind = Kind::adabound;
  b.alpha_star = alpha_star;
  b.beta2 = beta2;
  return b;
}

BoundFunctionSpec BoundFunctionSpec::adadb(double alpha_star, double gamma) {
  BoundFunctionSpec b;
  b.kind = Kind::adadb;
  b.alpha_star = alpha_star;
  b.gamma = gamma;
  return b;
}

BoundFunctionSpec BoundFunctionSpec::lu(double alpha_star, double beta2, StepIndex horizon) {
  BoundFunctionSpec b;
  b.kind = Kind::lu;
  b.alpha_star = alpha_star;
  b.beta2 = beta2;
  b.horizon = horizon;
  return b;
}

void BoundFunctionSpec::validate() const {
  if (!(alpha_star > 0.0)) throw DomainError(fmt::format("alpha_star: must be > 0, got {}", alpha_star));
  if (kind == Kind::adabound || kind == Kind::lu) {
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw DomainError(fmt::format("bounds.beta2: must lie in (0, 1), got {}", beta2));
  }
  if (kind == Kind::adadb && !(gamma > 0.0)) throw DomainError(fmt::format("gamma: must be > 0, got {}", gamma));
  if (kind == Kind::lu && horizon < 1) throw DomainError(fmt::format("bounds.horizon: must be >= 1, got {}", horizon));
}

double LrBounds::lower_at(std::size_t i) const {
  if (const auto* s = std::get_if<double>(&lower)) return *s;
  return std::get<ParamVector>(lower)[i];
}

double LrBounds::upper_at(std::size_t i) const {
  if (const auto* s = std::get_if<double>(&upper)) return *s;
  return std::get<ParamVector>(upper)[i];
}

LrBounds eval_bounds(const BoundFunctionSpec& b, StepIndex t, const std::optional<MomentStats>& aux) {
  require_step(t);
  const double a = b.alpha_star;
  const double td = static_cast<double>(t);
  switch (b.kind) {
    case BoundFunctionSpec::Kind::swats:
      return {a, a};
    case BoundFunctionSpec::Kind::adabound: {
      const double k = 1.0 - b.beta2;
      return {a * (1.0 - 1.0 / (k * td + 1.0)), a * (1.0 + 1.0 / (k * td))};
    }
    case BoundFunctionSpec::Kind::adadb: {
      if (!aux) throw MissingStatisticsError("adadb bounds require momentum statistics");
      if (aux->running_max == 0.0) return {a, a};
      std::vector<double> upper(aux->abs_m.size());
      const double denom = aux->running_max * (b.gamma * td);
      for (std::size_t i = 0; i < upper.size(); ++i) upper[i] = a + aux->abs_m[i] / denom;
      return {a, ParamVector(std::move(upper))};
    }
    case BoundFunctionSpec::Kind::lu: {
      if (t > b.horizon) throw RangeError(fmt::format("lu bounds: step {} exceeds horizon {}", t, b.horizon));
      const double k = 1.0 - b.beta2;
      const double tt = static_cast<double>(b.horizon);
      // One fraction, so the upper bound is exactly alpha* at t = T.
      return {a * td / tt, a + (tt - td) / (k * td * tt)};
    }
  }
  return {a, a};
}

std::string_view to_string(RhoSchedule::Kind k) {
  switch (k) {
    case RhoSchedule::Kind::exponential:
      return "exponential";
    case RhoSchedule::Kind::constant:
      return "constant";
    case RhoSchedule::Kind::custom:
      return "custom";
  }
  return "?";
}

std::string_view to_string(Beta1Schedule::Kind k) {
  switch (k) {
    case Beta1Schedule::Kind::constant:
      return "constant";
    case Beta1Schedule::Kind::geometric:
      return "geometric";
    case Beta1Schedule::Kind::harmonic:
      return "harmonic";
  }
  return "?";
}

std::string_view to_string(BoundFunctionSpec::Kind k) {
  switch (k) {
    case BoundFunctionSpec::Kind::swats:
      return "swats";
    case BoundFunctionSpec::Kind::adabound:
      return "adabound";
    case BoundFunctionSpec::Kind::adadb:
      return "adadb";
    case BoundFunctionSpec::Kind::lu:
      return "lu";
  }
  return "?";
}

}  // namespace transopt
