#include "transopt/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "transopt/csv.hpp"
#include "transopt/error.hpp"

namespace transopt {

namespace {

constexpr double kC2Tolerance = 1e-12;
constexpr double kBoundTolerance = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Folds one (t, i) pair into the running zeta maximum.
void fold_zeta(std::optional<ZetaEstimate>& best, StepIndex t, std::size_t i, double lhs, double rhs0) {
  if (rhs0 == 0.0) return;
  const double ratio = lhs > 0.0 ? rhs0 / lhs : kInf;
  if (!best || ratio > best->zeta) best = ZetaEstimate{ratio, t, i};
}

std::string_view yes_no(bool b) { return b ? "true" : "false"; }

}  // namespace

// ---------------------------------------------------------------------------
// LrHistogram

LrHistogram::LrHistogram(std::size_t bins, double lo, double hi) {
  if (bins == 0) throw DomainError("histogram needs at least one bin");
  if (!(lo > 0.0 && lo < hi)) throw DomainError("histogram range must satisfy 0 < lo < hi");
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  edges_.resize(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k) {
    edges_[k] = a + (b - a) * static_cast<double>(k) / static_cast<double>(bins);
  }
}

std::optional<std::size_t> LrHistogram::bin_of(double lr) const {
  if (!(lr > 0.0)) throw DomainError(fmt::format("learning rate {} is not positive", lr));
  const double x = std::log10(lr);
  if (x < edges_.front() || x >= edges_.back()) return std::nullopt;
  const auto it = std::upper_bound(edges_.begin(), edges_.end(), x);
  return static_cast<std::size_t>(it - edges_.begin()) - 1;
}

void LrHistogram::record(StepIndex t, const ParamVector& lrs) {
  if (!rows_.empty() && t < rows_.back().t) {
    throw SequenceError(fmt::format("histogram row {} precedes row {}", t, rows_.back().t));
  }
  std::vector<std::optional<std::size_t>> bins(lrs.size());
  for (std::size_t i = 0; i < lrs.size(); ++i) bins[i] = bin_of(lrs[i]);
  if (rows_.empty() || rows_.back().t != t) rows_.push_back(Row{t, 0, 0, std::vector<std::size_t>(this->bins(), 0)});
  Row& row = rows_.back();
  for (std::size_t i = 0; i < lrs.size(); ++i) {
    if (bins[i]) {
      ++row.counts[*bins[i]];
    } else if (std::log10(lrs[i]) < edges_.front()) {
      ++row.underflow;
    } else {
      ++row.overflow;
    }
  }
}

void LrHistogram::write_csv(const std::filesystem::path& path) const {
  csv::Writer w(path);
  w.field("t").field("underflow");
  for (std::size_t k = 0; k + 1 < edges_.size(); ++k) w.field(edges_[k]);
  w.field("overflow");
  w.end_row();
  for (const Row& r : rows_) {
    w.field(static_cast<long long>(r.t)).field(static_cast<unsigned long long>(r.underflow));
    for (std::size_t c : r.counts) w.field(static_cast<unsigned long long>(c));
    w.field(static_cast<unsigned long long>(r.overflow));
    w.end_row();
  }
}

void record_lr(LrHistogram& hist, StepIndex t, const ParamVector& lrs) { hist.record(t, lrs); }

// ---------------------------------------------------------------------------
// Batch monitors

std::vector<C2Violation> check_c2(std::span<const ParamVector> series) {
  std::vector<C2Violation> out;
  for (std::size_t k = 1; k < series.size(); ++k) {
    const auto t = static_cast<StepIndex>(k + 1);
    const double now = std::sqrt(static_cast<double>(t));
    const double before = std::sqrt(static_cast<double>(t - 1));
    for (std::size_t i = 0; i < series[k].size(); ++i) {
      if (now / series[k][i] < before / series[k - 1][i] - kC2Tolerance) out.push_back({t, i});
    }
  }
  return out;
}

std::optional<ZetaEstimate> estimate_zeta(std::span<const ParamVector> grads, std::span<const double> beta2_by_step) {
  if (beta2_by_step.size() < grads.size()) throw DimensionError("beta2 schedule shorter than gradient history");
  if (grads.empty()) return std::nullopt;
  const std::size_t d = grads.front().size();
  std::vector<double> ema(d, 0.0);
  std::vector<double> sum(d, 0.0);
  std::optional<ZetaEstimate> best;
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (grads[k].size() != d) throw DimensionError("gradient history has inconsistent dimensions");
    const double b2 = beta2_by_step[k];
    const auto t = static_cast<StepIndex>(k + 1);
    for (std::size_t i = 0; i < d; ++i) {
      const double g2 = grads[k][i] * grads[k][i];
      ema[i] = b2 * ema[i] + (1.0 - b2) * g2;
      sum[i] += g2;
      fold_zeta(best, t, i, std::sqrt(static_cast<double>(t) * ema[i]), std::sqrt(sum[i]));
    }
  }
  return best;
}

std::optional<ZetaEstimate> estimate_zeta(std::span<const ParamVector> grads, double beta2) {
  const std::vector<double> schedule(grads.size(), beta2);
  return estimate_zeta(grads, schedule);
}

void TheoryParams::validate() const {
  if (!(d_inf > 0.0 && g_inf > 0.0 && r_lower > 0.0 && r_upper > 0.0 && alpha > 0.0)) {
    throw DomainError("theory parameters D_inf, G_inf, r_lower, r_upper, alpha must be positive");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw DomainError("theory beta1 must lie in (0, 1)");
  if (!(lambda > 0.0 && lambda < 1.0)) throw DomainError("theory lambda must lie in (0, 1)");
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("theory rho must lie in (0, 1)");
}

bool eta_bound_check(std::span<const ParamVector> series, const TheoryParams& params) {
  const double limit = 1.0 / (params.r_lower * (1.0 - params.rho)) + kBoundTolerance;
  for (const auto& eta : series) {
    for (double e : eta.values()) {
      if (!(1.0 / e <= limit)) return false;
    }
  }
  return true;
}

BoundInputs bound_inputs(const Trajectory& traj, const TheoryParams& params) {
  if (traj.grads.empty() || traj.grads.size() != traj.etahat.size()) {
    throw DimensionError("trajectory needs matching, non-empty gradient and eta_hat histories");
  }
  BoundInputs in;
  in.horizon = static_cast<StepIndex>(traj.grads.size());
  in.dim = traj.grads.front().size();
  for (double e : traj.etahat.back().values()) in.sum_inverse_final_etahat += 1.0 / e;
  std::vector<double> sq(in.dim, 0.0);
  std::vector<double> quartic(in.dim, 0.0);
  for (const auto& g : traj.grads) {
    for (std::size_t i = 0; i < in.dim; ++i) {
      const double g2 = g[i] * g[i];
      sq[i] += g2;
      quartic[i] += g2 * g2;
    }
  }
  for (std::size_t i = 0; i < in.dim; ++i) {
    in.sum_grad_norms += std::sqrt(sq[i]);
    in.sum_grad_sq_norms += std::sqrt(quartic[i]);
  }
  if (const auto z = estimate_zeta(traj.grads, params.beta2)) in.zeta = z->zeta;
  return in;
}

namespace {

std::optional<RegretBound> common_terms(const BoundInputs& in, const TheoryParams& p) {
  const double T = static_cast<double>(in.horizon);
  const double one_minus_b1 = 1.0 - p.beta1;
  const double cube = one_minus_b1 * one_minus_b1 * one_minus_b1;
  RegretBound b;
  b.term1 = std::sqrt(T) * p.d_inf * p.d_inf / (2.0 * one_minus_b1) * in.sum_inverse_final_etahat;
  if (in.sum_grad_norms == 0.0) {
    b.term3 = 0.0;
  } else if (in.zeta && std::isfinite(*in.zeta)) {
    b.term3 = 2.0 * p.alpha * p.rho * *in.zeta / cube * in.sum_grad_norms;
  } else {
    return std::nullopt;
  }
  b.term4 = p.r_upper * std::sqrt(1.0 + std::log(T)) / cube * in.sum_grad_sq_norms;
  return b;
}

}  // namespace

std::optional<RegretBound> bound_cor1(const BoundInputs& in, const TheoryParams& p) {
  auto b = common_terms(in, p);
  if (!b) return b;
  const double d = static_cast<double>(in.dim);
  const double one_minus_l = 1.0 - p.lambda;
  b->term2 = d * p.d_inf * p.d_inf / (2.0 * p.r_lower * (1.0 - p.rho) * one_minus_l * one_minus_l * (1.0 - p.beta1));
  return b;
}

std::optional<RegretBound> bound_cor1(const Trajectory& traj, const TheoryParams& p) {
  return bound_cor1(bound_inputs(traj, p), p);
}

std::optional<RegretBound> bound_cor2(const BoundInputs& in, const TheoryParams& p) {
  auto b = common_terms(in, p);
  if (!b) return b;
  const double d = static_cast<double>(in.dim);
  const double T = static_cast<double>(in.horizon);
  b->term2 = d * p.d_inf * p.d_inf * std::sqrt(T) / (p.r_lower * (1.0 - p.rho) * (1.0 - p.beta1));
  return b;
}

std::optional<RegretBound> bound_cor2(const Trajectory& traj, const TheoryParams& p) {
  return bound_cor2(bound_inputs(traj, p), p);
}

std::vector<std::pair<StepIndex, double>> sqrtT_regret_series(const RegretLedger& ledger) {
  std::vector<std::pair<StepIndex, double>> out;
  out.reserve(ledger.series.size());
  for (const auto& e : ledger.series) out.emplace_back(e.t, e.regret / std::sqrt(static_cast<double>(e.t)));
  return out;
}

double tail_sup(std::span<const std::pair<StepIndex, double>> series, StepIndex t_from) {
  double sup = -kInf;
  for (const auto& [t, r] : series) {
    if (t >= t_from) sup = std::max(sup, r);
  }
  return sup;
}

bool lemma_a1_property(std::span<const double> a) {
  double prefix = 0.0;
  double lhs = 0.0;
  for (double x : a) {
    if (x < 0.0) throw DomainError("lemma_a1_property requires nonnegative entries");
    prefix += x;
    if (prefix > 0.0) lhs += x / std::sqrt(prefix);
  }
  return lhs <= 2.0 * std::sqrt(prefix) + 1e-12;
}

// ---------------------------------------------------------------------------
// ConditionReport

void ConditionReport::write_csv(const std::filesystem::path& path) const {
  csv::Writer w(path);
  w.header({"key", "value"});
  auto kv = [&w](std::string_view k, auto v) {
    w.field(k);
    if constexpr (std::is_same_v<decltype(v), bool>) {
      w.field(yes_no(v));
    } else {
      w.field(v);
    }
    w.end_row();
  };
  auto absent = [&w](std::string_view k) {
    w.field(k).field("absent");
    w.end_row();
  };
  kv("optimizer", std::string_view(optimizer));
  kv("steps", static_cast<long long>(steps));
  if (zeta) {
    kv("zeta_min", zeta->zeta);
    kv("zeta_argmax_t", static_cast<long long>(zeta->t));
    kv("zeta_argmax_i", static_cast<unsigned long long>(zeta->i));
  } else {
    absent("zeta_min");
  }
  kv("c2_checks", static_cast<unsigned long long>(c2_checks));
  kv("c2_violations", static_cast<unsigned long long>(c2_violations.size()));
  kv("c2_violation_fraction", c2_violation_fraction());
  if (!c2_violations.empty()) {
    kv("c2_first_violation_t", static_cast<long long>(c2_violations.front().t));
    kv("c2_first_violation_i", static_cast<unsigned long long>(c2_violations.front().i));
  }
  kv("flag_rho_bounded", flags.rho_bounded);
  kv("flag_r_ordered", flags.r_ordered);
  kv("flag_beta1_bounded", flags.beta1_bounded);
  kv("flag_gradient_bounded", flags.gradient_bounded);
  kv("flag_diameter_bounded", flags.diameter_bounded);
  kv("flag_sqrt_decay", flags.sqrt_decay);
  kv("hypotheses_all", flags.all());
  kv("eta_bound_applicable", eta_bound_applicable);
  kv("eta_bound_holds", eta_bound_holds);
  kv("max_inverse_etahat", max_inverse_etahat);
  kv("inverse_etahat_limit", inverse_etahat_limit);
  auto bound = [&](std::string_view prefix, const std::optional<RegretBound>& b) {
    if (!b) {
      absent(fmt::format("{}_total", prefix));
      return;
    }
    kv(fmt::format("{}_term1", prefix), b->term1);
    kv(fmt::format("{}_term2", prefix), b->term2);
    kv(fmt::format("{}_term3", prefix), b->term3);
    kv(fmt::format("{}_term4", prefix), b->term4);
    kv(fmt::format("{}_total", prefix), b->total());
  };
  bound("bound_cor1", bound_cor1);
  bound("bound_cor2", bound_cor2);
  if (measured_regret) {
    kv("measured_regret", *measured_regret);
  } else {
    absent("measured_regret");
  }
}

std::vector<std::pair<std::string, std::string>> read_key_value_csv(const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::string>> out;
  const auto rows = csv::read(path);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 2) throw Error(fmt::format("{}: row {} is not a key,value pair", path.string(), r + 1));
    out.emplace_back(rows[r][0], rows[r][1]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// ConditionMonitor

ConditionMonitor::ConditionMonitor(MonitorSetup setup) : setup_(std::move(setup)) {}

void ConditionMonitor::observe(StepIndex t, const ParamVector& theta, const ParamVector& g, const OptimizerState& state) {
  if (t != steps_ + 1) throw SequenceError(fmt::format("monitor expected step {}, got {}", steps_ + 1, t));
  const std::size_t d = g.size();
  if (steps_ == 0) {
    ema_sq_.assign(d, 0.0);
    sum_sq_.assign(d, 0.0);
    sum_quartic_.assign(d, 0.0);
  }
  steps_ = t;

  const auto& sched = setup_.schedule;
  const double beta2 = sched ? beta2_at(*sched, t) : 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double g2 = g[i] * g[i];
    ema_sq_[i] = beta2 * ema_sq_[i] + (1.0 - beta2) * g2;
    sum_sq_[i] += g2;
    sum_quartic_[i] += g2 * g2;
    if (sched) fold_zeta(zeta_, t, i, std::sqrt(static_cast<double>(t) * ema_sq_[i]), std::sqrt(sum_sq_[i]));
  }

  if (state.last_base_lr) {
    const ParamVector& eta = *state.last_base_lr;
    prev_etahat_.swap(last_etahat_);
    last_etahat_.assign(eta.values().begin(), eta.values().end());
    if (t >= 2 && prev_etahat_.size() == d) {
      const double now = std::sqrt(static_cast<double>(t));
      const double before = std::sqrt(static_cast<double>(t - 1));
      for (std::size_t i = 0; i < d; ++i) {
        ++c2_checks_;
        if (now / last_etahat_[i] < before / prev_etahat_[i] - kC2Tolerance) violations_.push_back({t, i});
      }
    }
    for (double e : last_etahat_) max_inverse_etahat_ = std::max(max_inverse_etahat_, 1.0 / e);
  }

  if (sched) {
    const double sup = sched->rho.sup();
    if (!(rho_at(*sched, t) <= sup && sup < 1.0)) rho_ok_ = false;
    if (!(beta1_at(*sched, t) <= sched->beta1.beta1 && sched->beta1.beta1 < 1.0)) beta1_ok_ = false;
  }
  if (setup_.grad_bound) {
    if (norms(g).linf > *setup_.grad_bound) grad_ok_ = false;
  }
  if (!setup_.box.is_bounded() || !setup_.box.contains(theta)) inside_ok_ = false;
}

ConditionReport ConditionMonitor::finalize(std::optional<double> measured_regret) const {
  ConditionReport r;
  r.optimizer = setup_.optimizer;
  r.steps = steps_;
  r.c2_violations = violations_;
  r.c2_checks = c2_checks_;
  r.max_inverse_etahat = max_inverse_etahat_;
  r.measured_regret = measured_regret;

  const auto& sched = setup_.schedule;
  r.flags.sqrt_decay = setup_.step.sqrt_decay;
  r.flags.gradient_bounded = setup_.grad_bound.has_value() && grad_ok_ && steps_ > 0;
  r.flags.diameter_bounded = setup_.box.is_bounded() && inside_ok_ && steps_ > 0;
  if (!sched) return r;

  r.zeta = zeta_;
  r.flags.rho_bounded = rho_ok_;
  r.flags.beta1_bounded = beta1_ok_;
  r.flags.r_ordered = sched->r_lower > 0.0 && sched->r_lower <= sched->r_upper;

  const double rho = sched->rho.sup();
  r.eta_bound_applicable = rho < 1.0 && steps_ > 0;
  r.inverse_etahat_limit = rho < 1.0 ? 1.0 / (sched->r_lower * (1.0 - rho)) : kInf;
  r.eta_bound_holds = r.eta_bound_applicable && max_inverse_etahat_ <= r.inverse_etahat_limit + kBoundTolerance;

  const auto diameter = setup_.box.diameter_inf();
  if (!diameter || steps_ == 0 || !(rho > 0.0 && rho < 1.0) || !(sched->beta1.beta1 > 0.0)) return r;

  TheoryParams p;
  p.d_inf = *diameter;
  p.g_inf = setup_.grad_bound.value_or(1.0);
  p.beta1 = sched->beta1.beta1;
  p.lambda = sched->beta1.lambda;
  p.rho = rho;
  p.r_lower = sched->r_lower;
  p.r_upper = sched->r_upper;
  p.alpha = setup_.step.alpha;
  p.beta2 = sched->beta2;

  BoundInputs in;
  in.horizon = steps_;
  in.dim = last_etahat_.size();
  for (double e : last_etahat_) in.sum_inverse_final_etahat += 1.0 / e;
  for (std::size_t i = 0; i < sum_sq_.size(); ++i) {
    in.sum_grad_norms += std::sqrt(sum_sq_[i]);
    in.sum_grad_sq_norms += std::sqrt(sum_quartic_[i]);
  }
  if (zeta_) in.zeta = zeta_->zeta;

  if (sched->beta1.kind == Beta1Schedule::Kind::geometric) r.bound_cor1 = bound_cor1(in, p);
  if (sched->beta1.kind == Beta1Schedule::Kind::harmonic) r.bound_cor2 = bound_cor2(in, p);
  return r;
}

}  // namespace transopt
