#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "transopt/numkit.hpp"
#include "transopt/optim.hpp"
#include "transopt/problems.hpp"
#include "transopt/schedule.hpp"

namespace transopt {

// ---------------------------------------------------------------------------
// Learning-rate histograms

/// Per-iteration histogram of per-coordinate learning rates on a fixed log10 grid.
/// The grid is shared by all runs so rows from different optimizers line up.
class LrHistogram {
 public:
  struct Row {
    StepIndex t = 0;
    std::size_t underflow = 0;
    std::size_t overflow = 0;
    std::vector<std::size_t> counts;
  };

  explicit LrHistogram(std::size_t bins = 60, double lo = 1e-8, double hi = 1e3);

  [[nodiscard]] const std::vector<double>& log10_edges() const noexcept { return edges_; }
  [[nodiscard]] std::size_t bins() const noexcept { return edges_.size() - 1; }
  [[nodiscard]] const std::vector<Row>& rows() const noexcept { return rows_; }

  /// Bin index for a positive rate; nullopt for under/overflow.
  [[nodiscard]] std::optional<std::size_t> bin_of(double lr) const;

  /// Adds every coordinate of `lrs` to row t (appending the row if t is new).
  void record(StepIndex t, const ParamVector& lrs);

  /// Header `t,underflow,<log10 left edges...>,overflow`; one line per row.
  void write_csv(const std::filesystem::path& path) const;

 private:
  std::vector<double> edges_;
  std::vector<Row> rows_;
};

void record_lr(LrHistogram& hist, StepIndex t, const ParamVector& lrs);

// ---------------------------------------------------------------------------
// Convergence-condition monitors (batch form)

struct C2Violation {
  StepIndex t = 0;
  std::size_t i = 0;
  friend bool operator==(const C2Violation&, const C2Violation&) = default;
};

/// Every (t, i) where sqrt(t) / eta_hat_{t,i} < sqrt(t-1) / eta_hat_{t-1,i} - 1e-12.
/// `etahat_series[k]` holds step k + 1.
std::vector<C2Violation> check_c2(std::span<const ParamVector> etahat_series);

struct ZetaEstimate {
  double zeta = 0.0;  ///< smallest zeta with LHS >= RHS0 / zeta everywhere (may be +inf)
  StepIndex t = 0;    ///< argmax pair
  std::size_t i = 0;
};

/// LHS(t,i) = sqrt(t sum_j prod_{k=1}^{t-j} beta2_{t-k+1} (1 - beta2_j) g_{j,i}^2),
/// RHS0(t,i) = sqrt(sum_j g_{j,i}^2); returns max RHS0 / LHS. Absent when every
/// gradient entry is zero. `beta2_by_step[k]` is beta2 at step k + 1.
std::optional<ZetaEstimate> estimate_zeta(std::span<const ParamVector> grads, std::span<const double> beta2_by_step);
std::optional<ZetaEstimate> estimate_zeta(std::span<const ParamVector> grads, double beta2);

/// Constants of the regret bound.
struct TheoryParams {
  double d_inf = 2.0;
  double g_inf = 1.0;
  double beta1 = 0.9;
  double lambda = 0.99;  ///< geometric beta1t decay (bound_cor1 only)
  double rho = 0.999764;
  double r_lower = 0.005;
  double r_upper = 5.0;
  double alpha = 0.001;
  double beta2 = 0.999;  ///< for the zeta estimate

  void validate() const;
};

/// True iff every 1 / eta_hat_{t,i} <= 1 / (r_lower (1 - rho)) + 1e-12.
bool eta_bound_check(std::span<const ParamVector> etahat_series, const TheoryParams& params);

/// Sufficient statistics of a trajectory for the regret-bound evaluators.
struct BoundInputs {
  StepIndex horizon = 0;
  std::size_t dim = 0;
  double sum_inverse_final_etahat = 0.0;  ///< sum_i 1 / eta_hat_{T,i}
  double sum_grad_norms = 0.0;            ///< sum_i ||g_{1:T,i}||_2
  double sum_grad_sq_norms = 0.0;         ///< sum_i ||g^2_{1:T,i}||_2
  std::optional<double> zeta;
};

struct RegretBound {
  double term1 = 0.0;
  double term2 = 0.0;
  double term3 = 0.0;
  double term4 = 0.0;
  [[nodiscard]] double total() const noexcept { return term1 + term2 + term3 + term4; }
};

struct Trajectory {
  std::vector<ParamVector> grads;
  std::vector<ParamVector> etahat;
};

BoundInputs bound_inputs(const Trajectory& traj, const TheoryParams& params);

/// Regret bound for beta1t = beta1 lambda^(t-1). Absent when zeta is needed but unavailable.
std::optional<RegretBound> bound_cor1(const BoundInputs& in, const TheoryParams& params);
std::optional<RegretBound> bound_cor1(const Trajectory& traj, const TheoryParams& params);
/// Regret bound for beta1t = beta1 / t.
std::optional<RegretBound> bound_cor2(const BoundInputs& in, const TheoryParams& params);
std::optional<RegretBound> bound_cor2(const Trajectory& traj, const TheoryParams& params);

/// (t, R(t) / sqrt(t)) for every ledger entry.
std::vector<std::pair<StepIndex, double>> sqrtT_regret_series(const RegretLedger& ledger);
/// sup of the normalized series over t >= t_from.
double tail_sup(std::span<const std::pair<StepIndex, double>> series, StepIndex t_from);

/// sum_i a_i / sqrt(sum_{j<=i} a_j) <= 2 sqrt(sum_i a_i) + 1e-12, zero-prefix terms taken as 0.
bool lemma_a1_property(std::span<const double> a);

// ---------------------------------------------------------------------------
// Streaming monitor used by the experiment runner

struct HypothesisFlags {
  bool rho_bounded = false;       ///< rho_t <= rho < 1 at every step
  bool r_ordered = false;         ///< 0 < r_lower <= r_upper
  bool beta1_bounded = false;     ///< beta1t <= beta1 < 1 at every step
  bool gradient_bounded = false;  ///< ||g_t||_inf <= G_inf at every step
  bool diameter_bounded = false;  ///< every iterate inside a bounded box
  bool sqrt_decay = false;        ///< eta_t = eta_hat_t / sqrt(t)

  [[nodiscard]] bool all() const noexcept {
    return rho_bounded && r_ordered && beta1_bounded && gradient_bounded && diameter_bounded && sqrt_decay;
  }
};

struct ConditionReport {
  std::string optimizer;
  StepIndex steps = 0;
  std::optional<ZetaEstimate> zeta;
  std::vector<C2Violation> c2_violations;
  std::size_t c2_checks = 0;
  HypothesisFlags flags;
  bool eta_bound_applicable = false;
  bool eta_bound_holds = false;
  double max_inverse_etahat = 0.0;
  double inverse_etahat_limit = 0.0;
  std::optional<RegretBound> bound_cor1;
  std::optional<RegretBound> bound_cor2;
  std::optional<double> measured_regret;

  [[nodiscard]] double c2_violation_fraction() const noexcept {
    return c2_checks == 0 ? 0.0 : static_cast<double>(c2_violations.size()) / static_cast<double>(c2_checks);
  }

  /// Flat `key,value` CSV.
  void write_csv(const std::filesystem::path& path) const;
};

/// Parsed `key,value` CSV as ordered pairs.
std::vector<std::pair<std::string, std::string>> read_key_value_csv(const std::filesystem::path& path);

/// What the monitor needs to know about the run being observed.
struct MonitorSetup {
  std::string optimizer;
  std::optional<TransitionSchedule> schedule;  ///< DSTAdam runs only
  StepConfig step;
  FeasibleBox box;
  std::optional<double> grad_bound;
};

/// Feeds per-step data and accumulates every condition in O(d) memory.
class ConditionMonitor {
 public:
  explicit ConditionMonitor(MonitorSetup setup);

  /// theta is the iterate the gradient was taken at; state is post-step.
  void observe(StepIndex t, const ParamVector& theta, const ParamVector& g, const OptimizerState& state);

  [[nodiscard]] ConditionReport finalize(std::optional<double> measured_regret) const;

 private:
  MonitorSetup setup_;
  StepIndex steps_ = 0;
  std::vector<double> ema_sq_;
  std::vector<double> sum_sq_;
  std::vector<double> sum_quartic_;
  std::vector<double> prev_etahat_;
  std::vector<double> last_etahat_;
  std::optional<ZetaEstimate> zeta_;
  std::vector<C2Violation> violations_;
  std::size_t c2_checks_ = 0;
  double max_inverse_etahat_ = 0.0;
  bool rho_ok_ = true;
  bool beta1_ok_ = true;
  bool grad_ok_ = true;
  bool inside_ok_ = true;
};

}  // namespace transopt
