#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "transopt/numkit.hpp"
#include "transopt/optim.hpp"
#include "transopt/schedule.hpp"

namespace transopt {

/// Labelled samples, row-major features.
struct Dataset {
  std::size_t dim = 0;
  std::vector<double> features;  ///< size() * dim values
  std::vector<int> labels;

  [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * dim, dim);
  }
};

/// One row per sample: features then the integer label. No header.
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset_csv(const std::filesystem::path& path);

/// Two isotropic unit-variance Gaussian clusters in 2-D centred at
/// -(s, s) (label 0) and +(s, s) (label 1); labels alternate by index.
Dataset make_two_cluster(std::size_t n, std::uint64_t seed, double separation = 1.0);

struct Evaluation {
  double train_loss = 0.0;
  std::optional<double> heldout_accuracy;
};

/// Sequence of convex (or, for the MLP, merely differentiable) losses f_t
/// over a box, with the fixed comparator used for regret.
class OnlineProblem {
 public:
  virtual ~OnlineProblem() = default;

  [[nodiscard]] virtual std::string_view kind() const = 0;
  [[nodiscard]] virtual double loss_at(StepIndex t, const ParamVector& theta) const = 0;
  [[nodiscard]] virtual ParamVector grad_at(StepIndex t, const ParamVector& theta) const = 0;
  /// Loss of theta on the whole training stream (or dataset), plus held-out accuracy when defined.
  [[nodiscard]] virtual Evaluation evaluate(const ParamVector& theta) const = 0;
  /// Largest step index the problem can serve.
  [[nodiscard]] virtual StepIndex horizon() const = 0;

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] const FeasibleBox& box() const noexcept { return box_; }
  [[nodiscard]] const std::optional<ParamVector>& comparator() const noexcept { return comparator_; }
  [[nodiscard]] std::optional<double> grad_bound() const noexcept { return grad_bound_; }
  [[nodiscard]] const ParamVector& initial_point() const noexcept { return initial_; }

 protected:
  OnlineProblem(std::size_t dim, FeasibleBox box, ParamVector initial)
      : dim_(dim), box_(std::move(box)), initial_(std::move(initial)) {}

  std::size_t dim_;
  FeasibleBox box_;
  ParamVector initial_;
  std::optional<ParamVector> comparator_;
  std::optional<double> grad_bound_;
};

/// f_t(theta) = 1/2 ||theta - c_t||^2 over a box.
class QuadraticProblem final : public OnlineProblem {
 public:
  QuadraticProblem(std::vector<ParamVector> centers, FeasibleBox box);

  [[nodiscard]] std::string_view kind() const override { return "quadratic"; }
  [[nodiscard]] double loss_at(StepIndex t, const ParamVector& theta) const override;
  [[nodiscard]] ParamVector grad_at(StepIndex t, const ParamVector& theta) const override;
  [[nodiscard]] Evaluation evaluate(const ParamVector& theta) const override;
  [[nodiscard]] StepIndex horizon() const override { return static_cast<StepIndex>(centers_.size()); }

  [[nodiscard]] const ParamVector& center(StepIndex t) const;

 private:
  std::vector<ParamVector> centers_;
  std::vector<double> mean_center_;
  double mean_half_sq_norm_ = 0.0;
};

/// Centers c_t = mu + u_t with mu ~ U(-0.5, 0.5)^d drawn once and u_t ~ U(-0.5, 0.5)^d,
/// box [-1, 1]^d, theta_1 = 0. The comparator is the clamped mean center.
std::unique_ptr<QuadraticProblem> make_quadratic(std::size_t d, std::uint64_t seed, StepIndex horizon);

/// d = 1, box [-1, 1]; f_t(theta) = C theta when t mod 3 == 1, else -theta; theta_1 = 1.
class ReddiProblem final : public OnlineProblem {
 public:
  explicit ReddiProblem(double c);

  [[nodiscard]] std::string_view kind() const override { return "reddi"; }
  [[nodiscard]] double loss_at(StepIndex t, const ParamVector& theta) const override;
  [[nodiscard]] ParamVector grad_at(StepIndex t, const ParamVector& theta) const override;
  /// Average loss per step over one full 3-cycle.
  [[nodiscard]] Evaluation evaluate(const ParamVector& theta) const override;
  [[nodiscard]] StepIndex horizon() const override;

  [[nodiscard]] double c() const noexcept { return c_; }

 private:
  double c_;
};

std::unique_ptr<ReddiProblem> make_reddi(double c);

/// Splits training rows into seeded, per-epoch shuffled minibatches.
class MinibatchStream {
 public:
  MinibatchStream(std::size_t n_samples, std::size_t batch_size, StepIndex horizon, std::uint64_t seed);

  /// Row indices of the minibatch consumed at step t.
  [[nodiscard]] std::span<const std::size_t> batch(StepIndex t) const;
  [[nodiscard]] std::size_t batches_per_epoch() const noexcept { return batches_per_epoch_; }
  [[nodiscard]] StepIndex horizon() const noexcept { return horizon_; }

 private:
  std::size_t n_;
  std::size_t batch_size_;
  std::size_t batches_per_epoch_;
  StepIndex horizon_;
  std::vector<std::vector<std::size_t>> epochs_;
};

/// Iterations needed to run `epochs` passes: ceil(n / batch) * epochs.
StepIndex iterations_for_epochs(std::size_t n_samples, std::size_t batch_size, std::int64_t epochs);

/// Mean logistic loss log(1 + exp(-y x.theta)) of a minibatch, labels mapped {0,1} -> {-1,+1}.
class LogisticProblem final : public OnlineProblem {
 public:
  LogisticProblem(Dataset data, std::size_t batch_size, StepIndex horizon, std::uint64_t seed, double box_radius);

  [[nodiscard]] std::string_view kind() const override { return "logistic"; }
  [[nodiscard]] double loss_at(StepIndex t, const ParamVector& theta) const override;
  [[nodiscard]] ParamVector grad_at(StepIndex t, const ParamVector& theta) const override;
  [[nodiscard]] Evaluation evaluate(const ParamVector& theta) const override;
  [[nodiscard]] StepIndex horizon() const override { return stream_.horizon(); }

  [[nodiscard]] double loss_on(std::span<const std::size_t> rows, const ParamVector& theta) const;
  [[nodiscard]] ParamVector grad_on(std::span<const std::size_t> rows, const ParamVector& theta) const;
  [[nodiscard]] const Dataset& data() const noexcept { return data_; }
  [[nodiscard]] std::size_t comparator_iterations() const noexcept { return comparator_iterations_; }

 private:
  Dataset data_;
  MinibatchStream stream_;
  std::vector<std::size_t> all_rows_;
  std::size_t comparator_iterations_ = 0;
};

/// Features x ~ N(0, I_d), weights w ~ N(0, I_d), label 1 with probability sigmoid(x.w).
Dataset make_logistic_dataset(std::size_t n_samples, std::size_t d, std::uint64_t seed);

std::unique_ptr<LogisticProblem> make_logistic(std::size_t n_samples, std::size_t d, std::uint64_t seed,
                                               std::size_t batch_size = 128, StepIndex horizon = 1000,
                                               double box_radius = 10.0);

/// Projected full-batch gradient descent with step 1/L until the gradient
/// mapping norm drops below `tol`. Returns the minimizer and the iteration count.
std::pair<ParamVector, std::size_t> minimize_full_batch(const LogisticProblem& problem, double tol = 1e-8,
                                                        std::size_t max_iterations = 5'000'000);

/// Running regret R(t) = sum_{s <= t} (f_s(theta_s) - f_s(theta*)).
struct RegretEntry {
  StepIndex t = 0;
  double loss_alg = 0.0;
  double loss_star = 0.0;
  double regret = 0.0;
};

struct RegretLedger {
  double cumulative_alg_loss = 0.0;
  double cumulative_star_loss = 0.0;
  std::vector<RegretEntry> series;

  [[nodiscard]] double regret() const noexcept { return series.empty() ? 0.0 : series.back().regret; }
  /// Sum of the stored per-step deltas, recomputed from scratch.
  [[nodiscard]] double recompute() const;
};

/// Appends step t. Throws SequenceError unless t is strictly larger than the last step.
void regret_update(RegretLedger& ledger, StepIndex t, double loss_alg, double loss_star);

}  // namespace transopt
