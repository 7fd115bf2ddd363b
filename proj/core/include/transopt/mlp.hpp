#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "transopt/numkit.hpp"
#include "transopt/problems.hpp"

namespace transopt {

/// Fully connected ReLU network with a softmax cross-entropy head.
///
/// Parameters are one flat vector: for each layer, the weight matrix
/// (out x in, row-major) followed by the bias vector.
class Mlp {
 public:
  explicit Mlp(std::vector<std::size_t> layer_sizes);

  [[nodiscard]] const std::vector<std::size_t>& layers() const noexcept { return layers_; }
  [[nodiscard]] std::size_t input_dim() const noexcept { return layers_.front(); }
  [[nodiscard]] std::size_t classes() const noexcept { return layers_.back(); }
  [[nodiscard]] std::size_t param_count() const noexcept { return param_count_; }

  /// He-uniform weights, zero biases.
  [[nodiscard]] ParamVector init_params(std::uint64_t seed) const;

 private:
  std::vector<std::size_t> layers_;
  std::size_t param_count_ = 0;
};

struct ForwardResult {
  double loss = 0.0;                 ///< mean cross-entropy over the batch
  std::vector<double> logits;        ///< rows x classes
  std::vector<double> probabilities; ///< rows x classes
};

ForwardResult mlp_forward(const Mlp& net, const ParamVector& theta, const Dataset& data,
                          std::span<const std::size_t> rows);

/// Gradient of the mean cross-entropy w.r.t. the flat parameter vector.
ParamVector mlp_backward(const Mlp& net, const ParamVector& theta, const Dataset& data,
                         std::span<const std::size_t> rows);

double mlp_accuracy(const Mlp& net, const ParamVector& theta, const Dataset& data);

struct MlpProblemOptions {
  std::vector<std::size_t> layers{2, 16, 16, 2};
  std::size_t n_train = 1000;
  std::size_t n_test = 1000;
  double separation = 1.0;
  std::size_t batch_size = 128;
  StepIndex horizon = 1600;
  std::uint64_t seed = 42;
};

/// Minibatch cross-entropy training of an Mlp on the two-cluster dataset.
/// Nonconvex: no comparator and no gradient bound.
class MlpProblem final : public OnlineProblem {
 public:
  MlpProblem(Mlp net, Dataset train, Dataset test, std::size_t batch_size, StepIndex horizon, std::uint64_t seed);

  [[nodiscard]] std::string_view kind() const override { return "mlp"; }
  [[nodiscard]] double loss_at(StepIndex t, const ParamVector& theta) const override;
  [[nodiscard]] ParamVector grad_at(StepIndex t, const ParamVector& theta) const override;
  /// Full training loss and test-set accuracy.
  [[nodiscard]] Evaluation evaluate(const ParamVector& theta) const override;
  [[nodiscard]] StepIndex horizon() const override { return stream_.horizon(); }

  [[nodiscard]] const Mlp& net() const noexcept { return net_; }
  [[nodiscard]] const Dataset& train() const noexcept { return train_; }
  [[nodiscard]] const Dataset& test() const noexcept { return test_; }

 private:
  Mlp net_;
  Dataset train_;
  Dataset test_;
  MinibatchStream stream_;
  std::vector<std::size_t> all_rows_;
};

std::unique_ptr<MlpProblem> make_mlp_problem(const MlpProblemOptions& options);

}  // namespace transopt
