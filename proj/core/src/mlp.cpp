#include "transopt/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "transopt/error.hpp"
#include "transopt/random.hpp"

namespace transopt {

namespace {

void require_shapes(const Mlp& net, const ParamVector& theta, const Dataset& data, std::span<const std::size_t> rows) {
  if (theta.size() != net.param_count()) {
    throw DimensionError(fmt::format("mlp expects {} parameters, got {}", net.param_count(), theta.size()));
  }
  if (data.dim != net.input_dim()) {
    throw DimensionError(fmt::format("mlp input dimension {} does not match data dimension {}", net.input_dim(), data.dim));
  }
  if (rows.empty()) throw DimensionError("mlp batch is empty");
  for (std::size_t r : rows) {
    if (r >= data.size()) throw DimensionError(fmt::format("row {} out of range", r));
    const int y = data.labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= net.classes()) {
      throw DimensionError(fmt::format("label {} outside [0, {})", y, net.classes()));
    }
  }
}

// Activations of every layer for one sample; acts[0] is the input, acts.back() the logits.
std::vector<std::vector<double>> forward_sample(const Mlp& net, std::span<const double> theta, std::span<const double> x) {
  const auto& L = net.layers();
  std::vector<std::vector<double>> acts;
  acts.reserve(L.size());
  acts.emplace_back(x.begin(), x.end());
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < L.size(); ++l) {
    const std::size_t in = L[l];
    const std::size_t out = L[l + 1];
    const double* w = theta.data() + offset;
    const double* b = w + in * out;
    std::vector<double> z(out);
    const auto& a = acts.back();
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      for (std::size_t k = 0; k < in; ++k) s += w[o * in + k] * a[k];
      z[o] = (l + 2 < L.size()) ? std::max(0.0, s) : s;
    }
    acts.push_back(std::move(z));
    offset += in * out + out;
  }
  return acts;
}

void softmax(std::span<const double> logits, std::span<double> probs) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    probs[k] = std::exp(logits[k] - mx);
    sum += probs[k];
  }
  for (double& p : probs) p /= sum;
}

double cross_entropy(std::span<const double> logits, int label) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  return mx + std::log(sum) - logits[static_cast<std::size_t>(label)];
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> layer_sizes) : layers_(std::move(layer_sizes)) {
  if (layers_.size() < 2) throw DimensionError("mlp needs at least an input and an output layer");
  for (std::size_t n : layers_) {
    if (n == 0) throw DimensionError("mlp layer sizes must be >= 1");
  }
  if (layers_.back() < 2) throw DimensionError("mlp needs at least two classes");
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) param_count_ += layers_[l] * layers_[l + 1] + layers_[l + 1];
}

ParamVector Mlp::init_params(std::uint64_t seed) const {
  Rng rng(seed);
  std::vector<double> theta;
  theta.reserve(param_count_);
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    const std::size_t in = layers_[l];
    const std::size_t out = layers_[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in));
    for (std::size_t k = 0; k < in * out; ++k) theta.push_back(rng.uniform(-limit, limit));
    theta.insert(theta.end(), out, 0.0);
  }
  return ParamVector(std::move(theta));
}

ForwardResult mlp_forward(const Mlp& net, const ParamVector& theta, const Dataset& data,
                          std::span<const std::size_t> rows) {
  require_shapes(net, theta, data, rows);
  const std::size_t c = net.classes();
  ForwardResult out;
  out.logits.resize(rows.size() * c);
  out.probabilities.resize(rows.size() * c);
  double total = 0.0;
  for (std::size_t n = 0; n < rows.size(); ++n) {
    const auto acts = forward_sample(net, theta.values(), data.row(rows[n]));
    const auto& z = acts.back();
    std::copy(z.begin(), z.end(), out.logits.begin() + static_cast<std::ptrdiff_t>(n * c));
    softmax(z, std::span<double>(out.probabilities).subspan(n * c, c));
    total += cross_entropy(z, data.labels[rows[n]]);
  }
  out.loss = total / static_cast<double>(rows.size());
  return out;
}

ParamVector mlp_backward(const Mlp& net, const ParamVector& theta, const Dataset& data,
                         std::span<const std::size_t> rows) {
  require_shapes(net, theta, data, rows);
  const auto& L = net.layers();
  const std::span<const double> params = theta.values();
  std::vector<double> grad(net.param_count(), 0.0);

  std::vector<std::size_t> offsets(L.size() - 1);
  for (std::size_t l = 0, off = 0; l + 1 < L.size(); ++l) {
    offsets[l] = off;
    off += L[l] * L[l + 1] + L[l + 1];
  }

  for (std::size_t r : rows) {
    const auto acts = forward_sample(net, params, data.row(r));
    // dLoss/dlogits = softmax - onehot
    std::vector<double> delta(L.back());
    softmax(acts.back(), delta);
    delta[static_cast<std::size_t>(data.labels[r])] -= 1.0;

    for (std::size_t l = L.size() - 1; l-- > 0;) {
      const std::size_t in = L[l];
      const std::size_t out = L[l + 1];
      const double* w = params.data() + offsets[l];
      double* gw = grad.data() + offsets[l];
      double* gb = gw + in * out;
      const auto& a = acts[l];
      for (std::size_t o = 0; o < out; ++o) {
        gb[o] += delta[o];
        for (std::size_t k = 0; k < in; ++k) gw[o * in + k] += delta[o] * a[k];
      }
      if (l == 0) break;
      std::vector<double> prev(in, 0.0);
      for (std::size_t k = 0; k < in; ++k) {
        if (a[k] <= 0.0) continue;  // ReLU gate; a is post-activation
        double s = 0.0;
        for (std::size_t o = 0; o < out; ++o) s += w[o * in + k] * delta[o];
        prev[k] = s;
      }
      delta = std::move(prev);
    }
  }
  const double n = static_cast<double>(rows.size());
  for (double& g : grad) g /= n;
  return ParamVector(std::move(grad));
}

double mlp_accuracy(const Mlp& net, const ParamVector& theta, const Dataset& data) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const ForwardResult f = mlp_forward(net, theta, data, rows);
  const std::size_t c = net.classes();
  std::size_t correct = 0;
  for (std::size_t n = 0; n < rows.size(); ++n) {
    const auto first = f.logits.begin() + static_cast<std::ptrdiff_t>(n * c);
    const auto pred = static_cast<int>(std::max_element(first, first + static_cast<std::ptrdiff_t>(c)) - first);
    if (pred == data.labels[n]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

MlpProblem::MlpProblem(Mlp net, Dataset train, Dataset test, std::size_t batch_size, StepIndex horizon,
                       std::uint64_t seed)
    : OnlineProblem(net.param_count(), FeasibleBox::unbounded(), net.init_params(seed)),
      net_(std::move(net)),
      train_(std::move(train)),
      test_(std::move(test)),
      stream_(train_.size(), batch_size, horizon, seed + 1) {
  all_rows_.resize(train_.size());
  std::iota(all_rows_.begin(), all_rows_.end(), std::size_t{0});
}

double MlpProblem::loss_at(StepIndex t, const ParamVector& theta) const {
  return mlp_forward(net_, theta, train_, stream_.batch(t)).loss;
}

ParamVector MlpProblem::grad_at(StepIndex t, const ParamVector& theta) const {
  return mlp_backward(net_, theta, train_, stream_.batch(t));
}

Evaluation MlpProblem::evaluate(const ParamVector& theta) const {
  const double loss = mlp_forward(net_, theta, train_, all_rows_).loss;
  return {loss, mlp_accuracy(net_, theta, test_)};
}

std::unique_ptr<MlpProblem> make_mlp_problem(const MlpProblemOptions& o) {
  return std::make_unique<MlpProblem>(Mlp(o.layers), make_two_cluster(o.n_train, o.seed, o.separation),
                                      make_two_cluster(o.n_test, o.seed + 1, o.separation), o.batch_size, o.horizon,
                                      o.seed + 2);
}

}  // namespace transopt
