#include "transopt/problems.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "transopt/error.hpp"
#include "transopt/random.hpp"

namespace transopt {

namespace {

void require_dim(const ParamVector& theta, std::size_t d) {
  if (theta.size() != d) throw DimensionError(fmt::format("expected dimension {}, got {}", d, theta.size()));
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot open {} for writing", path.string()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double x : data.row(i)) out << fmt::format("{:.17g},", x);
    out << data.labels[i] << '\n';
  }
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open {}", path.string()));
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2) throw Error(fmt::format("{}:{}: need at least one feature and a label", path.string(), line_no));
    const std::size_t dim = cells.size() - 1;
    if (data.dim == 0) data.dim = dim;
    if (dim != data.dim) throw DimensionError(fmt::format("{}:{}: expected {} features", path.string(), line_no, data.dim));
    for (std::size_t k = 0; k < dim; ++k) data.features.push_back(std::stod(cells[k]));
    data.labels.push_back(std::stoi(cells.back()));
  }
  return data;
}

Dataset make_two_cluster(std::size_t n, std::uint64_t seed, double separation) {
  Rng rng(seed);
  Dataset data;
  data.dim = 2;
  data.features.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double centre = label == 1 ? separation : -separation;
    data.features.push_back(centre + rng.normal());
    data.features.push_back(centre + rng.normal());
    data.labels.push_back(label);
  }
  return data;
}

// ---------------------------------------------------------------------------
// Quadratic

QuadraticProblem::QuadraticProblem(std::vector<ParamVector> centers, FeasibleBox box)
    : OnlineProblem(centers.empty() ? 0 : centers.front().size(), std::move(box),
                    ParamVector::zeros(centers.empty() ? 1 : centers.front().size())),
      centers_(std::move(centers)) {
  if (centers_.empty()) throw DomainError("quadratic problem needs at least one center");
  box_.validate(dim_);
  mean_center_.assign(dim_, 0.0);
  for (const auto& c : centers_) {
    require_dim(c, dim_);
    for (std::size_t i = 0; i < dim_; ++i) mean_center_[i] += c[i];
    mean_half_sq_norm_ += 0.5 * dot(c, c);
  }
  const double n = static_cast<double>(centers_.size());
  for (double& x : mean_center_) x /= n;
  mean_half_sq_norm_ /= n;

  if (!box_.contains(initial_)) initial_ = project_box(initial_, box_, ParamVector::filled(dim_, 1.0));
  comparator_ = project_box(ParamVector(mean_center_), box_, ParamVector::filled(dim_, 1.0));

  // sup over the box and all t of |theta_i - c_{t,i}|.
  if (box_.is_bounded()) {
    double g = 0.0;
    for (const auto& c : centers_) {
      for (std::size_t i = 0; i < dim_; ++i) {
        g = std::max({g, (*box_.hi)[i] - c[i], c[i] - (*box_.lo)[i]});
      }
    }
    grad_bound_ = g;
  }
}

const ParamVector& QuadraticProblem::center(StepIndex t) const {
  if (t < 1 || t > horizon()) throw RangeError(fmt::format("step {} outside [1, {}]", t, horizon()));
  return centers_[static_cast<std::size_t>(t - 1)];
}

double QuadraticProblem::loss_at(StepIndex t, const ParamVector& theta) const {
  require_dim(theta, dim_);
  const ParamVector& c = center(t);
  double sum = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    const double diff = theta[i] - c[i];
    sum += diff * diff;
  }
  return 0.5 * sum;
}

ParamVector QuadraticProblem::grad_at(StepIndex t, const ParamVector& theta) const {
  require_dim(theta, dim_);
  return sub(theta, center(t));
}

Evaluation QuadraticProblem::evaluate(const ParamVector& theta) const {
  require_dim(theta, dim_);
  // mean_t 1/2 ||theta - c_t||^2 = 1/2 ||theta||^2 - theta . mean(c) + mean(1/2 ||c||^2)
  double loss = 0.5 * dot(theta, theta) + mean_half_sq_norm_;
  for (std::size_t i = 0; i < dim_; ++i) loss -= theta[i] * mean_center_[i];
  return {loss, std::nullopt};
}

std::unique_ptr<QuadraticProblem> make_quadratic(std::size_t d, std::uint64_t seed, StepIndex horizon) {
  if (d < 1) throw DomainError("make_quadratic requires d >= 1");
  if (horizon < 1) throw DomainError("make_quadratic requires horizon >= 1");
  Rng rng(seed);
  std::vector<double> mu(d);
  for (double& x : mu) x = rng.uniform(-0.5, 0.5);
  std::vector<ParamVector> centers;
  centers.reserve(static_cast<std::size_t>(horizon));
  std::vector<double> c(d);
  for (StepIndex t = 0; t < horizon; ++t) {
    for (std::size_t i = 0; i < d; ++i) c[i] = mu[i] + rng.uniform(-0.5, 0.5);
    centers.emplace_back(c);
  }
  return std::make_unique<QuadraticProblem>(std::move(centers), FeasibleBox::cube(d, -1.0, 1.0));
}

// ---------------------------------------------------------------------------
// Reddi

ReddiProblem::ReddiProblem(double c) : OnlineProblem(1, FeasibleBox::cube(1, -1.0, 1.0), ParamVector{1.0}), c_(c) {
  if (!(c > 1.0)) throw DomainError(fmt::format("reddi construction requires C > 1, got {}", c));
  comparator_ = ParamVector{-1.0};
  grad_bound_ = c;
}

double ReddiProblem::loss_at(StepIndex t, const ParamVector& theta) const {
  return grad_at(t, theta)[0] * theta[0];
}

ParamVector ReddiProblem::grad_at(StepIndex t, const ParamVector& theta) const {
  require_dim(theta, 1);
  if (t < 1) throw RangeError(fmt::format("step index must be >= 1, got {}", t));
  return ParamVector{t % 3 == 1 ? c_ : -1.0};
}

Evaluation ReddiProblem::evaluate(const ParamVector& theta) const {
  require_dim(theta, 1);
  return {(c_ - 2.0) * theta[0] / 3.0, std::nullopt};
}

StepIndex ReddiProblem::horizon() const { return std::numeric_limits<StepIndex>::max(); }

std::unique_ptr<ReddiProblem> make_reddi(double c) { return std::make_unique<ReddiProblem>(c); }

// ---------------------------------------------------------------------------
// Minibatches

MinibatchStream::MinibatchStream(std::size_t n_samples, std::size_t batch_size, StepIndex horizon, std::uint64_t seed)
    : n_(n_samples), batch_size_(batch_size), horizon_(horizon) {
  if (batch_size == 0) throw DomainError("batch size must be >= 1");
  if (n_samples < batch_size) {
    throw DomainError(fmt::format("need n_samples >= batch size ({} < {})", n_samples, batch_size));
  }
  if (horizon < 1) throw DomainError("horizon must be >= 1");
  batches_per_epoch_ = (n_samples + batch_size - 1) / batch_size;
  const auto epochs = static_cast<std::size_t>((horizon - 1) / static_cast<StepIndex>(batches_per_epoch_) + 1);
  Rng rng(seed);
  epochs_.reserve(epochs);
  for (std::size_t e = 0; e < epochs; ++e) epochs_.push_back(rng.permutation(n_samples));
}

std::span<const std::size_t> MinibatchStream::batch(StepIndex t) const {
  if (t < 1 || t > horizon_) throw RangeError(fmt::format("step {} outside [1, {}]", t, horizon_));
  const auto k = static_cast<std::size_t>(t - 1);
  const std::size_t epoch = k / batches_per_epoch_;
  const std::size_t begin = (k % batches_per_epoch_) * batch_size_;
  const std::size_t end = std::min(n_, begin + batch_size_);
  return std::span<const std::size_t>(epochs_[epoch]).subspan(begin, end - begin);
}

StepIndex iterations_for_epochs(std::size_t n_samples, std::size_t batch_size, std::int64_t epochs) {
  if (batch_size == 0) throw DomainError("batch size must be >= 1");
  const auto per_epoch = static_cast<StepIndex>((n_samples + batch_size - 1) / batch_size);
  return per_epoch * epochs;
}

// ---------------------------------------------------------------------------
// Logistic

LogisticProblem::LogisticProblem(Dataset data, std::size_t batch_size, StepIndex horizon, std::uint64_t seed,
                                 double box_radius)
    : OnlineProblem(data.dim, FeasibleBox::cube(std::max<std::size_t>(data.dim, 1), -box_radius, box_radius),
                    ParamVector::zeros(std::max<std::size_t>(data.dim, 1))),
      data_(std::move(data)),
      stream_(data_.size(), batch_size, horizon, seed) {
  if (data_.dim == 0) throw DimensionError("logistic dataset has no features");
  if (!(box_radius > 0.0)) throw DomainError("box radius must be > 0");
  all_rows_.resize(data_.size());
  std::iota(all_rows_.begin(), all_rows_.end(), std::size_t{0});
  double g = 0.0;
  for (double x : data_.features) g = std::max(g, std::fabs(x));
  grad_bound_ = g;
  auto [star, iterations] = minimize_full_batch(*this);
  comparator_ = std::move(star);
  comparator_iterations_ = iterations;
}

double LogisticProblem::loss_on(std::span<const std::size_t> rows, const ParamVector& theta) const {
  require_dim(theta, dim_);
  double sum = 0.0;
  for (std::size_t r : rows) {
    const auto x = data_.row(r);
    const double y = data_.labels[r] == 1 ? 1.0 : -1.0;
    double z = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) z += x[i] * theta[i];
    sum += softplus(-y * z);
  }
  return sum / static_cast<double>(rows.size());
}

ParamVector LogisticProblem::grad_on(std::span<const std::size_t> rows, const ParamVector& theta) const {
  require_dim(theta, dim_);
  std::vector<double> g(dim_, 0.0);
  for (std::size_t r : rows) {
    const auto x = data_.row(r);
    const double y = data_.labels[r] == 1 ? 1.0 : -1.0;
    double z = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) z += x[i] * theta[i];
    const double w = -y * sigmoid(-y * z);
    for (std::size_t i = 0; i < dim_; ++i) g[i] += w * x[i];
  }
  const double n = static_cast<double>(rows.size());
  for (double& x : g) x /= n;
  return ParamVector(std::move(g));
}

double LogisticProblem::loss_at(StepIndex t, const ParamVector& theta) const { return loss_on(stream_.batch(t), theta); }

ParamVector LogisticProblem::grad_at(StepIndex t, const ParamVector& theta) const {
  return grad_on(stream_.batch(t), theta);
}

Evaluation LogisticProblem::evaluate(const ParamVector& theta) const { return {loss_on(all_rows_, theta), std::nullopt}; }

Dataset make_logistic_dataset(std::size_t n_samples, std::size_t d, std::uint64_t seed) {
  if (d < 1) throw DomainError("logistic dataset requires d >= 1");
  Rng rng(seed);
  std::vector<double> w(d);
  for (double& x : w) x = rng.normal();
  Dataset data;
  data.dim = d;
  data.features.reserve(n_samples * d);
  for (std::size_t s = 0; s < n_samples; ++s) {
    double z = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double x = rng.normal();
      data.features.push_back(x);
      z += x * w[i];
    }
    data.labels.push_back(rng.uniform() < sigmoid(z) ? 1 : 0);
  }
  return data;
}

std::unique_ptr<LogisticProblem> make_logistic(std::size_t n_samples, std::size_t d, std::uint64_t seed,
                                               std::size_t batch_size, StepIndex horizon, double box_radius) {
  return std::make_unique<LogisticProblem>(make_logistic_dataset(n_samples, d, seed), batch_size, horizon,
                                           seed + 1, box_radius);
}

std::pair<ParamVector, std::size_t> minimize_full_batch(const LogisticProblem& problem, double tol,
                                                        std::size_t max_iterations) {
  const Dataset& data = problem.data();
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  // Lipschitz constant of the mean logistic gradient: lambda_max(X^T X / n) / 4,
  // bounded by the trace.
  double trace = 0.0;
  for (double x : data.features) trace += x * x;
  const double lipschitz = std::max(0.25 * trace / static_cast<double>(data.size()), 1e-12);
  const double step = 1.0 / lipschitz;
  const ParamVector unit = ParamVector::filled(problem.dim(), 1.0);

  ParamVector theta = problem.initial_point();
  for (std::size_t k = 1; k <= max_iterations; ++k) {
    const ParamVector g = problem.grad_on(rows, theta);
    const ParamVector next = project_box(sub(theta, mul(g, step)), problem.box(), unit);
    const double mapping = norms(sub(theta, next)).l2 * lipschitz;
    theta = next;
    if (mapping < tol) return {theta, k};
  }
  throw Error(fmt::format("full-batch descent did not reach gradient-mapping norm {} in {} iterations", tol,
                          max_iterations));
}

// ---------------------------------------------------------------------------
// Regret

double RegretLedger::recompute() const {
  double r = 0.0;
  for (const auto& e : series) r += e.loss_alg - e.loss_star;
  return r;
}

void regret_update(RegretLedger& ledger, StepIndex t, double loss_alg, double loss_star) {
  if (!ledger.series.empty() && t <= ledger.series.back().t) {
    throw SequenceError(fmt::format("regret step {} does not follow step {}", t, ledger.series.back().t));
  }
  ledger.cumulative_alg_loss += loss_alg;
  ledger.cumulative_star_loss += loss_star;
  const double prev = ledger.regret();
  ledger.series.push_back({t, loss_alg, loss_star, prev + (loss_alg - loss_star)});
}

}  // namespace transopt
