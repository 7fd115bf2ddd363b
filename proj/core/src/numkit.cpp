#include "transopt/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "transopt/error.hpp"

namespace transopt {

namespace {

void require_finite(std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DomainError(fmt::format("non-finite entry {} at coordinate {}", values[i], i));
    }
  }
}

void require_same_length(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) {
    throw DimensionError(fmt::format("length mismatch: {} vs {}", a.size(), b.size()));
  }
}

double apply(ElementOp op, double x, double y, std::size_t i) {
  switch (op) {
    case ElementOp::add:
      return x + y;
    case ElementOp::sub:
      return x - y;
    case ElementOp::mul:
      return x * y;
    case ElementOp::div:
      if (y == 0.0) {
        throw DomainError(fmt::format("division by zero at coordinate {}", i));
      }
      return x / y;
    case ElementOp::sqrt:
      if (x < 0.0) {
        throw DomainError(fmt::format("sqrt of negative entry {} at coordinate {}", x, i));
      }
      return std::sqrt(x);
    case ElementOp::square:
      return x * x;
    case ElementOp::clamp:
      break;
  }
  throw DomainError("clamp requires explicit bounds");
}

}  // namespace

ParamVector::ParamVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) {
    throw DimensionError("ParamVector requires length >= 1");
  }
  require_finite(values_);
}

ParamVector::ParamVector(std::initializer_list<double> values)
    : ParamVector(std::vector<double>(values)) {}

ParamVector ParamVector::zeros(std::size_t d) { return ParamVector(std::vector<double>(d, 0.0)); }

ParamVector ParamVector::filled(std::size_t d, double value) {
  return ParamVector(std::vector<double>(d, value));
}

double ParamVector::at(std::size_t i) const {
  if (i >= values_.size()) {
    throw DimensionError(fmt::format("index {} out of range for length {}", i, values_.size()));
  }
  return values_[i];
}

void ParamVector::set(std::size_t i, double value) {
  if (i >= values_.size()) {
    throw DimensionError(fmt::format("index {} out of range for length {}", i, values_.size()));
  }
  if (!std::isfinite(value)) {
    throw DomainError(fmt::format("non-finite entry {} at coordinate {}", value, i));
  }
  values_[i] = value;
}

ParamVector elementwise(ElementOp op, const ParamVector& a, const ParamVector& b) {
  require_same_length(a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply(op, a[i], b[i], i);
  return ParamVector(std::move(out));
}

ParamVector elementwise(ElementOp op, const ParamVector& a, double b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply(op, a[i], b, i);
  return ParamVector(std::move(out));
}

ParamVector add(const ParamVector& a, const ParamVector& b) { return elementwise(ElementOp::add, a, b); }
ParamVector sub(const ParamVector& a, const ParamVector& b) { return elementwise(ElementOp::sub, a, b); }
ParamVector mul(const ParamVector& a, const ParamVector& b) { return elementwise(ElementOp::mul, a, b); }
ParamVector div(const ParamVector& a, const ParamVector& b) { return elementwise(ElementOp::div, a, b); }
ParamVector add(const ParamVector& a, double b) { return elementwise(ElementOp::add, a, b); }
ParamVector mul(const ParamVector& a, double b) { return elementwise(ElementOp::mul, a, b); }
ParamVector div(const ParamVector& a, double b) { return elementwise(ElementOp::div, a, b); }
ParamVector sqrt(const ParamVector& a) { return elementwise(ElementOp::sqrt, a, 0.0); }
ParamVector square(const ParamVector& a) { return elementwise(ElementOp::square, a, 0.0); }

ParamVector abs(const ParamVector& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::fabs(a[i]);
  return ParamVector(std::move(out));
}

ParamVector clamp(const ParamVector& a, double lo, double hi) {
  if (!(lo <= hi)) {
    throw DomainError(fmt::format("clamp bounds out of order: lo={} hi={}", lo, hi));
  }
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::clamp(a[i], lo, hi);
  return ParamVector(std::move(out));
}

ParamVector clamp(const ParamVector& a, const ParamVector& lo, const ParamVector& hi) {
  require_same_length(a, lo);
  require_same_length(a, hi);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(lo[i] <= hi[i])) {
      throw DomainError(fmt::format("clamp bounds out of order at coordinate {}", i));
    }
    out[i] = std::clamp(a[i], lo[i], hi[i]);
  }
  return ParamVector(std::move(out));
}

ParamVector max(const ParamVector& a, const ParamVector& b) {
  require_same_length(a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::max(a[i], b[i]);
  return ParamVector(std::move(out));
}

Norms norms(const ParamVector& a) {
  // Scaled accumulation keeps l2 finite for entries near the double range.
  Norms n;
  for (double x : a.values()) n.linf = std::max(n.linf, std::fabs(x));
  if (n.linf == 0.0) return n;
  double sum = 0.0;
  for (double x : a.values()) {
    const double s = x / n.linf;
    sum += s * s;
  }
  n.l2 = n.linf * std::sqrt(sum);
  return n;
}

double dot(const ParamVector& a, const ParamVector& b) {
  require_same_length(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

}  // namespace transopt
