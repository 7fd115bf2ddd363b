#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace transopt {

/// Dense, fixed-length vector of finite doubles.
///
/// Parameters, gradients and moment estimates all flow through this type.
/// The length is fixed at construction and every entry is finite after any
/// public operation; constructors and `set` throw DomainError otherwise.
class ParamVector {
 public:
  explicit ParamVector(std::vector<double> values);
  ParamVector(std::initializer_list<double> values);

  static ParamVector zeros(std::size_t d);
  static ParamVector filled(std::size_t d, double value);

  [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
  [[nodiscard]] double operator[](std::size_t i) const noexcept { return values_[i]; }
  [[nodiscard]] double at(std::size_t i) const;
  void set(std::size_t i, double value);

  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] const std::vector<double>& to_vector() const noexcept { return values_; }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

enum class ElementOp { add, sub, mul, div, sqrt, square, clamp };

/// Coordinatewise `op(a[i], b[i])`. Unary ops (sqrt, square) ignore `b`.
/// `clamp` is not accepted here; use the clamp overload.
ParamVector elementwise(ElementOp op, const ParamVector& a, const ParamVector& b);
ParamVector elementwise(ElementOp op, const ParamVector& a, double b);

ParamVector add(const ParamVector& a, const ParamVector& b);
ParamVector sub(const ParamVector& a, const ParamVector& b);
ParamVector mul(const ParamVector& a, const ParamVector& b);
ParamVector div(const ParamVector& a, const ParamVector& b);
ParamVector add(const ParamVector& a, double b);
ParamVector mul(const ParamVector& a, double b);
ParamVector div(const ParamVector& a, double b);
ParamVector sqrt(const ParamVector& a);
ParamVector square(const ParamVector& a);
ParamVector abs(const ParamVector& a);
ParamVector clamp(const ParamVector& a, double lo, double hi);
ParamVector clamp(const ParamVector& a, const ParamVector& lo, const ParamVector& hi);
ParamVector max(const ParamVector& a, const ParamVector& b);

struct Norms {
  double l2 = 0.0;
  double linf = 0.0;
};

Norms norms(const ParamVector& a);
double dot(const ParamVector& a, const ParamVector& b);

}  // namespace transopt
