#pragma once

#include <string>
#include <string_view>

namespace mfnn {

enum class ActivationKind { Sigmoid, Tanh, SmoothCustom };

// Bounded smooth scalar nonlinearity with its derivative. Sigmoid and tanh
// have strictly positive derivative everywhere; the smooth-custom kind is
// erf, which is also bounded and strictly increasing.
class Activation {
 public:
  static Activation sigmoid();
  static Activation tanh_fn();
  static Activation erf_fn();  // the "smooth-custom" kind
  static Activation from_name(std::string_view name);

  double eval(double z) const;   // throws std::domain_error on non-finite z
  double deriv(double z) const;  // throws std::domain_error on non-finite z

  ActivationKind kind() const { return kind_; }
  double value_bound() const { return value_bound_; }
  double deriv_bound() const { return deriv_bound_; }
  std::string name() const;

 private:
  Activation(ActivationKind kind, double value_bound, double deriv_bound)
      : kind_(kind), value_bound_(value_bound), deriv_bound_(deriv_bound) {}

  ActivationKind kind_;
  double value_bound_;
  double deriv_bound_;
};

}  // namespace mfnn
