#include "mfnn/activation.hpp"

#include <cmath>
#include <stdexcept>

namespace mfnn {

namespace {
constexpr double kTwoOverSqrtPi = 1.1283791670955126;

void require_finite(double z) {
  if (!std::isfinite(z)) throw std::domain_error("activation: non-finite argument");
}
}  // namespace

Activation Activation::sigmoid() { return Activation(ActivationKind::Sigmoid, 1.0, 0.25); }
Activation Activation::tanh_fn() { return Activation(ActivationKind::Tanh, 1.0, 1.0); }
Activation Activation::erf_fn() { return Activation(ActivationKind::SmoothCustom, 1.0, kTwoOverSqrtPi); }

Activation Activation::from_name(std::string_view name) {
  if (name == "sigmoid") return sigmoid();
  if (name == "tanh") return tanh_fn();
  if (name == "erf") return erf_fn();
  throw std::invalid_argument("unknown activation: " + std::string(name));
}

std::string Activation::name() const {
  switch (kind_) {
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::SmoothCustom: return "erf";
  }
  return "?";
}

double Activation::eval(double z) const {
  require_finite(z);
  switch (kind_) {
    case ActivationKind::Sigmoid:
      // Stable in both tails.
      if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
      {
        const double e = std::exp(z);
        return e / (1.0 + e);
      }
    case ActivationKind::Tanh: return std::tanh(z);
    case ActivationKind::SmoothCustom: return std::erf(z);
  }
  return 0.0;
}

double Activation::deriv(double z) const {
  require_finite(z);
  switch (kind_) {
    case ActivationKind::Sigmoid: {
      const double s = eval(z);
      return s * (1.0 - s);
    }
    case ActivationKind::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case ActivationKind::SmoothCustom:
      return kTwoOverSqrtPi * std::exp(-z * z);
  }
  return 0.0;
}

}  // namespace mfnn
