#include "doctest.h"

#include <stdexcept>

#include <cmath>
#include <limits>

#include "mfnn/activation.hpp"

using namespace mfnn;

TEST_CASE("known point values") {
  const Activation sig = Activation::sigmoid();
  const Activation th = Activation::tanh_fn();
  CHECK(sig.eval(0.0) == 0.5);
  CHECK(th.eval(0.0) == 0.0);
  // 1/(1+e^{-1/2}) to full double precision.
  CHECK(sig.eval(0.5) == doctest::Approx(0.62245933120185459).epsilon(1e-14));
  CHECK(sig.deriv(0.0) == 0.25);
  CHECK(th.deriv(0.0) == 1.0);
}

TEST_CASE("derivative matches central finite differences") {
  const double h = 1e-6;
  for (const Activation& a : {Activation::sigmoid(), Activation::tanh_fn(), Activation::erf_fn()}) {
    const double fd2 = (a.eval(2.0 + h) - a.eval(2.0 - h)) / (2.0 * h);
    CHECK(std::abs(fd2 - a.deriv(2.0)) < 1e-8);
    for (int z = -50; z <= 50; ++z) {
      const double fd = (a.eval(z + h) - a.eval(z - h)) / (2.0 * h);
      const double d = a.deriv(static_cast<double>(z));
      // Relative tolerance where the derivative is representable against the
      // function value's ulp; absolute floor deep in the tails.
      CHECK(std::abs(fd - d) <= 1e-6 * std::abs(d) + 1e-9);
    }
  }
}

TEST_CASE("bounds and positivity on [-50, 50]") {
  for (const Activation& a : {Activation::sigmoid(), Activation::tanh_fn(), Activation::erf_fn()}) {
    for (int z = -50; z <= 50; ++z) {
      CHECK(std::abs(a.eval(z)) <= a.value_bound());
      CHECK(std::abs(a.deriv(z)) <= a.deriv_bound());
    }
  }
  // Strict positivity only where the derivative is representable; tanh's
  // underflows to zero past |z| ~ 19.
  for (const Activation& a : {Activation::sigmoid(), Activation::tanh_fn()}) {
    for (int z = -18; z <= 18; ++z) CHECK(a.deriv(z) > 0.0);
    for (int z = -50; z <= 50; ++z) CHECK(a.deriv(z) >= 0.0);
  }
}

TEST_CASE("non-finite input is rejected") {
  const Activation a = Activation::sigmoid();
  CHECK_THROWS_AS(a.eval(std::numeric_limits<double>::quiet_NaN()), std::domain_error);
  CHECK_THROWS_AS(a.eval(std::numeric_limits<double>::infinity()), std::domain_error);
  CHECK_THROWS_AS(a.deriv(-std::numeric_limits<double>::infinity()), std::domain_error);
}

TEST_CASE("purity: repeated calls are bit-identical") {
  const Activation a = Activation::erf_fn();
  for (double z : {-3.7, 0.0, 1.25, 41.0}) {
    CHECK(a.eval(z) == a.eval(z));
    CHECK(a.deriv(z) == a.deriv(z));
  }
}

TEST_CASE("selection by name") {
  CHECK(Activation::from_name("sigmoid").kind() == ActivationKind::Sigmoid);
  CHECK(Activation::from_name("tanh").kind() == ActivationKind::Tanh);
  CHECK(Activation::from_name("erf").kind() == ActivationKind::SmoothCustom);
  CHECK_THROWS_AS(Activation::from_name("relu"), std::invalid_argument);
}
