#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mfnn {

struct DomainBounds {
  double x_lo = -1.0;
  double x_hi = 1.0;
  double y_lo = -2.0;
  double y_hi = 2.0;
};

enum class TeacherKind { AffineSigmoidMixture, Trigonometric, Constant };

// Target function y = f(x). All kinds map the input through s = sum_k x_k so
// they are defined for any d.
//   affine-sigmoid: params = (a_1, b_1, c_1, a_2, b_2, c_2, ...),
//                   f = sum_m a_m * sigmoid(b_m * s + c_m) - centering
//   trigonometric:  params = (a, omega, phase, offset), f = a*sin(omega*s + phase) + offset
//   constant:       params = (c)
struct TeacherSpec {
  TeacherKind kind = TeacherKind::AffineSigmoidMixture;
  std::vector<double> params;

  static TeacherSpec from_name(const std::string& name, std::vector<double> params);
  double eval(std::span<const double> x) const;
  std::string name() const;
};

// Finite sample approximating pi(dx,dy). Inputs are stored row-major, D x d.
class Dataset {
 public:
  Dataset(int d, std::vector<double> inputs, std::vector<double> targets, DomainBounds bounds);

  static Dataset generate(const TeacherSpec& teacher, int d, int num_samples,
                          const DomainBounds& bounds, std::uint64_t seed);

  int dim() const { return d_; }
  int size() const { return static_cast<int>(targets_.size()); }
  std::span<const double> input(int s) const { return {inputs_.data() + static_cast<std::size_t>(s) * d_, static_cast<std::size_t>(d_)}; }
  double target(int s) const { return targets_[s]; }
  std::span<const double> targets() const { return targets_; }
  const DomainBounds& bounds() const { return bounds_; }

  void to_csv(const std::string& path) const;
  static Dataset from_csv(const std::string& path, DomainBounds bounds = {});

 private:
  int d_;
  std::vector<double> inputs_;   // D * d
  std::vector<double> targets_;  // D
  DomainBounds bounds_;
};

// (1/2) * mean over samples of (y - prediction)^2.
double expected_loss(std::span<const double> predictions, const Dataset& dataset);

// Fixed evaluation grid of `size` inputs drawn uniformly on the input box,
// row-major size x d.
std::vector<double> draw_test_grid(int size, int d, const DomainBounds& bounds, std::uint64_t seed);

}  // namespace mfnn
