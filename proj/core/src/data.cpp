#include "mfnn/data.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mfnn/rng.hpp"

namespace mfnn {

namespace {
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}
}  // namespace

TeacherSpec TeacherSpec::from_name(const std::string& name, std::vector<double> params) {
  TeacherSpec t;
  t.params = std::move(params);
  if (name == "affine-sigmoid") {
    t.kind = TeacherKind::AffineSigmoidMixture;
    if (t.params.empty() || t.params.size() % 3 != 0)
      throw std::invalid_argument("teacher: affine-sigmoid needs 3k parameters (a,b,c triples)");
  } else if (name == "trigonometric") {
    t.kind = TeacherKind::Trigonometric;
    if (t.params.size() != 4)
      throw std::invalid_argument("teacher: trigonometric needs 4 parameters (a,omega,phase,offset)");
  } else if (name == "constant") {
    t.kind = TeacherKind::Constant;
    if (t.params.size() != 1) throw std::invalid_argument("teacher: constant needs 1 parameter");
  } else {
    throw std::invalid_argument("unknown teacher kind: " + name);
  }
  return t;
}

std::string TeacherSpec::name() const {
  switch (kind) {
    case TeacherKind::AffineSigmoidMixture: return "affine-sigmoid";
    case TeacherKind::Trigonometric: return "trigonometric";
    case TeacherKind::Constant: return "constant";
  }
  return "?";
}

double TeacherSpec::eval(std::span<const double> x) const {
  double s = 0.0;
  for (double xi : x) s += xi;
  switch (kind) {
    case TeacherKind::AffineSigmoidMixture: {
      // Each sigmoid term is centered so the mixture is zero at b*s + c = 0
      // being irrelevant; we subtract a_m/2 so a symmetric input box gives a
      // roughly zero-mean target.
      double y = 0.0;
      for (std::size_t m = 0; m + 3 <= params.size(); m += 3)
        y += params[m] * (sigmoid(params[m + 1] * s + params[m + 2]) - 0.5);
      return y;
    }
    case TeacherKind::Trigonometric:
      return params[0] * std::sin(params[1] * s + params[2]) + params[3];
    case TeacherKind::Constant: return params[0];
  }
  return 0.0;
}

Dataset::Dataset(int d, std::vector<double> inputs, std::vector<double> targets, DomainBounds bounds)
    : d_(d), inputs_(std::move(inputs)), targets_(std::move(targets)), bounds_(bounds) {
  if (d_ < 1) throw std::invalid_argument("dataset: d must be >= 1");
  if (targets_.empty()) throw std::invalid_argument("dataset: empty sample");
  if (inputs_.size() != targets_.size() * static_cast<std::size_t>(d_))
    throw std::invalid_argument("dataset: inputs/targets length mismatch");
}

Dataset Dataset::generate(const TeacherSpec& teacher, int d, int num_samples,
                          const DomainBounds& bounds, std::uint64_t seed) {
  if (num_samples < 1) throw std::invalid_argument("dataset: num_samples must be >= 1");
  if (d < 1) throw std::invalid_argument("dataset: d must be >= 1");
  if (!(bounds.x_lo < bounds.x_hi) || !std::isfinite(bounds.x_lo) || !std::isfinite(bounds.x_hi))
    throw std::invalid_argument("dataset: empty or non-finite input domain");

  std::vector<double> inputs(static_cast<std::size_t>(num_samples) * d);
  std::vector<double> targets(num_samples);
  Rng rng(Rng::derive(seed, {stream::kData}));
  for (int s = 0; s < num_samples; ++s) {
    for (int k = 0; k < d; ++k)
      inputs[static_cast<std::size_t>(s) * d + k] = rng.uniform(bounds.x_lo, bounds.x_hi);
    targets[s] = teacher.eval({inputs.data() + static_cast<std::size_t>(s) * d, static_cast<std::size_t>(d)});
    if (targets[s] < bounds.y_lo || targets[s] > bounds.y_hi)
      throw std::invalid_argument("dataset: teacher output escapes [y_lo, y_hi]");
  }
  return Dataset(d, std::move(inputs), std::move(targets), bounds);
}

void Dataset::to_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (int k = 1; k <= d_; ++k) out << "x" << k << ",";
  out << "y\n";
  out.precision(17);
  for (int s = 0; s < size(); ++s) {
    for (int k = 0; k < d_; ++k) out << inputs_[static_cast<std::size_t>(s) * d_ + k] << ",";
    out << targets_[s] << "\n";
  }
}

Dataset Dataset::from_csv(const std::string& path, DomainBounds bounds) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty csv: " + path);
  int cols = 1;
  for (char c : line)
    if (c == ',') ++cols;
  const int d = cols - 1;
  std::vector<double> inputs, targets;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    for (int k = 0; k < d; ++k) {
      if (!std::getline(row, cell, ',')) throw std::runtime_error("short row in " + path);
      inputs.push_back(std::stod(cell));
    }
    if (!std::getline(row, cell, ',')) throw std::runtime_error("short row in " + path);
    targets.push_back(std::stod(cell));
  }
  return Dataset(d, std::move(inputs), std::move(targets), bounds);
}

double expected_loss(std::span<const double> predictions, const Dataset& dataset) {
  if (static_cast<int>(predictions.size()) != dataset.size())
    throw std::invalid_argument("expected_loss: prediction count != sample count");
  double acc = 0.0;
  for (int s = 0; s < dataset.size(); ++s) {
    const double r = dataset.target(s) - predictions[s];
    acc += r * r;
  }
  return 0.5 * acc / dataset.size();
}

std::vector<double> draw_test_grid(int size, int d, const DomainBounds& bounds, std::uint64_t seed) {
  std::vector<double> grid(static_cast<std::size_t>(size) * d);
  Rng rng(Rng::derive(seed, {stream::kGrid}));
  for (double& g : grid) g = rng.uniform(bounds.x_lo, bounds.x_hi);
  return grid;
}

}  // namespace mfnn
