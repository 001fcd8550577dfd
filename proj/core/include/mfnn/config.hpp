#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfnn/data.hpp"
#include "mfnn/finite_net.hpp"
#include "mfnn/limit_ode.hpp"

namespace mfnn {

// Experiment configuration. Plain key = value text; '#' starts a comment.
// Every field has the default shown here; unknown keys are rejected.
struct ExperimentConfig {
  // task
  std::string teacher = "affine-sigmoid";
  std::vector<double> teacher_params = {1.2, 2.0, 0.5};
  int d = 1;
  int samples = 64;
  double x_lo = -1.0, x_hi = 1.0;
  double y_lo = -2.0, y_hi = 2.0;

  // model
  std::string activation = "sigmoid";
  int depth = 2;
  int n1 = 64, n2 = 64, n3 = 16;
  std::vector<int> ladder = {64, 128, 256};  // ablation uses n1 = n2 = each entry
  std::string schedule = "scaled";
  double constant_alpha = 1.0;
  double c_lo = -1.0, c_hi = 1.0;
  double w1_lo = -1.0, w1_hi = 1.0;
  double w2_lo = -1.0, w2_hi = 1.0;
  double w3_lo = -1.0, w3_hi = 1.0;

  // particle discretization
  int mc = 256, mw = 256, mu = 4, mv = 16;
  int mc_ref = 1024;
  std::vector<int> n2_grid = {8, 16, 32, 64, 128};

  // integration / training
  double dt = 1.0 / 200.0;
  std::string scheme = "euler";
  double horizon = 0.5;
  double max_horizon = 100.0;
  std::vector<double> snapshot_times;
  double ablation_horizon = 4.0;

  // evaluation
  int grid_size = 64;
  int seeds = 8;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string output_dir = "artifacts";

  // -- derived views --------------------------------------------------------
  TeacherSpec teacher_spec() const;
  DomainBounds domain_bounds() const;
  InitDistribution init_distribution() const;
  Scheme scheme_enum() const;
  ScheduleMode schedule_mode() const;

  // Canonical text form: every key in schema order, one per line. Parsing the
  // result reproduces this config exactly.
  std::string canonical() const;
  // FNV-1a over the canonical text, as 16 hex digits.
  std::string hash() const;

  // Throws std::invalid_argument naming the offending key on unknown keys,
  // unparsable values, or invariant violations.
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::string& path);

  void validate() const;
};

}  // namespace mfnn
