#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mfnn/activation.hpp"
#include "mfnn/data.hpp"

namespace mfnn {

// Mean-field-normalized networks. Two layers:
//   H1_j = sigma(W1_j . x)
//   Z2_i = (1/N1) sum_j W2_ij H1_j
//   H2_i = sigma(Z2_i)
//   g    = (1/N2) sum_i C_i H2_i
// Three layers add Z3/H3 with a 1/N2 normalization in the middle.

struct TwoLayerParams {
  int n1 = 0, n2 = 0, d = 0;
  std::vector<double> C;   // n2
  std::vector<double> W1;  // n1 x d, row j
  std::vector<double> W2;  // n2 x n1, entry (i,j) = W2[i*n1 + j]

  double& w1(int j, int k) { return W1[static_cast<std::size_t>(j) * d + k]; }
  double w1(int j, int k) const { return W1[static_cast<std::size_t>(j) * d + k]; }
  double& w2(int i, int j) { return W2[static_cast<std::size_t>(i) * n1 + j]; }
  double w2(int i, int j) const { return W2[static_cast<std::size_t>(i) * n1 + j]; }
};

struct ThreeLayerParams {
  int n1 = 0, n2 = 0, n3 = 0, d = 0;
  std::vector<double> C;   // n3
  std::vector<double> W1;  // n1 x d
  std::vector<double> W2;  // n2 x n1
  std::vector<double> W3;  // n3 x n2

  double& w1(int j, int k) { return W1[static_cast<std::size_t>(j) * d + k]; }
  double w1(int j, int k) const { return W1[static_cast<std::size_t>(j) * d + k]; }
  double& w2(int j, int v) { return W2[static_cast<std::size_t>(j) * n1 + v]; }
  double w2(int j, int v) const { return W2[static_cast<std::size_t>(j) * n1 + v]; }
  double& w3(int i, int j) { return W3[static_cast<std::size_t>(i) * n2 + j]; }
  double w3(int i, int j) const { return W3[static_cast<std::size_t>(i) * n2 + j]; }
};

struct ForwardCache {
  std::vector<double> H1;  // n1
  std::vector<double> Z2;  // n2
  std::vector<double> H2;  // n2
  std::vector<double> Z3;  // n3 (three-layer only)
  std::vector<double> H3;  // n3 (three-layer only)
  double g = 0.0;
};

enum class ScheduleMode { Scaled, Constant };

struct LearningRateSchedule {
  ScheduleMode mode = ScheduleMode::Scaled;
  int depth = 2;       // 2 or 3
  double base = 1.0;   // the single constant alpha in Constant mode
};

struct Widths {
  int n1 = 1, n2 = 1, n3 = 1;
};

// Per-group alpha values. alpha_w3 is meaningful only at depth 3.
struct GroupRates {
  double alpha_c = 0.0, alpha_w1 = 0.0, alpha_w2 = 0.0, alpha_w3 = 0.0;
};

GroupRates learning_rates(const LearningRateSchedule& sched, const Widths& widths);

// Mean-field learning rates for a depth-L ladder (alpha_C, alpha_{W,1..L}).
std::vector<double> learning_rates_l_layer(std::span<const int> widths);

struct InitDistribution {
  double c_lo = -1.0, c_hi = 1.0;
  double w1_lo = -1.0, w1_hi = 1.0;
  double w2_lo = -1.0, w2_hi = 1.0;
  double w3_lo = -1.0, w3_hi = 1.0;
};

TwoLayerParams init_two_layer(const InitDistribution& dist, int n1, int n2, int d, std::uint64_t seed);
ThreeLayerParams init_three_layer(const InitDistribution& dist, int n1, int n2, int n3, int d, std::uint64_t seed);

// identity_outer replaces the outer activation H2 = sigma(Z2) by H2 = Z2;
// used only to realize the single-layer reduction.
ForwardCache forward_two_layer(const TwoLayerParams& p, const Activation& a, std::span<const double> x,
                               bool identity_outer = false);
ForwardCache forward_three_layer(const ThreeLayerParams& p, const Activation& a, std::span<const double> x);

// One-sample SGD step; each parameter group moves by -alpha_group times the
// per-sample gradient of (1/2)(y - g)^2.
void sgd_step_two_layer(TwoLayerParams& p, std::span<const double> x, double y, const Activation& a,
                        const GroupRates& rates, bool identity_outer = false);
void sgd_step_three_layer(ThreeLayerParams& p, std::span<const double> x, double y, const Activation& a,
                          const GroupRates& rates);

struct FiniteSnapshot {
  double t = 0.0;
  long step = 0;
  double loss = 0.0;                // empirical loss over the full dataset
  std::vector<double> g_grid;       // network output on the test grid
  double c_sup = 0.0, w1_sup = 0.0, w2_sup = 0.0, w3_sup = 0.0;  // sup norms per group
  std::optional<TwoLayerParams> params2;
  std::optional<ThreeLayerParams> params3;
};

struct FiniteTrajectory {
  std::vector<FiniteSnapshot> snapshots;
};

struct TrainOptions {
  double horizon = 1.0;                 // limit time T; runs floor(N1*T) steps
  std::vector<double> snapshot_times;   // subset of [0, T]; 0 and T are always included
  std::uint64_t seed = 0;
  bool identity_outer = false;
  bool record_params = false;
};

// Runs k = 0 .. floor(N1*T)-1 one-sample SGD steps with samples drawn
// uniformly from the dataset; snapshot at t means after floor(N1*t) steps.
// Throws std::runtime_error if any parameter becomes non-finite.
FiniteTrajectory train_two_layer(TwoLayerParams p0, const Dataset& dataset, const Activation& a,
                                 const GroupRates& rates, const TrainOptions& opts,
                                 std::span<const double> test_grid);
FiniteTrajectory train_three_layer(ThreeLayerParams p0, const Dataset& dataset, const Activation& a,
                                   const GroupRates& rates, const TrainOptions& opts,
                                   std::span<const double> test_grid);

// Finite Gronwall-style a-priori bound on |C| + ||W1|| + |W2| along a scaled
// run of horizon T, computed from the initialization boxes, the activation
// bounds, and the data bounds.
double a_priori_bound(const InitDistribution& dist, const Activation& a, const DomainBounds& bounds,
                      int d, double T);

}  // namespace mfnn
