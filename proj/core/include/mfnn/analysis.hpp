#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mfnn/activation.hpp"
#include "mfnn/data.hpp"
#include "mfnn/finite_net.hpp"
#include "mfnn/limit_ode.hpp"

namespace mfnn {

// ---- error functional between the intermediate (finite-N2) and limit systems ----

struct ErrorComponents {
  double dc2 = 0.0;    // mean (C^N2 - C~)^2 over shared c particles
  double dw12 = 0.0;   // mean ||W1 - W1~||^2 over w particles
  double dw22 = 0.0;   // mean (W2 - W2~)^2 over (c,w,u) triples
  double dh22 = 0.0;   // max over grid of mean (H2 - H2~)^2
  double dz2 = 0.0;    // max over grid of mean (Z - Z~)^2
  double total = 0.0;  // max over grid of the mean per-triple sum
  double g_gap = 0.0;  // max over grid of |g^N2 - g|
};

struct ErrorReport {
  std::vector<double> times;
  std::vector<ErrorComponents> components;
  int seed_count = 1;
};

// Both trajectories must carry recorded states, share snapshot times, w/u
// pools, and spatial layout; the limit c pool must contain the intermediate
// c pool as its prefix (nested pools).
ErrorReport error_functional(const LimitTrajectory& intermediate, const LimitTrajectory& limit,
                             const Activation& a, std::span<const double> test_grid);

// ---- width-rate study ----

struct RateFit {
  std::vector<int> widths;
  std::vector<double> errors;  // sup-grid mean-over-seeds |g^N2_T - g_T|
  double slope = 0.0;
  double intercept = 0.0;
  double slope_halfwidth = 0.0;  // ~2 standard errors
};

// Least-squares log-log fit; cells with error == 0 are excluded. Needs at
// least 3 usable points.
RateFit fit_loglog(std::span<const int> widths, std::span<const double> errors);

struct RateStudyOptions {
  std::vector<int> n2_grid = {8, 16, 32, 64, 128};
  int mc_ref = 1024;
  int mw = 256;
  int mu = 4;
  int seeds = 8;
  double dt = 1.0 / 200.0;
  double horizon = 0.5;
  Scheme scheme = Scheme::Euler;
  std::uint64_t seed = 1;
  int workers = 1;
};

RateFit rate_study(const Dataset& dataset, const Activation& a, const InitDistribution& dist,
                   std::span<const double> test_grid, const RateStudyOptions& opts);

// ---- stationarity residuals and the Lyapunov identity ----

struct ResidualReport {
  std::vector<double> R1;  // mc
  std::vector<double> R2;  // mw x d
  std::vector<double> R3;  // mc x mw
  double S = 0.0;          // mean R1^2 + mean ||R2||^2 + mean R3^2
};

ResidualReport stationarity_residuals(const LimitState& state, const Dataset& dataset, const Activation& a);

struct LyapunovSeries {
  std::vector<double> t;
  std::vector<double> lbar;
  std::vector<double> dlbar_dt;  // central differences (one-sided at the ends)
  std::vector<double> neg_s;     // -S(t)
};

// Requires recorded states and uniform snapshot spacing.
LyapunovSeries lyapunov_check(const LimitTrajectory& traj, const Dataset& dataset, const Activation& a);

// ---- scaled-vs-constant learning-rate ablation ----

struct AblationRow {
  int n1 = 0, n2 = 0;
  std::string mode;  // "scaled" or "constant"
  double loss0 = 0.0, loss_final = 0.0;
  double reduction = 0.0;  // (L0 - LT)/L0
  double disp_c = 0.0, disp_w1 = 0.0, disp_w2 = 0.0;  // mean |theta_T - theta_0| per group
};

struct AblationResult {
  std::vector<AblationRow> rows;
};

struct AblationOptions {
  std::vector<Widths> ladder = {{64, 64, 1}, {128, 128, 1}, {256, 256, 1}};
  double horizon = 4.0;
  double constant_alpha = 1.0;
  std::uint64_t seed = 1;
  int workers = 1;
};

AblationResult ablation_study(const Dataset& dataset, const Activation& a, const InitDistribution& dist,
                              std::span<const double> test_grid, const AblationOptions& opts);

// ---- empirical-measure moment diagnostics ----

struct MomentTable {
  std::vector<std::string> names;
  std::vector<double> finite_side;    // <f, gamma^{N1,N2}_t>
  std::vector<double> particle_side;  // matching particle-ensemble average
};

// Test functions are bounded polynomials (degree <= 2) in (w1 coordinates,
// w2_{i.}, c_i) composed with the activation, for the fixed output index i.
MomentTable measure_moments(const TwoLayerParams& params, const LimitState& state, const Activation& a,
                            std::span<const double> probe_x, int fixed_i = 0);

// ---- coupling / uniqueness diagnostic ----

struct CouplingSeries {
  std::vector<double> t;
  std::vector<double> q;
};

// Q_t between two limit trajectories on shared pools: sup over particles and
// the test grid of the summed squared differences of (W2, W1, V, Z, C, g).
CouplingSeries coupling_distance(const LimitTrajectory& traj_a, const LimitTrajectory& traj_b,
                                 const Activation& a, std::span<const double> test_grid);

}  // namespace mfnn
