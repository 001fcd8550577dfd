#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mfnn/activation.hpp"
#include "mfnn/data.hpp"
#include "mfnn/finite_net.hpp"

namespace mfnn {

// Particle discretization of the limiting random-ODE systems. Every
// mu-integral becomes an average over i.i.d. pool draws; the pool entries are
// keyed by their index through a counter-based generator, so pools of
// different sizes drawn from the same seed nest (the first M entries agree).

struct ParticlePools {
  int mc = 0, mw = 0, mu = 0, mv = 0, d = 0;
  std::vector<double> c;  // mc
  std::vector<double> w;  // mw x d
  // Two-layer: u has one draw per (c, w, u) triple, mc x mw x mu.
  // Three-layer: one draw per (v, w, u) triple, mv x mw x mu, plus v (mv).
  std::vector<double> u;
  std::vector<double> v;  // mv (three-layer only)

  static ParticlePools draw_two_layer(const InitDistribution& dist, int mc, int mw, int mu, int d,
                                      std::uint64_t seed);
  static ParticlePools draw_three_layer(const InitDistribution& dist, int mc, int mv, int mw, int mu,
                                        int d, std::uint64_t seed);
};

// Two-layer limit state: representative paths C~, W1~, W2~ at one time.
struct LimitState {
  double t = 0.0;
  int mc = 0, mw = 0, mu = 0, d = 0;
  std::vector<double> C;   // mc
  std::vector<double> W1;  // mw x d
  std::vector<double> W2;  // mc x mw x mu

  double& w2(int i, int j, int k) { return W2[(static_cast<std::size_t>(i) * mw + j) * mu + k]; }
  double w2(int i, int j, int k) const { return W2[(static_cast<std::size_t>(i) * mw + j) * mu + k]; }

  static LimitState from_pools(const ParticlePools& pools);
};

struct LimitFields {
  std::vector<double> H1;  // mw
  std::vector<double> Z;   // mc
  std::vector<double> H2;  // mc
  std::vector<double> V;   // mw
  double g = 0.0;
};

LimitFields compute_fields(const LimitState& state, const Activation& a, std::span<const double> x);

// Drifts; dW2 is stored per (c, w) pair since the integrand does not depend
// on the u index.
struct LimitRhs {
  std::vector<double> dC;   // mc
  std::vector<double> dW1;  // mw x d
  std::vector<double> dW2;  // mc x mw
};

LimitRhs limit_rhs(const LimitState& state, const Dataset& dataset, const Activation& a);

enum class Scheme { Euler, Heun };

struct LimitSnapshot {
  double t = 0.0;
  double lbar = 0.0;           // limit loss over the dataset
  std::vector<double> g_grid;  // g_t on the test grid
  double c_sup = 0.0, w1_sup = 0.0, w2_sup = 0.0, g_sup = 0.0;
  std::optional<LimitState> state;
};

struct LimitTrajectory {
  std::vector<LimitSnapshot> snapshots;
};

struct IntegrateOptions {
  double dt = 1.0 / 200.0;
  double horizon = 1.0;
  Scheme scheme = Scheme::Euler;
  std::vector<double> snapshot_times;  // 0 and T always included; empty + snapshot_every_step=false -> endpoints only
  bool snapshot_every_step = false;
  bool record_states = false;
};

// Explicit time stepping of limit_rhs. Deterministic given the pools.
// Throws std::runtime_error if the state becomes non-finite.
LimitTrajectory integrate_limit(const ParticlePools& pools, const Dataset& dataset, const Activation& a,
                                const IntegrateOptions& opts, std::span<const double> test_grid);

// The finite-N2 intermediate system: identical dynamics with the c pool
// fixed to the given draws. The returned g plays the role of g^{N2}.
LimitTrajectory intermediate_system(std::span<const double> c_draws, const ParticlePools& shared_wu,
                                    const Dataset& dataset, const Activation& a,
                                    const IntegrateOptions& opts, std::span<const double> test_grid);

// ---- three-layer system ----

struct LimitState3 {
  double t = 0.0;
  int mc = 0, mv = 0, mw = 0, mu = 0, d = 0;
  std::vector<double> C;   // mc
  std::vector<double> W1;  // mw x d
  std::vector<double> W2;  // mv x mw x mu
  std::vector<double> W3;  // mc x mv

  double& w2(int v, int j, int k) { return W2[(static_cast<std::size_t>(v) * mw + j) * mu + k]; }
  double w2(int v, int j, int k) const { return W2[(static_cast<std::size_t>(v) * mw + j) * mu + k]; }
  double& w3(int i, int v) { return W3[static_cast<std::size_t>(i) * mv + v]; }
  double w3(int i, int v) const { return W3[static_cast<std::size_t>(i) * mv + v]; }

  static LimitState3 from_pools(const ParticlePools& pools);
};

struct LimitFields3 {
  std::vector<double> H1;  // mw
  std::vector<double> Z2;  // mv
  std::vector<double> H2;  // mv
  std::vector<double> Z3;  // mc
  std::vector<double> H3;  // mc
  std::vector<double> V;   // mw
  std::vector<double> L;   // mv
  double g = 0.0;
};

LimitFields3 compute_fields_three_layer(const LimitState3& state, const Activation& a,
                                        std::span<const double> x);

struct LimitRhs3 {
  std::vector<double> dC;   // mc
  std::vector<double> dW1;  // mw x d
  std::vector<double> dW2;  // mv x mw (u-independent)
  std::vector<double> dW3;  // mc x mv
};

LimitRhs3 limit_rhs_three_layer(const LimitState3& state, const Dataset& dataset, const Activation& a);

struct LimitSnapshot3 {
  double t = 0.0;
  double lbar = 0.0;
  std::vector<double> g_grid;
  std::optional<LimitState3> state;
};

struct LimitTrajectory3 {
  std::vector<LimitSnapshot3> snapshots;
};

LimitTrajectory3 integrate_limit_three_layer(const ParticlePools& pools, const Dataset& dataset,
                                             const Activation& a, const IntegrateOptions& opts,
                                             std::span<const double> test_grid);

}  // namespace mfnn
