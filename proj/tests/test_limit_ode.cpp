#include "doctest.h"

#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mfnn/limit_ode.hpp"
#include "mfnn/rng.hpp"

using namespace mfnn;

namespace {

const InitDistribution kBox{-1, 1, -1, 1, -1, 1, -1, 1};

// Naive triple-loop evaluation of the output field, independent of the
// library's cached-mean formulation.
double naive_g(const LimitState& st, const Activation& a, std::span<const double> x) {
  double g = 0.0;
  for (int i = 0; i < st.mc; ++i) {
    double z = 0.0;
    for (int j = 0; j < st.mw; ++j) {
      double w1x = 0.0;
      for (int k = 0; k < st.d; ++k) w1x += st.W1[static_cast<std::size_t>(j) * st.d + k] * x[k];
      for (int k = 0; k < st.mu; ++k) z += st.w2(i, j, k) * a.eval(w1x);
    }
    g += st.C[i] * a.eval(z / (static_cast<double>(st.mw) * st.mu));
  }
  return g / st.mc;
}

Dataset consistent_dataset(const LimitState& st, const Activation& a, int n, std::uint64_t seed) {
  // Targets equal the initial field values: a zero-residual dataset.
  const std::vector<double> xs = draw_test_grid(n, st.d, {}, seed);
  std::vector<double> ys(n);
  for (int s = 0; s < n; ++s)
    ys[s] = compute_fields(st, a, std::span<const double>(xs).subspan(static_cast<std::size_t>(s) * st.d, st.d)).g;
  return Dataset(st.d, xs, ys, {});
}

}  // namespace

TEST_CASE("pool draws nest across sizes") {
  const ParticlePools big = ParticlePools::draw_two_layer(kBox, 16, 8, 3, 2, 42);
  const ParticlePools small = ParticlePools::draw_two_layer(kBox, 4, 8, 3, 2, 42);
  for (int i = 0; i < 4; ++i) CHECK(small.c[i] == big.c[i]);
  CHECK(small.w == big.w);
  for (std::size_t k = 0; k < small.u.size(); ++k) CHECK(small.u[k] == big.u[k]);
  for (double v : big.c) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("fields: zero middle weights") {
  const Activation sig = Activation::sigmoid();
  ParticlePools pools = ParticlePools::draw_two_layer(kBox, 5, 4, 2, 2, 1);
  std::fill(pools.u.begin(), pools.u.end(), 0.0);
  const LimitState st = LimitState::from_pools(pools);
  const LimitFields f = compute_fields(st, sig, std::vector<double>{0.2, -0.4});
  double cmean = 0.0;
  for (double c : st.C) cmean += c;
  cmean /= st.mc;
  for (double z : f.Z) CHECK(z == 0.0);
  CHECK(f.g == doctest::Approx(0.5 * cmean).epsilon(1e-15));
}

TEST_CASE("fields: scalar pools against the closed form") {
  const Activation sig = Activation::sigmoid();
  LimitState st;
  st.mc = st.mw = st.mu = 1;
  st.d = 1;
  st.C = {0.8};
  st.W1 = {-0.3};
  st.W2 = {0.6};
  const double x = 0.9;
  const LimitFields f = compute_fields(st, sig, std::span<const double>(&x, 1));
  const double h1 = sig.eval(-0.3 * 0.9);
  const double z = 0.6 * h1;
  CHECK(f.H1[0] == doctest::Approx(h1).epsilon(1e-15));
  CHECK(f.Z[0] == doctest::Approx(z).epsilon(1e-15));
  CHECK(f.g == doctest::Approx(0.8 * sig.eval(z)).epsilon(1e-15));
  CHECK(f.V[0] == doctest::Approx(0.8 * sig.deriv(z) * 0.6).epsilon(1e-15));
}

TEST_CASE("fields: random states against the naive loop") {
  const Activation sig = Activation::sigmoid();
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const ParticlePools pools = ParticlePools::draw_two_layer(kBox, 4, 3, 2, 2, seed);
    const LimitState st = LimitState::from_pools(pools);
    Rng r(seed);
    const std::vector<double> x{r.uniform(-1, 1), r.uniform(-1, 1)};
    CHECK(compute_fields(st, sig, x).g == doctest::Approx(naive_g(st, sig, x)).epsilon(1e-12));
  }
}

TEST_CASE("rhs: zero residual gives zero drift") {
  const Activation sig = Activation::sigmoid();
  const LimitState st = LimitState::from_pools(ParticlePools::draw_two_layer(kBox, 4, 3, 2, 1, 7));
  const Dataset ds = consistent_dataset(st, sig, 12, 7);
  const LimitRhs rhs = limit_rhs(st, ds, sig);
  for (double v : rhs.dC) CHECK(v == 0.0);
  for (double v : rhs.dW1) CHECK(v == 0.0);
  for (double v : rhs.dW2) CHECK(v == 0.0);
}

TEST_CASE("rhs: scalar pools, one sample, closed form") {
  const Activation sig = Activation::sigmoid();
  LimitState st;
  st.mc = st.mw = st.mu = 1;
  st.d = 1;
  st.C = {0.5};
  st.W1 = {0.4};
  st.W2 = {-0.7};
  const double x = 0.6, y = 0.3;
  const Dataset ds(1, {x}, {y}, {});
  const LimitRhs rhs = limit_rhs(st, ds, sig);
  const double h1 = sig.eval(0.4 * x);
  const double z = -0.7 * h1;
  const double g = 0.5 * sig.eval(z);
  const double r = y - g;
  const double v = 0.5 * sig.deriv(z) * (-0.7);
  CHECK(rhs.dC[0] == doctest::Approx(r * sig.eval(z)).epsilon(1e-12));
  CHECK(rhs.dW1[0] == doctest::Approx(r * v * sig.deriv(0.4 * x) * x).epsilon(1e-12));
  CHECK(rhs.dW2[0] == doctest::Approx(r * 0.5 * sig.deriv(z) * h1).epsilon(1e-12));
}

TEST_CASE("integration basics") {
  const Activation sig = Activation::sigmoid();
  const ParticlePools pools = ParticlePools::draw_two_layer(kBox, 6, 4, 2, 1, 3);
  const LimitState st0 = LimitState::from_pools(pools);
  const std::vector<double> grid = draw_test_grid(8, 1, {}, 3);

  SUBCASE("zero horizon keeps only the initial state") {
    IntegrateOptions o;
    o.horizon = 0.0;
    const Dataset ds = consistent_dataset(st0, sig, 8, 3);
    const LimitTrajectory traj = integrate_limit(pools, ds, sig, o, grid);
    REQUIRE(traj.snapshots.size() == 1);
    CHECK(traj.snapshots[0].t == 0.0);
  }
  SUBCASE("zero-residual dataset is stationary") {
    IntegrateOptions o;
    o.horizon = 0.5;
    o.record_states = true;
    const Dataset ds = consistent_dataset(st0, sig, 8, 3);
    const LimitTrajectory traj = integrate_limit(pools, ds, sig, o, grid);
    const LimitState& last = *traj.snapshots.back().state;
    CHECK(last.C == st0.C);
    CHECK(last.W1 == st0.W1);
    CHECK(last.W2 == st0.W2);
  }
}

TEST_CASE("observed integrator order matches the scheme") {
  const Activation sig = Activation::sigmoid();
  const ParticlePools pools = ParticlePools::draw_two_layer(kBox, 8, 8, 2, 1, 11);
  const TeacherSpec teacher = TeacherSpec::from_name("affine-sigmoid", {1.2, 2.0, 0.5});
  const Dataset ds = Dataset::generate(teacher, 1, 32, {}, 11);
  const std::vector<double> grid = draw_test_grid(16, 1, {}, 11);

  auto final_g = [&](Scheme scheme, double dt) {
    IntegrateOptions o;
    o.dt = dt;
    o.horizon = 1.0;
    o.scheme = scheme;
    return integrate_limit(pools, ds, sig, o, grid).snapshots.back().g_grid;
  };
  auto max_diff = [](const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
  };
  for (auto [scheme, nominal] : {std::pair{Scheme::Euler, 1.0}, std::pair{Scheme::Heun, 2.0}}) {
    const auto g1 = final_g(scheme, 1.0 / 25.0);
    const auto g2 = final_g(scheme, 1.0 / 50.0);
    const auto g4 = final_g(scheme, 1.0 / 100.0);
    const double order = std::log2(max_diff(g1, g2) / max_diff(g2, g4));
    CHECK(order == doctest::Approx(nominal).epsilon(0.3 / nominal));
  }
}

TEST_CASE("intermediate system") {
  const Activation sig = Activation::sigmoid();
  const ParticlePools pools = ParticlePools::draw_two_layer(kBox, 8, 6, 2, 1, 5);
  const TeacherSpec teacher = TeacherSpec::from_name("affine-sigmoid", {1.2, 2.0, 0.5});
  const Dataset ds = Dataset::generate(teacher, 1, 16, {}, 5);
  const std::vector<double> grid = draw_test_grid(8, 1, {}, 5);
  IntegrateOptions o;
  o.horizon = 0.25;
  o.dt = 1.0 / 50.0;

  SUBCASE("full c pool reproduces the limit integration") {
    const LimitTrajectory a = integrate_limit(pools, ds, sig, o, grid);
    const LimitTrajectory b = intermediate_system(pools.c, pools, ds, sig, o, grid);
    CHECK(a.snapshots.back().g_grid == b.snapshots.back().g_grid);
  }
  SUBCASE("single c draw equals the direct one-c integration") {
    const ParticlePools one = ParticlePools::draw_two_layer(kBox, 1, 6, 2, 1, 5);
    const LimitTrajectory a = intermediate_system(std::span<const double>(pools.c.data(), 1), pools, ds, sig, o, grid);
    const LimitTrajectory b = integrate_limit(one, ds, sig, o, grid);
    for (std::size_t i = 0; i < a.snapshots.back().g_grid.size(); ++i)
      CHECK(a.snapshots.back().g_grid[i] ==
            doctest::Approx(b.snapshots.back().g_grid[i]).epsilon(1e-12));
  }
  SUBCASE("w/u refinement moves g by less than the Monte Carlo band") {
    // Band: 3 x (std over pool seeds at the coarse resolution).
    auto g0 = [&](int mw, std::uint64_t seed) {
      const ParticlePools p = ParticlePools::draw_two_layer(kBox, 8, mw, 4, 1, seed);
      return integrate_limit(p, ds, sig, o, grid).snapshots.back().g_grid[0];
    };
    std::vector<double> samples;
    for (std::uint64_t s = 20; s < 28; ++s) samples.push_back(g0(64, s));
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
    double var = 0.0;
    for (double v : samples) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / (samples.size() - 1));
    CHECK(std::abs(g0(256, 20) - g0(64, 20)) <= 3.0 * sd);
  }
}

TEST_CASE("exchangeability under c-pool permutation") {
  const Activation sig = Activation::sigmoid();
  const ParticlePools pools = ParticlePools::draw_two_layer(kBox, 5, 4, 2, 1, 13);
  const TeacherSpec teacher = TeacherSpec::from_name("affine-sigmoid", {1.2, 2.0, 0.5});
  const Dataset ds = Dataset::generate(teacher, 1, 16, {}, 13);
  const std::vector<double> grid = draw_test_grid(8, 1, {}, 13);

  ParticlePools perm = pools;
  const std::vector<int> sigma{3, 0, 4, 1, 2};
  for (int i = 0; i < 5; ++i) {
    perm.c[i] = pools.c[sigma[i]];
    for (int j = 0; j < pools.mw; ++j)
      for (int k = 0; k < pools.mu; ++k)
        perm.u[(static_cast<std::size_t>(i) * pools.mw + j) * pools.mu + k] =
            pools.u[(static_cast<std::size_t>(sigma[i]) * pools.mw + j) * pools.mu + k];
  }
  IntegrateOptions o;
  o.horizon = 0.25;
  o.dt = 1.0 / 50.0;
  o.record_states = true;
  const LimitTrajectory a = integrate_limit(pools, ds, sig, o, grid);
  const LimitTrajectory b = integrate_limit(perm, ds, sig, o, grid);
  for (std::size_t gi = 0; gi < a.snapshots.back().g_grid.size(); ++gi)
    CHECK(a.snapshots.back().g_grid[gi] ==
          doctest::Approx(b.snapshots.back().g_grid[gi]).epsilon(1e-12));
  const LimitState& sa = *a.snapshots.back().state;
  const LimitState& sb = *b.snapshots.back().state;
  for (int i = 0; i < 5; ++i) CHECK(sb.C[i] == doctest::Approx(sa.C[sigma[i]]).epsilon(1e-12));
}

TEST_CASE("trajectories stay within the coarse a-priori envelope") {
  const Activation sig = Activation::sigmoid();
  const ParticlePools pools = ParticlePools::draw_two_layer(kBox, 8, 8, 2, 1, 2);
  const TeacherSpec teacher = TeacherSpec::from_name("affine-sigmoid", {1.2, 2.0, 0.5});
  const Dataset ds = Dataset::generate(teacher, 1, 32, {}, 2);
  const std::vector<double> grid = draw_test_grid(8, 1, {}, 2);
  IntegrateOptions o;
  o.horizon = 1.0;
  o.snapshot_times = {0.25, 0.5, 0.75};
  const LimitTrajectory traj = integrate_limit(pools, ds, sig, o, grid);
  const double bound = a_priori_bound(kBox, sig, {}, 1, 1.0);
  for (const LimitSnapshot& s : traj.snapshots) {
    CHECK(s.c_sup + s.w1_sup + s.w2_sup < bound);
    CHECK(std::isfinite(s.g_sup));
  }
}

TEST_CASE("three-layer system") {
  const Activation sig = Activation::sigmoid();
  SUBCASE("zero-residual dataset is stationary") {
    const ParticlePools pools = ParticlePools::draw_three_layer(kBox, 3, 3, 3, 2, 1, 19);
    const LimitState3 st = LimitState3::from_pools(pools);
    const std::vector<double> xs = draw_test_grid(10, 1, {}, 19);
    std::vector<double> ys(10);
    for (int s = 0; s < 10; ++s)
      ys[s] = compute_fields_three_layer(st, sig, std::span<const double>(&xs[s], 1)).g;
    const Dataset ds(1, xs, ys, {});
    IntegrateOptions o;
    o.horizon = 0.25;
    o.dt = 1.0 / 50.0;
    const LimitTrajectory3 traj = integrate_limit_three_layer(pools, ds, sig, o, xs);
    CHECK(traj.snapshots.back().g_grid == traj.snapshots.front().g_grid);
  }
  SUBCASE("all-zero pools: drift of the output particles in closed form") {
    ParticlePools pools = ParticlePools::draw_three_layer(kBox, 2, 2, 2, 2, 1, 23);
    std::fill(pools.c.begin(), pools.c.end(), 0.0);
    std::fill(pools.w.begin(), pools.w.end(), 0.0);
    std::fill(pools.u.begin(), pools.u.end(), 0.0);
    std::fill(pools.v.begin(), pools.v.end(), 0.0);
    const LimitState3 st = LimitState3::from_pools(pools);
    const Dataset ds(1, {0.3, -0.2}, {0.7, 0.1}, {});
    CHECK(compute_fields_three_layer(st, sig, std::vector<double>{0.3}).g == 0.0);
    const LimitRhs3 rhs = limit_rhs_three_layer(st, ds, sig);
    // g == 0, so dC = avg(y) * sigma(sigma-chain at zero weights) = avg(y) * sigma(0).
    const double expect = 0.5 * (0.7 + 0.1) * sig.eval(0.0);
    for (double v : rhs.dC) CHECK(v == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("random tiny instance against a naive loop") {
    const ParticlePools pools = ParticlePools::draw_three_layer(kBox, 3, 2, 2, 2, 2, 29);
    const LimitState3 st = LimitState3::from_pools(pools);
    const std::vector<double> x{0.4, -0.1};
    // Naive: average u over its index, then chain the three layers per particle.
    double g = 0.0;
    for (int i = 0; i < st.mc; ++i) {
      double z3 = 0.0;
      for (int v = 0; v < st.mv; ++v) {
        double z2 = 0.0;
        for (int j = 0; j < st.mw; ++j) {
          double w1x = 0.0;
          for (int k = 0; k < st.d; ++k) w1x += st.W1[static_cast<std::size_t>(j) * st.d + k] * x[k];
          double ubar = 0.0;
          for (int k = 0; k < st.mu; ++k) ubar += st.w2(v, j, k);
          z2 += (ubar / st.mu) * sig.eval(w1x);
        }
        z3 += st.w3(i, v) * sig.eval(z2 / st.mw);
      }
      g += st.C[i] * sig.eval(z3 / st.mv);
    }
    g /= st.mc;
    CHECK(compute_fields_three_layer(st, sig, x).g == doctest::Approx(g).epsilon(1e-12));
  }
}
