#include "doctest.h"

#include <stdexcept>

#include <cmath>
#include <vector>

#include "mfnn/analysis.hpp"
#include "mfnn/rng.hpp"

using namespace mfnn;

namespace {

const InitDistribution kBox{-1, 1, -1, 1, -1, 1, -1, 1};

struct Fixture {
  Activation sig = Activation::sigmoid();
  TeacherSpec teacher = TeacherSpec::from_name("affine-sigmoid", {1.2, 2.0, 0.5});
  Dataset ds = Dataset::generate(teacher, 1, 24, {}, 31);
  std::vector<double> grid = draw_test_grid(12, 1, {}, 31);
};

}  // namespace

TEST_CASE("error functional") {
  Fixture fx;
  const ParticlePools pools = ParticlePools::draw_two_layer(kBox, 6, 5, 2, 1, 31);
  IntegrateOptions o;
  o.horizon = 0.25;
  o.dt = 1.0 / 50.0;
  o.snapshot_times = {0.1};
  o.record_states = true;
  const LimitTrajectory limit = integrate_limit(pools, fx.ds, fx.sig, o, fx.grid);

  SUBCASE("identical trajectories give zero everywhere") {
    const LimitTrajectory same = intermediate_system(pools.c, pools, fx.ds, fx.sig, o, fx.grid);
    const ErrorReport rep = error_functional(same, limit, fx.sig, fx.grid);
    for (const ErrorComponents& e : rep.components) {
      CHECK(e.total == 0.0);
      CHECK(e.g_gap == 0.0);
    }
  }
  SUBCASE("parameter components vanish at t = 0") {
    const LimitTrajectory inter = intermediate_system(
        std::span<const double>(pools.c.data(), 3), pools, fx.ds, fx.sig, o, fx.grid);
    const ErrorReport rep = error_functional(inter, limit, fx.sig, fx.grid);
    CHECK(rep.components.front().dc2 == 0.0);
    CHECK(rep.components.front().dw12 == 0.0);
    CHECK(rep.components.front().dw22 == 0.0);
    CHECK(rep.components.back().total >= 0.0);
  }
  SUBCASE("matches an independent difference accumulator") {
    const int n2 = 3;
    const LimitTrajectory inter = intermediate_system(
        std::span<const double>(pools.c.data(), n2), pools, fx.ds, fx.sig, o, fx.grid);
    const ErrorReport rep = error_functional(inter, limit, fx.sig, fx.grid);
    const LimitState& si = *inter.snapshots.back().state;
    const LimitState& sl = *limit.snapshots.back().state;
    double dc2 = 0.0, dw22 = 0.0;
    for (int i = 0; i < n2; ++i) dc2 += std::pow(si.C[i] - sl.C[i], 2);
    for (int i = 0; i < n2; ++i)
      for (int j = 0; j < si.mw; ++j)
        for (int k = 0; k < si.mu; ++k) dw22 += std::pow(si.w2(i, j, k) - sl.w2(i, j, k), 2);
    CHECK(rep.components.back().dc2 == doctest::Approx(dc2 / n2).epsilon(1e-12));
    CHECK(rep.components.back().dw22 ==
          doctest::Approx(dw22 / (static_cast<double>(n2) * si.mw * si.mu)).epsilon(1e-12));
    double gmax = 0.0;
    for (std::size_t gi = 0; gi < fx.grid.size(); ++gi)
      gmax = std::max(gmax, std::abs(inter.snapshots.back().g_grid[gi] - limit.snapshots.back().g_grid[gi]));
    CHECK(rep.components.back().g_gap == doctest::Approx(gmax).epsilon(1e-12));
  }
  SUBCASE("pool mismatch is a contract error") {
    const ParticlePools other = ParticlePools::draw_two_layer(kBox, 6, 5, 2, 1, 32);
    const LimitTrajectory foreign = integrate_limit(other, fx.ds, fx.sig, o, fx.grid);
    CHECK_THROWS_AS(error_functional(foreign, limit, fx.sig, fx.grid), std::invalid_argument);
  }
}

TEST_CASE("log-log fit") {
  SUBCASE("recovers an exact inverse-square-root law") {
    const std::vector<int> widths{8, 16, 32, 64, 128};
    std::vector<double> errors;
    for (int w : widths) errors.push_back(3.7 / std::sqrt(static_cast<double>(w)));
    const RateFit fit = fit_loglog(widths, errors);
    CHECK(std::abs(fit.slope + 0.5) < 1e-10);
    CHECK(std::abs(fit.intercept - std::log(3.7)) < 1e-10);
    CHECK(fit.slope_halfwidth < 1e-10);
  }
  SUBCASE("zero-error cells are excluded") {
    const std::vector<int> widths{8, 16, 32, 64};
    const std::vector<double> errors{1.0 / std::sqrt(8.0), 1.0 / std::sqrt(16.0), 1.0 / std::sqrt(32.0), 0.0};
    const RateFit fit = fit_loglog(widths, errors);
    CHECK(std::abs(fit.slope + 0.5) < 1e-10);
  }
  SUBCASE("fewer than three usable points is an error") {
    const std::vector<int> widths{8, 16, 32};
    const std::vector<double> errors{0.5, 0.25, 0.0};
    CHECK_THROWS_AS(fit_loglog(widths, errors), std::runtime_error);
  }
}

TEST_CASE("stationarity residuals") {
  Fixture fx;
  const ParticlePools pools = ParticlePools::draw_two_layer(kBox, 4, 4, 2, 1, 41);
  const LimitState st = LimitState::from_pools(pools);

  SUBCASE("zero residual data gives zero residuals") {
    std::vector<double> xs = draw_test_grid(10, 1, {}, 41);
    std::vector<double> ys(10);
    for (int s = 0; s < 10; ++s) ys[s] = compute_fields(st, fx.sig, std::span<const double>(&xs[s], 1)).g;
    const ResidualReport rep = stationarity_residuals(st, Dataset(1, xs, ys, {}), fx.sig);
    CHECK(rep.S == 0.0);
    for (double v : rep.R1) CHECK(v == 0.0);
  }
  SUBCASE("residuals equal the limit drifts") {
    const ResidualReport rep = stationarity_residuals(st, fx.ds, fx.sig);
    const LimitRhs rhs = limit_rhs(st, fx.ds, fx.sig);
    for (int i = 0; i < st.mc; ++i) CHECK(std::abs(rep.R1[i] - rhs.dC[i]) < 1e-12);
    for (std::size_t j = 0; j < rep.R2.size(); ++j) CHECK(std::abs(rep.R2[j] - rhs.dW1[j]) < 1e-12);
    for (std::size_t ij = 0; ij < rep.R3.size(); ++ij) CHECK(std::abs(rep.R3[ij] - rhs.dW2[ij]) < 1e-12);
  }
  SUBCASE("aggregate matches a naive recomputation") {
    const ResidualReport rep = stationarity_residuals(st, fx.ds, fx.sig);
    double s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (double v : rep.R1) s1 += v * v;
    for (double v : rep.R2) s2 += v * v;
    for (double v : rep.R3) s3 += v * v;
    CHECK(rep.S ==
          doctest::Approx(s1 / st.mc + s2 / st.mw + s3 / (static_cast<double>(st.mc) * st.mw)).epsilon(1e-12));
    CHECK(rep.S >= 0.0);
  }
}

TEST_CASE("lyapunov series") {
  Fixture fx;
  const ParticlePools pools = ParticlePools::draw_two_layer(kBox, 8, 8, 2, 1, 47);

  SUBCASE("stationary trajectory gives zero series") {
    const LimitState st = LimitState::from_pools(pools);
    std::vector<double> xs = draw_test_grid(10, 1, {}, 47);
    std::vector<double> ys(10);
    for (int s = 0; s < 10; ++s) ys[s] = compute_fields(st, fx.sig, std::span<const double>(&xs[s], 1)).g;
    const Dataset ds(1, xs, ys, {});
    IntegrateOptions o;
    o.horizon = 0.1;
    o.dt = 1.0 / 50.0;
    o.snapshot_every_step = true;
    o.record_states = true;
    const LyapunovSeries series = lyapunov_check(integrate_limit(pools, ds, fx.sig, o, fx.grid), ds, fx.sig);
    for (double v : series.dlbar_dt) CHECK(v == 0.0);
    for (double v : series.neg_s) CHECK(v == 0.0);
  }
  SUBCASE("identity gap shrinks when the step halves") {
    auto max_gap = [&](double dt) {
      IntegrateOptions o;
      o.horizon = 0.5;
      o.dt = dt;
      o.snapshot_every_step = true;
      o.record_states = true;
      const LyapunovSeries s = lyapunov_check(integrate_limit(pools, fx.ds, fx.sig, o, fx.grid), fx.ds, fx.sig);
      double m = 0.0;
      for (std::size_t j = 1; j + 1 < s.t.size(); ++j) m = std::max(m, std::abs(s.dlbar_dt[j] - s.neg_s[j]));
      return m;
    };
    const double coarse = max_gap(1.0 / 50.0);
    const double fine = max_gap(1.0 / 100.0);
    CHECK(coarse / fine == doctest::Approx(2.0).epsilon(0.3));
  }
}

TEST_CASE("ablation with zero constant rate is inert") {
  Fixture fx;
  AblationOptions o;
  o.ladder = {{8, 8, 1}, {16, 16, 1}};
  o.horizon = 0.5;
  o.constant_alpha = 0.0;
  const AblationResult res = ablation_study(fx.ds, fx.sig, kBox, fx.grid, o);
  REQUIRE(res.rows.size() == 4);
  for (const AblationRow& row : res.rows) {
    if (row.mode != "constant") continue;
    CHECK(row.reduction == 0.0);
    CHECK(row.disp_c == 0.0);
    CHECK(row.disp_w1 == 0.0);
    CHECK(row.disp_w2 == 0.0);
  }
}

TEST_CASE("moment diagnostics") {
  Fixture fx;
  const ParticlePools pools = ParticlePools::draw_two_layer(kBox, 4, 64, 4, 1, 53);
  const LimitState st = LimitState::from_pools(pools);

  // Width-(mw*mu) network carrying exactly the particle ensemble.
  auto embed = [&](const ParticlePools& p) {
    TwoLayerParams q;
    q.n1 = p.mw * p.mu;
    q.n2 = p.mc;
    q.d = p.d;
    q.C = p.c;
    q.W1.resize(static_cast<std::size_t>(q.n1) * p.d);
    q.W2.resize(static_cast<std::size_t>(p.mc) * q.n1);
    for (int j = 0; j < p.mw; ++j)
      for (int k = 0; k < p.mu; ++k)
        for (int dd = 0; dd < p.d; ++dd)
          q.w1(j * p.mu + k, dd) = p.w[static_cast<std::size_t>(j) * p.d + dd];
    for (int i = 0; i < p.mc; ++i)
      for (int j = 0; j < p.mw; ++j)
        for (int k = 0; k < p.mu; ++k)
          q.w2(i, j * p.mu + k) = p.u[(static_cast<std::size_t>(i) * p.mw + j) * p.mu + k];
    return q;
  };
  const std::vector<double> probe{0.4};

  SUBCASE("normalization: the constant test function reads one on both sides") {
    const MomentTable table = measure_moments(embed(pools), st, fx.sig, probe, 0);
    REQUIRE(!table.names.empty());
    CHECK(table.names[0] == "one");
    CHECK(table.finite_side[0] == 1.0);
    CHECK(table.particle_side[0] == 1.0);
  }
  SUBCASE("embedded ensemble agrees exactly") {
    const MomentTable table = measure_moments(embed(pools), st, fx.sig, probe, 2);
    for (std::size_t i = 0; i < table.names.size(); ++i)
      CHECK(table.finite_side[i] == doctest::Approx(table.particle_side[i]).epsilon(1e-12));
  }
  SUBCASE("first-coordinate moment sits in the symmetric-box band") {
    // Uniform[-1,1]: sd = 1/sqrt(3); 3-sigma Monte Carlo band for mw*mu draws.
    const MomentTable table = measure_moments(embed(pools), st, fx.sig, probe, 0);
    const double band = 3.0 / std::sqrt(3.0 * 64.0 * 4.0);
    CHECK(std::abs(table.particle_side[1]) <= band);
  }
  SUBCASE("independent-draw gap shrinks along a width ladder") {
    double prev = 1e9;
    for (int n1 : {8, 128, 2048}) {
      const TwoLayerParams p = init_two_layer(kBox, n1, 4, 1, 61);
      const MomentTable table = measure_moments(p, st, fx.sig, probe, 0);
      double gap = 0.0;
      // Skip entries involving c or w2 draws (those compare unlike couplings);
      // the w1-marginal moments are the observables of interest here.
      for (std::size_t i : {std::size_t{1}, std::size_t{2}, std::size_t{3}})
        gap += std::abs(table.finite_side[i] - table.particle_side[i]);
      CHECK(gap < prev + 0.05);
      prev = gap;
    }
  }
}

TEST_CASE("coupling distance") {
  Fixture fx;
  const ParticlePools pools = ParticlePools::draw_two_layer(kBox, 6, 5, 2, 1, 59);
  IntegrateOptions o;
  o.horizon = 0.5;
  o.dt = 1.0 / 40.0;
  o.snapshot_times = {0.25};
  o.record_states = true;
  const LimitTrajectory a = integrate_limit(pools, fx.ds, fx.sig, o, fx.grid);

  SUBCASE("a trajectory against itself is identically zero") {
    const CouplingSeries q = coupling_distance(a, a, fx.sig, fx.grid);
    for (double v : q.q) CHECK(v == 0.0);
  }
  SUBCASE("starts at zero and tracks the step-size gap") {
    IntegrateOptions fine = o;
    fine.dt = o.dt / 2.0;
    const LimitTrajectory b = integrate_limit(pools, fx.ds, fx.sig, fine, fx.grid);
    const CouplingSeries q = coupling_distance(a, b, fx.sig, fx.grid);
    CHECK(q.q.front() == 0.0);
    CHECK(q.q.back() > 0.0);
  }
  SUBCASE("mismatched pools are rejected") {
    const ParticlePools other = ParticlePools::draw_two_layer(kBox, 7, 5, 2, 1, 59);
    const LimitTrajectory b = integrate_limit(other, fx.ds, fx.sig, o, fx.grid);
    CHECK_THROWS_AS(coupling_distance(a, b, fx.sig, fx.grid), std::invalid_argument);
  }
}

TEST_CASE("rate study is deterministic across worker counts") {
  Fixture fx;
  RateStudyOptions o;
  o.n2_grid = {4, 8, 16, 32};
  o.mc_ref = 64;
  o.mw = 16;
  o.mu = 2;
  o.seeds = 4;
  o.dt = 1.0 / 40.0;
  o.horizon = 0.25;
  o.seed = 3;
  o.workers = 1;
  const RateFit one = rate_study(fx.ds, fx.sig, kBox, fx.grid, o);
  o.workers = 4;
  const RateFit four = rate_study(fx.ds, fx.sig, kBox, fx.grid, o);
  CHECK(one.errors == four.errors);
  CHECK(one.slope == four.slope);
}
