#include "mfnn/limit_ode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mfnn/rng.hpp"

namespace mfnn {

namespace {

double dot(const double* a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) s += a[k] * b[k];
  return s;
}

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

double sup_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// (1/mu) sum_k W2_{.,.,k}, laid out rows x cols.
std::vector<double> u_mean(std::span<const double> w2, int rows, int cols, int mu) {
  std::vector<double> bar(static_cast<std::size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const double* base = &w2[(static_cast<std::size_t>(i) * cols + j) * mu];
      double s = 0.0;
      for (int k = 0; k < mu; ++k) s += base[k];
      bar[static_cast<std::size_t>(i) * cols + j] = s / mu;
    }
  return bar;
}

LimitFields fields_with_bar(const LimitState& st, std::span<const double> w2bar, const Activation& a,
                            std::span<const double> x) {
  LimitFields f;
  f.H1.resize(st.mw);
  f.Z.resize(st.mc);
  f.H2.resize(st.mc);
  f.V.resize(st.mw);
  for (int j = 0; j < st.mw; ++j) f.H1[j] = a.eval(dot(&st.W1[static_cast<std::size_t>(j) * st.d], x));
  for (int i = 0; i < st.mc; ++i) {
    const double* row = &w2bar[static_cast<std::size_t>(i) * st.mw];
    double z = 0.0;
    for (int j = 0; j < st.mw; ++j) z += row[j] * f.H1[j];
    f.Z[i] = z / st.mw;
    f.H2[i] = a.eval(f.Z[i]);
  }
  double g = 0.0;
  for (int i = 0; i < st.mc; ++i) g += st.C[i] * f.H2[i];
  f.g = g / st.mc;
  for (int j = 0; j < st.mw; ++j) f.V[j] = 0.0;
  for (int i = 0; i < st.mc; ++i) {
    const double ai = st.C[i] * a.deriv(f.Z[i]);
    const double* row = &w2bar[static_cast<std::size_t>(i) * st.mw];
    for (int j = 0; j < st.mw; ++j) f.V[j] += ai * row[j];
  }
  for (int j = 0; j < st.mw; ++j) f.V[j] /= st.mc;
  return f;
}

}  // namespace

ParticlePools ParticlePools::draw_two_layer(const InitDistribution& dist, int mc, int mw, int mu, int d,
                                            std::uint64_t seed) {
  if (mc < 1 || mw < 1 || mu < 1 || d < 1) throw std::invalid_argument("pools: sizes must be >= 1");
  ParticlePools p;
  p.mc = mc;
  p.mw = mw;
  p.mu = mu;
  p.d = d;
  p.c.resize(mc);
  for (int i = 0; i < mc; ++i) {
    Rng r(Rng::derive(seed, {stream::kPoolC, static_cast<std::uint64_t>(i)}));
    p.c[i] = r.uniform(dist.c_lo, dist.c_hi);
  }
  p.w.resize(static_cast<std::size_t>(mw) * d);
  for (int j = 0; j < mw; ++j) {
    Rng r(Rng::derive(seed, {stream::kPoolW, static_cast<std::uint64_t>(j)}));
    for (int k = 0; k < d; ++k) p.w[static_cast<std::size_t>(j) * d + k] = r.uniform(dist.w1_lo, dist.w1_hi);
  }
  p.u.resize(static_cast<std::size_t>(mc) * mw * mu);
  for (int i = 0; i < mc; ++i)
    for (int j = 0; j < mw; ++j)
      for (int k = 0; k < mu; ++k) {
        Rng r(Rng::derive(seed, {stream::kPoolU, static_cast<std::uint64_t>(i),
                                 static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(k)}));
        p.u[(static_cast<std::size_t>(i) * mw + j) * mu + k] = r.uniform(dist.w2_lo, dist.w2_hi);
      }
  return p;
}

ParticlePools ParticlePools::draw_three_layer(const InitDistribution& dist, int mc, int mv, int mw,
                                              int mu, int d, std::uint64_t seed) {
  if (mc < 1 || mv < 1 || mw < 1 || mu < 1 || d < 1)
    throw std::invalid_argument("pools: sizes must be >= 1");
  ParticlePools p;
  p.mc = mc;
  p.mv = mv;
  p.mw = mw;
  p.mu = mu;
  p.d = d;
  p.c.resize(mc);
  for (int i = 0; i < mc; ++i) {
    Rng r(Rng::derive(seed, {stream::kPoolC, static_cast<std::uint64_t>(i)}));
    p.c[i] = r.uniform(dist.c_lo, dist.c_hi);
  }
  p.w.resize(static_cast<std::size_t>(mw) * d);
  for (int j = 0; j < mw; ++j) {
    Rng r(Rng::derive(seed, {stream::kPoolW, static_cast<std::uint64_t>(j)}));
    for (int k = 0; k < d; ++k) p.w[static_cast<std::size_t>(j) * d + k] = r.uniform(dist.w1_lo, dist.w1_hi);
  }
  p.v.resize(mv);
  for (int v = 0; v < mv; ++v) {
    Rng r(Rng::derive(seed, {stream::kPoolV, static_cast<std::uint64_t>(v)}));
    p.v[v] = r.uniform(dist.w3_lo, dist.w3_hi);
  }
  p.u.resize(static_cast<std::size_t>(mv) * mw * mu);
  for (int v = 0; v < mv; ++v)
    for (int j = 0; j < mw; ++j)
      for (int k = 0; k < mu; ++k) {
        Rng r(Rng::derive(seed, {stream::kPoolU, static_cast<std::uint64_t>(v),
                                 static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(k)}));
        p.u[(static_cast<std::size_t>(v) * mw + j) * mu + k] = r.uniform(dist.w2_lo, dist.w2_hi);
      }
  return p;
}

LimitState LimitState::from_pools(const ParticlePools& pools) {
  LimitState st;
  st.t = 0.0;
  st.mc = pools.mc;
  st.mw = pools.mw;
  st.mu = pools.mu;
  st.d = pools.d;
  st.C = pools.c;
  st.W1 = pools.w;
  st.W2 = pools.u;
  return st;
}

LimitFields compute_fields(const LimitState& state, const Activation& a, std::span<const double> x) {
  if (static_cast<int>(x.size()) != state.d) throw std::invalid_argument("compute_fields: dim mismatch");
  const std::vector<double> bar = u_mean(state.W2, state.mc, state.mw, state.mu);
  return fields_with_bar(state, bar, a, x);
}

LimitRhs limit_rhs(const LimitState& state, const Dataset& dataset, const Activation& a) {
  const int mc = state.mc, mw = state.mw, d = state.d;
  const std::vector<double> bar = u_mean(state.W2, mc, mw, state.mu);
  LimitRhs rhs;
  rhs.dC.assign(mc, 0.0);
  rhs.dW1.assign(static_cast<std::size_t>(mw) * d, 0.0);
  rhs.dW2.assign(static_cast<std::size_t>(mc) * mw, 0.0);

  for (int s = 0; s < dataset.size(); ++s) {
    const std::span<const double> x = dataset.input(s);
    const LimitFields f = fields_with_bar(state, bar, a, x);
    const double r = dataset.target(s) - f.g;
    for (int i = 0; i < mc; ++i) rhs.dC[i] += r * f.H2[i];
    for (int j = 0; j < mw; ++j) {
      const double coef = r * f.V[j] * a.deriv(dot(&state.W1[static_cast<std::size_t>(j) * d], x));
      for (int k = 0; k < d; ++k) rhs.dW1[static_cast<std::size_t>(j) * d + k] += coef * x[k];
    }
    for (int i = 0; i < mc; ++i) {
      const double ai = r * state.C[i] * a.deriv(f.Z[i]);
      double* row = &rhs.dW2[static_cast<std::size_t>(i) * mw];
      for (int j = 0; j < mw; ++j) row[j] += ai * f.H1[j];
    }
  }
  const double inv = 1.0 / dataset.size();
  for (double& v : rhs.dC) v *= inv;
  for (double& v : rhs.dW1) v *= inv;
  for (double& v : rhs.dW2) v *= inv;
  return rhs;
}

namespace {

void apply_step(LimitState& st, const LimitRhs& k1, const LimitRhs* k2, double dt) {
  // Euler when k2 is null, Heun (trapezoidal combine) otherwise.
  const double h1 = (k2 == nullptr) ? dt : 0.5 * dt;
  for (int i = 0; i < st.mc; ++i) st.C[i] += h1 * (k1.dC[i] + (k2 ? k2->dC[i] : 0.0));
  for (std::size_t j = 0; j < st.W1.size(); ++j) st.W1[j] += h1 * (k1.dW1[j] + (k2 ? k2->dW1[j] : 0.0));
  for (int i = 0; i < st.mc; ++i)
    for (int j = 0; j < st.mw; ++j) {
      const std::size_t ij = static_cast<std::size_t>(i) * st.mw + j;
      const double dv = h1 * (k1.dW2[ij] + (k2 ? k2->dW2[ij] : 0.0));
      double* base = &st.W2[ij * st.mu];
      for (int k = 0; k < st.mu; ++k) base[k] += dv;
    }
}

void check_finite_or_throw(const LimitState& st) {
  if (!all_finite(st.C) || !all_finite(st.W1) || !all_finite(st.W2))
    throw std::runtime_error("integrate_limit: non-finite state");
}

LimitSnapshot take_snapshot(const LimitState& st, const Dataset& dataset, const Activation& a,
                            std::span<const double> test_grid, double t, bool record_state) {
  LimitSnapshot snap;
  snap.t = t;
  const std::vector<double> bar = u_mean(st.W2, st.mc, st.mw, st.mu);
  std::vector<double> preds(dataset.size());
  for (int s = 0; s < dataset.size(); ++s) preds[s] = fields_with_bar(st, bar, a, dataset.input(s)).g;
  snap.lbar = expected_loss(preds, dataset);
  const int grid_n = static_cast<int>(test_grid.size()) / st.d;
  snap.g_grid.resize(grid_n);
  for (int gi = 0; gi < grid_n; ++gi)
    snap.g_grid[gi] =
        fields_with_bar(st, bar, a, test_grid.subspan(static_cast<std::size_t>(gi) * st.d, st.d)).g;
  snap.c_sup = sup_abs(st.C);
  snap.w1_sup = sup_abs(st.W1);
  snap.w2_sup = sup_abs(st.W2);
  snap.g_sup = sup_abs(snap.g_grid);
  if (record_state) snap.state = st;
  return snap;
}

}  // namespace

LimitTrajectory integrate_limit(const ParticlePools& pools, const Dataset& dataset, const Activation& a,
                                const IntegrateOptions& opts, std::span<const double> test_grid) {
  if (opts.dt <= 0.0) throw std::invalid_argument("integrate_limit: dt must be positive");
  if (opts.horizon < 0.0) throw std::invalid_argument("integrate_limit: negative horizon");
  const long n_steps = std::lround(opts.horizon / opts.dt);

  // Snapshot times are mapped to the nearest step on the dt grid.
  std::vector<long> snap_steps;
  std::vector<double> snap_times;
  if (opts.snapshot_every_step) {
    for (long m = 0; m <= n_steps; ++m) {
      snap_steps.push_back(m);
      snap_times.push_back(m * opts.dt);
    }
  } else {
    std::vector<double> times = opts.snapshot_times;
    times.push_back(0.0);
    times.push_back(opts.horizon);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    for (double t : times) {
      if (t < 0.0 || t > opts.horizon + 1e-12)
        throw std::invalid_argument("integrate_limit: snapshot time outside [0, T]");
      const long m = std::min<long>(n_steps, std::lround(t / opts.dt));
      if (snap_steps.empty() || snap_steps.back() != m) {
        snap_steps.push_back(m);
        snap_times.push_back(t);
      }
    }
  }

  LimitState st = LimitState::from_pools(pools);
  LimitTrajectory traj;
  std::size_t next = 0;
  for (long m = 0;; ++m) {
    while (next < snap_steps.size() && snap_steps[next] == m) {
      st.t = snap_times[next];
      traj.snapshots.push_back(take_snapshot(st, dataset, a, test_grid, snap_times[next], opts.record_states));
      ++next;
    }
    if (m == n_steps) break;
    const LimitRhs k1 = limit_rhs(st, dataset, a);
    if (opts.scheme == Scheme::Euler) {
      apply_step(st, k1, nullptr, opts.dt);
    } else {
      LimitState pred = st;
      apply_step(pred, k1, nullptr, opts.dt);
      const LimitRhs k2 = limit_rhs(pred, dataset, a);
      apply_step(st, k1, &k2, opts.dt);
    }
    st.t = (m + 1) * opts.dt;
    check_finite_or_throw(st);
  }
  return traj;
}

LimitTrajectory intermediate_system(std::span<const double> c_draws, const ParticlePools& shared_wu,
                                    const Dataset& dataset, const Activation& a,
                                    const IntegrateOptions& opts, std::span<const double> test_grid) {
  const int n2 = static_cast<int>(c_draws.size());
  if (n2 < 1) throw std::invalid_argument("intermediate_system: need at least one c draw");
  if (n2 > shared_wu.mc)
    throw std::invalid_argument("intermediate_system: more c draws than the shared pool provides u rows for");
  ParticlePools p;
  p.mc = n2;
  p.mw = shared_wu.mw;
  p.mu = shared_wu.mu;
  p.d = shared_wu.d;
  p.c.assign(c_draws.begin(), c_draws.end());
  p.w = shared_wu.w;
  p.u.assign(shared_wu.u.begin(),
             shared_wu.u.begin() + static_cast<std::size_t>(n2) * shared_wu.mw * shared_wu.mu);
  return integrate_limit(p, dataset, a, opts, test_grid);
}

// ---- three-layer ----

LimitState3 LimitState3::from_pools(const ParticlePools& pools) {
  if (pools.mv < 1) throw std::invalid_argument("three-layer state needs a v pool");
  LimitState3 st;
  st.t = 0.0;
  st.mc = pools.mc;
  st.mv = pools.mv;
  st.mw = pools.mw;
  st.mu = pools.mu;
  st.d = pools.d;
  st.C = pools.c;
  st.W1 = pools.w;
  st.W2 = pools.u;
  st.W3.resize(static_cast<std::size_t>(st.mc) * st.mv);
  for (int i = 0; i < st.mc; ++i)
    for (int v = 0; v < st.mv; ++v) st.w3(i, v) = pools.v[v];
  return st;
}

namespace {

LimitFields3 fields3_with_bar(const LimitState3& st, std::span<const double> w2bar, const Activation& a,
                              std::span<const double> x) {
  LimitFields3 f;
  f.H1.resize(st.mw);
  f.Z2.resize(st.mv);
  f.H2.resize(st.mv);
  f.Z3.resize(st.mc);
  f.H3.resize(st.mc);
  f.V.assign(st.mw, 0.0);
  f.L.assign(st.mv, 0.0);
  for (int j = 0; j < st.mw; ++j) f.H1[j] = a.eval(dot(&st.W1[static_cast<std::size_t>(j) * st.d], x));
  for (int v = 0; v < st.mv; ++v) {
    const double* row = &w2bar[static_cast<std::size_t>(v) * st.mw];
    double z = 0.0;
    for (int j = 0; j < st.mw; ++j) z += row[j] * f.H1[j];
    f.Z2[v] = z / st.mw;
    f.H2[v] = a.eval(f.Z2[v]);
  }
  for (int i = 0; i < st.mc; ++i) {
    double z = 0.0;
    for (int v = 0; v < st.mv; ++v) z += st.w3(i, v) * f.H2[v];
    f.Z3[i] = z / st.mv;
    f.H3[i] = a.eval(f.Z3[i]);
  }
  double g = 0.0;
  for (int i = 0; i < st.mc; ++i) g += st.C[i] * f.H3[i];
  f.g = g / st.mc;
  for (int i = 0; i < st.mc; ++i) {
    const double ai = st.C[i] * a.deriv(f.Z3[i]);
    for (int v = 0; v < st.mv; ++v) f.L[v] += ai * st.w3(i, v);
  }
  for (int v = 0; v < st.mv; ++v) f.L[v] /= st.mc;
  for (int v = 0; v < st.mv; ++v) {
    const double sv = f.L[v] * a.deriv(f.Z2[v]);
    const double* row = &w2bar[static_cast<std::size_t>(v) * st.mw];
    for (int j = 0; j < st.mw; ++j) f.V[j] += sv * row[j];
  }
  for (int j = 0; j < st.mw; ++j) f.V[j] /= st.mv;
  return f;
}

}  // namespace

LimitFields3 compute_fields_three_layer(const LimitState3& state, const Activation& a,
                                        std::span<const double> x) {
  if (static_cast<int>(x.size()) != state.d) throw std::invalid_argument("compute_fields: dim mismatch");
  const std::vector<double> bar = u_mean(state.W2, state.mv, state.mw, state.mu);
  return fields3_with_bar(state, bar, a, x);
}

LimitRhs3 limit_rhs_three_layer(const LimitState3& state, const Dataset& dataset, const Activation& a) {
  const int mc = state.mc, mv = state.mv, mw = state.mw, d = state.d;
  const std::vector<double> bar = u_mean(state.W2, mv, mw, state.mu);
  LimitRhs3 rhs;
  rhs.dC.assign(mc, 0.0);
  rhs.dW1.assign(static_cast<std::size_t>(mw) * d, 0.0);
  rhs.dW2.assign(static_cast<std::size_t>(mv) * mw, 0.0);
  rhs.dW3.assign(static_cast<std::size_t>(mc) * mv, 0.0);

  for (int s = 0; s < dataset.size(); ++s) {
    const std::span<const double> x = dataset.input(s);
    const LimitFields3 f = fields3_with_bar(state, bar, a, x);
    const double r = dataset.target(s) - f.g;
    for (int i = 0; i < mc; ++i) rhs.dC[i] += r * f.H3[i];
    for (int i = 0; i < mc; ++i) {
      const double ai = r * state.C[i] * a.deriv(f.Z3[i]);
      for (int v = 0; v < mv; ++v) rhs.dW3[static_cast<std::size_t>(i) * mv + v] += ai * f.H2[v];
    }
    for (int v = 0; v < mv; ++v) {
      const double sv = r * f.L[v] * a.deriv(f.Z2[v]);
      double* row = &rhs.dW2[static_cast<std::size_t>(v) * mw];
      for (int j = 0; j < mw; ++j) row[j] += sv * f.H1[j];
    }
    for (int j = 0; j < mw; ++j) {
      const double coef = r * f.V[j] * a.deriv(dot(&state.W1[static_cast<std::size_t>(j) * d], x));
      for (int k = 0; k < d; ++k) rhs.dW1[static_cast<std::size_t>(j) * d + k] += coef * x[k];
    }
  }
  const double inv = 1.0 / dataset.size();
  for (double& v : rhs.dC) v *= inv;
  for (double& v : rhs.dW1) v *= inv;
  for (double& v : rhs.dW2) v *= inv;
  for (double& v : rhs.dW3) v *= inv;
  return rhs;
}

namespace {

void apply_step3(LimitState3& st, const LimitRhs3& k1, const LimitRhs3* k2, double dt) {
  const double h1 = (k2 == nullptr) ? dt : 0.5 * dt;
  for (int i = 0; i < st.mc; ++i) st.C[i] += h1 * (k1.dC[i] + (k2 ? k2->dC[i] : 0.0));
  for (std::size_t j = 0; j < st.W1.size(); ++j) st.W1[j] += h1 * (k1.dW1[j] + (k2 ? k2->dW1[j] : 0.0));
  for (std::size_t j = 0; j < st.W3.size(); ++j) st.W3[j] += h1 * (k1.dW3[j] + (k2 ? k2->dW3[j] : 0.0));
  for (int v = 0; v < st.mv; ++v)
    for (int j = 0; j < st.mw; ++j) {
      const std::size_t vj = static_cast<std::size_t>(v) * st.mw + j;
      const double dv = h1 * (k1.dW2[vj] + (k2 ? k2->dW2[vj] : 0.0));
      double* base = &st.W2[vj * st.mu];
      for (int k = 0; k < st.mu; ++k) base[k] += dv;
    }
}

}  // namespace

LimitTrajectory3 integrate_limit_three_layer(const ParticlePools& pools, const Dataset& dataset,
                                             const Activation& a, const IntegrateOptions& opts,
                                             std::span<const double> test_grid) {
  if (opts.dt <= 0.0) throw std::invalid_argument("integrate_limit: dt must be positive");
  const long n_steps = std::lround(opts.horizon / opts.dt);
  std::vector<double> times = opts.snapshot_times;
  times.push_back(0.0);
  times.push_back(opts.horizon);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  std::vector<long> snap_steps;
  std::vector<double> snap_times;
  for (double t : times) {
    const long m = std::min<long>(n_steps, std::lround(t / opts.dt));
    if (snap_steps.empty() || snap_steps.back() != m) {
      snap_steps.push_back(m);
      snap_times.push_back(t);
    }
  }

  LimitState3 st = LimitState3::from_pools(pools);
  LimitTrajectory3 traj;
  std::size_t next = 0;
  for (long m = 0;; ++m) {
    while (next < snap_steps.size() && snap_steps[next] == m) {
      LimitSnapshot3 snap;
      snap.t = snap_times[next];
      const std::vector<double> bar = u_mean(st.W2, st.mv, st.mw, st.mu);
      std::vector<double> preds(dataset.size());
      for (int s = 0; s < dataset.size(); ++s) preds[s] = fields3_with_bar(st, bar, a, dataset.input(s)).g;
      snap.lbar = expected_loss(preds, dataset);
      const int grid_n = static_cast<int>(test_grid.size()) / st.d;
      snap.g_grid.resize(grid_n);
      for (int gi = 0; gi < grid_n; ++gi)
        snap.g_grid[gi] =
            fields3_with_bar(st, bar, a, test_grid.subspan(static_cast<std::size_t>(gi) * st.d, st.d)).g;
      if (opts.record_states) snap.state = st;
      traj.snapshots.push_back(std::move(snap));
      ++next;
    }
    if (m == n_steps) break;
    const LimitRhs3 k1 = limit_rhs_three_layer(st, dataset, a);
    if (opts.scheme == Scheme::Euler) {
      apply_step3(st, k1, nullptr, opts.dt);
    } else {
      LimitState3 pred = st;
      apply_step3(pred, k1, nullptr, opts.dt);
      const LimitRhs3 k2 = limit_rhs_three_layer(pred, dataset, a);
      apply_step3(st, k1, &k2, opts.dt);
    }
    st.t = (m + 1) * opts.dt;
    if (!all_finite(st.C) || !all_finite(st.W1) || !all_finite(st.W2) || !all_finite(st.W3))
      throw std::runtime_error("integrate_limit: non-finite state");
  }
  return traj;
}

}  // namespace mfnn
