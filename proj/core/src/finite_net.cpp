#include "mfnn/finite_net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mfnn/rng.hpp"

namespace mfnn {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

void check_box(double lo, double hi, const char* group) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi)
    throw std::invalid_argument(std::string("init: degenerate bounds for ") + group);
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

}  // namespace

GroupRates learning_rates(const LearningRateSchedule& sched, const Widths& w) {
  if (w.n1 < 1 || w.n2 < 1 || w.n3 < 1) throw std::invalid_argument("learning_rates: widths must be positive");
  GroupRates r;
  if (sched.mode == ScheduleMode::Constant) {
    r.alpha_c = r.alpha_w1 = r.alpha_w2 = r.alpha_w3 = sched.base;
    return r;
  }
  if (sched.depth == 2) {
    r.alpha_c = static_cast<double>(w.n2) / w.n1;
    r.alpha_w1 = 1.0;
    r.alpha_w2 = static_cast<double>(w.n2);
  } else if (sched.depth == 3) {
    r.alpha_c = static_cast<double>(w.n3) / w.n1;
    r.alpha_w1 = 1.0;
    r.alpha_w2 = static_cast<double>(w.n2);
    r.alpha_w3 = static_cast<double>(w.n2) * w.n3 / w.n1;
  } else {
    throw std::invalid_argument("learning_rates: depth must be 2 or 3");
  }
  return r;
}

std::vector<double> learning_rates_l_layer(std::span<const int> widths) {
  const std::size_t L = widths.size();
  if (L < 1) throw std::invalid_argument("learning_rates_l_layer: need at least one layer");
  for (int n : widths)
    if (n < 1) throw std::invalid_argument("learning_rates_l_layer: widths must be positive");
  std::vector<double> a(L + 1);
  a[0] = static_cast<double>(widths[L - 1]) / widths[0];  // alpha_C
  a[1] = 1.0;                                             // alpha_{W,1}
  if (L >= 2) a[2] = static_cast<double>(widths[1]);      // alpha_{W,2}
  for (std::size_t l = 3; l <= L; ++l)
    a[l] = static_cast<double>(widths[l - 2]) * widths[l - 1] / widths[0];
  return a;
}

TwoLayerParams init_two_layer(const InitDistribution& dist, int n1, int n2, int d, std::uint64_t seed) {
  if (n1 < 1 || n2 < 1 || d < 1) throw std::invalid_argument("init: widths must be >= 1");
  check_box(dist.c_lo, dist.c_hi, "C");
  check_box(dist.w1_lo, dist.w1_hi, "W1");
  check_box(dist.w2_lo, dist.w2_hi, "W2");
  TwoLayerParams p;
  p.n1 = n1;
  p.n2 = n2;
  p.d = d;
  p.C.resize(n2);
  p.W1.resize(static_cast<std::size_t>(n1) * d);
  p.W2.resize(static_cast<std::size_t>(n2) * n1);
  Rng rc(Rng::derive(seed, {stream::kInitC}));
  for (double& v : p.C) v = rc.uniform(dist.c_lo, dist.c_hi);
  Rng rw1(Rng::derive(seed, {stream::kInitW1}));
  for (double& v : p.W1) v = rw1.uniform(dist.w1_lo, dist.w1_hi);
  Rng rw2(Rng::derive(seed, {stream::kInitW2}));
  for (double& v : p.W2) v = rw2.uniform(dist.w2_lo, dist.w2_hi);
  return p;
}

ThreeLayerParams init_three_layer(const InitDistribution& dist, int n1, int n2, int n3, int d,
                                  std::uint64_t seed) {
  if (n1 < 1 || n2 < 1 || n3 < 1 || d < 1) throw std::invalid_argument("init: widths must be >= 1");
  check_box(dist.c_lo, dist.c_hi, "C");
  check_box(dist.w1_lo, dist.w1_hi, "W1");
  check_box(dist.w2_lo, dist.w2_hi, "W2");
  check_box(dist.w3_lo, dist.w3_hi, "W3");
  ThreeLayerParams p;
  p.n1 = n1;
  p.n2 = n2;
  p.n3 = n3;
  p.d = d;
  p.C.resize(n3);
  p.W1.resize(static_cast<std::size_t>(n1) * d);
  p.W2.resize(static_cast<std::size_t>(n2) * n1);
  p.W3.resize(static_cast<std::size_t>(n3) * n2);
  Rng rc(Rng::derive(seed, {stream::kInitC}));
  for (double& v : p.C) v = rc.uniform(dist.c_lo, dist.c_hi);
  Rng rw1(Rng::derive(seed, {stream::kInitW1}));
  for (double& v : p.W1) v = rw1.uniform(dist.w1_lo, dist.w1_hi);
  Rng rw2(Rng::derive(seed, {stream::kInitW2}));
  for (double& v : p.W2) v = rw2.uniform(dist.w2_lo, dist.w2_hi);
  Rng rw3(Rng::derive(seed, {stream::kInitW3}));
  for (double& v : p.W3) v = rw3.uniform(dist.w3_lo, dist.w3_hi);
  return p;
}

ForwardCache forward_two_layer(const TwoLayerParams& p, const Activation& a, std::span<const double> x,
                               bool identity_outer) {
  if (static_cast<int>(x.size()) != p.d) throw std::invalid_argument("forward: input dim mismatch");
  ForwardCache c;
  c.H1.resize(p.n1);
  c.Z2.resize(p.n2);
  c.H2.resize(p.n2);
  for (int j = 0; j < p.n1; ++j)
    c.H1[j] = a.eval(dot({&p.W1[static_cast<std::size_t>(j) * p.d], static_cast<std::size_t>(p.d)}, x));
  for (int i = 0; i < p.n2; ++i) {
    double z = 0.0;
    for (int j = 0; j < p.n1; ++j) z += p.w2(i, j) * c.H1[j];
    c.Z2[i] = z / p.n1;
    c.H2[i] = identity_outer ? c.Z2[i] : a.eval(c.Z2[i]);
  }
  double g = 0.0;
  for (int i = 0; i < p.n2; ++i) g += p.C[i] * c.H2[i];
  c.g = g / p.n2;
  return c;
}

ForwardCache forward_three_layer(const ThreeLayerParams& p, const Activation& a, std::span<const double> x) {
  if (static_cast<int>(x.size()) != p.d) throw std::invalid_argument("forward: input dim mismatch");
  ForwardCache c;
  c.H1.resize(p.n1);
  c.Z2.resize(p.n2);
  c.H2.resize(p.n2);
  c.Z3.resize(p.n3);
  c.H3.resize(p.n3);
  for (int v = 0; v < p.n1; ++v)
    c.H1[v] = a.eval(dot({&p.W1[static_cast<std::size_t>(v) * p.d], static_cast<std::size_t>(p.d)}, x));
  for (int j = 0; j < p.n2; ++j) {
    double z = 0.0;
    for (int v = 0; v < p.n1; ++v) z += p.w2(j, v) * c.H1[v];
    c.Z2[j] = z / p.n1;
    c.H2[j] = a.eval(c.Z2[j]);
  }
  for (int i = 0; i < p.n3; ++i) {
    double z = 0.0;
    for (int j = 0; j < p.n2; ++j) z += p.w3(i, j) * c.H2[j];
    c.Z3[i] = z / p.n2;
    c.H3[i] = a.eval(c.Z3[i]);
  }
  double g = 0.0;
  for (int i = 0; i < p.n3; ++i) g += p.C[i] * c.H3[i];
  c.g = g / p.n3;
  return c;
}

void sgd_step_two_layer(TwoLayerParams& p, std::span<const double> x, double y, const Activation& a,
                        const GroupRates& rates, bool identity_outer) {
  const ForwardCache c = forward_two_layer(p, a, x, identity_outer);
  const double r = y - c.g;

  // F_i = C_i sigma'(Z2_i); B_j = (1/N2) sum_i F_i W2_ij. Both use the
  // pre-update parameters so all three group updates are simultaneous.
  std::vector<double> F(p.n2);
  for (int i = 0; i < p.n2; ++i) F[i] = p.C[i] * (identity_outer ? 1.0 : a.deriv(c.Z2[i]));
  std::vector<double> B(p.n1);
  for (int j = 0; j < p.n1; ++j) {
    double s = 0.0;
    for (int i = 0; i < p.n2; ++i) s += F[i] * p.w2(i, j);
    B[j] = s / p.n2;
  }

  const double ac = rates.alpha_c / p.n2;
  for (int i = 0; i < p.n2; ++i) p.C[i] += ac * r * c.H2[i];

  const double aw2 = rates.alpha_w2 / (static_cast<double>(p.n1) * p.n2);
  for (int i = 0; i < p.n2; ++i) {
    const double fi = aw2 * r * F[i];
    for (int j = 0; j < p.n1; ++j) p.w2(i, j) += fi * c.H1[j];
  }

  const double aw1 = rates.alpha_w1 / p.n1;
  for (int j = 0; j < p.n1; ++j) {
    const double z1 = dot({&p.W1[static_cast<std::size_t>(j) * p.d], static_cast<std::size_t>(p.d)}, x);
    const double coef = aw1 * r * B[j] * a.deriv(z1);
    for (int k = 0; k < p.d; ++k) p.w1(j, k) += coef * x[k];
  }
}

void sgd_step_three_layer(ThreeLayerParams& p, std::span<const double> x, double y, const Activation& a,
                          const GroupRates& rates) {
  const ForwardCache c = forward_three_layer(p, a, x);
  const double r = y - c.g;

  std::vector<double> F(p.n3);  // C_i sigma'(Z3_i)
  for (int i = 0; i < p.n3; ++i) F[i] = p.C[i] * a.deriv(c.Z3[i]);
  std::vector<double> G(p.n2);  // (1/N3) sum_i F_i W3_ij
  for (int j = 0; j < p.n2; ++j) {
    double s = 0.0;
    for (int i = 0; i < p.n3; ++i) s += F[i] * p.w3(i, j);
    G[j] = s / p.n3;
  }
  std::vector<double> B(p.n1);  // (1/N2) sum_j G_j sigma'(Z2_j) W2_jv
  for (int v = 0; v < p.n1; ++v) {
    double s = 0.0;
    for (int j = 0; j < p.n2; ++j) s += G[j] * a.deriv(c.Z2[j]) * p.w2(j, v);
    B[v] = s / p.n2;
  }

  const double acr = rates.alpha_c / p.n3;
  for (int i = 0; i < p.n3; ++i) p.C[i] += acr * r * c.H3[i];

  const double aw3 = rates.alpha_w3 / (static_cast<double>(p.n2) * p.n3);
  for (int i = 0; i < p.n3; ++i) {
    const double fi = aw3 * r * F[i];
    for (int j = 0; j < p.n2; ++j) p.w3(i, j) += fi * c.H2[j];
  }

  const double aw2 = rates.alpha_w2 / (static_cast<double>(p.n1) * p.n2);
  for (int j = 0; j < p.n2; ++j) {
    const double fj = aw2 * r * G[j] * a.deriv(c.Z2[j]);
    for (int v = 0; v < p.n1; ++v) p.w2(j, v) += fj * c.H1[v];
  }

  const double aw1 = rates.alpha_w1 / p.n1;
  for (int v = 0; v < p.n1; ++v) {
    const double z1 = dot({&p.W1[static_cast<std::size_t>(v) * p.d], static_cast<std::size_t>(p.d)}, x);
    const double coef = aw1 * r * B[v] * a.deriv(z1);
    for (int k = 0; k < p.d; ++k) p.w1(v, k) += coef * x[k];
  }
}

namespace {

// Shared trainer over the two depths.
template <class Params, class Step, class Record>
FiniteTrajectory train_impl(Params p, const Dataset& dataset, const TrainOptions& opts, int n1,
                            Step&& step, Record&& record) {
  if (opts.horizon < 0.0) throw std::invalid_argument("train: negative horizon");
  const long total_steps = static_cast<long>(std::floor(n1 * opts.horizon));

  std::vector<double> times = opts.snapshot_times;
  times.push_back(0.0);
  times.push_back(opts.horizon);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  for (double t : times)
    if (t < 0.0 || t > opts.horizon) throw std::invalid_argument("train: snapshot time outside [0, T]");

  FiniteTrajectory traj;
  Rng sampler(Rng::derive(opts.seed, {stream::kSgd}));
  std::size_t next = 0;
  for (long k = 0;; ++k) {
    while (next < times.size() && static_cast<long>(std::floor(n1 * times[next])) == k) {
      record(traj, times[next], k, p);
      ++next;
    }
    if (k == total_steps) break;
    const int s = static_cast<int>(sampler.uniform_index(dataset.size()));
    step(p, dataset.input(s), dataset.target(s));
  }
  return traj;
}

}  // namespace

FiniteTrajectory train_two_layer(TwoLayerParams p0, const Dataset& dataset, const Activation& a,
                                 const GroupRates& rates, const TrainOptions& opts,
                                 std::span<const double> test_grid) {
  const int d = p0.d;
  auto record = [&](FiniteTrajectory& traj, double t, long k, const TwoLayerParams& p) {
    FiniteSnapshot snap;
    snap.t = t;
    snap.step = k;
    std::vector<double> preds(dataset.size());
    for (int s = 0; s < dataset.size(); ++s)
      preds[s] = forward_two_layer(p, a, dataset.input(s), opts.identity_outer).g;
    snap.loss = expected_loss(preds, dataset);
    const int grid_n = static_cast<int>(test_grid.size()) / d;
    snap.g_grid.resize(grid_n);
    for (int gidx = 0; gidx < grid_n; ++gidx)
      snap.g_grid[gidx] =
          forward_two_layer(p, a, test_grid.subspan(static_cast<std::size_t>(gidx) * d, d), opts.identity_outer).g;
    snap.c_sup = sup_abs(p.C);
    snap.w1_sup = sup_abs(p.W1);
    snap.w2_sup = sup_abs(p.W2);
    if (opts.record_params) snap.params2 = p;
    traj.snapshots.push_back(std::move(snap));
  };
  auto step = [&](TwoLayerParams& p, std::span<const double> x, double y) {
    sgd_step_two_layer(p, x, y, a, rates, opts.identity_outer);
    if (!all_finite(p.C) || !all_finite(p.W1) || !all_finite(p.W2))
      throw std::runtime_error("train: parameter divergence (non-finite value)");
  };
  const int n1 = p0.n1;
  return train_impl(std::move(p0), dataset, opts, n1, step, record);
}

FiniteTrajectory train_three_layer(ThreeLayerParams p0, const Dataset& dataset, const Activation& a,
                                   const GroupRates& rates, const TrainOptions& opts,
                                   std::span<const double> test_grid) {
  const int d = p0.d;
  auto record = [&](FiniteTrajectory& traj, double t, long k, const ThreeLayerParams& p) {
    FiniteSnapshot snap;
    snap.t = t;
    snap.step = k;
    std::vector<double> preds(dataset.size());
    for (int s = 0; s < dataset.size(); ++s) preds[s] = forward_three_layer(p, a, dataset.input(s)).g;
    snap.loss = expected_loss(preds, dataset);
    const int grid_n = static_cast<int>(test_grid.size()) / d;
    snap.g_grid.resize(grid_n);
    for (int gidx = 0; gidx < grid_n; ++gidx)
      snap.g_grid[gidx] = forward_three_layer(p, a, test_grid.subspan(static_cast<std::size_t>(gidx) * d, d)).g;
    snap.c_sup = sup_abs(p.C);
    snap.w1_sup = sup_abs(p.W1);
    snap.w2_sup = sup_abs(p.W2);
    snap.w3_sup = sup_abs(p.W3);
    if (opts.record_params) snap.params3 = p;
    traj.snapshots.push_back(std::move(snap));
  };
  auto step = [&](ThreeLayerParams& p, std::span<const double> x, double y) {
    sgd_step_three_layer(p, x, y, a, rates);
    if (!all_finite(p.C) || !all_finite(p.W1) || !all_finite(p.W2) || !all_finite(p.W3))
      throw std::runtime_error("train: parameter divergence (non-finite value)");
  };
  const int n1 = p0.n1;
  return train_impl(std::move(p0), dataset, opts, n1, step, record);
}

double a_priori_bound(const InitDistribution& dist, const Activation& a, const DomainBounds& bounds,
                      int d, double T) {
  const double B = a.value_bound();
  const double Bp = a.deriv_bound();
  const double c0 = std::max(std::abs(dist.c_lo), std::abs(dist.c_hi));
  const double w0 = std::max(std::abs(dist.w1_lo), std::abs(dist.w1_hi)) * std::sqrt(static_cast<double>(d));
  const double u0 = std::max(std::abs(dist.w2_lo), std::abs(dist.w2_hi));
  const double ymax = std::max(std::abs(bounds.y_lo), std::abs(bounds.y_hi));
  const double xmax = std::max(std::abs(bounds.x_lo), std::abs(bounds.x_hi)) * std::sqrt(static_cast<double>(d));

  // |dC/dt| <= (ymax + B*c) * B gives the linear Gronwall envelope for c;
  // the W2 and W1 envelopes then close with c held at its horizon bound.
  const double cT = (c0 + B * ymax * T) * std::exp(B * B * T);
  const double R = ymax + B * cT;
  const double uT = u0 + R * cT * Bp * B * T;
  const double vT = cT * Bp * uT;
  const double wT = w0 + R * vT * Bp * xmax * T;
  return cT + wT + uT;
}

}  // namespace mfnn
