#include "mfnn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mfnn/parallel.hpp"
#include "mfnn/rng.hpp"

namespace mfnn {

namespace {

double dot(const double* a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < b.size(); ++k) s += a[k] * b[k];
  return s;
}

constexpr std::uint64_t kRateTag = 0x72617465;   // study sub-seeds
constexpr std::uint64_t kAblTag = 0x61626c74;

}  // namespace

ErrorReport error_functional(const LimitTrajectory& intermediate, const LimitTrajectory& limit,
                             const Activation& a, std::span<const double> test_grid) {
  if (intermediate.snapshots.size() != limit.snapshots.size())
    throw std::invalid_argument("error_functional: snapshot count mismatch");
  if (intermediate.snapshots.empty()) throw std::invalid_argument("error_functional: empty trajectories");
  for (std::size_t s = 0; s < limit.snapshots.size(); ++s) {
    if (!intermediate.snapshots[s].state || !limit.snapshots[s].state)
      throw std::invalid_argument("error_functional: trajectories must record states");
    if (std::abs(intermediate.snapshots[s].t - limit.snapshots[s].t) > 1e-12)
      throw std::invalid_argument("error_functional: snapshot times differ");
  }
  const LimitState& i0 = *intermediate.snapshots.front().state;
  const LimitState& l0 = *limit.snapshots.front().state;
  if (i0.mw != l0.mw || i0.mu != l0.mu || i0.d != l0.d || i0.mc > l0.mc)
    throw std::invalid_argument("error_functional: pool shapes incompatible");
  for (int i = 0; i < i0.mc; ++i)
    if (i0.C[i] != l0.C[i]) throw std::invalid_argument("error_functional: c pools not nested");
  if (i0.W1 != l0.W1) throw std::invalid_argument("error_functional: w pools differ");
  for (std::size_t k = 0; k < i0.W2.size(); ++k)
    if (i0.W2[k] != l0.W2[k]) throw std::invalid_argument("error_functional: u pools not nested");

  const int n2 = i0.mc, mw = i0.mw, mu = i0.mu, d = i0.d;
  const int grid_n = static_cast<int>(test_grid.size()) / d;
  ErrorReport report;
  for (std::size_t s = 0; s < limit.snapshots.size(); ++s) {
    const LimitState& si = *intermediate.snapshots[s].state;
    const LimitState& sl = *limit.snapshots[s].state;
    ErrorComponents e;
    for (int i = 0; i < n2; ++i) {
      const double dc = si.C[i] - sl.C[i];
      e.dc2 += dc * dc;
    }
    e.dc2 /= n2;
    for (int j = 0; j < mw; ++j) {
      double n = 0.0;
      for (int k = 0; k < d; ++k) {
        const double dw = si.W1[static_cast<std::size_t>(j) * d + k] - sl.W1[static_cast<std::size_t>(j) * d + k];
        n += dw * dw;
      }
      e.dw12 += n;
    }
    e.dw12 /= mw;
    for (int i = 0; i < n2; ++i)
      for (int j = 0; j < mw; ++j)
        for (int k = 0; k < mu; ++k) {
          const double du = si.w2(i, j, k) - sl.w2(i, j, k);
          e.dw22 += du * du;
        }
    e.dw22 /= static_cast<double>(n2) * mw * mu;

    double max_fields = 0.0;
    for (int gi = 0; gi < grid_n; ++gi) {
      const auto x = test_grid.subspan(static_cast<std::size_t>(gi) * d, d);
      const LimitFields fi = compute_fields(si, a, x);
      const LimitFields fl = compute_fields(sl, a, x);
      double h2 = 0.0, z2 = 0.0;
      for (int i = 0; i < n2; ++i) {
        const double dh = fi.H2[i] - fl.H2[i];
        const double dz = fi.Z[i] - fl.Z[i];
        h2 += dh * dh;
        z2 += dz * dz;
      }
      h2 /= n2;
      z2 /= n2;
      e.dh22 = std::max(e.dh22, h2);
      e.dz2 = std::max(e.dz2, z2);
      max_fields = std::max(max_fields, h2 + z2);
      e.g_gap = std::max(e.g_gap, std::abs(fi.g - fl.g));
    }
    e.total = e.dc2 + e.dw12 + e.dw22 + max_fields;
    report.times.push_back(limit.snapshots[s].t);
    report.components.push_back(e);
  }
  return report;
}

RateFit fit_loglog(std::span<const int> widths, std::span<const double> errors) {
  if (widths.size() != errors.size()) throw std::invalid_argument("fit_loglog: length mismatch");
  std::vector<double> lx, ly;
  RateFit fit;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    fit.widths.push_back(widths[i]);
    fit.errors.push_back(errors[i]);
    if (errors[i] > 0.0) {
      lx.push_back(std::log(static_cast<double>(widths[i])));
      ly.push_back(std::log(errors[i]));
    }
  }
  const std::size_t n = lx.size();
  if (n < 3) throw std::runtime_error("fit_loglog: fewer than 3 usable width points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss_res += r * r;
  }
  const double var = (n > 2) ? ss_res / (n - 2) : 0.0;
  fit.slope_halfwidth = 2.0 * std::sqrt(var / sxx);
  return fit;
}

RateFit rate_study(const Dataset& dataset, const Activation& a, const InitDistribution& dist,
                   std::span<const double> test_grid, const RateStudyOptions& opts) {
  if (opts.n2_grid.size() < 4) throw std::runtime_error("rate_study: need a grid of >= 4 widths");
  const int d = dataset.dim();
  const int grid_n = static_cast<int>(test_grid.size()) / d;
  const int R = opts.seeds;
  const int W = static_cast<int>(opts.n2_grid.size());

  // abs-gap[r][widx][x]
  std::vector<std::vector<std::vector<double>>> gaps(
      R, std::vector<std::vector<double>>(W, std::vector<double>(grid_n, 0.0)));

  IntegrateOptions iopts;
  iopts.dt = opts.dt;
  iopts.horizon = opts.horizon;
  iopts.scheme = opts.scheme;

  parallel_for_cells(R, opts.workers, [&](int r) {
    const std::uint64_t seed_r = Rng::derive(opts.seed, {kRateTag, static_cast<std::uint64_t>(r)});
    const ParticlePools pools =
        ParticlePools::draw_two_layer(dist, opts.mc_ref, opts.mw, opts.mu, d, seed_r);
    const LimitTrajectory ref = integrate_limit(pools, dataset, a, iopts, test_grid);
    const std::vector<double>& g_ref = ref.snapshots.back().g_grid;
    for (int widx = 0; widx < W; ++widx) {
      const int n2 = opts.n2_grid[widx];
      const LimitTrajectory inter = intermediate_system(
          std::span<const double>(pools.c.data(), static_cast<std::size_t>(n2)), pools, dataset, a, iopts,
          test_grid);
      const std::vector<double>& g_n2 = inter.snapshots.back().g_grid;
      for (int gi = 0; gi < grid_n; ++gi) gaps[r][widx][gi] = std::abs(g_n2[gi] - g_ref[gi]);
    }
  });

  std::vector<double> errors(W, 0.0);
  for (int widx = 0; widx < W; ++widx) {
    double sup = 0.0;
    for (int gi = 0; gi < grid_n; ++gi) {
      double mean = 0.0;
      for (int r = 0; r < R; ++r) mean += gaps[r][widx][gi];
      sup = std::max(sup, mean / R);
    }
    errors[widx] = sup;
  }
  return fit_loglog(opts.n2_grid, errors);
}

ResidualReport stationarity_residuals(const LimitState& state, const Dataset& dataset, const Activation& a) {
  const int mc = state.mc, mw = state.mw, d = state.d;
  ResidualReport rep;
  rep.R1.assign(mc, 0.0);
  rep.R2.assign(static_cast<std::size_t>(mw) * d, 0.0);
  rep.R3.assign(static_cast<std::size_t>(mc) * mw, 0.0);
  for (int s = 0; s < dataset.size(); ++s) {
    const auto x = dataset.input(s);
    const LimitFields f = compute_fields(state, a, x);
    const double h = dataset.target(s) - f.g;
    for (int i = 0; i < mc; ++i) rep.R1[i] += h * f.H2[i];
    for (int j = 0; j < mw; ++j) {
      const double coef = h * f.V[j] * a.deriv(dot(&state.W1[static_cast<std::size_t>(j) * d], x));
      for (int k = 0; k < d; ++k) rep.R2[static_cast<std::size_t>(j) * d + k] += coef * x[k];
    }
    for (int i = 0; i < mc; ++i) {
      const double ci = h * state.C[i] * a.deriv(f.Z[i]);
      for (int j = 0; j < mw; ++j) rep.R3[static_cast<std::size_t>(i) * mw + j] += ci * f.H1[j];
    }
  }
  const double inv = 1.0 / dataset.size();
  for (double& v : rep.R1) v *= inv;
  for (double& v : rep.R2) v *= inv;
  for (double& v : rep.R3) v *= inv;

  double s1 = 0.0;
  for (double v : rep.R1) s1 += v * v;
  double s2 = 0.0;
  for (int j = 0; j < mw; ++j) {
    double n = 0.0;
    for (int k = 0; k < d; ++k) {
      const double v = rep.R2[static_cast<std::size_t>(j) * d + k];
      n += v * v;
    }
    s2 += n;
  }
  double s3 = 0.0;
  for (double v : rep.R3) s3 += v * v;
  rep.S = s1 / mc + s2 / mw + s3 / (static_cast<double>(mc) * mw);
  return rep;
}

LyapunovSeries lyapunov_check(const LimitTrajectory& traj, const Dataset& dataset, const Activation& a) {
  const std::size_t n = traj.snapshots.size();
  if (n < 3) throw std::invalid_argument("lyapunov_check: need at least 3 snapshots");
  for (const auto& s : traj.snapshots)
    if (!s.state) throw std::invalid_argument("lyapunov_check: trajectory must record states");
  const double h = traj.snapshots[1].t - traj.snapshots[0].t;
  for (std::size_t j = 1; j < n; ++j)
    if (std::abs((traj.snapshots[j].t - traj.snapshots[j - 1].t) - h) > 1e-9)
      throw std::invalid_argument("lyapunov_check: snapshots not uniformly spaced");

  LyapunovSeries series;
  series.t.resize(n);
  series.lbar.resize(n);
  series.dlbar_dt.resize(n);
  series.neg_s.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    series.t[j] = traj.snapshots[j].t;
    series.lbar[j] = traj.snapshots[j].lbar;
    series.neg_s[j] = -stationarity_residuals(*traj.snapshots[j].state, dataset, a).S;
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (j == 0)
      series.dlbar_dt[j] = (series.lbar[1] - series.lbar[0]) / h;
    else if (j == n - 1)
      series.dlbar_dt[j] = (series.lbar[n - 1] - series.lbar[n - 2]) / h;
    else
      series.dlbar_dt[j] = (series.lbar[j + 1] - series.lbar[j - 1]) / (2.0 * h);
  }
  return series;
}

AblationResult ablation_study(const Dataset& dataset, const Activation& a, const InitDistribution& dist,
                              std::span<const double> test_grid, const AblationOptions& opts) {
  const int L = static_cast<int>(opts.ladder.size());
  AblationResult result;
  result.rows.resize(static_cast<std::size_t>(L) * 2);

  parallel_for_cells(L * 2, opts.workers, [&](int cell) {
    const int lidx = cell / 2;
    const bool scaled = (cell % 2) == 0;
    const Widths w = opts.ladder[lidx];
    // Same init and sample sequence for both modes of a ladder point.
    const std::uint64_t cell_seed = Rng::derive(opts.seed, {kAblTag, static_cast<std::uint64_t>(lidx)});
    TwoLayerParams p0 = init_two_layer(dist, w.n1, w.n2, dataset.dim(), cell_seed);
    const TwoLayerParams p_init = p0;

    GroupRates rates;
    if (scaled) {
      rates = learning_rates({ScheduleMode::Scaled, 2, 1.0}, w);
    } else {
      rates = learning_rates({ScheduleMode::Constant, 2, opts.constant_alpha}, w);
    }
    TrainOptions topts;
    topts.horizon = opts.horizon;
    topts.seed = cell_seed;
    topts.record_params = true;
    const FiniteTrajectory traj = train_two_layer(std::move(p0), dataset, a, rates, topts, test_grid);

    const FiniteSnapshot& first = traj.snapshots.front();
    const FiniteSnapshot& last = traj.snapshots.back();
    AblationRow row;
    row.n1 = w.n1;
    row.n2 = w.n2;
    row.mode = scaled ? "scaled" : "constant";
    row.loss0 = first.loss;
    row.loss_final = last.loss;
    row.reduction = (first.loss > 0.0) ? (first.loss - last.loss) / first.loss : 0.0;
    const TwoLayerParams& pT = *last.params2;
    double dc = 0.0, dw1 = 0.0, dw2 = 0.0;
    for (std::size_t i = 0; i < pT.C.size(); ++i) dc += std::abs(pT.C[i] - p_init.C[i]);
    for (std::size_t i = 0; i < pT.W1.size(); ++i) dw1 += std::abs(pT.W1[i] - p_init.W1[i]);
    for (std::size_t i = 0; i < pT.W2.size(); ++i) dw2 += std::abs(pT.W2[i] - p_init.W2[i]);
    row.disp_c = dc / pT.C.size();
    row.disp_w1 = dw1 / pT.W1.size();
    row.disp_w2 = dw2 / pT.W2.size();
    result.rows[cell] = std::move(row);
  });
  return result;
}

MomentTable measure_moments(const TwoLayerParams& params, const LimitState& state, const Activation& a,
                            std::span<const double> probe_x, int fixed_i) {
  if (fixed_i < 0 || fixed_i >= params.n2 || fixed_i >= state.mc)
    throw std::invalid_argument("measure_moments: fixed index out of range");
  if (static_cast<int>(probe_x.size()) != params.d || params.d != state.d)
    throw std::invalid_argument("measure_moments: probe dimension mismatch");

  // f(w1, w2, c): degree <= 2 polynomials composed with the activation.
  struct TestFn {
    const char* name;
    double (*eval)(std::span<const double> w1, double w2, double c, const Activation& a,
                   std::span<const double> x0);
  };
  static const TestFn fns[] = {
      {"one", [](std::span<const double>, double, double, const Activation&, std::span<const double>) { return 1.0; }},
      {"w1_1", [](std::span<const double> w1, double, double, const Activation&, std::span<const double>) { return w1[0]; }},
      {"w1_1_sq", [](std::span<const double> w1, double, double, const Activation&, std::span<const double>) { return w1[0] * w1[0]; }},
      {"sigma_w1_x0", [](std::span<const double> w1, double, double, const Activation& a,
                         std::span<const double> x0) { return a.eval(dot(w1.data(), x0)); }},
      {"w2", [](std::span<const double>, double w2, double, const Activation&, std::span<const double>) { return w2; }},
      {"w2_sq", [](std::span<const double>, double w2, double, const Activation&, std::span<const double>) { return w2 * w2; }},
      {"c_w2", [](std::span<const double>, double w2, double c, const Activation&, std::span<const double>) { return c * w2; }},
      {"c_sigma_w1_x0", [](std::span<const double> w1, double, double c, const Activation& a,
                           std::span<const double> x0) { return c * a.eval(dot(w1.data(), x0)); }},
  };

  MomentTable table;
  for (const TestFn& fn : fns) {
    table.names.emplace_back(fn.name);
    double finite = 0.0;
    for (int j = 0; j < params.n1; ++j)
      finite += fn.eval({&params.W1[static_cast<std::size_t>(j) * params.d], static_cast<std::size_t>(params.d)},
                        params.w2(fixed_i, j), params.C[fixed_i], a, probe_x);
    table.finite_side.push_back(finite / params.n1);
    double particle = 0.0;
    for (int j = 0; j < state.mw; ++j)
      for (int k = 0; k < state.mu; ++k)
        particle += fn.eval({&state.W1[static_cast<std::size_t>(j) * state.d], static_cast<std::size_t>(state.d)},
                            state.w2(fixed_i, j, k), state.C[fixed_i], a, probe_x);
    table.particle_side.push_back(particle / (static_cast<double>(state.mw) * state.mu));
  }
  return table;
}

CouplingSeries coupling_distance(const LimitTrajectory& traj_a, const LimitTrajectory& traj_b,
                                 const Activation& act, std::span<const double> test_grid) {
  if (traj_a.snapshots.size() != traj_b.snapshots.size())
    throw std::invalid_argument("coupling_distance: snapshot count mismatch");
  if (traj_a.snapshots.empty()) throw std::invalid_argument("coupling_distance: empty trajectories");
  CouplingSeries series;
  for (std::size_t s = 0; s < traj_a.snapshots.size(); ++s) {
    if (!traj_a.snapshots[s].state || !traj_b.snapshots[s].state)
      throw std::invalid_argument("coupling_distance: trajectories must record states");
    if (std::abs(traj_a.snapshots[s].t - traj_b.snapshots[s].t) > 1e-12)
      throw std::invalid_argument("coupling_distance: snapshot times differ");
    const LimitState& sa = *traj_a.snapshots[s].state;
    const LimitState& sb = *traj_b.snapshots[s].state;
    if (sa.mc != sb.mc || sa.mw != sb.mw || sa.mu != sb.mu || sa.d != sb.d)
      throw std::invalid_argument("coupling_distance: pool shapes differ");

    double max_c = 0.0, max_w1 = 0.0, max_w2 = 0.0;
    for (int i = 0; i < sa.mc; ++i) {
      const double dc = sa.C[i] - sb.C[i];
      max_c = std::max(max_c, dc * dc);
    }
    for (int j = 0; j < sa.mw; ++j) {
      double n = 0.0;
      for (int k = 0; k < sa.d; ++k) {
        const double dw = sa.W1[static_cast<std::size_t>(j) * sa.d + k] - sb.W1[static_cast<std::size_t>(j) * sa.d + k];
        n += dw * dw;
      }
      max_w1 = std::max(max_w1, n);
    }
    for (std::size_t i = 0; i < sa.W2.size(); ++i) {
      const double du = sa.W2[i] - sb.W2[i];
      max_w2 = std::max(max_w2, du * du);
    }
    double max_x = 0.0;
    const int grid_n = static_cast<int>(test_grid.size()) / sa.d;
    for (int gi = 0; gi < grid_n; ++gi) {
      const auto x = test_grid.subspan(static_cast<std::size_t>(gi) * sa.d, sa.d);
      const LimitFields fa = compute_fields(sa, act, x);
      const LimitFields fb = compute_fields(sb, act, x);
      double max_z = 0.0, max_v = 0.0;
      for (int i = 0; i < sa.mc; ++i) {
        const double dz = fa.Z[i] - fb.Z[i];
        max_z = std::max(max_z, dz * dz);
      }
      for (int j = 0; j < sa.mw; ++j) {
        const double dv = fa.V[j] - fb.V[j];
        max_v = std::max(max_v, dv * dv);
      }
      const double dg = fa.g - fb.g;
      max_x = std::max(max_x, max_z + max_v + dg * dg);
    }
    series.t.push_back(traj_a.snapshots[s].t);
    series.q.push_back(max_c + max_w1 + max_w2 + max_x);
  }
  return series;
}

}  // namespace mfnn
