// Experiment runner: every study behind one subcommand, one config file,
// deterministic artifacts named <subcommand>-<config hash>.{json,csv}.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mfnn/analysis.hpp"
#include "mfnn/artifacts.hpp"
#include "mfnn/config.hpp"

using json = nlohmann::ordered_json;
using namespace mfnn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitBand = 3;

struct Task {
  ExperimentConfig cfg;
  Activation act = Activation::tanh_fn();
  Dataset dataset;
  std::vector<double> grid;
};

Task make_task(const ExperimentConfig& cfg) {
  Dataset dataset =
      Dataset::generate(cfg.teacher_spec(), cfg.d, cfg.samples, cfg.domain_bounds(), cfg.seed);
  std::vector<double> grid = draw_test_grid(cfg.grid_size, cfg.d, cfg.domain_bounds(), cfg.seed);
  return Task{cfg, Activation::from_name(cfg.activation), std::move(dataset), std::move(grid)};
}

json base_artifact(const ExperimentConfig& cfg, const std::string& subcommand) {
  json j;
  j["subcommand"] = subcommand;
  j["config_hash"] = cfg.hash();
  j["config"] = cfg.canonical();
  return j;
}

void emit(const ExperimentConfig& cfg, const std::string& subcommand, const json& j,
          const CsvTable& csv, const std::string& summary) {
  const std::string dir = resolve_output_dir(cfg.output_dir);
  const std::string stem = subcommand + "-" + cfg.hash();
  write_artifact(dir, stem, "json", j.dump(2) + "\n");
  write_artifact(dir, stem, "csv", csv.render());
  std::printf("%s: %s -> %s/%s.{json,csv}\n", subcommand.c_str(), summary.c_str(), dir.c_str(),
              stem.c_str());
}

int run_train(const Task& task) {
  const ExperimentConfig& cfg = task.cfg;
  GroupRates rates = learning_rates({cfg.schedule_mode(), cfg.depth, cfg.constant_alpha},
                                    {cfg.n1, cfg.n2, cfg.n3});
  TrainOptions topts;
  topts.horizon = cfg.horizon;
  topts.snapshot_times = cfg.snapshot_times;
  topts.seed = cfg.seed;

  FiniteTrajectory traj;
  if (cfg.depth == 2) {
    traj = train_two_layer(init_two_layer(cfg.init_distribution(), cfg.n1, cfg.n2, cfg.d, cfg.seed),
                           task.dataset, task.act, rates, topts, task.grid);
  } else {
    traj = train_three_layer(
        init_three_layer(cfg.init_distribution(), cfg.n1, cfg.n2, cfg.n3, cfg.d, cfg.seed),
        task.dataset, task.act, rates, topts, task.grid);
  }

  json j = base_artifact(cfg, "train");
  CsvTable csv;
  csv.header = {"t", "step", "loss", "c_sup", "w1_sup", "w2_sup", "w3_sup"};
  json records = json::array();
  for (const FiniteSnapshot& s : traj.snapshots) {
    records.push_back({{"t", s.t},
                       {"step", s.step},
                       {"loss", s.loss},
                       {"g_on_grid", s.g_grid},
                       {"param_norms",
                        {{"c_sup", s.c_sup}, {"w1_sup", s.w1_sup}, {"w2_sup", s.w2_sup}, {"w3_sup", s.w3_sup}}}});
    csv.rows.push_back({s.t, static_cast<double>(s.step), s.loss, s.c_sup, s.w1_sup, s.w2_sup, s.w3_sup});
  }
  j["records"] = std::move(records);
  char summary[128];
  std::snprintf(summary, sizeof(summary), "loss %.6g -> %.6g over %zu snapshots",
                traj.snapshots.front().loss, traj.snapshots.back().loss, traj.snapshots.size());
  emit(cfg, "train", j, csv, summary);
  return kExitOk;
}

int run_limit(const Task& task) {
  const ExperimentConfig& cfg = task.cfg;
  IntegrateOptions iopts;
  iopts.dt = cfg.dt;
  iopts.horizon = cfg.horizon;
  iopts.scheme = cfg.scheme_enum();
  iopts.snapshot_times = cfg.snapshot_times;

  json j = base_artifact(cfg, "limit");
  CsvTable csv;
  csv.header = {"t", "lbar"};
  json records = json::array();
  double l0 = 0.0, lT = 0.0;
  std::size_t count = 0;
  if (cfg.depth == 2) {
    const ParticlePools pools =
        ParticlePools::draw_two_layer(cfg.init_distribution(), cfg.mc, cfg.mw, cfg.mu, cfg.d, cfg.seed);
    const LimitTrajectory traj = integrate_limit(pools, task.dataset, task.act, iopts, task.grid);
    for (const LimitSnapshot& s : traj.snapshots) {
      records.push_back({{"t", s.t}, {"lbar", s.lbar}, {"g_on_grid", s.g_grid}});
      csv.rows.push_back({s.t, s.lbar});
    }
    l0 = traj.snapshots.front().lbar;
    lT = traj.snapshots.back().lbar;
    count = traj.snapshots.size();
  } else {
    const ParticlePools pools = ParticlePools::draw_three_layer(cfg.init_distribution(), cfg.mc, cfg.mv,
                                                                cfg.mw, cfg.mu, cfg.d, cfg.seed);
    const LimitTrajectory3 traj =
        integrate_limit_three_layer(pools, task.dataset, task.act, iopts, task.grid);
    for (const LimitSnapshot3& s : traj.snapshots) {
      records.push_back({{"t", s.t}, {"lbar", s.lbar}, {"g_on_grid", s.g_grid}});
      csv.rows.push_back({s.t, s.lbar});
    }
    l0 = traj.snapshots.front().lbar;
    lT = traj.snapshots.back().lbar;
    count = traj.snapshots.size();
  }
  j["records"] = std::move(records);
  char summary[128];
  std::snprintf(summary, sizeof(summary), "lbar %.6g -> %.6g over %zu snapshots", l0, lT, count);
  emit(cfg, "limit", j, csv, summary);
  return kExitOk;
}

int run_compare(const Task& task) {
  const ExperimentConfig& cfg = task.cfg;
  if (cfg.n2 > cfg.mc)
    throw std::invalid_argument("config.n2: must not exceed mc for the comparison study");
  IntegrateOptions iopts;
  iopts.dt = cfg.dt;
  iopts.horizon = cfg.horizon;
  iopts.scheme = cfg.scheme_enum();
  iopts.snapshot_times = cfg.snapshot_times;
  iopts.record_states = true;

  const ParticlePools pools =
      ParticlePools::draw_two_layer(cfg.init_distribution(), cfg.mc, cfg.mw, cfg.mu, cfg.d, cfg.seed);
  const LimitTrajectory limit = integrate_limit(pools, task.dataset, task.act, iopts, task.grid);
  const LimitTrajectory inter = intermediate_system(
      std::span<const double>(pools.c.data(), static_cast<std::size_t>(cfg.n2)), pools, task.dataset,
      task.act, iopts, task.grid);
  const ErrorReport report = error_functional(inter, limit, task.act, task.grid);

  json j = base_artifact(cfg, "compare");
  CsvTable csv;
  csv.header = {"t", "dc2", "dw12", "dw22", "dh22", "dz2", "total", "g_gap"};
  json records = json::array();
  for (std::size_t s = 0; s < report.times.size(); ++s) {
    const ErrorComponents& e = report.components[s];
    records.push_back({{"t", report.times[s]},
                       {"dc2", e.dc2},
                       {"dw12", e.dw12},
                       {"dw22", e.dw22},
                       {"dh22", e.dh22},
                       {"dz2", e.dz2},
                       {"total", e.total},
                       {"g_gap", e.g_gap}});
    csv.rows.push_back({report.times[s], e.dc2, e.dw12, e.dw22, e.dh22, e.dz2, e.total, e.g_gap});
  }
  j["records"] = std::move(records);
  char summary[128];
  std::snprintf(summary, sizeof(summary), "final error %.6g (g gap %.6g) at n2=%d vs mc=%d",
                report.components.back().total, report.components.back().g_gap, cfg.n2, cfg.mc);
  emit(cfg, "compare", j, csv, summary);
  return kExitOk;
}

int run_rate_study(const Task& task) {
  const ExperimentConfig& cfg = task.cfg;
  RateStudyOptions opts;
  opts.n2_grid = cfg.n2_grid;
  opts.mc_ref = cfg.mc_ref;
  opts.mw = cfg.mw;
  opts.mu = cfg.mu;
  opts.seeds = cfg.seeds;
  opts.dt = cfg.dt;
  opts.horizon = cfg.horizon;
  opts.scheme = cfg.scheme_enum();
  opts.seed = cfg.seed;
  opts.workers = cfg.workers;
  const RateFit fit = rate_study(task.dataset, task.act, cfg.init_distribution(), task.grid, opts);

  json j = base_artifact(cfg, "rate-study");
  j["widths"] = fit.widths;
  j["errors"] = fit.errors;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["slope_halfwidth"] = fit.slope_halfwidth;
  CsvTable csv;
  csv.header = {"n2", "error"};
  for (std::size_t i = 0; i < fit.widths.size(); ++i)
    csv.rows.push_back({static_cast<double>(fit.widths[i]), fit.errors[i]});
  char summary[128];
  std::snprintf(summary, sizeof(summary), "slope %.4f (+-%.4f)", fit.slope, fit.slope_halfwidth);
  emit(cfg, "rate-study", j, csv, summary);
  if (fit.slope < -0.65 || fit.slope > -0.35) {
    std::fprintf(stderr, "rate-study: slope %.4f outside the acceptance band [-0.65, -0.35]\n", fit.slope);
    return kExitBand;
  }
  return kExitOk;
}

int run_lyapunov(const Task& task) {
  const ExperimentConfig& cfg = task.cfg;
  IntegrateOptions iopts;
  iopts.dt = cfg.dt;
  iopts.horizon = cfg.horizon;
  iopts.scheme = cfg.scheme_enum();
  iopts.snapshot_every_step = true;
  iopts.record_states = true;

  const ParticlePools pools =
      ParticlePools::draw_two_layer(cfg.init_distribution(), cfg.mc, cfg.mw, cfg.mu, cfg.d, cfg.seed);
  const LimitTrajectory traj = integrate_limit(pools, task.dataset, task.act, iopts, task.grid);
  const LyapunovSeries series = lyapunov_check(traj, task.dataset, task.act);

  json j = base_artifact(cfg, "lyapunov");
  j["t"] = series.t;
  j["lbar"] = series.lbar;
  j["dlbar_dt"] = series.dlbar_dt;
  j["neg_s"] = series.neg_s;
  CsvTable csv;
  csv.header = {"t", "lbar", "dlbar_dt", "neg_s"};
  double max_gap = 0.0;
  for (std::size_t i = 0; i < series.t.size(); ++i) {
    csv.rows.push_back({series.t[i], series.lbar[i], series.dlbar_dt[i], series.neg_s[i]});
    if (i > 0 && i + 1 < series.t.size())
      max_gap = std::max(max_gap, std::abs(series.dlbar_dt[i] - series.neg_s[i]));
  }
  char summary[160];
  std::snprintf(summary, sizeof(summary), "lbar %.6g -> %.6g, max |d(lbar)/dt + S| = %.3g",
                series.lbar.front(), series.lbar.back(), max_gap);
  emit(cfg, "lyapunov", j, csv, summary);
  return kExitOk;
}

int run_ablation(const Task& task) {
  const ExperimentConfig& cfg = task.cfg;
  AblationOptions opts;
  opts.ladder.clear();
  for (int w : cfg.ladder) opts.ladder.push_back({w, w, 1});
  opts.horizon = cfg.ablation_horizon;
  opts.constant_alpha = cfg.constant_alpha;
  opts.seed = cfg.seed;
  opts.workers = cfg.workers;
  const AblationResult result = ablation_study(task.dataset, task.act, cfg.init_distribution(),
                                               task.grid, opts);

  json j = base_artifact(cfg, "ablation");
  CsvTable csv;
  csv.header = {"n1", "n2", "scaled", "loss0", "loss_final", "reduction", "disp_c", "disp_w1", "disp_w2"};
  json rows = json::array();
  for (const AblationRow& r : result.rows) {
    rows.push_back({{"n1", r.n1},
                    {"n2", r.n2},
                    {"mode", r.mode},
                    {"loss0", r.loss0},
                    {"loss_final", r.loss_final},
                    {"reduction", r.reduction},
                    {"disp_c", r.disp_c},
                    {"disp_w1", r.disp_w1},
                    {"disp_w2", r.disp_w2}});
    csv.rows.push_back({static_cast<double>(r.n1), static_cast<double>(r.n2),
                        r.mode == "scaled" ? 1.0 : 0.0, r.loss0, r.loss_final, r.reduction, r.disp_c,
                        r.disp_w1, r.disp_w2});
  }
  j["rows"] = std::move(rows);
  char summary[128];
  std::snprintf(summary, sizeof(summary), "%zu ladder cells x 2 schedules", result.rows.size() / 2);
  emit(cfg, "ablation", j, csv, summary);
  return kExitOk;
}

int run_moments(const Task& task) {
  const ExperimentConfig& cfg = task.cfg;
  const ParticlePools pools =
      ParticlePools::draw_two_layer(cfg.init_distribution(), cfg.mc, cfg.mw, cfg.mu, cfg.d, cfg.seed);
  const LimitState state = LimitState::from_pools(pools);

  // Embed the particle ensemble as a width-(mw*mu) network so both sides of
  // the table describe the same initial empirical measure.
  TwoLayerParams params;
  params.n1 = cfg.mw * cfg.mu;
  params.n2 = cfg.mc;
  params.d = cfg.d;
  params.C = pools.c;
  params.W1.resize(static_cast<std::size_t>(params.n1) * cfg.d);
  for (int jm = 0; jm < cfg.mw; ++jm)
    for (int k = 0; k < cfg.mu; ++k)
      for (int dd = 0; dd < cfg.d; ++dd)
        params.w1(jm * cfg.mu + k, dd) = pools.w[static_cast<std::size_t>(jm) * cfg.d + dd];
  params.W2.resize(static_cast<std::size_t>(cfg.mc) * params.n1);
  for (int i = 0; i < cfg.mc; ++i)
    for (int jm = 0; jm < cfg.mw; ++jm)
      for (int k = 0; k < cfg.mu; ++k)
        params.w2(i, jm * cfg.mu + k) = state.w2(i, jm, k);

  std::vector<double> probe(task.grid.begin(), task.grid.begin() + cfg.d);
  const MomentTable table = measure_moments(params, state, task.act, probe, 0);

  json j = base_artifact(cfg, "moments");
  CsvTable csv;
  csv.header = {"finite_side", "particle_side"};
  json rows = json::array();
  double max_gap = 0.0;
  for (std::size_t i = 0; i < table.names.size(); ++i) {
    rows.push_back({{"test_function", table.names[i]},
                    {"finite_side", table.finite_side[i]},
                    {"particle_side", table.particle_side[i]}});
    csv.rows.push_back({table.finite_side[i], table.particle_side[i]});
    max_gap = std::max(max_gap, std::abs(table.finite_side[i] - table.particle_side[i]));
  }
  j["rows"] = std::move(rows);
  char summary[128];
  std::snprintf(summary, sizeof(summary), "%zu test functions, max gap %.3g", table.names.size(), max_gap);
  emit(cfg, "moments", j, csv, summary);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field network laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  int workers_flag = 0;
  app.fallthrough();  // allow -c/-w after the subcommand name
  app.add_option("-c,--config", config_path, "experiment config file (key = value lines)");
  app.add_option("-w,--workers", workers_flag, "worker threads for study fan-out (overrides config)");

  const std::vector<std::pair<std::string, int (*)(const Task&)>> subs = {
      {"train", run_train},       {"limit", run_limit},     {"compare", run_compare},
      {"rate-study", run_rate_study}, {"lyapunov", run_lyapunov}, {"ablation", run_ablation},
      {"moments", run_moments}};
  for (const auto& [name, fn] : subs) {
    (void)fn;
    app.add_subcommand(name);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(config_path);
    if (workers_flag > 0) cfg.workers = workers_flag;
    cfg.validate();
    Task task = make_task(cfg);
    for (const auto& [name, fn] : subs)
      if (app.get_subcommand(name)->parsed()) return fn(task);
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "run failed: %s\n", e.what());
    return kExitDiverged;
  }
}
