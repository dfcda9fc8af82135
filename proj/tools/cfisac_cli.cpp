/**
 * @file cfisac_cli.cpp
 * @brief Command-line front end: `run` executes a sweep (config file or
 *        figure preset) and writes CSV/plot data, `validate` checks a config,
 *        `selftest` runs the fast invariant suite.
 */
#include "cfisac/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace cfisac;

int cmd_validate(const std::string& config_path) {
  try {
    const ScenarioConfig cfg = load_scenario_config_file(config_path);
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "invalid: " << e.what() << "\n";
    return 1;
  }
  std::cout << "ok\n";
  return 0;
}

int cmd_selftest() {
  int failures = 0;
  auto check = [&](bool ok, const std::string& what) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << what << "\n";
    failures += !ok;
  };

  check(std::abs(detection_threshold(1e-4) - 18.420680743952367) < 1e-9,
        "threshold tau(1e-4) = 18.420681");
  check(std::abs(marcum_q1(0, 2) - std::exp(-2.0)) < 1e-12, "marcum_q1(0,2) = exp(-2)");

  const Eigen::MatrixXcd phi = make_orthonormal_waveforms(3, 100);
  check((phi * phi.adjoint() - Eigen::MatrixXcd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12,
        "waveform Gram = I");

  ScenarioConfig cfg;
  cfg.validate();
  const RadarWaveform w = make_radar_precoder(cfg);
  check((w.transmit_covariance() - Eigen::MatrixXcd::Identity(w.m_star, w.m_star))
            .cwiseAbs()
            .maxCoeff() < 1e-10,
        "radar transmit covariance R_w = I");

  RngStream rng(3, 0);
  Geometry geo = build_geometry(cfg, rng);
  PathlossSet pl = build_pathloss_set(cfg, geo);
  RngStream ch_rng(3, 1);
  ChannelRealization ch = draw_channels(cfg, ch_rng);
  const Eigen::MatrixXcd h_eff = effective_dl_channel(cfg, pl, ch);
  Eigen::VectorXcd s(cfg.num_dl_ues);
  for (int k = 0; k < cfg.num_dl_ues; ++k) s(k) = std::polar(1.0, 0.7 * k);
  const auto [x, alpha] = zf_precoder(h_eff, s);
  const Eigen::VectorXcd rx = h_eff * x;
  double leak = 0.0;
  for (int k = 0; k < cfg.num_dl_ues; ++k) leak = std::max(leak, std::abs(rx(k) - alpha * s(k)));
  check(leak < 1e-9, "ZF null steering");

  SweepSpec sweep;
  sweep.values = {10.0};
  sweep.trials_per_point = 8;
  sweep.modes = {Mode::kSeHd};
  std::ostringstream a, b;
  emit_csv(run_sweep(cfg, sweep, 1), a);
  emit_csv(run_sweep(cfg, sweep, 4), b);
  check(a.str() == b.str(), "deterministic records across worker counts");

  std::cout << (failures ? "selftest FAILED\n" : "selftest passed\n");
  return failures ? 1 : 0;
}

int cmd_run(const std::string& config_path, const std::string& figure, long long trials,
            std::uint64_t seed, int workers, bool fixed_geometry, const std::string& out,
            bool timing, bool have_trials, bool have_seed) {
  std::vector<SweepRecord> records;
  if (!figure.empty()) {
    FigurePreset preset = figure_preset(figure, have_trials ? trials : 1000, have_seed ? seed : 1);
    for (auto& run : preset.runs) {
      if (!config_path.empty()) {
        // Base file may override seeds/counts but not the preset grid.
        const ScenarioConfig base = load_scenario_config_file(config_path);
        run.config.master_seed = have_seed ? seed : base.master_seed;
        run.config.n_mc = have_trials ? trials : base.n_mc;
        run.sweep.trials_per_point = run.config.n_mc;
      }
      auto recs = run_sweep(run.config, run.sweep, workers, fixed_geometry, run.label);
      records.insert(records.end(), recs.begin(), recs.end());
    }
  } else {
    if (config_path.empty()) {
      std::cerr << "run: need --config or --figure\n";
      return 2;
    }
    ScenarioConfig cfg = load_scenario_config_file(config_path);
    if (have_seed) cfg.master_seed = seed;
    if (have_trials) cfg.n_mc = trials;
    SweepSpec sweep;
    sweep.variable = SweepSpec::Variable::kPrOverN0Db;
    sweep.values = {0, 5, 10, 15, 20, 25, 30};
    sweep.trials_per_point = cfg.n_mc;
    sweep.modes = {cfg.mode()};
    records = run_sweep(cfg, sweep, workers, fixed_geometry);
  }
  emit_csv_file(records, out, timing);
  const auto dot = out.rfind('.');
  emit_plot_data(records, dot == std::string::npos ? out : out.substr(0, dot));
  std::cout << "wrote " << records.size() << " records to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cell-free ISAC link-level simulator"};
  app.require_subcommand(1);

  std::string config_path, figure, out = "sweep.csv";
  long long trials = 1000;
  std::uint64_t seed = 1;
  int workers = 0;
  bool fixed_geometry = false, timing = false;

  auto* run = app.add_subcommand("run", "run a sweep and write CSV + plot data");
  run->add_option("--config", config_path, "scenario config file (key = value)");
  run->add_option("--figure", figure, "figure preset name (fig1a..fig6c)");
  auto* topt = run->add_option("--trials", trials, "Monte-Carlo trials per sweep point");
  auto* sopt = run->add_option("--seed", seed, "master seed");
  run->add_option("--workers", workers, "worker threads (0 = hardware)");
  run->add_flag("--fixed-geometry", fixed_geometry, "one geometry for all trials");
  run->add_option("--out", out, "output CSV path")->required();
  run->add_flag("--timing", timing, "include wall-clock column (breaks byte determinism)");

  auto* validate = app.add_subcommand("validate", "check a scenario config");
  validate->add_option("--config", config_path, "scenario config file")->required();

  app.add_subcommand("selftest", "run the fast invariant suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return cmd_run(config_path, figure, trials, seed, workers, fixed_geometry, out, timing,
                     topt->count() > 0, sopt->count() > 0);
    }
    if (validate->parsed()) return cmd_validate(config_path);
    return cmd_selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
