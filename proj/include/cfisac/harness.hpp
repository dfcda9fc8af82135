/**
 * @file harness.hpp
 * @brief Monte-Carlo experiment runner: deterministic parallel trials, sweep
 *        orchestration, CSV / plot-data emission, and the figure presets.
 *
 * Determinism contract: trial i always consumes RngStream(master_seed, i),
 * and all reductions happen sequentially in trial order, so results are
 * bit-identical for any worker count.
 */
#pragma once

#include "cfisac/kld.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <thread>

namespace cfisac {

struct SweepSpec {
  enum class Variable { kPrOverN0Db, kSigmaIcSq, kBeta, kPowerSplit };
  Variable variable = Variable::kPrOverN0Db;
  std::vector<double> values;
  long long trials_per_point = 1000;
  std::vector<Mode> modes;

  static const char* variable_name(Variable v) {
    switch (v) {
      case Variable::kPrOverN0Db: return "pr_over_n0_db";
      case Variable::kSigmaIcSq: return "sigma_ic_sq";
      case Variable::kBeta: return "beta";
      case Variable::kPowerSplit: return "power_split";
    }
    return "?";
  }
  void validate() const {
    if (values.empty()) throw std::invalid_argument("SweepSpec: values must be nonempty");
    if (trials_per_point < 1) throw std::invalid_argument("SweepSpec: trials must be >= 1");
    if (modes.empty()) throw std::invalid_argument("SweepSpec: modes must be nonempty");
  }
};

struct SweepRecord {
  std::string mode;
  std::string label;
  std::string variable;
  double value = 0.0;
  long long trials = 0;
  double ser_dl = 0.0, ser_ul = 0.0, pd = 0.0, pfa = 0.0;
  double kld_dl_closed = 0.0, kld_ul_closed = 0.0, kld_radar_closed = 0.0;
  double kld_comm_total_closed = 0.0;
  double kld_dl_emp = 0.0, kld_ul_emp = 0.0, kld_radar_emp = 0.0;
  double kld_comm_total_emp = 0.0;
  double wall_ms = 0.0;
};

namespace detail {

struct TrialPartial {
  long long dl_err = 0, dl_tot = 0, ul_err = 0, ul_tot = 0;
  long long det_h1 = 0, det_h0 = 0, bins = 0;
  double kld_dl_closed = 0.0, kld_ul_closed = 0.0, kld_radar_closed = 0.0, kld_comm = 0.0;
  double xi_h1_sum = 0.0;
  std::vector<CloudMoments> dl_clouds;  // K_D * M_d
  std::vector<CloudMoments> ul_clouds;  // K_U * M_d
  int retries = 0;
  bool failed = false;
};

inline constexpr std::uint64_t kForkGeo = 1, kForkChan = 2, kForkSym = 3, kForkNoise = 4,
                               kForkWave = 5, kForkAlpha = 6, kForkRadar = 7, kForkRetry = 64;

inline TrialPartial run_one_trial(const ScenarioConfig& cfg, const Geometry* fixed_geo,
                                  std::uint64_t trial, int attempt) {
  const Mode mode = cfg.mode();
  const int L = cfg.snapshots;
  const int kd = cfg.num_dl_ues;
  const int ku = cfg.num_ul_ues;
  RngStream base(cfg.master_seed, trial);
  const std::uint64_t bump = attempt * kForkRetry;

  TrialPartial out;
  RngStream geo_rng = base.fork(kForkGeo + bump);
  const Geometry geo = fixed_geo ? *fixed_geo : build_geometry(cfg, geo_rng);
  const PathlossSet pl = build_pathloss_set(cfg, geo);

  RngStream chan_rng = base.fork(kForkChan + bump);
  const ChannelRealization ch = draw_channels(cfg, chan_rng);
  const Constellation cst = constellation_for(cfg);
  const RadarWaveform wave = make_radar_precoder(cfg);

  RngStream sym_rng = base.fork(kForkSym + bump);
  Eigen::MatrixXi dl_syms(kd, L);
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < kd; ++k) dl_syms(k, l) = sym_rng.uniform_int(cst.order);
  }
  Eigen::MatrixXi ul_sym_idx(ku, L);
  Eigen::MatrixXcd ul_vals(ku, L);
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < ku; ++k) {
      ul_sym_idx(k, l) = sym_rng.uniform_int(cst.order);
      ul_vals(k, l) = cst.point(ul_sym_idx(k, l));
    }
  }

  RngStream wave_rng = base.fork(kForkWave + bump);
  const Eigen::MatrixXcd radar_emit = wave.emission_frame(wave_rng);

  RngStream noise_rng = base.fork(kForkNoise + bump);
  const DlFrame dl = synthesize_dl(cfg, pl, ch, dl_syms, cst, radar_emit,
                                   cfg.duplex == Duplex::kFd ? &ul_vals : nullptr, noise_rng);
  const UlFrame ul = synthesize_ul_post_ic(cfg, pl, ch, ul_vals, radar_emit,
                                           wave.frame_ic_gain(),
                                           mode == Mode::kSeHd ? nullptr : &dl.x_c, noise_rng);

  // Detection + symbol clouds.
  out.dl_clouds.assign(kd * cst.order, {});
  out.ul_clouds.assign(ku * cst.order, {});
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < kd; ++k) {
      const std::complex<double> y = dl.received(k, l);
      const int tx = dl_syms(k, l);
      out.dl_err += detect_symbol(y / dl.amp(l), cst) != tx;
      ++out.dl_tot;
      out.dl_clouds[k * cst.order + tx].add(y);
    }
  }
  const double sqrt_pu = std::sqrt(cfg.p_ul_per_ue());
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < ku; ++k) {
      const std::complex<double> y = ul.combined(k, l);
      const int tx = ul_sym_idx(k, l);
      out.ul_err += detect_symbol(y / sqrt_pu, cst) != tx;
      ++out.ul_tot;
      out.ul_clouds[k * cst.order + tx].add(y);
    }
  }

  // Closed-form KLDs for this trial's geometry.
  const WaveformStats stats = wave.stats(dl.x_c.squaredNorm() / L);
  KldReport report = closed_form_kld_report(cfg, pl, wave, stats);
  if (cfg.ul_inverse_mode == UlInverseMode::kPerDraw) {
    const double ul_resid = ul_residual_total(mode, cfg, pl, stats);
    for (int k = 0; k < ku; ++k) {
      report.kld_ul[k] = kld_ul(mode, cfg, pl, k, cst, ul_resid, ul.gram_inv_kk(k));
    }
    report.kld_comm_total = kld_comm_total(report.kld_dl, report.kld_ul, kd, ku);
  }
  out.kld_dl_closed = std::accumulate(report.kld_dl.begin(), report.kld_dl.end(), 0.0) / kd;
  out.kld_ul_closed = std::accumulate(report.kld_ul.begin(), report.kld_ul.end(), 0.0) / ku;
  out.kld_comm = report.kld_comm_total;

  // Radar: one bin per trial, round-robin; both hypotheses.
  const int t = static_cast<int>(trial % cfg.num_bins);
  RngStream alpha_rng = base.fork(kForkAlpha + bump);
  const std::complex<double> alpha = std::polar(1.0, 2.0 * M_PI * alpha_rng.uniform());
  const double tau = detection_threshold(cfg.pfa);
  const double tot_h1 = radar_residual_total(mode, cfg, pl, stats, 1, t);
  const double tot_h0 = radar_residual_total(mode, cfg, pl, stats, 0, t);
  CommSignalInputs comm_in;
  comm_in.x_c = &dl.x_c;
  comm_in.ul_syms = &ul_vals;
  RngStream radar_rng = base.fork(kForkRadar + bump);
  const Eigen::MatrixXcd obs1 =
      synthesize_radar_snapshots(cfg, pl, wave, t, 1, alpha, radar_emit, comm_in, radar_rng);
  const DetectionOutcome h1 =
      detect_bin(obs1, wave, t, pl.g_t[t], std::abs(alpha), tot_h1, tau);
  const Eigen::MatrixXcd obs0 =
      synthesize_radar_snapshots(cfg, pl, wave, t, 0, alpha, radar_emit, comm_in, radar_rng);
  const DetectionOutcome h0 =
      detect_bin(obs0, wave, t, pl.g_t[t], std::abs(alpha), tot_h0, tau);
  out.det_h1 += h1.decided;
  out.det_h0 += h0.decided;
  out.bins = 1;
  out.xi_h1_sum = h1.xi;
  out.kld_radar_closed = report.kld_radar[t];
  return out;
}

}  // namespace detail

/// Runs trials_per_point trials for every (mode, sweep value) pair.
/// Trial i always uses stream i, so records are identical for any worker
/// count. Trials hitting a singular channel or placement failure are redrawn
/// (bounded retries); the point aborts if more than 1% of trials fail.
inline std::vector<SweepRecord> run_sweep(const ScenarioConfig& base, const SweepSpec& sweep,
                                          int workers = 0, bool fixed_geometry = false,
                                          const std::string& label = "") {
  base.validate();
  sweep.validate();
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers <= 0) workers = 1;

  std::vector<SweepRecord> records;
  for (const Mode mode : sweep.modes) {
    for (const double value : sweep.values) {
      ScenarioConfig cfg = base;
      cfg.set_mode(mode);
      switch (sweep.variable) {
        case SweepSpec::Variable::kPrOverN0Db: cfg.set_pr_over_n0_db(value); break;
        case SweepSpec::Variable::kSigmaIcSq: cfg.sigma_ic_sq = value; break;
        case SweepSpec::Variable::kBeta: cfg.beta_ap = cfg.beta_radar = value; break;
        case SweepSpec::Variable::kPowerSplit:
          cfg.p_comm = value;
          cfg.p_radar = 1.0 - value - cfg.p_ul;
          break;
      }
      cfg.validate();

      const auto t0 = std::chrono::steady_clock::now();
      const long long n = sweep.trials_per_point;
      std::optional<Geometry> fixed_geo;
      if (fixed_geometry) {
        RngStream geo_rng = RngStream(cfg.master_seed, 0).fork(detail::kForkGeo);
        fixed_geo = build_geometry(cfg, geo_rng);
      }

      std::vector<detail::TrialPartial> partials(n);
      std::atomic<long long> next{0};
      auto work = [&] {
        for (;;) {
          const long long i = next.fetch_add(1);
          if (i >= n) return;
          for (int attempt = 0;; ++attempt) {
            try {
              partials[i] = detail::run_one_trial(cfg, fixed_geo ? &*fixed_geo : nullptr,
                                                  static_cast<std::uint64_t>(i), attempt);
              partials[i].retries = attempt;
              break;
            } catch (const SingularChannelError&) {
              if (attempt >= 4) {
                partials[i].failed = true;
                break;
              }
            } catch (const CapacityError&) {
              if (attempt >= 4) {
                partials[i].failed = true;
                break;
              }
            }
          }
        }
      };
      std::vector<std::thread> pool;
      for (int w = 0; w < workers - 1; ++w) pool.emplace_back(work);
      work();
      for (auto& th : pool) th.join();

      // Sequential, trial-ordered reduction.
      SweepRecord rec;
      rec.mode = mode_label(mode);
      rec.label = label;
      rec.variable = SweepSpec::variable_name(sweep.variable);
      rec.value = value;
      const Constellation cst = constellation_for(cfg);
      std::vector<CloudMoments> dl_clouds(cfg.num_dl_ues * cst.order);
      std::vector<CloudMoments> ul_clouds(cfg.num_ul_ues * cst.order);
      long long dl_err = 0, dl_tot = 0, ul_err = 0, ul_tot = 0, det1 = 0, det0 = 0, bins = 0;
      long long failed = 0;
      double kdl = 0, kul = 0, krad = 0, kcomm = 0, xi1 = 0;
      for (const auto& tp : partials) {
        if (tp.failed) {
          ++failed;
          continue;
        }
        dl_err += tp.dl_err;
        dl_tot += tp.dl_tot;
        ul_err += tp.ul_err;
        ul_tot += tp.ul_tot;
        det1 += tp.det_h1;
        det0 += tp.det_h0;
        bins += tp.bins;
        kdl += tp.kld_dl_closed;
        kul += tp.kld_ul_closed;
        krad += tp.kld_radar_closed;
        kcomm += tp.kld_comm;
        xi1 += tp.xi_h1_sum;
        for (std::size_t i = 0; i < dl_clouds.size(); ++i) dl_clouds[i].merge(tp.dl_clouds[i]);
        for (std::size_t i = 0; i < ul_clouds.size(); ++i) ul_clouds[i].merge(tp.ul_clouds[i]);
      }
      if (failed * 100 > n) {
        throw std::runtime_error("run_sweep: more than 1% of trials failed at " + rec.mode +
                                 " value " + std::to_string(value));
      }
      const long long ok = n - failed;
      rec.trials = ok;
      rec.ser_dl = dl_tot ? static_cast<double>(dl_err) / dl_tot : 0.0;
      rec.ser_ul = ul_tot ? static_cast<double>(ul_err) / ul_tot : 0.0;
      rec.pd = bins ? static_cast<double>(det1) / bins : 0.0;
      rec.pfa = bins ? static_cast<double>(det0) / bins : 0.0;
      rec.kld_dl_closed = kdl / ok;
      rec.kld_ul_closed = kul / ok;
      rec.kld_radar_closed = krad / ok;
      rec.kld_comm_total_closed = kcomm / ok;
      auto mean_cloud_kld = [&](const std::vector<CloudMoments>& clouds, int ues,
                                CloudVariance conv) {
        double acc = 0.0;
        for (int k = 0; k < ues; ++k) {
          std::vector<CloudMoments> per(clouds.begin() + k * cst.order,
                                        clouds.begin() + (k + 1) * cst.order);
          acc += empirical_psk_kld(per, conv);
        }
        return acc / ues;
      };
      rec.kld_dl_emp = mean_cloud_kld(dl_clouds, cfg.num_dl_ues, CloudVariance::kPerDimension);
      rec.kld_ul_emp = mean_cloud_kld(ul_clouds, cfg.num_ul_ues, CloudVariance::kTotalAsDim);
      {
        const double kd_n = cfg.num_dl_ues, ku_n = cfg.num_ul_ues;
        rec.kld_comm_total_emp = (kd_n * kd_n * rec.kld_dl_emp + ku_n * ku_n * rec.kld_ul_emp) /
                                 (kd_n + ku_n);
      }
      const double lambda_hat = std::max(0.0, xi1 / ok - 2.0);
      rec.kld_radar_emp = lambda_hat / (4.0 * cfg.snapshots * std::log(2.0));
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                        .count();
      records.push_back(std::move(rec));
    }
  }
  return records;
}

namespace detail {

inline std::string format_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace detail

/// Header row then one row per record, floats at 9 significant digits.
/// Timing is off by default so output bytes are a pure function of
/// (config, seed).
inline void emit_csv(const std::vector<SweepRecord>& records, std::ostream& os,
                     bool with_timing = false) {
  os << "mode,label,variable,value,trials,ser_dl,ser_ul,pd,pfa,kld_dl_closed,kld_ul_closed,"
        "kld_radar_closed,kld_comm_total_closed,kld_dl_emp,kld_ul_emp,kld_radar_emp,"
        "kld_comm_total_emp";
  if (with_timing) os << ",wall_ms";
  os << "\n";
  for (const auto& r : records) {
    os << r.mode << ',' << r.label << ',' << r.variable << ',' << detail::format_g9(r.value) << ','
       << r.trials << ',' << detail::format_g9(r.ser_dl) << ',' << detail::format_g9(r.ser_ul)
       << ',' << detail::format_g9(r.pd) << ',' << detail::format_g9(r.pfa) << ','
       << detail::format_g9(r.kld_dl_closed) << ',' << detail::format_g9(r.kld_ul_closed) << ','
       << detail::format_g9(r.kld_radar_closed) << ','
       << detail::format_g9(r.kld_comm_total_closed) << ',' << detail::format_g9(r.kld_dl_emp)
       << ',' << detail::format_g9(r.kld_ul_emp) << ',' << detail::format_g9(r.kld_radar_emp)
       << ',' << detail::format_g9(r.kld_comm_total_emp);
    if (with_timing) os << ',' << detail::format_g9(r.wall_ms);
    os << "\n";
  }
}

inline void emit_csv_file(const std::vector<SweepRecord>& records, const std::string& path,
                          bool with_timing = false) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("emit_csv: cannot open " + path);
  emit_csv(records, f, with_timing);
}

/// Per-metric files with per-(mode,label) column blocks: sweep value,
/// empirical, and the closed form where one exists.
inline void emit_plot_data(const std::vector<SweepRecord>& records, const std::string& base_path) {
  struct MetricCol {
    const char* name;
    double SweepRecord::*emp;
    double SweepRecord::*closed;  // nullptr-equivalent: same member
    bool has_closed;
  };
  const std::vector<MetricCol> metrics = {
      {"ser_dl", &SweepRecord::ser_dl, &SweepRecord::ser_dl, false},
      {"ser_ul", &SweepRecord::ser_ul, &SweepRecord::ser_ul, false},
      {"pd", &SweepRecord::pd, &SweepRecord::pd, false},
      {"pfa", &SweepRecord::pfa, &SweepRecord::pfa, false},
      {"kld_dl", &SweepRecord::kld_dl_emp, &SweepRecord::kld_dl_closed, true},
      {"kld_ul", &SweepRecord::kld_ul_emp, &SweepRecord::kld_ul_closed, true},
      {"kld_radar", &SweepRecord::kld_radar_emp, &SweepRecord::kld_radar_closed, true},
      {"kld_comm_total", &SweepRecord::kld_comm_total_emp, &SweepRecord::kld_comm_total_closed,
       true},
  };
  for (const auto& m : metrics) {
    std::ofstream f(base_path + "_" + m.name + ".dat", std::ios::binary);
    if (!f) throw std::runtime_error("emit_plot_data: cannot open output");
    std::vector<std::string> seen;
    for (const auto& r : records) {
      const std::string key = r.mode + (r.label.empty() ? "" : "/" + r.label);
      if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
      seen.push_back(key);
      f << "# " << key << (m.has_closed ? "  (value, empirical, closed-form)\n"
                                        : "  (value, empirical)\n");
      for (const auto& q : records) {
        if (q.mode + (q.label.empty() ? "" : "/" + q.label) != key) continue;
        f << detail::format_g9(q.value) << ' ' << detail::format_g9(q.*(m.emp));
        if (m.has_closed) f << ' ' << detail::format_g9(q.*(m.closed));
        f << "\n";
      }
      f << "\n";
    }
  }
}

/// One labelled run of a figure preset.
struct PresetRun {
  std::string label;
  ScenarioConfig config;
  SweepSpec sweep;
};
struct FigurePreset {
  std::string name;
  std::vector<PresetRun> runs;
};

/// Parameterizations of the six reference figures (both duplexities per
/// panel): P_r/N0 swept 0..30 dB in 5 dB steps with the stated impairment
/// grids.
inline FigurePreset figure_preset(const std::string& name, long long trials = 1000,
                                  std::uint64_t seed = 1) {
  static const std::vector<std::string> known = {"fig1a", "fig1b", "fig2a", "fig2b", "fig3a",
                                                 "fig3b", "fig3c", "fig4a", "fig4b", "fig5a",
                                                 "fig5b", "fig6a", "fig6b", "fig6c"};
  if (std::find(known.begin(), known.end(), name) == known.end()) {
    throw std::invalid_argument("figure_preset: unknown preset " + name);
  }
  const int fig = name[3] - '0';
  const bool shared = fig >= 4;

  ScenarioConfig base;
  base.deployment = shared ? Deployment::kShared : Deployment::kSeparated;
  base.pathloss_mode = PathlossMode::kUnit;
  base.n_mc = trials;
  base.master_seed = seed;

  SweepSpec sweep;
  sweep.variable = SweepSpec::Variable::kPrOverN0Db;
  sweep.values = {0, 5, 10, 15, 20, 25, 30};
  sweep.trials_per_point = trials;

  FigurePreset out;
  out.name = name;
  auto add = [&](const std::string& label, Duplex dup, double sigma_ic, double beta, double pc) {
    PresetRun run;
    run.label = label;
    run.config = base;
    run.config.duplex = dup;
    run.config.sigma_ic_sq = sigma_ic;
    run.config.beta_ap = run.config.beta_radar = beta;
    run.config.p_ul = 0.1;
    run.config.p_comm = pc;
    run.config.p_radar = 1.0 - pc - run.config.p_ul;
    run.sweep = sweep;
    run.sweep.modes = {run.config.mode()};
    out.runs.push_back(std::move(run));
  };

  const int variant = fig == 4 ? 1 : (fig > 3 ? fig - 3 : fig);
  if (variant == 1) {  // IC-quality grid
    for (const double ic : {1e-6, 1e-3, 1e-1}) {
      add("hd-ic" + detail::format_g9(ic), Duplex::kHd, ic, 1e-3, 0.8);
      add("fd-ic" + detail::format_g9(ic), Duplex::kFd, ic, 1e-3, 0.8);
    }
  } else if (variant == 2) {  // SI-leakage grid
    add("hd", Duplex::kHd, 1e-4, 1e-5, 0.8);
    for (const double b : {1e-5, 1e-3, 1e-1}) {
      add("fd-beta" + detail::format_g9(b), Duplex::kFd, 1e-4, b, 0.8);
    }
  } else {  // power-allocation grid
    for (const double pc : {0.8, 0.4, 0.2}) {
      add("hd-pc" + detail::format_g9(pc), Duplex::kHd, 1e-3, 1e-4, pc);
      add("fd-pc" + detail::format_g9(pc), Duplex::kFd, 1e-3, 1e-4, pc);
    }
  }
  return out;
}

}  // namespace cfisac
