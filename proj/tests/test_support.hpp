// Shared rigs for the unit and acceptance suites: baseline configs and the
// empirical residual-variance measurement used by the CLT-consistency checks.
#pragma once

#include "cfisac/harness.hpp"

namespace cfisac::testing {

inline ScenarioConfig base_config(Mode m, double pr_over_n0_db = 10.0) {
  ScenarioConfig cfg;
  cfg.set_mode(m);
  cfg.set_pr_over_n0_db(pr_over_n0_db);
  return cfg;
}

struct ResidualStats {
  double ul_emp = 0.0, ul_closed = 0.0;
  double radar_h0_emp = 0.0, radar_h0_closed = 0.0;
  double radar_h1_emp = 0.0, radar_h1_closed = 0.0;
};

/// Synthesizes the defining residual expressions over fresh draws and
/// measures per-element variances against the closed forms. draws counts
/// residual vector draws (snapshots).
inline ResidualStats measure_residual_consistency(const ScenarioConfig& cfg, long draws,
                                                  std::uint64_t seed) {
  const Mode mode = cfg.mode();
  RngStream geo_rng(seed, 0);
  const Geometry geo = build_geometry(cfg, geo_rng);
  const PathlossSet pl = build_pathloss_set(cfg, geo);
  const RadarWaveform wave = make_radar_precoder(cfg);
  const Constellation cst = constellation_for(cfg);
  const int L = cfg.snapshots;
  const long frames = (draws + L - 1) / L;

  ResidualStats out;
  double acc_ul = 0.0, acc_r0 = 0.0, acc_r1 = 0.0;
  long n_ul = 0, n_r0 = 0, n_r1 = 0;
  double dl_power = 0.0;
  for (long f = 0; f < frames; ++f) {
    RngStream base(seed, f + 1);
    RngStream chan = base.fork(1);
    const ChannelRealization ch = draw_channels(cfg, chan);
    RngStream sym = base.fork(2);
    Eigen::MatrixXi dl_syms(cfg.num_dl_ues, L);
    Eigen::MatrixXcd ul_vals(cfg.num_ul_ues, L);
    for (int l = 0; l < L; ++l) {
      for (int k = 0; k < cfg.num_dl_ues; ++k) dl_syms(k, l) = sym.uniform_int(cst.order);
      for (int k = 0; k < cfg.num_ul_ues; ++k) ul_vals(k, l) = cst.point(sym.uniform_int(cst.order));
    }
    RngStream wave_rng = base.fork(3);
    const Eigen::MatrixXcd emit = wave.emission_frame(wave_rng);
    RngStream noise = base.fork(4);
    const DlFrame dl = synthesize_dl(cfg, pl, ch, dl_syms, cst, emit,
                                     cfg.duplex == Duplex::kFd ? &ul_vals : nullptr, noise);
    dl_power += dl.x_c.squaredNorm() / L;

    const Eigen::MatrixXcd resid = ul_residual_frame(cfg, pl, ch, emit, wave.frame_ic_gain(),
                                                     mode == Mode::kSeHd ? nullptr : &dl.x_c);
    acc_ul += resid.squaredNorm();
    n_ul += resid.size();

    CommSignalInputs comm;
    comm.x_c = &dl.x_c;
    comm.ul_syms = &ul_vals;
    RngStream rr = base.fork(5);
    const Eigen::MatrixXcd o0 =
        synthesize_radar_snapshots(cfg, pl, wave, 0, 0, 0.0, emit, comm, rr);
    acc_r0 += o0.squaredNorm();
    n_r0 += o0.size();
    // q = 1 with a zero reflection coefficient keeps the echo off while the
    // hypothesis-gated residual terms stay active.
    const Eigen::MatrixXcd o1 =
        synthesize_radar_snapshots(cfg, pl, wave, 0, 1, 0.0, emit, comm, rr);
    acc_r1 += o1.squaredNorm();
    n_r1 += o1.size();
  }
  const WaveformStats stats = wave.stats(dl_power / frames);
  out.ul_emp = acc_ul / n_ul;
  out.ul_closed = ul_residual_total(mode, cfg, pl, stats);
  out.radar_h0_emp = acc_r0 / n_r0;
  out.radar_h0_closed = radar_residual_total(mode, cfg, pl, stats, 0, 0);
  out.radar_h1_emp = acc_r1 / n_r1;
  out.radar_h1_closed = radar_residual_total(mode, cfg, pl, stats, 1, 0);
  return out;
}

}  // namespace cfisac::testing
