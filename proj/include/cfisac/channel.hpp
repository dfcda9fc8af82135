/**
 * @file channel.hpp
 * @brief Per-trial small-scale fading / estimation-error draws and the
 *        closed-form residual interference-plus-noise variances for the four
 *        operating modes.
 *
 * All variances are total complex variances (E|x|^2). The closed forms below
 * are the exact per-element second moments of the defining residual
 * expressions, averaged over the receive dimension; the simulator synthesizes
 * those same expressions from explicit error draws, so the two sides are
 * testable against each other.
 */
#pragma once

#include "cfisac/scenario.hpp"

namespace cfisac {

/// One Monte-Carlo draw of every small-scale matrix the selected mode needs.
/// Matrices a mode does not use stay empty. Estimation-error companions carry
/// total variance sigma_ic_sq each.
struct ChannelRealization {
  // Communication channels (AP-major: rows = APs serving comm).
  Eigen::MatrixXcd h_dl;      // M_eff_c x K_D
  Eigen::MatrixXcd h_ul;      // M_eff_c x K_U
  Eigen::MatrixXcd f_clutter; // SE: M_r x K_D radar-AP -> DL UE; SH: M x K_D clutter
  Eigen::MatrixXcd h_ue2ue;   // K_D x K_U (FD only)

  // Radar-AP -> comm-AP backscatter (role of H_R2C in HD, H_R in FD, and the
  // M x M composite-backscatter channel in shared modes).
  Eigen::MatrixXcd h_r2c;
  Eigen::MatrixXcd h_si;      // comm-AP self-interference (FD only)

  // Channels seen by the radar receive path.
  Eigen::MatrixXcd g_r_ul;    // K_U x M_eff_r UL UE -> radar AP
  Eigen::MatrixXcd g_r_dl;    // M_eff_c x M_eff_r comm-AP -> radar-AP (SE-FD)
  Eigen::MatrixXcd h_r2i;     // M_r x M_r radar self-interference (SE-FD)

  // Estimation-error companions for the channels the CPU cancels.
  Eigen::MatrixXcd err_r2c;   // backscatter IC error (UL path)
  Eigen::MatrixXcd err_si;    // comm SI IC error (FD UL path)
  Eigen::MatrixXcd err_g_ul;  // UL-interference IC error (radar path)
  Eigen::MatrixXcd err_g_dl;  // DL-interference IC error (radar path, FD/shared)
  Eigen::MatrixXcd err_r2i;   // radar SI IC error (SE-FD)
  Eigen::MatrixXcd err_si_sh; // shared-FD SI IC error (M x M)
};

inline ChannelRealization draw_channels(const ScenarioConfig& c, RngStream& rng) {
  ChannelRealization ch;
  const Mode mode = c.mode();
  const int mc = c.m_eff_comm();
  const int mr = c.m_eff_radar();
  const double hv = c.h_total_variance;
  const double fv = c.f_total_variance;
  const double uv = c.u_total_variance;
  const double sv = c.sigma_ic_sq;

  auto err = [&](Eigen::Index r, Eigen::Index col) -> Eigen::MatrixXcd {
    if (sv == 0.0) return Eigen::MatrixXcd::Zero(r, col);
    return sample_complex_gaussian(r, col, sv, rng);
  };

  ch.h_dl = sample_complex_gaussian(mc, c.num_dl_ues, hv, rng);
  ch.h_ul = sample_complex_gaussian(mc, c.num_ul_ues, hv, rng);
  ch.g_r_ul = sample_complex_gaussian(c.num_ul_ues, mr, hv, rng);
  ch.err_g_ul = err(c.num_ul_ues, mr);

  switch (mode) {
    case Mode::kSeHd:
      ch.f_clutter = sample_complex_gaussian(mr, c.num_dl_ues, fv, rng);
      ch.h_r2c = sample_complex_gaussian(mc, mr, hv, rng);
      ch.err_r2c = err(mc, mr);
      break;
    case Mode::kSeFd:
      ch.f_clutter = sample_complex_gaussian(mr, c.num_dl_ues, fv, rng);
      ch.h_r2c = sample_complex_gaussian(mc, mr, hv, rng);
      ch.err_r2c = err(mc, mr);
      ch.h_ue2ue = sample_complex_gaussian(c.num_dl_ues, c.num_ul_ues, uv, rng);
      ch.h_si = sample_complex_gaussian(mc, mc, hv, rng);
      ch.err_si = err(mc, mc);
      ch.g_r_dl = sample_complex_gaussian(mc, mr, hv, rng);
      ch.err_g_dl = err(mc, mr);
      ch.h_r2i = sample_complex_gaussian(mr, mr, hv, rng);
      ch.err_r2i = err(mr, mr);
      break;
    case Mode::kShHd:
      ch.f_clutter = sample_complex_gaussian(mc, c.num_dl_ues, fv, rng);
      ch.h_r2c = sample_complex_gaussian(mc, mc, hv, rng);
      ch.err_r2c = err(mc, mc);
      ch.err_g_dl = err(mc, mc);  // composite-waveform SI at the radar path
      break;
    case Mode::kShFd:
      ch.f_clutter = sample_complex_gaussian(mc, c.num_dl_ues, fv, rng);
      ch.h_r2c = sample_complex_gaussian(mc, mc, hv, rng);
      ch.err_r2c = err(mc, mc);
      ch.err_g_dl = err(mc, mc);
      ch.h_ue2ue = sample_complex_gaussian(c.num_dl_ues, c.num_ul_ues, uv, rng);
      ch.h_si = sample_complex_gaussian(mc, mc, hv, rng);
      ch.err_si_sh = err(mc, mc);
      ch.g_r_dl = sample_complex_gaussian(mc, mc, hv, rng);
      break;
  }
  return ch;
}

/// Measured waveform statistics the variance evaluators consume.
struct WaveformStats {
  double radar_frame_gain = 0.0;  // G = 2L frame IC residual gain
  double radar_ap_power = 1.0;    // E|x~_{m,l}|^2 of the unit emission
  double dl_tx_power = 0.0;       // E||x_c,l||^2 (P_c when the ZF frame is normalized)
  double tr_rt = 0.0;             // per-beam precoder covariance trace
  double tr_rx = 0.0;             // tr of the emission covariance (M*)
};

/// The eight closed-form residual variances, all totals.
struct ModeVariances {
  std::vector<double> dl_zeta_total;  // per DL UE, includes noise
  double ul_omega_total = 0.0;        // residual only (noise excluded)
  double radar_omega_total_h0 = 0.0;  // includes noise, q = 0
  double radar_omega_total_h1 = 0.0;  // includes noise, q = 1
};

/// Interference-plus-noise total variance at DL UE k (radar emission rides
/// the raw channels at unit power; no IC at the UEs).
inline double dl_interference_total(Mode mode, const ScenarioConfig& c, const PathlossSet& p,
                                    int k) {
  const double tau = c.noise_total_variance;
  double v = tau;
  switch (mode) {
    case Mode::kSeFd:
      for (int j = 0; j < c.num_ul_ues; ++j) {
        v += c.p_ul_per_ue() * p.d_u(k, j) * p.d_u(k, j) * c.u_total_variance;
      }
      [[fallthrough]];
    case Mode::kSeHd: {
      double s = 0.0;
      for (int n = 0; n < c.num_radar_aps; ++n) s += p.d_ru(k, n) * p.d_ru(k, n);
      v += (c.p_radar / c.num_radar_aps) * s * c.f_total_variance;
      break;
    }
    case Mode::kShFd:
      for (int j = 0; j < c.num_ul_ues; ++j) {
        v += c.p_ul_per_ue() * p.d_u(k, j) * p.d_u(k, j) * c.u_total_variance;
      }
      [[fallthrough]];
    case Mode::kShHd: {
      double s = 0.0;
      for (int m = 0; m < c.num_aps; ++m) s += p.d_c(k, m) * p.d_c(k, m);
      v += (c.p_radar / c.num_aps) * s * (c.h_total_variance + c.f_total_variance);
      break;
    }
  }
  return v;
}

/// Post-IC residual total variance per comm receive antenna (noise excluded).
inline double ul_residual_total(Mode mode, const ScenarioConfig& c, const PathlossSet& p,
                                const WaveformStats& w) {
  const double s_ic = c.sigma_ic_sq;
  if (s_ic == 0.0) return 0.0;
  const double g = w.radar_frame_gain * w.radar_ap_power;
  const int mc = c.m_eff_comm();
  switch (mode) {
    case Mode::kSeHd:
      return s_ic * (c.p_radar / c.num_radar_aps) * (p.d_rc.squaredNorm() / mc) * g;
    case Mode::kSeFd:
      return s_ic * (c.p_radar / c.num_radar_aps) * (p.d_rc.squaredNorm() / mc) * g +
             s_ic * c.beta_ap * c.beta_ap * w.dl_tx_power;
    case Mode::kShHd:
    case Mode::kShFd: {
      // Composite-waveform backscatter through the M x M coupling matrix;
      // per-AP DL power is uniform under the normalized ZF frame.
      const double composite = w.dl_tx_power + c.p_radar * g;
      double v = s_ic * (p.d_rc.squaredNorm() / (mc * static_cast<double>(mc))) * composite;
      if (mode == Mode::kShFd) v += s_ic * c.beta_ap * c.beta_ap * composite;
      return v;
    }
  }
  return 0.0;
}

/// Post-IC residual-plus-noise total variance per radar receive antenna.
/// q gates the terms only present when the probing waveform is echoed.
inline double radar_residual_total(Mode mode, const ScenarioConfig& c, const PathlossSet& p,
                                   const WaveformStats& w, int q, int bin = 0) {
  const double tau = c.noise_total_variance;
  const double s_ic = c.sigma_ic_sq;
  if (s_ic == 0.0) return tau;
  const double g = w.radar_frame_gain * w.radar_ap_power;
  const int mr = c.m_eff_radar();
  const int mc = c.m_eff_comm();
  const double pu_per = c.p_ul_per_ue();

  double v = tau;
  switch (mode) {
    case Mode::kSeHd:
      v += s_ic * (p.d_ru_ul.squaredNorm() / mr) * pu_per;
      break;
    case Mode::kSeFd:
      v += s_ic * (p.d_ru_ul.squaredNorm() / mr) * pu_per;
      v += s_ic * (p.d_rc.squaredNorm() / (mr * static_cast<double>(mc))) * w.dl_tx_power;
      v += s_ic * c.beta_radar * c.beta_radar * (c.p_radar / mr) * g * mr;
      break;
    case Mode::kShHd: {
      v += s_ic * (p.d_c_ul.squaredNorm() / mr) * pu_per;
      if (q) {
        // Rank-one D_r,t weighting of the echoed comm waveform.
        const auto& dr = p.d_r[bin];
        const double sum2 = dr.squaredNorm();
        v += s_ic * (sum2 / mr) * sum2 * (w.dl_tx_power / mc);
      }
      break;
    }
    case Mode::kShFd: {
      v += s_ic * (p.d_c_ul.squaredNorm() / mr) * pu_per;
      if (q) {
        const auto& dr = p.d_r[bin];
        const double sum2 = dr.squaredNorm();
        v += s_ic * (sum2 / mr) * sum2 * (w.dl_tx_power / mc);
      }
      const double composite_q = w.dl_tx_power + (q ? c.p_radar * g : 0.0);
      v += s_ic * (p.d_rc.squaredNorm() / (mr * static_cast<double>(mc))) * composite_q;
      v += s_ic * c.beta_radar * c.beta_radar * (w.dl_tx_power + c.p_radar * g);
      break;
    }
  }
  return v;
}

inline ModeVariances mode_variances(const ScenarioConfig& c, const PathlossSet& p,
                                    const WaveformStats& w, int bin = 0) {
  const Mode mode = c.mode();
  ModeVariances mv;
  mv.dl_zeta_total.resize(c.num_dl_ues);
  for (int k = 0; k < c.num_dl_ues; ++k) mv.dl_zeta_total[k] = dl_interference_total(mode, c, p, k);
  mv.ul_omega_total = ul_residual_total(mode, c, p, w);
  mv.radar_omega_total_h0 = radar_residual_total(mode, c, p, w, 0, bin);
  mv.radar_omega_total_h1 = radar_residual_total(mode, c, p, w, 1, bin);
  return mv;
}

}  // namespace cfisac
