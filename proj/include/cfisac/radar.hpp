/**
 * @file radar.hpp
 * @brief Radar waveforms and precoders, per-bin echo synthesis, the GLRT
 *        statistic with its exact chi-squared normalization, and analytic
 *        detection probability.
 */
#pragma once

#include "cfisac/channel.hpp"

namespace cfisac {

/// T orthonormal baseband waveforms: the first T rows of the L-point unitary
/// DFT matrix (unit-norm rows, Phi Phi^H = I_T exactly).
inline Eigen::MatrixXcd make_orthonormal_waveforms(int num_beams, int snapshots) {
  if (num_beams > snapshots) {
    throw std::invalid_argument("make_orthonormal_waveforms: need T <= L");
  }
  Eigen::MatrixXcd phi(num_beams, snapshots);
  const double scale = 1.0 / std::sqrt(static_cast<double>(snapshots));
  for (int t = 0; t < num_beams; ++t) {
    for (int l = 0; l < snapshots; ++l) {
      phi(t, l) = std::polar(scale, -2.0 * M_PI * t * l / snapshots);
    }
  }
  return phi;
}

/// Per-beam rotating-array precoders plus the unit-power probing emission.
///
/// Beam t at snapshot l uses w = sqrt(1/T) * [1, e^{j th}, ..., e^{j(M-1)th}]
/// with th on the L-point phase grid, so each beam covers the grid once per
/// frame. When L >= M* this makes every per-beam covariance exactly I/T and
/// the transmit covariance R_w exactly the identity (omnidirectional).
struct RadarWaveform {
  int m_star = 0;
  int num_beams = 0;
  int snapshots = 0;
  Eigen::MatrixXcd phi;       // T x L orthonormal waveforms
  Eigen::VectorXd p_r_alloc;  // per-beam powers, sum = P_r

  Eigen::VectorXcd beam_precoder(int t, int l) const {
    const int shift = (l + t * (snapshots / num_beams)) % snapshots;
    const double theta = 2.0 * M_PI * shift / snapshots;
    Eigen::VectorXcd w(m_star);
    const double a = 1.0 / std::sqrt(static_cast<double>(num_beams));
    for (int m = 0; m < m_star; ++m) w(m) = std::polar(a, m * theta);
    return w;
  }

  /// All L precoders of beam t as columns.
  Eigen::MatrixXcd beam_matrix(int t) const {
    Eigen::MatrixXcd w(m_star, snapshots);
    for (int l = 0; l < snapshots; ++l) w.col(l) = beam_precoder(t, l);
    return w;
  }

  /// tr(R_t) for beam t, R_t = (1/L) sum_l w w^H.
  double tr_rt() const { return static_cast<double>(m_star) / num_beams; }

  /// Trace of the power-weighted echo-side covariance
  /// sum_t (P_r,t / M*) R_t.
  double echo_covariance_trace() const {
    double acc = 0.0;
    for (int t = 0; t < num_beams; ++t) acc += p_r_alloc(t) / m_star * tr_rt();
    return acc;
  }

  /// g^H R_t g evaluated exactly from the precoder sequence.
  double g_rt_g(int t, const Eigen::VectorXcd& g) const {
    return (g.adjoint() * beam_matrix(t)).squaredNorm() / snapshots;
  }

  Eigen::MatrixXcd transmit_covariance() const {
    Eigen::MatrixXcd rw = Eigen::MatrixXcd::Zero(m_star, m_star);
    for (int t = 0; t < num_beams; ++t) {
      for (int l = 0; l < snapshots; ++l) {
        const Eigen::VectorXcd w = beam_precoder(t, l);
        rw.noalias() += w * w.adjoint();
      }
    }
    return rw / snapshots;
  }

  /// Unit-power probing emission frame (constant-modulus random phases).
  Eigen::MatrixXcd emission_frame(RngStream& rng) const {
    Eigen::MatrixXcd x(m_star, snapshots);
    for (int l = 0; l < snapshots; ++l) {
      for (int m = 0; m < m_star; ++m) {
        x(m, l) = std::polar(1.0, 2.0 * M_PI * rng.uniform());
      }
    }
    return x;
  }

  /// Residual gain of the radar-waveform-driven IC terms (frame-aggregated
  /// cancellation bookkeeping).
  double frame_ic_gain() const { return 2.0 * snapshots; }

  WaveformStats stats(double dl_tx_power) const {
    WaveformStats w;
    w.radar_frame_gain = frame_ic_gain();
    w.radar_ap_power = 1.0;
    w.dl_tx_power = dl_tx_power;
    w.tr_rt = tr_rt();
    w.tr_rx = m_star;
    return w;
  }
};

inline RadarWaveform make_radar_precoder(const ScenarioConfig& c) {
  RadarWaveform w;
  w.m_star = c.m_eff_radar();
  w.num_beams = c.num_bins;
  w.snapshots = c.snapshots;
  w.phi = make_orthonormal_waveforms(c.num_bins, c.snapshots);
  w.p_r_alloc = Eigen::VectorXd::Constant(c.num_bins, c.p_radar / c.num_bins);
  return w;
}

inline double detection_threshold(double pfa) {
  if (!(pfa > 0.0 && pfa < 1.0)) throw std::invalid_argument("detection_threshold: pfa in (0,1)");
  return -2.0 * std::log(pfa);
}

/// Noncentrality of the per-bin GLRT statistic under H1.
inline double noncentrality(const RadarWaveform& w, int t, const Eigen::VectorXcd& g_t,
                            double alpha_mag, double residual_total_variance) {
  const double grg = w.g_rt_g(t, g_t);
  const double half_var = residual_total_variance / 2.0;
  return w.snapshots * alpha_mag * alpha_mag * w.p_r_alloc(t) * grg * grg /
         (half_var * w.m_star * w.tr_rt());
}

inline double detection_probability_analytic(double lambda, double tau) {
  return marcum_q1(std::sqrt(lambda), std::sqrt(tau));
}

/// Matched-filter coherent sum over the frame: z = (1/L) sum_l w^H y_l.
inline std::complex<double> matched_filter_sum(const RadarWaveform& w, int t,
                                               const Eigen::MatrixXcd& obs) {
  const Eigen::MatrixXcd wm = w.beam_matrix(t);
  std::complex<double> z = 0.0;
  for (int l = 0; l < w.snapshots; ++l) z += wm.col(l).dot(obs.col(l));  // w^H y
  return z / static_cast<double>(w.snapshots);
}

/// GLRT statistic, normalized so that under H0 it is exactly central
/// chi-squared with 2 dof: P{xi > tau} = exp(-tau/2).
inline double glrt_statistic(const Eigen::MatrixXcd& obs, const RadarWaveform& w, int t,
                             double residual_total_variance) {
  if (!(residual_total_variance > 0.0)) {
    throw std::invalid_argument("glrt_statistic: residual variance must be positive");
  }
  const std::complex<double> z = matched_filter_sum(w, t, obs);
  const double var_z = residual_total_variance * w.tr_rt() / w.snapshots;
  return 2.0 * std::norm(z) / var_z;
}

/// Closed-form ML estimate of the reflection coefficient (diagnostic).
inline std::complex<double> ml_alpha_estimate(const Eigen::MatrixXcd& obs, const RadarWaveform& w,
                                              int t, const Eigen::VectorXcd& g_t) {
  const std::complex<double> z = matched_filter_sum(w, t, obs);
  const double gain = std::sqrt(w.p_r_alloc(t) / w.m_star) * w.g_rt_g(t, g_t);
  return z / gain;
}

/// One bin's detection verdict together with the analytic prediction.
struct DetectionOutcome {
  double xi = 0.0;
  double tau = 0.0;
  bool decided = false;
  double lambda_analytic = 0.0;
  double pd_analytic = 0.0;
};

inline DetectionOutcome detect_bin(const Eigen::MatrixXcd& obs, const RadarWaveform& w, int t,
                                   const Eigen::VectorXcd& g_t, double alpha_mag,
                                   double residual_total_variance, double tau) {
  DetectionOutcome out;
  out.xi = glrt_statistic(obs, w, t, residual_total_variance);
  out.tau = tau;
  out.decided = out.xi > tau;
  out.lambda_analytic = noncentrality(w, t, g_t, alpha_mag, residual_total_variance);
  out.pd_analytic = detection_probability_analytic(out.lambda_analytic, tau);
  return out;
}

/// Signals the radar residual synthesis needs from the concurrent
/// communication operation.
struct CommSignalInputs {
  const Eigen::MatrixXcd* x_c = nullptr;     // M_eff_c x L DL transmit frame
  const Eigen::MatrixXcd* ul_syms = nullptr; // K_U x L UL symbol values
};

/// Per-bin observation frame under hypothesis q: the rank-one echo plus the
/// mode's residual, synthesized per snapshot from fresh estimation-error
/// draws (the i.i.d.-column residual model), plus receiver noise.
inline Eigen::MatrixXcd synthesize_radar_snapshots(const ScenarioConfig& c, const PathlossSet& p,
                                                   const RadarWaveform& w, int t, int q,
                                                   std::complex<double> alpha_t,
                                                   const Eigen::MatrixXcd& radar_emit,
                                                   const CommSignalInputs& comm, RngStream& rng) {
  const Mode mode = c.mode();
  const int ms = w.m_star;
  const int L = w.snapshots;
  const int mc = c.m_eff_comm();
  const double s_ic = c.sigma_ic_sq;
  const bool needs_dl = mode == Mode::kSeFd || mode == Mode::kShHd || mode == Mode::kShFd;
  if (comm.ul_syms == nullptr) {
    throw std::invalid_argument("synthesize_radar_snapshots: UL symbols required");
  }
  if (needs_dl && comm.x_c == nullptr) {
    throw std::invalid_argument("synthesize_radar_snapshots: DL transmit frame required");
  }

  const Eigen::VectorXcd& g = p.g_t[t];
  const double echo_scale = std::sqrt(w.p_r_alloc(t) / ms);
  const double sqrt_gain = std::sqrt(w.frame_ic_gain());
  const double sqrt_pu = std::sqrt(c.p_ul_per_ue());
  const double err_sd = std::sqrt(s_ic * 0.5);

  Eigen::RowVectorXcd gw;  // g^H W_t, one echo gain per snapshot
  if (q) gw = g.adjoint() * w.beam_matrix(t);

  Eigen::MatrixXcd obs(ms, L);
  auto err_entry = [&]() -> std::complex<double> {
    return {err_sd * rng.normal(), err_sd * rng.normal()};
  };

  for (int l = 0; l < L; ++l) {
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(ms);
    if (q) {
      y += (alpha_t * echo_scale * gw(l)) * g;  // (g g^H) w = g (g^H w)
    }
    if (s_ic > 0.0) {
      // UL-interference IC residual (all modes).
      for (int m = 0; m < ms; ++m) {
        std::complex<double> acc = 0.0;
        for (int k = 0; k < c.num_ul_ues; ++k) {
          const double d = deployment_of(mode) == Deployment::kSeparated ? p.d_ru_ul(k, m)
                                                                         : p.d_c_ul(k, m);
          acc += d * err_entry() * (sqrt_pu * (*comm.ul_syms)(k, l));
        }
        y(m) += acc;
      }
      if (mode == Mode::kSeFd) {
        const Eigen::VectorXcd xc = comm.x_c->col(l);
        for (int m = 0; m < ms; ++m) {
          std::complex<double> acc = 0.0;
          for (int i = 0; i < mc; ++i) acc += p.d_rc(i, m) * err_entry() * xc(i);
          y(m) += acc;
        }
        const double rs = c.beta_radar * std::sqrt(c.p_radar / ms) * sqrt_gain;
        for (int m = 0; m < ms; ++m) {
          std::complex<double> acc = 0.0;
          for (int n = 0; n < ms; ++n) acc += err_entry() * radar_emit(n, l);
          y(m) += rs * acc;
        }
      } else if (mode == Mode::kShHd || mode == Mode::kShFd) {
        const Eigen::VectorXcd xc = comm.x_c->col(l);
        if (q) {
          // Echoed comm waveform through the rank-one bin pathloss.
          const auto& dr = p.d_r[t];
          for (int m = 0; m < ms; ++m) {
            std::complex<double> acc = 0.0;
            for (int n = 0; n < ms; ++n) acc += dr(n) * err_entry() * xc(n);
            y(m) += dr(m) * acc;
          }
        }
        if (mode == Mode::kShFd) {
          const double rs = std::sqrt(c.p_radar / ms) * sqrt_gain;
          for (int m = 0; m < ms; ++m) {
            std::complex<double> clutter = 0.0;
            std::complex<double> si = 0.0;
            for (int n = 0; n < ms; ++n) {
              const std::complex<double> comp =
                  xc(n) + (q ? rs * radar_emit(n, l) : std::complex<double>(0.0));
              clutter += p.d_rc(m, n) * err_entry() * comp;
              const std::complex<double> comp_si = xc(n) + rs * radar_emit(n, l);
              si += err_entry() * comp_si;
            }
            y(m) += clutter + c.beta_radar * si;
          }
        }
      }
    }
    for (int m = 0; m < ms; ++m) y(m) += rng.complex_normal(c.noise_total_variance);
    obs.col(l) = y;
  }
  return obs;
}

}  // namespace cfisac
