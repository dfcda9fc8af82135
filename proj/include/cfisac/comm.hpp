/**
 * @file comm.hpp
 * @brief Communication chain: PSK constellations, ZF precoding/combining,
 *        mode-specific DL/UL frame synthesis, detection and SER.
 */
#pragma once

#include "cfisac/channel.hpp"

namespace cfisac {

struct SingularChannelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Unit-energy PSK constellation.
struct Constellation {
  std::string name;
  int order = 0;
  std::vector<double> phases;

  static Constellation psk(int order, std::string name) {
    Constellation c;
    c.name = std::move(name);
    c.order = order;
    c.phases.resize(order);
    for (int n = 0; n < order; ++n) c.phases[n] = 2.0 * M_PI * n / order;
    return c;
  }
  static Constellation named(const std::string& name) {
    if (name == "bpsk") return psk(2, "bpsk");
    if (name == "qpsk") return psk(4, "qpsk");
    if (name.rfind("psk", 0) == 0) return psk(std::stoi(name.substr(3)), name);
    throw std::invalid_argument("unknown constellation: " + name);
  }
  std::complex<double> point(int n) const { return std::polar(1.0, phases[n]); }
};

/// Rate-fair default: QPSK under HD, BPSK under FD.
inline Constellation constellation_for(const ScenarioConfig& c) {
  return Constellation::named(c.duplex == Duplex::kHd ? c.constellation_hd : c.constellation_fd);
}

namespace detail {

inline void check_conditioning(const Eigen::MatrixXcd& gram) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || std::sqrt(hi / lo) > 1e12) {
    throw SingularChannelError("channel matrix is numerically rank-deficient");
  }
}

}  // namespace detail

/// Non-normalized ZF precoder for a K_D x M_eff effective DL channel.
inline Eigen::MatrixXcd zf_precoder_matrix(const Eigen::MatrixXcd& h_eff) {
  const Eigen::MatrixXcd gram = h_eff * h_eff.adjoint();  // K_D x K_D
  detail::check_conditioning(gram);
  return h_eff.adjoint() * gram.inverse();
}

/// ZF precoding state for one channel draw: the non-normalized precoder,
/// the latest per-snapshot normalization, and the analytic mean of the
/// per-user effective gain K_D * alpha^2.
struct PrecoderState {
  Eigen::MatrixXcd w_tilde;    // M_eff x K_D, H_eff * w_tilde = I
  double alpha_zf = 0.0;       // per-snapshot, set by normalize()
  double alpha_zf_sq_mean;     // M_eff - K_D + 1 (unit serving variance)

  static PrecoderState build(const Eigen::MatrixXcd& h_eff) {
    PrecoderState st;
    st.w_tilde = zf_precoder_matrix(h_eff);
    st.alpha_zf_sq_mean =
        static_cast<double>(h_eff.cols()) - static_cast<double>(h_eff.rows()) + 1.0;
    return st;
  }
  /// Unit-power precoded snapshot; updates alpha_zf.
  Eigen::VectorXcd normalize(const Eigen::VectorXcd& s) {
    Eigen::VectorXcd x = w_tilde * s;
    alpha_zf = 1.0 / x.norm();
    x *= alpha_zf;
    return x;
  }
};

/// Precoded snapshot: x = alpha * W~ s with alpha = 1/||W~ s||, so
/// ||x||^2 = 1 and H_eff x = alpha s.
inline std::pair<Eigen::VectorXcd, double> zf_precoder(const Eigen::MatrixXcd& h_eff,
                                                       const Eigen::VectorXcd& s) {
  const Eigen::MatrixXcd wt = zf_precoder_matrix(h_eff);
  Eigen::VectorXcd x = wt * s;
  const double alpha = 1.0 / x.norm();
  x *= alpha;
  return {std::move(x), alpha};
}

/// ZF combiner G = (H^H H)^-1 H^H for an M_eff x K_U effective UL channel.
inline Eigen::MatrixXcd zf_combiner(const Eigen::MatrixXcd& h_ul_eff) {
  const Eigen::MatrixXcd gram = h_ul_eff.adjoint() * h_ul_eff;  // K_U x K_U
  detail::check_conditioning(gram);
  return gram.inverse() * h_ul_eff.adjoint();
}

/// Nearest constellation point in Euclidean distance; ties break toward the
/// lower index.
inline int detect_symbol(std::complex<double> y, const Constellation& cst) {
  int best = 0;
  double best_d = std::norm(y - cst.point(0));
  for (int n = 1; n < cst.order; ++n) {
    const double d = std::norm(y - cst.point(n));
    if (d < best_d - 1e-15 * (1.0 + best_d)) {
      best_d = d;
      best = n;
    }
  }
  return best;
}

inline std::vector<int> detect_symbols(const Eigen::VectorXcd& y, const Constellation& cst) {
  std::vector<int> out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) out[i] = detect_symbol(y(i), cst);
  return out;
}

inline double measure_ser(const std::vector<int>& tx, const std::vector<int>& rx) {
  if (tx.size() != rx.size()) throw std::invalid_argument("measure_ser: length mismatch");
  if (tx.empty()) return 0.0;
  std::size_t err = 0;
  for (std::size_t i = 0; i < tx.size(); ++i) err += tx[i] != rx[i];
  return static_cast<double>(err) / tx.size();
}

/// Effective DL channel as the UEs see it. Shared deployment serves through
/// the composite direct-plus-clutter channel.
inline Eigen::MatrixXcd effective_dl_channel(const ScenarioConfig& c, const PathlossSet& p,
                                             const ChannelRealization& ch) {
  const int mc = c.m_eff_comm();
  Eigen::MatrixXcd h_eff(c.num_dl_ues, mc);
  const bool shared = c.deployment == Deployment::kShared;
  for (int k = 0; k < c.num_dl_ues; ++k) {
    for (int m = 0; m < mc; ++m) {
      std::complex<double> h = ch.h_dl(m, k);
      if (shared) h += ch.f_clutter(m, k);
      h_eff(k, m) = p.d_c(k, m) * h;
    }
  }
  return h_eff;
}

/// Effective UL channel at the comm receive antennas.
inline Eigen::MatrixXcd effective_ul_channel(const ScenarioConfig& c, const PathlossSet& p,
                                             const ChannelRealization& ch) {
  const int mc = c.m_eff_comm();
  Eigen::MatrixXcd e(mc, c.num_ul_ues);
  for (int m = 0; m < mc; ++m) {
    for (int k = 0; k < c.num_ul_ues; ++k) e(m, k) = p.d_c_ul(k, m) * ch.h_ul(m, k);
  }
  return e;
}

/// One DL frame: precoded transmit signal, per-snapshot desired amplitude,
/// and the received matrix at the K_D UEs.
struct DlFrame {
  Eigen::MatrixXcd x_c;      // M_eff_c x L transmit signal, ||x_c,l||^2 = P_c
  Eigen::VectorXd amp;       // L desired per-UE amplitudes sqrt(P_c)*alpha_l
  Eigen::MatrixXcd received; // K_D x L
};

/// Implements the mode's DL equation term by term: ZF-precoded desired
/// signal, radar-induced interference (+clutter composite in shared modes),
/// UE-to-UE interference under FD, and noise.
inline DlFrame synthesize_dl(const ScenarioConfig& c, const PathlossSet& p,
                             const ChannelRealization& ch,
                             const Eigen::MatrixXi& dl_syms,        // K_D x L
                             const Constellation& cst,
                             const Eigen::MatrixXcd& radar_emit,    // M_eff_r x L unit power
                             const Eigen::MatrixXcd* ul_syms,       // K_U x L values (FD)
                             RngStream& noise_rng) {
  const Mode mode = c.mode();
  const int L = static_cast<int>(dl_syms.cols());
  const int kd = c.num_dl_ues;
  const bool fd = c.duplex == Duplex::kFd;
  if (fd && ul_syms == nullptr) {
    throw std::invalid_argument("synthesize_dl: FD modes require UL symbols for the UE-to-UE term");
  }

  const Eigen::MatrixXcd h_eff = effective_dl_channel(c, p, ch);
  PrecoderState precoder = PrecoderState::build(h_eff);

  // Radar interference channel at the UEs: dedicated F under separated
  // deployment, the composite serving channel itself under shared.
  Eigen::MatrixXcd radar_path;  // K_D x M_eff_r
  if (deployment_of(mode) == Deployment::kSeparated) {
    radar_path.resize(kd, c.num_radar_aps);
    for (int k = 0; k < kd; ++k) {
      for (int n = 0; n < c.num_radar_aps; ++n) {
        radar_path(k, n) = p.d_ru(k, n) * ch.f_clutter(n, k);
      }
    }
  } else {
    radar_path = h_eff;
  }
  const double radar_scale = std::sqrt(c.p_radar / c.m_eff_radar());

  DlFrame out;
  out.x_c.resize(h_eff.cols(), L);
  out.amp.resize(L);
  out.received.resize(kd, L);

  Eigen::VectorXcd s(kd);
  const double sqrt_pc = std::sqrt(c.p_comm);
  for (int l = 0; l < L; ++l) {
    for (int k = 0; k < kd; ++k) s(k) = cst.point(dl_syms(k, l));
    out.x_c.col(l) = sqrt_pc * precoder.normalize(s);
    out.amp(l) = sqrt_pc * precoder.alpha_zf;
    Eigen::VectorXcd y = out.amp(l) * s;
    y += radar_scale * (radar_path * radar_emit.col(l));
    if (fd) {
      for (int k = 0; k < kd; ++k) {
        std::complex<double> acc = 0.0;
        for (int j = 0; j < c.num_ul_ues; ++j) {
          acc += p.d_u(k, j) * ch.h_ue2ue(k, j) * std::sqrt(c.p_ul_per_ue()) * (*ul_syms)(j, l);
        }
        y(k) += acc;
      }
    }
    for (int k = 0; k < kd; ++k) y(k) += noise_rng.complex_normal(c.noise_total_variance);
    out.received.col(l) = y;
  }
  return out;
}

/// One UL frame after interference cancellation: received antennas-domain
/// matrix, ZF-combined symbols, and the combiner Gram inverse diagonal.
struct UlFrame {
  Eigen::MatrixXcd combined;    // K_U x L, desired amplitude sqrt(p_ul_per_ue)
  Eigen::VectorXd gram_inv_kk;  // [(E^H E)^-1]_kk per UE
};

/// The mode's post-IC UL residual frame at the comm antennas, synthesized
/// from the trial's explicit estimation-error matrices (no desired term, no
/// noise).
inline Eigen::MatrixXcd ul_residual_frame(const ScenarioConfig& c, const PathlossSet& p,
                                          const ChannelRealization& ch,
                                          const Eigen::MatrixXcd& radar_emit,
                                          double radar_frame_gain,
                                          const Eigen::MatrixXcd* x_c) {
  const Mode mode = c.mode();
  const int L = static_cast<int>(radar_emit.cols());
  const int mc = c.m_eff_comm();
  if (mode != Mode::kSeHd && x_c == nullptr) {
    throw std::invalid_argument("ul_residual_frame: mode requires the DL transmit frame");
  }
  const double sqrt_gain = std::sqrt(radar_frame_gain);
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(mc, L);
  switch (mode) {
    case Mode::kSeHd:
    case Mode::kSeFd: {
      const double rs = std::sqrt(c.p_radar / c.num_radar_aps) * sqrt_gain;
      Eigen::MatrixXcd weighted(mc, c.num_radar_aps);
      for (int m = 0; m < mc; ++m) {
        for (int n = 0; n < c.num_radar_aps; ++n) weighted(m, n) = p.d_rc(m, n) * ch.err_r2c(m, n);
      }
      y += rs * (weighted * radar_emit);
      if (mode == Mode::kSeFd) y += c.beta_ap * (ch.err_si * (*x_c));
      break;
    }
    case Mode::kShHd:
    case Mode::kShFd: {
      Eigen::MatrixXcd weighted(mc, mc);
      for (int m = 0; m < mc; ++m) {
        for (int n = 0; n < mc; ++n) weighted(m, n) = p.d_rc(m, n) * ch.err_r2c(m, n);
      }
      const double rs = std::sqrt(c.p_radar / c.num_aps) * sqrt_gain;
      const Eigen::MatrixXcd composite = *x_c + rs * radar_emit;
      y += weighted * composite;
      if (mode == Mode::kShFd) y += c.beta_ap * (ch.err_si_sh * composite);
      break;
    }
  }
  return y;
}

/// Desired UL term plus the mode's post-IC residual synthesized from the
/// trial's explicit estimation-error matrices, plus noise.
inline UlFrame synthesize_ul_post_ic(const ScenarioConfig& c, const PathlossSet& p,
                                     const ChannelRealization& ch,
                                     const Eigen::MatrixXcd& ul_syms,     // K_U x L values
                                     const Eigen::MatrixXcd& radar_emit,  // M_eff_r x L
                                     double radar_frame_gain,
                                     const Eigen::MatrixXcd* x_c,         // M_eff_c x L (FD/shared)
                                     RngStream& noise_rng) {
  const int L = static_cast<int>(ul_syms.cols());
  const int mc = c.m_eff_comm();

  const Eigen::MatrixXcd e = effective_ul_channel(c, p, ch);
  const Eigen::MatrixXcd gram = e.adjoint() * e;
  detail::check_conditioning(gram);
  const Eigen::MatrixXcd gram_inv = gram.inverse();
  const Eigen::MatrixXcd comb = gram_inv * e.adjoint();

  const double sqrt_pu = std::sqrt(c.p_ul_per_ue());
  Eigen::MatrixXcd y = e * (sqrt_pu * ul_syms);
  if (c.sigma_ic_sq > 0.0) {
    y += ul_residual_frame(c, p, ch, radar_emit, radar_frame_gain, x_c);
  }
  for (int l = 0; l < L; ++l) {
    for (int m = 0; m < mc; ++m) y(m, l) += noise_rng.complex_normal(c.noise_total_variance);
  }

  UlFrame out;
  out.combined = comb * y;
  out.gram_inv_kk.resize(c.num_ul_ues);
  for (int k = 0; k < c.num_ul_ues; ++k) out.gram_inv_kk(k) = gram_inv(k, k).real();
  return out;
}

}  // namespace cfisac
