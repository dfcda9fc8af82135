/**
 * @file kld.hpp
 * @brief Closed-form Kullback-Leibler divergence evaluators: the general
 *        Gaussian formula, the constellation geometry factor, the per-mode
 *        DL/UL/radar expressions, and empirical symbol-cloud estimation.
 *
 * All results are in bits. Interfaces carry total complex variances; the
 *        evaluators convert to the per-dimension bookkeeping internally.
 */
#pragma once

#include "cfisac/comm.hpp"
#include "cfisac/radar.hpp"

#include <optional>

namespace cfisac {

/// KLD of N(mu_m, Sigma_m) from N(mu_n, Sigma_n) in bits (the divergence
/// under the m-distribution). General dimension; the closed forms
/// below only exercise dim = 2.
inline double kld_gaussian(const Eigen::VectorXd& mu_m, const Eigen::VectorXd& mu_n,
                           const Eigen::MatrixXd& sigma_m, const Eigen::MatrixXd& sigma_n) {
  const Eigen::Index dim = mu_m.size();
  if (mu_n.size() != dim || sigma_m.rows() != dim || sigma_m.cols() != dim ||
      sigma_n.rows() != dim || sigma_n.cols() != dim) {
    throw std::invalid_argument("kld_gaussian: dimension mismatch");
  }
  const Eigen::LLT<Eigen::MatrixXd> llt_n(sigma_n);
  const Eigen::LLT<Eigen::MatrixXd> llt_m(sigma_m);
  if (llt_n.info() != Eigen::Success || llt_m.info() != Eigen::Success) {
    throw std::invalid_argument("kld_gaussian: covariances must be positive definite");
  }
  auto logdet = [](const Eigen::LLT<Eigen::MatrixXd>& llt) {
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  };
  const Eigen::MatrixXd sol = llt_n.solve(sigma_m);
  const Eigen::VectorXd diff = mu_n - mu_m;
  const double quad = diff.dot(llt_n.solve(diff));
  const double nats =
      0.5 * (sol.trace() - static_cast<double>(dim) + quad + logdet(llt_n) - logdet(llt_m));
  return nats / std::log(2.0);
}

/// Constellation geometry factor: sum over ordered pairs of dissimilar
/// symbols of (1 - cos(phase difference)).
inline double constellation_lambda(const std::vector<double>& phases) {
  double acc = 0.0;
  for (std::size_t n = 0; n < phases.size(); ++n) {
    for (std::size_t m = 0; m < phases.size(); ++m) {
      if (m != n) acc += 1.0 - std::cos(phases[n] - phases[m]);
    }
  }
  return acc;
}

namespace detail {

inline double lambda_norm(const Constellation& cst) {
  const double md = cst.order;
  if (cst.order < 2) return 0.0;
  return constellation_lambda(cst.phases) / (md * (md - 1.0));
}

}  // namespace detail

/// Closed-form DL KLD for UE k (true Gaussian KLD; the DL denominators carry
/// per-dimension variances). The mean ZF array gain is (M_eff - K_D + 1)
/// scaled by the serving-channel per-entry variance, which for shared
/// deployment is the composite direct-plus-clutter variance.
inline double kld_dl(Mode mode, const ScenarioConfig& c, const PathlossSet& p, int k,
                     const Constellation& cst, double dl_variance_total) {
  if (mode != c.mode()) throw std::invalid_argument("kld_dl: mode/config mismatch");
  const double serving_var = deployment_of(mode) == Deployment::kShared
                                 ? c.h_total_variance + c.f_total_variance
                                 : c.h_total_variance;
  const double alpha_bar_sq = (c.m_eff_comm() - c.num_dl_ues + 1.0) * serving_var;
  const double dbar = p.dbar_dl(k);
  const double half_var = dl_variance_total / 2.0;
  return detail::lambda_norm(cst) * c.p_comm_per_ue() * alpha_bar_sq * dbar * dbar /
         (half_var * std::log(2.0));
}

/// Closed-form UL KLD for UE k. Matches the reference bookkeeping, which
/// plugs the total post-combining variance where a per-dimension variance
/// would sit (half the true Gaussian KLD); the empirical estimator mirrors
/// the same convention.
///
/// gram_inv_kk: pass the per-draw [(E^H E)^-1]_kk to evaluate the per-draw
/// variant; omit for the mean-inverse identity (requires M_eff > K_U + 1).
inline double kld_ul(Mode mode, const ScenarioConfig& c, const PathlossSet& p, int k,
                     const Constellation& cst, double ul_residual_total,
                     std::optional<double> gram_inv_kk = std::nullopt) {
  if (mode != c.mode()) throw std::invalid_argument("kld_ul: mode/config mismatch");
  const double denom_total = ul_residual_total + c.noise_total_variance;
  double inv_kk;
  if (gram_inv_kk) {
    inv_kk = *gram_inv_kk;
  } else {
    if (c.m_eff_comm() <= c.num_ul_ues + 1) {
      throw std::invalid_argument("kld_ul: mean-inverse identity needs M_eff > K_U + 1");
    }
    const double dbar = p.dbar_ul(k);
    inv_kk = 1.0 / (c.h_total_variance * dbar * dbar * (c.m_eff_comm() - c.num_ul_ues));
  }
  return detail::lambda_norm(cst) * c.p_ul_per_ue() / (inv_kk * denom_total * std::log(2.0));
}

/// Closed-form radar KLD for bin t: symmetric between hypotheses, equal to
/// lambda_t / (4 L ln 2).
inline double kld_radar(const RadarWaveform& w, int t, const Eigen::VectorXcd& g_t,
                        double alpha_mag, double radar_residual_total) {
  if (!(w.tr_rt() > 0.0)) throw std::invalid_argument("kld_radar: tr(R_t) must be positive");
  const double grg = w.g_rt_g(t, g_t);
  const double half_var = radar_residual_total / 2.0;
  return alpha_mag * alpha_mag * w.p_r_alloc(t) * grg * grg /
         (4.0 * half_var * w.m_star * w.tr_rt() * std::log(2.0));
}

/// Weighted DL/UL aggregate over the user population.
inline double kld_comm_total(const std::vector<double>& dl_list, const std::vector<double>& ul_list,
                             int num_dl_ues, int num_ul_ues) {
  if (static_cast<int>(dl_list.size()) != num_dl_ues ||
      static_cast<int>(ul_list.size()) != num_ul_ues) {
    throw std::invalid_argument("kld_comm_total: list lengths must match the UE counts");
  }
  const double k_total = num_dl_ues + num_ul_ues;
  const double dl = std::accumulate(dl_list.begin(), dl_list.end(), 0.0);
  const double ul = std::accumulate(ul_list.begin(), ul_list.end(), 0.0);
  return (num_dl_ues / k_total) * dl + (num_ul_ues / k_total) * ul;
}

/// All closed-form KLDs of one operating point, in bits.
struct KldReport {
  std::string mode;
  std::vector<double> kld_dl;     // per DL UE
  std::vector<double> kld_ul;     // per UL UE
  std::vector<double> kld_radar;  // per bin, target present
  double kld_comm_total = 0.0;
};

inline KldReport closed_form_kld_report(const ScenarioConfig& c, const PathlossSet& p,
                                        const RadarWaveform& w, const WaveformStats& stats,
                                        double alpha_mag = 1.0) {
  const Mode mode = c.mode();
  const Constellation cst = constellation_for(c);
  KldReport r;
  r.mode = mode_label(mode);
  r.kld_dl.resize(c.num_dl_ues);
  for (int k = 0; k < c.num_dl_ues; ++k) {
    r.kld_dl[k] = kld_dl(mode, c, p, k, cst, dl_interference_total(mode, c, p, k));
  }
  const double ul_resid = ul_residual_total(mode, c, p, stats);
  r.kld_ul.resize(c.num_ul_ues);
  for (int k = 0; k < c.num_ul_ues; ++k) r.kld_ul[k] = kld_ul(mode, c, p, k, cst, ul_resid);
  r.kld_radar.resize(c.num_bins);
  for (int t = 0; t < c.num_bins; ++t) {
    r.kld_radar[t] =
        kld_radar(w, t, p.g_t[t], alpha_mag, radar_residual_total(mode, c, p, stats, 1, t));
  }
  r.kld_comm_total = kld_comm_total(r.kld_dl, r.kld_ul, c.num_dl_ues, c.num_ul_ues);
  return r;
}

/// Streaming per-symbol cloud moments (complex samples as 2-D real vectors).
struct CloudMoments {
  long long n = 0;
  double s_re = 0, s_im = 0, s_rere = 0, s_imim = 0, s_reim = 0;

  void add(std::complex<double> y) {
    ++n;
    s_re += y.real();
    s_im += y.imag();
    s_rere += y.real() * y.real();
    s_imim += y.imag() * y.imag();
    s_reim += y.real() * y.imag();
  }
  void merge(const CloudMoments& o) {
    n += o.n;
    s_re += o.s_re;
    s_im += o.s_im;
    s_rere += o.s_rere;
    s_imim += o.s_imim;
    s_reim += o.s_reim;
  }
  Eigen::Vector2d mean() const { return {s_re / n, s_im / n}; }
  Eigen::Matrix2d covariance() const {
    const Eigen::Vector2d mu = mean();
    Eigen::Matrix2d cov;
    cov(0, 0) = s_rere / n - mu(0) * mu(0);
    cov(1, 1) = s_imim / n - mu(1) * mu(1);
    cov(0, 1) = cov(1, 0) = s_reim / n - mu(0) * mu(1);
    return cov;
  }
};

enum class CloudVariance {
  kPerDimension,  // honest 2-D sample covariance (DL convention)
  kTotalAsDim,    // total complex variance on each axis (UL reference bookkeeping)
};

/// Pairwise-averaged empirical KLD of per-symbol clouds through
/// kld_gaussian, pooling a common covariance across symbols.
inline double empirical_psk_kld(const std::vector<CloudMoments>& clouds,
                                CloudVariance convention) {
  const int md = static_cast<int>(clouds.size());
  if (md < 2) return 0.0;
  Eigen::Matrix2d pooled = Eigen::Matrix2d::Zero();
  long long total = 0;
  for (const auto& cl : clouds) {
    if (cl.n < 2) throw std::invalid_argument("empirical_psk_kld: empty symbol cloud");
    pooled += cl.covariance() * static_cast<double>(cl.n);
    total += cl.n;
  }
  pooled /= static_cast<double>(total);
  Eigen::Matrix2d sigma;
  if (convention == CloudVariance::kPerDimension) {
    sigma = pooled;
  } else {
    sigma = Eigen::Matrix2d::Identity() * (pooled(0, 0) + pooled(1, 1));
  }
  double acc = 0.0;
  for (int n = 0; n < md; ++n) {
    for (int m = 0; m < md; ++m) {
      if (m == n) continue;
      acc += kld_gaussian(clouds[m].mean(), clouds[n].mean(), sigma, sigma);
    }
  }
  return acc / (md * (md - 1.0));
}

}  // namespace cfisac
