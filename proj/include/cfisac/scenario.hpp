/**
 * @file scenario.hpp
 * @brief Experiment configuration, node geometry, and the deterministic
 *        large-scale quantities derived from it (pathloss matrices, two-way
 *        radar pathloss, distributed steering vectors).
 */
#pragma once

#include "cfisac/numerics.hpp"

#include <algorithm>
#include <complex>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace cfisac {

enum class Deployment { kSeparated, kShared };
enum class Duplex { kHd, kFd };
enum class Mode { kSeHd, kSeFd, kShHd, kShFd };
enum class PathlossMode { kDistance, kUnit };
enum class TwoWayConvention { kDoubleDistance, kProductLegs };
enum class UlInverseMode { kMean, kPerDraw };

inline Deployment deployment_of(Mode m) {
  return (m == Mode::kSeHd || m == Mode::kSeFd) ? Deployment::kSeparated : Deployment::kShared;
}
inline Duplex duplex_of(Mode m) {
  return (m == Mode::kSeHd || m == Mode::kShHd) ? Duplex::kHd : Duplex::kFd;
}
inline const char* mode_label(Mode m) {
  switch (m) {
    case Mode::kSeHd: return "se-hd";
    case Mode::kSeFd: return "se-fd";
    case Mode::kShHd: return "sh-hd";
    case Mode::kShFd: return "sh-fd";
  }
  return "?";
}
inline Mode parse_mode(const std::string& s) {
  if (s == "se-hd") return Mode::kSeHd;
  if (s == "se-fd") return Mode::kSeFd;
  if (s == "sh-hd") return Mode::kShHd;
  if (s == "sh-fd") return Mode::kShFd;
  throw std::invalid_argument("unknown mode: " + s);
}

/// Complete experiment description. All channel/noise variances are total
/// complex variances (E|x|^2); a per-dimension variance never crosses an
/// interface.
struct ScenarioConfig {
  Deployment deployment = Deployment::kSeparated;
  Duplex duplex = Duplex::kHd;

  int num_aps = 40;          // M
  int num_comm_aps = 20;     // M_c (separated only)
  int num_radar_aps = 20;    // M_r (separated only)
  int num_dl_ues = 2;        // K_D
  int num_ul_ues = 2;        // K_U
  int num_bins = 3;          // T
  int snapshots = 100;       // L

  double p_comm = 0.8;       // P_c
  double p_radar = 0.1;      // P_r
  double p_ul = 0.1;         // P_u

  double beta_ap = 1e-3;
  double beta_radar = 1e-3;
  double sigma_ic_sq = 1e-6;         // IC estimation-error total variance
  double h_total_variance = 1.0;     // 2*sigma_H^2
  double f_total_variance = 1.0;     // 2*sigma_F^2
  double u_total_variance = 1.0;     // 2*sigma_u^2
  double noise_total_variance = 0.1; // 2*sigma_n^2, set by the sweep

  double eta = 3.0;
  double lambda0_m = 0.0857;
  double area_m = 800.0;
  double min_sep_m = 100.0;
  double ue_guard_m = 10.0;
  double pfa = 1e-4;

  PathlossMode pathloss_mode = PathlossMode::kUnit;
  TwoWayConvention two_way_convention = TwoWayConvention::kDoubleDistance;
  UlInverseMode ul_inverse_mode = UlInverseMode::kMean;

  std::string constellation_hd = "qpsk";
  std::string constellation_fd = "bpsk";

  long long n_mc = 1000;
  std::uint64_t master_seed = 1;

  Mode mode() const {
    if (deployment == Deployment::kSeparated) {
      return duplex == Duplex::kHd ? Mode::kSeHd : Mode::kSeFd;
    }
    return duplex == Duplex::kHd ? Mode::kShHd : Mode::kShFd;
  }
  void set_mode(Mode m) {
    deployment = deployment_of(m);
    duplex = duplex_of(m);
  }
  /// Antennas serving communication / radar in the active mode.
  int m_eff_comm() const {
    return deployment == Deployment::kSeparated ? num_comm_aps : num_aps;
  }
  int m_eff_radar() const {
    return deployment == Deployment::kSeparated ? num_radar_aps : num_aps;
  }
  double p_comm_per_ue() const { return p_comm / num_dl_ues; }
  double p_ul_per_ue() const { return p_ul / num_ul_ues; }
  void set_pr_over_n0_db(double db) { noise_total_variance = std::pow(10.0, -db / 10.0); }

  void validate() const {
    std::vector<std::string> errs;
    auto req = [&](bool ok, const std::string& msg) {
      if (!ok) errs.push_back(msg);
    };
    req(num_aps >= 1 && num_dl_ues >= 1 && num_ul_ues >= 1 && num_bins >= 1 && snapshots >= 1,
        "all counts must be >= 1");
    if (deployment == Deployment::kSeparated) {
      req(num_comm_aps + num_radar_aps == num_aps, "separated: M_c + M_r must equal M");
      req(num_comm_aps > num_ul_ues + 1, "separated: M_c must exceed K_U + 1");
      req(num_bins <= std::min(num_radar_aps, snapshots),
          "separated: T must not exceed min(M_r, L)");
    } else {
      req(num_aps > num_ul_ues + 1, "shared: M must exceed K_U + 1");
      req(num_aps > num_dl_ues, "shared: M must exceed K_D");
      req(num_bins <= std::min(num_aps, snapshots), "shared: T must not exceed min(M, L)");
    }
    req(std::abs(p_comm + p_radar + p_ul - 1.0) < 1e-9, "P_c + P_r + P_u must equal 1");
    req(p_comm >= 0 && p_radar >= 0 && p_ul >= 0, "power splits must be nonnegative");
    req(beta_ap >= 0.0 && beta_ap < 1.0 && beta_radar >= 0.0 && beta_radar < 1.0,
        "leakage coefficients must lie in [0, 1)");
    req(sigma_ic_sq >= 0.0, "sigma_ic_sq must be nonnegative");
    req(noise_total_variance > 0.0, "noise_total_variance must be positive");
    req(eta > 0.0 && lambda0_m > 0.0 && area_m > 0.0 && min_sep_m > 0.0, "geometry scalars must be positive");
    req(pfa > 0.0 && pfa < 1.0, "pfa must lie in (0, 1)");
    req(n_mc >= 1, "n_mc must be >= 1");
    if (!errs.empty()) {
      std::string all = "invalid ScenarioConfig:";
      for (const auto& e : errs) all += "\n  - " + e;
      throw std::invalid_argument(all);
    }
  }
};

namespace detail {

inline bool parse_bool_like(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected boolean, got '" + v + "'");
}

}  // namespace detail

/// Flat key = value config file. Unknown keys are an error; '#' starts a
/// comment.
inline ScenarioConfig load_scenario_config(std::istream& in) {
  ScenarioConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    auto as_int = [&] { return std::stoi(val); };
    auto as_double = [&] { return std::stod(val); };

    if (key == "deployment") {
      if (val == "separated") c.deployment = Deployment::kSeparated;
      else if (val == "shared") c.deployment = Deployment::kShared;
      else throw std::invalid_argument("config: deployment must be separated|shared");
    } else if (key == "duplex") {
      if (val == "hd") c.duplex = Duplex::kHd;
      else if (val == "fd") c.duplex = Duplex::kFd;
      else throw std::invalid_argument("config: duplex must be hd|fd");
    } else if (key == "num_aps") c.num_aps = as_int();
    else if (key == "num_comm_aps") c.num_comm_aps = as_int();
    else if (key == "num_radar_aps") c.num_radar_aps = as_int();
    else if (key == "num_dl_ues") c.num_dl_ues = as_int();
    else if (key == "num_ul_ues") c.num_ul_ues = as_int();
    else if (key == "num_bins") c.num_bins = as_int();
    else if (key == "snapshots") c.snapshots = as_int();
    else if (key == "p_comm") c.p_comm = as_double();
    else if (key == "p_radar") c.p_radar = as_double();
    else if (key == "p_ul") c.p_ul = as_double();
    else if (key == "beta_ap") c.beta_ap = as_double();
    else if (key == "beta_radar") c.beta_radar = as_double();
    else if (key == "sigma_ic_sq") c.sigma_ic_sq = as_double();
    else if (key == "h_total_variance") c.h_total_variance = as_double();
    else if (key == "f_total_variance") c.f_total_variance = as_double();
    else if (key == "u_total_variance") c.u_total_variance = as_double();
    else if (key == "noise_total_variance") c.noise_total_variance = as_double();
    else if (key == "pr_over_n0_db") c.set_pr_over_n0_db(as_double());
    else if (key == "eta") c.eta = as_double();
    else if (key == "lambda0_m") c.lambda0_m = as_double();
    else if (key == "area_m") c.area_m = as_double();
    else if (key == "min_sep_m") c.min_sep_m = as_double();
    else if (key == "ue_guard_m") c.ue_guard_m = as_double();
    else if (key == "pfa") c.pfa = as_double();
    else if (key == "pathloss_mode") {
      if (val == "distance") c.pathloss_mode = PathlossMode::kDistance;
      else if (val == "unit") c.pathloss_mode = PathlossMode::kUnit;
      else throw std::invalid_argument("config: pathloss_mode must be distance|unit");
    } else if (key == "two_way_convention") {
      if (val == "double_distance") c.two_way_convention = TwoWayConvention::kDoubleDistance;
      else if (val == "product_legs") c.two_way_convention = TwoWayConvention::kProductLegs;
      else throw std::invalid_argument("config: two_way_convention must be double_distance|product_legs");
    } else if (key == "ul_inverse_mode") {
      if (val == "mean") c.ul_inverse_mode = UlInverseMode::kMean;
      else if (val == "per_draw") c.ul_inverse_mode = UlInverseMode::kPerDraw;
      else throw std::invalid_argument("config: ul_inverse_mode must be mean|per_draw");
    } else if (key == "constellation_hd") c.constellation_hd = val;
    else if (key == "constellation_fd") c.constellation_fd = val;
    else if (key == "n_mc") c.n_mc = std::stoll(val);
    else if (key == "master_seed") c.master_seed = std::stoull(val);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  return c;
}

inline ScenarioConfig load_scenario_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  return load_scenario_config(f);
}

/// Node positions. In separated deployment ap_xy is stored radar subset
/// first: rows [0, M_r) are radar APs, rows [M_r, M) communication APs.
struct Geometry {
  std::vector<Eigen::Vector2d> ap_xy;
  std::vector<Eigen::Vector2d> dl_ue_xy;
  std::vector<Eigen::Vector2d> ul_ue_xy;
  std::vector<Eigen::Vector2d> target_xy;

  std::vector<Eigen::Vector2d> radar_aps(const ScenarioConfig& c) const {
    if (c.deployment == Deployment::kShared) return ap_xy;
    return {ap_xy.begin(), ap_xy.begin() + c.num_radar_aps};
  }
  std::vector<Eigen::Vector2d> comm_aps(const ScenarioConfig& c) const {
    if (c.deployment == Deployment::kShared) return ap_xy;
    return {ap_xy.begin() + c.num_radar_aps, ap_xy.end()};
  }
};

inline Geometry build_geometry(const ScenarioConfig& c, RngStream& rng) {
  Geometry g;
  g.ap_xy = poisson_disk_sample(c.area_m, c.area_m, c.min_sep_m, c.num_aps, rng);
  if (c.deployment == Deployment::kSeparated) {
    // Random split into radar/comm subsets so the sampler's fill order does
    // not bias either one spatially.
    std::vector<int> perm(c.num_aps);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = c.num_aps - 1; i > 0; --i) {
      std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
    }
    std::vector<Eigen::Vector2d> shuffled(c.num_aps);
    for (int i = 0; i < c.num_aps; ++i) shuffled[i] = g.ap_xy[perm[i]];
    g.ap_xy = std::move(shuffled);
  }
  auto place = [&](int n) {
    std::vector<Eigen::Vector2d> pts;
    pts.reserve(n);
    while (static_cast<int>(pts.size()) < n) {
      Eigen::Vector2d p(rng.uniform() * c.area_m, rng.uniform() * c.area_m);
      bool clear = true;
      for (const auto& ap : g.ap_xy) {
        if ((p - ap).squaredNorm() < c.ue_guard_m * c.ue_guard_m) {
          clear = false;
          break;
        }
      }
      if (clear) pts.push_back(p);
    }
    return pts;
  };
  g.dl_ue_xy = place(c.num_dl_ues);
  g.ul_ue_xy = place(c.num_ul_ues);
  g.target_xy = place(c.num_bins);
  return g;
}

/// Entry (i,j) = max(d_ij, 1 m)^(-eta/2).
inline Eigen::MatrixXd pathloss_matrix(const std::vector<Eigen::Vector2d>& from_xy,
                                       const std::vector<Eigen::Vector2d>& to_xy, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("pathloss_matrix: eta must be positive");
  Eigen::MatrixXd m(from_xy.size(), to_xy.size());
  for (std::size_t i = 0; i < from_xy.size(); ++i) {
    for (std::size_t j = 0; j < to_xy.size(); ++j) {
      const double d = std::max((from_xy[i] - to_xy[j]).norm(), 1.0);
      m(i, j) = std::pow(d, -eta / 2.0);
    }
  }
  return m;
}

/// Two-way target pathloss vector d_r,t. Under the default convention the
/// round trip is 2x the one-way AP-bin distance; product_legs applies the
/// one-way law once per leg instead.
inline Eigen::VectorXd radar_two_way_pathloss(const std::vector<Eigen::Vector2d>& ap_xy,
                                              const Eigen::Vector2d& target, double eta,
                                              TwoWayConvention conv = TwoWayConvention::kDoubleDistance) {
  if (!(eta > 0.0)) throw std::invalid_argument("radar_two_way_pathloss: eta must be positive");
  Eigen::VectorXd v(ap_xy.size());
  for (std::size_t m = 0; m < ap_xy.size(); ++m) {
    const double d = std::max((ap_xy[m] - target).norm(), 1.0);
    v(m) = conv == TwoWayConvention::kDoubleDistance ? std::pow(2.0 * d, -eta / 2.0)
                                                     : std::pow(d, -eta);
  }
  return v;
}

/// Distributed steering vector: per-AP phase of the wavelength-normalised
/// round-trip distance, unit modulus.
inline Eigen::VectorXcd steering_vector(const std::vector<Eigen::Vector2d>& ap_xy,
                                        const Eigen::Vector2d& target, double lambda0_m) {
  if (!(lambda0_m > 0.0)) throw std::invalid_argument("steering_vector: lambda0_m must be positive");
  Eigen::VectorXcd a(ap_xy.size());
  for (std::size_t m = 0; m < ap_xy.size(); ++m) {
    const double d = (ap_xy[m] - target).norm();
    const double phase = -2.0 * M_PI * (2.0 * d) / lambda0_m;
    a(m) = std::polar(1.0, phase);
  }
  return a;
}

/// All large-scale matrices a mode needs, derived deterministically from a
/// Geometry. Under PathlossMode::kUnit the amplitude matrices are all-ones
/// (steering phases kept), which is the normalization the reported reference
/// curves use.
struct PathlossSet {
  Eigen::MatrixXd d_c;      // K_D x M_eff_c   comm APs -> DL UEs
  Eigen::MatrixXd d_c_ul;   // K_U x M_eff_c   UL UEs -> comm APs
  Eigen::MatrixXd d_ru;     // K_D x M_r       radar APs -> DL UEs
  Eigen::MatrixXd d_ru_ul;  // K_U x M_r       UL UEs -> radar APs
  Eigen::MatrixXd d_rc;     // M_eff_c x M_eff_r  radar APs -> comm APs
  Eigen::MatrixXd d_u;      // K_D x K_U       UL UEs -> DL UEs
  std::vector<Eigen::VectorXd> d_r;   // per bin: two-way pathloss, len M_eff_r
  std::vector<Eigen::VectorXcd> a_t;  // per bin: steering vector
  std::vector<Eigen::VectorXcd> g_t;  // per bin: d_r .* a_t

  /// Mean DL pathloss amplitude (1/M) sum_i d^(-eta/2) for UE k.
  double dbar_dl(int k) const { return d_c.row(k).mean(); }
  double dbar_ul(int k) const { return d_c_ul.row(k).mean(); }
};

inline PathlossSet build_pathloss_set(const ScenarioConfig& c, const Geometry& geo) {
  PathlossSet p;
  const auto comm = geo.comm_aps(c);
  const auto radar = geo.radar_aps(c);
  if (c.pathloss_mode == PathlossMode::kDistance) {
    p.d_c = pathloss_matrix(geo.dl_ue_xy, comm, c.eta);
    p.d_c_ul = pathloss_matrix(geo.ul_ue_xy, comm, c.eta);
    p.d_ru = pathloss_matrix(geo.dl_ue_xy, radar, c.eta);
    p.d_ru_ul = pathloss_matrix(geo.ul_ue_xy, radar, c.eta);
    p.d_rc = pathloss_matrix(comm, radar, c.eta);
    p.d_u = pathloss_matrix(geo.dl_ue_xy, geo.ul_ue_xy, c.eta);
  } else {
    p.d_c = Eigen::MatrixXd::Ones(c.num_dl_ues, comm.size());
    p.d_c_ul = Eigen::MatrixXd::Ones(c.num_ul_ues, comm.size());
    p.d_ru = Eigen::MatrixXd::Ones(c.num_dl_ues, radar.size());
    p.d_ru_ul = Eigen::MatrixXd::Ones(c.num_ul_ues, radar.size());
    p.d_rc = Eigen::MatrixXd::Ones(comm.size(), radar.size());
    p.d_u = Eigen::MatrixXd::Ones(c.num_dl_ues, c.num_ul_ues);
  }
  p.d_r.reserve(c.num_bins);
  p.a_t.reserve(c.num_bins);
  p.g_t.reserve(c.num_bins);
  for (int t = 0; t < c.num_bins; ++t) {
    Eigen::VectorXd dr =
        c.pathloss_mode == PathlossMode::kDistance
            ? radar_two_way_pathloss(radar, geo.target_xy[t], c.eta, c.two_way_convention)
            : Eigen::VectorXd::Ones(radar.size()).eval();
    Eigen::VectorXcd at = steering_vector(radar, geo.target_xy[t], c.lambda0_m);
    p.g_t.push_back(dr.cast<std::complex<double>>().cwiseProduct(at));
    p.d_r.push_back(std::move(dr));
    p.a_t.push_back(std::move(at));
  }
  return p;
}

}  // namespace cfisac
