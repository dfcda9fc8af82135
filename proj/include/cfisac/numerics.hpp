/**
 * @file numerics.hpp
 * @brief Special functions and seeded random sampling shared by the whole
 *        simulator: Marcum Q1 / noncentral chi-squared tail, complex Gaussian
 *        matrix draws, and Poisson-disk point placement.
 */
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfisac {

/// Deterministic per-trial random stream. Identical (master_seed,
/// stream_index) always reproduces the same draw sequence; distinct stream
/// indices give statistically independent streams.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
      : master_seed_(master_seed), stream_index_(stream_index) {
    std::seed_seq seq{master_seed, stream_index, std::uint64_t{0x9e3779b97f4a7c15ull}};
    engine_.seed(seq);
  }

  /// Independent substream for a named purpose (geometry, channels, noise...).
  RngStream fork(std::uint64_t tag) const {
    RngStream s(master_seed_, stream_index_);
    std::seed_seq seq{master_seed_, stream_index_, tag, std::uint64_t{0xd1342543de82ef95ull}};
    s.engine_.seed(seq);
    s.norm_.reset();
    return s;
  }

  std::mt19937_64& engine() { return engine_; }
  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

  double uniform() { return unif_(engine_); }
  double normal() { return norm_(engine_); }
  /// CN(0, total_variance): real and imaginary parts each carry half.
  std::complex<double> complex_normal(double total_variance) {
    const double s = std::sqrt(total_variance * 0.5);
    return {s * normal(), s * normal()};
  }
  int uniform_int(int n) {
    return std::uniform_int_distribution<int>(0, n - 1)(engine_);
  }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_index_;
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// First-order Marcum Q function Q1(a,b) = Pr{ncx2(2 dof, a^2) > b^2}.
///
/// Series over Poisson(a^2/2) weights of the Poisson(b^2/2) lower CDF, seeded
/// at the respective modes in log space so large arguments do not underflow.
/// Truncation is bounded by the remaining Poisson mass (< 1e-16 of the
/// result), giving <= 1e-10 absolute error over a,b <= 40.
inline double marcum_q1(double a, double b) {
  if (!std::isfinite(a) || !std::isfinite(b) || a < 0.0 || b < 0.0) {
    throw std::invalid_argument("marcum_q1: arguments must be finite and nonnegative");
  }
  const double x = 0.5 * a * a;
  const double y = 0.5 * b * b;
  if (y == 0.0) return 1.0;
  if (x == 0.0) return std::exp(-y);

  constexpr double kTermTol = 1e-18;
  const int k0 = static_cast<int>(x);

  const double lp0 = -x + k0 * std::log(x) - std::lgamma(k0 + 1.0);
  const double p0 = lp0 > -745.0 ? std::exp(lp0) : 0.0;
  const double lh0 = -y + k0 * std::log(y) - std::lgamma(k0 + 1.0);
  const double h0 = lh0 > -745.0 ? std::exp(lh0) : 0.0;

  // G0 = Pr{Poisson(y) <= k0}, accumulated outward from the Poisson(y) mode.
  const int m0 = std::min(k0, static_cast<int>(y));
  const double lq0 = -y + m0 * std::log(y) - std::lgamma(m0 + 1.0);
  double G0 = 0.0;
  {
    double q = lq0 > -745.0 ? std::exp(lq0) : 0.0;
    double qd = q;
    for (int m = m0; m >= 0; --m) {
      G0 += qd;
      qd *= m / y;
      if (qd == 0.0 || qd < G0 * kTermTol) break;
    }
    double qu = q;
    for (int m = m0; m < k0; ++m) {
      qu *= y / (m + 1.0);
      G0 += qu;
      if (qu == 0.0 || qu < G0 * kTermTol) break;
    }
    if (G0 > 1.0) G0 = 1.0;
  }

  double total = 0.0;
  {  // upward in k from the Poisson(x) mode
    double pois = p0, G = G0, h = h0;
    for (int k = k0;; ++k) {
      total += pois * G;
      pois *= x / (k + 1.0);
      h *= y / (k + 1.0);
      G += h;
      if (G > 1.0) G = 1.0;
      if ((pois < kTermTol && k > x) || k > k0 + 200000) break;
    }
  }
  {  // downward in k
    double pois = p0, G = G0, h = h0;
    for (int k = k0; k > 0;) {
      pois *= k / x;
      G -= h;
      h *= k / y;
      if (G < 0.0) G = 0.0;
      --k;
      total += pois * G;
      if (pois < kTermTol || G == 0.0) break;
    }
  }
  return std::min(1.0, std::max(0.0, total));
}

/// Complementary CDF of the noncentral chi-squared law with 2 degrees of
/// freedom. Only dof = 2 arises here; it equals marcum_q1(sqrt(lambda),
/// sqrt(x)) identically.
inline double noncentral_chi2_ccdf(double x, int dof, double lambda) {
  if (dof != 2) throw std::invalid_argument("noncentral_chi2_ccdf: only dof = 2 is supported");
  if (!std::isfinite(x) || !std::isfinite(lambda) || x < 0.0 || lambda < 0.0) {
    throw std::invalid_argument("noncentral_chi2_ccdf: arguments must be finite and nonnegative");
  }
  return marcum_q1(std::sqrt(lambda), std::sqrt(x));
}

/// i.i.d. circular complex Gaussian matrix with E|entry|^2 = total_variance.
inline Eigen::MatrixXcd sample_complex_gaussian(Eigen::Index rows, Eigen::Index cols,
                                                double total_variance, RngStream& rng) {
  if (!(total_variance > 0.0)) {
    throw std::invalid_argument("sample_complex_gaussian: total_variance must be positive");
  }
  const double s = std::sqrt(total_variance * 0.5);
  std::normal_distribution<double> dist(0.0, s);
  Eigen::MatrixXcd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double re = dist(rng.engine());
      const double im = dist(rng.engine());
      m(i, j) = {re, im};
    }
  }
  return m;
}

/// Exactly `count` points in [0,width] x [0,height] with pairwise distance
/// >= min_separation. Dart throwing with rejection; counts here are tiny so
/// no acceleration structure is warranted.
inline std::vector<Eigen::Vector2d> poisson_disk_sample(double width_m, double height_m,
                                                        double min_separation_m, int count,
                                                        RngStream& rng,
                                                        int rejection_budget = 10000) {
  const double r = min_separation_m;
  // Disjoint r/2 disks around each point must fit in the r-expanded region.
  const double packing_area = count * M_PI * 0.25 * r * r;
  if (packing_area > (width_m + r) * (height_m + r)) {
    throw CapacityError("poisson_disk_sample: cannot place " + std::to_string(count) +
                        " points with separation " + std::to_string(min_separation_m) +
                        " m in " + std::to_string(width_m) + " x " + std::to_string(height_m) +
                        " m (area bound)");
  }
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(count);
  int rejections = 0;
  while (static_cast<int>(pts.size()) < count) {
    Eigen::Vector2d p(rng.uniform() * width_m, rng.uniform() * height_m);
    bool ok = true;
    for (const auto& q : pts) {
      if ((p - q).squaredNorm() < r * r) {
        ok = false;
        break;
      }
    }
    if (ok) {
      pts.push_back(p);
    } else if (++rejections > rejection_budget) {
      throw CapacityError("poisson_disk_sample: rejection budget exhausted placing " +
                          std::to_string(count) + " points with separation " +
                          std::to_string(min_separation_m) + " m in " + std::to_string(width_m) +
                          " x " + std::to_string(height_m) + " m");
    }
  }
  return pts;
}

}  // namespace cfisac
