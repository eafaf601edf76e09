#pragma once

// Counter-based Gaussian noise. Every standard normal is addressed by
// (seed, path_id, index) so a path's increments never depend on which
// thread simulated it or in what order paths were visited.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include <Eigen/Dense>

namespace bridgesim {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeylA;
        key[1] += kWeylB;
      }
      ctr = single_round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMulA = 0xD2511F53u;
  static constexpr std::uint32_t kMulB = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
  static constexpr std::uint32_t kWeylB = 0xBB67AE85u;

  static Counter single_round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = std::uint64_t{kMulA} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMulB} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

/// Deterministic standard-normal stream for one path. Normal number `q`
/// comes from Philox block q/2 through Box-Muller, so any entry can be
/// generated independently of the others.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint64_t path_id)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        path_lo_(static_cast<std::uint32_t>(path_id)),
        path_hi_(static_cast<std::uint32_t>(path_id >> 32)) {}

  double normal(std::uint64_t index) const {
    const auto pair = normal_pair(index / 2);
    return pair[index % 2];
  }

  /// Standard normal vector xi_j for integration step `step`; scale by
  /// sqrt(dt_j) to obtain a Brownian increment.
  Eigen::VectorXd step_normals(std::uint64_t step, Eigen::Index dim) const {
    Eigen::VectorXd out(dim);
    const std::uint64_t first = step * static_cast<std::uint64_t>(dim);
    Eigen::Index i = 0;
    if (first % 2 == 1 && dim > 0) {
      out[i++] = normal_pair(first / 2)[1];
    }
    for (; i + 1 < dim; i += 2) {
      const auto pair = normal_pair((first + static_cast<std::uint64_t>(i)) / 2);
      out[i] = pair[0];
      out[i + 1] = pair[1];
    }
    if (i < dim) {
      out[i] = normal_pair((first + static_cast<std::uint64_t>(i)) / 2)[0];
    }
    return out;
  }

 private:
  std::array<double, 2> normal_pair(std::uint64_t block) const {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block),
                                  static_cast<std::uint32_t>(block >> 32),
                                  path_lo_, path_hi_};
    const auto bits = Philox4x32::generate(ctr, key_);
    // u1 in (0, 1] keeps the logarithm finite; u2 in [0, 1).
    const double u1 = (static_cast<double>(to_53(bits[0], bits[1])) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(to_53(bits[2], bits[3])) * 0x1.0p-53;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

  static std::uint64_t to_53(std::uint32_t lo, std::uint32_t hi) {
    return ((std::uint64_t{hi} << 32) | lo) >> 11;
  }

  Philox4x32::Key key_;
  std::uint32_t path_lo_;
  std::uint32_t path_hi_;
};

}  // namespace bridgesim
