#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "facesync/netarch.hpp"

namespace facesync::testing {

/// Unique empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("facesync_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

/// Small network with the full topology, for fast gradient checks.
inline ArchConfig tiny_arch(std::size_t clip_length = 16) {
  ArchConfig a;
  a.clip_length = clip_length;
  a.encoder_channels = {3, 4, 4, 5, 5};
  a.decoder_channels = {4, 3, 3, 3};
  a.noise_length = 2 * clip_length;
  a.disc_embed_channels = 3;
  a.disc_channels = {4, 4, 5, 5};
  return a;
}

/// Reduced widths at the real clip length, used where training must finish quickly.
inline ArchConfig compact_arch() {
  ArchConfig a;
  a.encoder_channels = {16, 32, 32, 64, 64};
  a.decoder_channels = {32, 32, 16, 16};
  a.disc_embed_channels = 8;
  a.disc_channels = {16, 16, 32, 32};
  return a;
}

inline double uniform(std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double sample_std(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// 30 participant means on a 0.25 grid (four integer sequence scores each)
// with the requested mean and sample standard deviation.
inline std::vector<double> quarter_grid_sample(double mean, double sd) {
  const std::size_t n = 30;
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = -1.65 + 3.3 * static_cast<double>(i) / static_cast<double>(n - 1);
    v[i] = std::round((mean + 1.04 * sd * z) * 4.0) / 4.0;
  }
  double sum = 0;
  for (double x : v) sum += x;
  const double want = std::round(mean * n * 4.0) / 4.0;
  v[n / 2] += want - sum;
  for (int iter = 0; iter < 200 && std::abs(sample_std(v) - sd) > 0.002; ++iter) {
    double best = std::abs(sample_std(v) - sd);
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        v[i] += 0.25;
        v[j] -= 0.25;
        const double e = std::abs(sample_std(v) - sd);
        v[i] -= 0.25;
        v[j] += 0.25;
        if (e < best) best = e, bi = i, bj = j;
      }
    if (bi == bj) break;
    v[bi] += 0.25;
    v[bj] -= 0.25;
  }
  return v;
}

}  // namespace facesync::testing
