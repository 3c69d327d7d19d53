#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dvseg/common.hpp"
#include "dvseg/grid.hpp"

namespace testing {

// Scratch directory for one test case, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("dvseg_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Captures warnings emitted through dvseg::warn for the scope's lifetime.
class WarningCapture {
 public:
  WarningCapture() {
    dvseg::set_warning_handler(
        [this](const std::string& m) { messages_.push_back(m); });
  }
  ~WarningCapture() { dvseg::set_warning_handler(nullptr); }
  const std::vector<std::string>& messages() const { return messages_; }

 private:
  std::vector<std::string> messages_;
};

template <typename Scalar>
dvseg::Grid3<Scalar> random_grid(const Eigen::Vector3i& shape,
                                 std::mt19937_64& rng, double lo = -1.0,
                                 double hi = 1.0) {
  dvseg::Grid3<Scalar> g(shape);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    g[i] = static_cast<Scalar>(dist(rng));
  }
  return g;
}

inline dvseg::Grid3<std::uint8_t> random_mask(const Eigen::Vector3i& shape,
                                              std::mt19937_64& rng,
                                              double density = 0.5) {
  dvseg::Grid3<std::uint8_t> g(shape);
  std::bernoulli_distribution dist(density);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    g[i] = dist(rng) ? 1 : 0;
  }
  return g;
}

}  // namespace testing
