#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "dragwarp/error.hpp"
#include "dragwarp/grid.hpp"

namespace dragwarp::testing {

/// Code of the dragwarp::Error thrown by `f`; records a failure if none is.
inline ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no dragwarp::Error thrown";
  return ErrorCode::Busy;
}

/// Values are rounded to binary32 so file round trips are exact.
inline FeatureGrid random_grid(std::mt19937_64& rng, int h, int w, int d, double lo = -1.0,
                               double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  FeatureGrid g(h, w, d);
  for (double& v : g.data) v = static_cast<float>(u(rng));
  return g;
}

/// 8-bit quantized RGB values, as produced by PNG decoding.
inline FeatureGrid random_image(std::mt19937_64& rng, int h, int w) {
  std::uniform_int_distribution<int> u(0, 255);
  FeatureGrid g(h, w, 3);
  for (double& v : g.data) v = u(rng) / 255.0;
  return g;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("dragwarp-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace dragwarp::testing
