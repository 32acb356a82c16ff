#pragma once

// Core value types shared by the warp engine and the sampler.
//
// Coordinates follow image conventions: x indexes columns (width), y indexes
// rows (height), origin at the top-left cell. Cell (x, y) has its center at
// integer coordinates (x, y).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace dragwarp {

/// Row-major (y, x, channel) grid of feature vectors. Image pixels and
/// diffusion latents are both represented this way.
struct FeatureGrid {
  int height = 0;
  int width = 0;
  int depth_dim = 0;
  std::vector<double> data;

  FeatureGrid() = default;
  FeatureGrid(int h, int w, int d, double fill = 0.0)
      : height(h), width(w), depth_dim(d),
        data(static_cast<std::size_t>(h) * w * d, fill) {}
  FeatureGrid(int h, int w, int d, std::vector<double> values)
      : height(h), width(w), depth_dim(d), data(std::move(values)) {}

  std::size_t cell_count() const { return static_cast<std::size_t>(height) * width; }
  std::size_t cell_index(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }

  std::span<double> cell(int x, int y) {
    return {data.data() + cell_index(x, y) * depth_dim, static_cast<std::size_t>(depth_dim)};
  }
  std::span<const double> cell(int x, int y) const {
    return {data.data() + cell_index(x, y) * depth_dim, static_cast<std::size_t>(depth_dim)};
  }
  std::span<const double> cell(std::size_t index) const {
    return {data.data() + index * depth_dim, static_cast<std::size_t>(depth_dim)};
  }

  bool same_shape(const FeatureGrid& other) const {
    return height == other.height && width == other.width && depth_dim == other.depth_dim;
  }

  friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;
};

struct DepthMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  DepthMap() = default;
  DepthMap(int h, int w, double fill = 0.0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}
  DepthMap(int h, int w, std::vector<double> v) : height(h), width(w), values(std::move(v)) {}

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const DepthMap&, const DepthMap&) = default;
};

struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int h, int w, bool fill = false)
      : height(h), width(w), bits(static_cast<std::size_t>(h) * w, fill ? 1 : 0) {}

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v = true) {
    bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
  std::size_t count() const;

  friend bool operator==(const Mask&, const Mask&) = default;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct DragPair {
  Vec2 handle;
  Vec2 target;
};

/// Parameters of the point-cloud drag. Defaults are the published settings.
struct PcddParams {
  double dp_min = 0.0;
  double dp_max = 63.0;
  double d_origin = 20.0;   // slack distance pushing the origin behind the surface
  double d_shield = 30.0;   // depth band around the primary handle that moves
  double alpha = 0.7;       // rigid translation weight
  double beta = 0.7;        // non-rigid weight
  std::optional<double> mu; // multiquadric shape; nullopt selects it from the control points
  int fixed_point_count = 4;
};

/// Throws Error(DimensionMismatch | NonFiniteValue).
void validate_grid(const FeatureGrid& grid);
void validate_depth(const DepthMap& depth);
void validate_mask(const Mask& mask);
void validate_params(const PcddParams& params);

/// Throws Error(InvalidArgument) when the handle lies outside [0,w)x[0,h).
void validate_pair(const DragPair& pair, int height, int width);

}  // namespace dragwarp
