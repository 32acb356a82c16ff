#include "dragwarp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dragwarp/error.hpp"

namespace dragwarp {

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(),
                                                [](std::uint8_t b) { return b != 0; }));
}

void validate_grid(const FeatureGrid& grid) {
  if (grid.height <= 0 || grid.width <= 0 || grid.depth_dim <= 0) {
    throw Error(ErrorCode::DimensionMismatch, "grid dimensions must be positive");
  }
  const auto expected = grid.cell_count() * static_cast<std::size_t>(grid.depth_dim);
  if (grid.data.size() != expected) {
    throw Error(ErrorCode::DimensionMismatch,
                "grid data has " + std::to_string(grid.data.size()) + " values, expected " +
                    std::to_string(expected));
  }
  const auto bad = std::find_if(grid.data.begin(), grid.data.end(),
                                [](double v) { return !std::isfinite(v); });
  if (bad != grid.data.end()) {
    throw Error(ErrorCode::NonFiniteValue,
                "non-finite value at offset " + std::to_string(bad - grid.data.begin()));
  }
}

void validate_depth(const DepthMap& depth) {
  if (depth.height <= 0 || depth.width <= 0 ||
      depth.values.size() != static_cast<std::size_t>(depth.height) * depth.width) {
    throw Error(ErrorCode::DimensionMismatch, "depth map length does not match its shape");
  }
  if (std::any_of(depth.values.begin(), depth.values.end(),
                  [](double v) { return !std::isfinite(v); })) {
    throw Error(ErrorCode::NonFiniteValue, "depth map contains a non-finite value");
  }
}

void validate_mask(const Mask& mask) {
  if (mask.height <= 0 || mask.width <= 0 ||
      mask.bits.size() != static_cast<std::size_t>(mask.height) * mask.width) {
    throw Error(ErrorCode::DimensionMismatch, "mask length does not match its shape");
  }
}

void validate_params(const PcddParams& p) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(p.dp_min) || !finite(p.dp_max) || !(p.dp_max > p.dp_min)) {
    throw Error(ErrorCode::InvalidArgument, "dp_max must exceed dp_min");
  }
  if (std::isnan(p.d_origin) || p.d_origin < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "d_O must be non-negative");
  }
  // d_shield may be +inf, which disables the depth filter.
  if (std::isnan(p.d_shield) || p.d_shield < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "d_shield must be non-negative");
  }
  if (!(p.alpha >= 0.0 && p.alpha <= 1.0) || !(p.beta >= 0.0 && p.beta <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "alpha and beta must lie in [0, 1]");
  }
  if (p.mu && !(std::isfinite(*p.mu) && *p.mu > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "mu must be positive");
  }
  if (p.fixed_point_count < 0) {
    throw Error(ErrorCode::InvalidArgument, "fixed_point_count must be non-negative");
  }
}

void validate_pair(const DragPair& pair, int height, int width) {
  const auto& h = pair.handle;
  const auto& t = pair.target;
  if (!std::isfinite(h.x) || !std::isfinite(h.y) || !std::isfinite(t.x) || !std::isfinite(t.y)) {
    throw Error(ErrorCode::InvalidArgument, "drag coordinates must be finite");
  }
  if (h.x < 0.0 || h.y < 0.0 || h.x >= width || h.y >= height) {
    throw Error(ErrorCode::InvalidArgument, "handle lies outside the grid");
  }
}

}  // namespace dragwarp
