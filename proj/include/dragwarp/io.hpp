#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dragwarp/grid.hpp"

namespace dragwarp {

using Bytes = std::vector<std::uint8_t>;

// FGRID container:
//   "FGRD\n" {"h":H,"w":W,"d":D,"dtype":"f32"} "\n" payload
// payload is H*W*D little-endian IEEE-754 binary32 values in (y, x, channel)
// order. Values are narrowed from double on write.
Bytes write_fgrid(const FeatureGrid& grid);
FeatureGrid read_fgrid(std::span<const std::uint8_t> bytes);

/// A depth map is stored as a single-channel FGRID.
Bytes write_depth_fgrid(const DepthMap& depth);
DepthMap read_depth_fgrid(std::span<const std::uint8_t> bytes);

/// Decodes any PNG libpng understands into RGB channels scaled to [0, 1].
FeatureGrid image_to_grid(std::span<const std::uint8_t> png);

/// Decodes a 1-bit or 8-bit PNG mask; any nonzero color sample is true.
Mask png_to_mask(std::span<const std::uint8_t> png);

/// 0.299 R + 0.587 G + 0.114 B per cell of a 3-channel grid.
DepthMap luminance_depth(const FeatureGrid& grid);

/// Encodes a 1- or 3-channel grid as 8-bit gray or RGB, clamping to [0, 1].
/// Values that came from an 8-bit image re-encode to the same samples.
Bytes grid_to_png(const FeatureGrid& grid);

/// Encodes a depth map as 8-bit gray, min..max mapped to 0..255.
Bytes depth_to_png(const DepthMap& depth);

/// For grids with channel counts other than 1 or 3: channels laid side by
/// side as gray panels, each min-max normalized.
Bytes channels_to_png(const FeatureGrid& grid);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Accepts an optional "data:...;base64," prefix. Throws Error(InvalidArgument).
Bytes base64_decode(std::string_view text);

}  // namespace dragwarp
