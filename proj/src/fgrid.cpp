#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "json.hpp"

#include "dragwarp/error.hpp"
#include "dragwarp/io.hpp"

namespace dragwarp {
namespace {

constexpr std::string_view kMagic = "FGRD\n";

void put_f32(Bytes& out, double value) {
  const auto narrowed = static_cast<float>(value);
  if (!std::isfinite(narrowed)) {
    throw Error(ErrorCode::NonFiniteValue, "value does not fit in binary32");
  }
  const auto bits = std::bit_cast<std::uint32_t>(narrowed);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

float get_f32(const std::uint8_t* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             static_cast<std::uint32_t>(p[1]) << 8 |
                             static_cast<std::uint32_t>(p[2]) << 16 |
                             static_cast<std::uint32_t>(p[3]) << 24;
  return std::bit_cast<float>(bits);
}

int header_dim(const nlohmann::json& header, const char* key) {
  const auto it = header.find(key);
  if (it == header.end() || !it->is_number_integer()) {
    throw Error(ErrorCode::HeaderParse, std::string("header field '") + key + "' missing");
  }
  const auto v = it->get<std::int64_t>();
  if (v <= 0 || v > (1 << 20)) {
    throw Error(ErrorCode::HeaderParse, std::string("header field '") + key + "' out of range");
  }
  return static_cast<int>(v);
}

}  // namespace

Bytes write_fgrid(const FeatureGrid& grid) {
  validate_grid(grid);
  const std::string header = std::string(kMagic) + "{\"h\":" + std::to_string(grid.height) +
                             ",\"w\":" + std::to_string(grid.width) +
                             ",\"d\":" + std::to_string(grid.depth_dim) + ",\"dtype\":\"f32\"}\n";
  Bytes out(header.begin(), header.end());
  out.reserve(out.size() + grid.data.size() * 4);
  for (double v : grid.data) put_f32(out, v);
  return out;
}

FeatureGrid read_fgrid(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size() ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw Error(ErrorCode::BadMagic, "missing FGRD magic");
  }
  const auto* begin = bytes.data() + kMagic.size();
  const auto* end = bytes.data() + bytes.size();
  const auto* newline = std::find(begin, end, std::uint8_t{'\n'});
  if (newline == end) throw Error(ErrorCode::HeaderParse, "header line is not terminated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(begin, newline);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::HeaderParse, e.what());
  }
  if (!header.is_object()) throw Error(ErrorCode::HeaderParse, "header is not a JSON object");
  const int h = header_dim(header, "h");
  const int w = header_dim(header, "w");
  const int d = header_dim(header, "d");
  const auto dtype = header.find("dtype");
  if (dtype == header.end() || *dtype != "f32") {
    throw Error(ErrorCode::HeaderParse, "dtype must be \"f32\"");
  }

  const std::size_t count = static_cast<std::size_t>(h) * w * d;
  const auto* payload = newline + 1;
  if (static_cast<std::size_t>(end - payload) < count * 4) {
    throw Error(ErrorCode::PayloadTruncated,
                "payload holds " + std::to_string(end - payload) + " bytes, expected " +
                    std::to_string(count * 4));
  }
  FeatureGrid grid(h, w, d);
  for (std::size_t i = 0; i < count; ++i) grid.data[i] = get_f32(payload + 4 * i);
  validate_grid(grid);
  return grid;
}

Bytes write_depth_fgrid(const DepthMap& depth) {
  validate_depth(depth);
  return write_fgrid(FeatureGrid(depth.height, depth.width, 1, depth.values));
}

DepthMap read_depth_fgrid(std::span<const std::uint8_t> bytes) {
  auto grid = read_fgrid(bytes);
  if (grid.depth_dim != 1) {
    throw Error(ErrorCode::DimensionMismatch, "depth FGRID must have d=1");
  }
  return DepthMap(grid.height, grid.width, std::move(grid.data));
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::InvalidArgument, "short write to " + path.string());
}

}  // namespace dragwarp
