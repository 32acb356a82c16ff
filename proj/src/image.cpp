#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <memory>
#include <string>

#include "dragwarp/error.hpp"
#include "dragwarp/io.hpp"

namespace dragwarp {
namespace {

struct Rgba8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // 4 bytes per pixel
};

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void on_png_error(png_structp png, png_const_charp message) {
  auto* detail = static_cast<std::string*>(png_get_error_ptr(png));
  if (detail) *detail = message;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

void read_from_cursor(png_structp png, png_bytep out, png_size_t length) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + length > cursor->bytes.size()) {
    png_error(png, "unexpected end of PNG stream");
  }
  std::memcpy(out, cursor->bytes.data() + cursor->offset, length);
  cursor->offset += length;
}

void write_to_bytes(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_noop(png_structp) {}

struct DecodeState {
  ReadCursor cursor;
  Rgba8 image;
  std::vector<png_bytep> rows;
  std::string detail;
};

// libpng reports errors through longjmp; everything touched after setjmp
// lives in the heap-allocated state so its value survives the jump.
Rgba8 decode_rgba8(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw Error(ErrorCode::DecodeError, "not a PNG stream");
  }
  const auto state = std::make_unique<DecodeState>();
  state->cursor = ReadCursor{bytes, 0};
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &state->detail, on_png_error,
                                           on_png_warning);
  if (!png) throw Error(ErrorCode::DecodeError, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(ErrorCode::DecodeError, "png_create_info_struct failed");
  }

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::DecodeError,
                state->detail.empty() ? "PNG decode failed" : state->detail);
  }
  png_set_read_fn(png, &state->cursor, read_from_cursor);
  png_read_info(png, info);

  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  if (width == 0 || height == 0 || width > 16384 || height > 16384) {
    png_error(png, "unsupported PNG dimensions");
  }
  const int color = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const bool has_trns = png_get_valid(png, info, PNG_INFO_tRNS) != 0;
  if (bit_depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (has_trns) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (!(color & PNG_COLOR_MASK_ALPHA) && !has_trns) png_set_filler(png, 0xff, PNG_FILLER_AFTER);
  png_read_update_info(png, info);
  if (png_get_rowbytes(png, info) != static_cast<png_size_t>(width) * 4) {
    png_error(png, "unexpected row layout after conversion");
  }

  auto& image = state->image;
  image.height = static_cast<int>(height);
  image.width = static_cast<int>(width);
  image.pixels.resize(static_cast<std::size_t>(width) * height * 4);
  state->rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    state->rows[y] = image.pixels.data() + static_cast<std::size_t>(y) * width * 4;
  }
  png_read_image(png, state->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return std::move(state->image);
}

Bytes encode_png(int height, int width, int channels, const std::vector<std::uint8_t>& samples) {
  Bytes out;
  std::string detail;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &detail, on_png_error,
                                            on_png_warning);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG encode failed: " + detail);
  }
  png_set_write_fn(png, &out, write_to_bytes, flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(
        samples.data() + static_cast<std::size_t>(y) * width * channels);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

FeatureGrid image_to_grid(std::span<const std::uint8_t> png) {
  const auto rgba = decode_rgba8(png);
  FeatureGrid grid(rgba.height, rgba.width, 3);
  const std::size_t n = grid.cell_count();
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) grid.data[i * 3 + c] = rgba.pixels[i * 4 + c] / 255.0;
  }
  return grid;
}

Mask png_to_mask(std::span<const std::uint8_t> png) {
  const auto rgba = decode_rgba8(png);
  Mask mask(rgba.height, rgba.width);
  const std::size_t n = static_cast<std::size_t>(rgba.height) * rgba.width;
  for (std::size_t i = 0; i < n; ++i) {
    const auto* p = &rgba.pixels[i * 4];
    mask.bits[i] = (p[0] | p[1] | p[2]) != 0 ? 1 : 0;
  }
  return mask;
}

DepthMap luminance_depth(const FeatureGrid& grid) {
  if (grid.depth_dim != 3) {
    throw Error(ErrorCode::DimensionMismatch, "luminance depth needs a 3-channel grid");
  }
  DepthMap depth(grid.height, grid.width);
  for (std::size_t i = 0; i < grid.cell_count(); ++i) {
    const double* rgb = &grid.data[i * 3];
    depth.values[i] = 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2];
  }
  return depth;
}

Bytes grid_to_png(const FeatureGrid& grid) {
  validate_grid(grid);
  if (grid.depth_dim != 1 && grid.depth_dim != 3) return channels_to_png(grid);
  std::vector<std::uint8_t> samples(grid.data.size());
  std::transform(grid.data.begin(), grid.data.end(), samples.begin(), to_u8);
  return encode_png(grid.height, grid.width, grid.depth_dim, samples);
}

Bytes depth_to_png(const DepthMap& depth) {
  validate_depth(depth);
  const auto [lo, hi] = std::minmax_element(depth.values.begin(), depth.values.end());
  const double span = *hi - *lo;
  std::vector<std::uint8_t> samples(depth.values.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = span > 0.0 ? to_u8((depth.values[i] - *lo) / span) : 0;
  }
  return encode_png(depth.height, depth.width, 1, samples);
}

Bytes channels_to_png(const FeatureGrid& grid) {
  validate_grid(grid);
  const int panel_w = grid.width;
  const int out_w = panel_w * grid.depth_dim;
  std::vector<std::uint8_t> samples(static_cast<std::size_t>(out_w) * grid.height);
  for (int c = 0; c < grid.depth_dim; ++c) {
    double lo = grid.data[static_cast<std::size_t>(c)];
    double hi = lo;
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
      const double v = grid.data[i * grid.depth_dim + c];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double span = hi - lo;
    for (int y = 0; y < grid.height; ++y) {
      for (int x = 0; x < grid.width; ++x) {
        const double v = grid.cell(x, y)[static_cast<std::size_t>(c)];
        samples[static_cast<std::size_t>(y) * out_w + c * panel_w + x] =
            span > 0.0 ? to_u8((v - lo) / span) : 0;
      }
    }
  }
  return encode_png(grid.height, out_w, 1, samples);
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = bytes[i] << 16 | bytes[i + 1] << 8 | bytes[i + 2];
    out += kAlphabet[v >> 18 & 63];
    out += kAlphabet[v >> 12 & 63];
    out += kAlphabet[v >> 6 & 63];
    out += kAlphabet[v & 63];
  }
  if (i + 1 == bytes.size()) {
    const std::uint32_t v = bytes[i] << 16;
    out += kAlphabet[v >> 18 & 63];
    out += kAlphabet[v >> 12 & 63];
    out += "==";
  } else if (i + 2 == bytes.size()) {
    const std::uint32_t v = bytes[i] << 16 | bytes[i + 1] << 8;
    out += kAlphabet[v >> 18 & 63];
    out += kAlphabet[v >> 12 & 63];
    out += kAlphabet[v >> 6 & 63];
    out += '=';
  }
  return out;
}

Bytes base64_decode(std::string_view text) {
  if (text.starts_with("data:")) {
    const auto comma = text.find(',');
    if (comma == std::string_view::npos) {
      throw Error(ErrorCode::InvalidArgument, "malformed data URL");
    }
    text.remove_prefix(comma + 1);
  }
  auto value_of = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  Bytes out;
  std::uint32_t acc = 0;
  int bits = 0;
  bool padding = false;
  for (char c : text) {
    if (c == '=') {
      padding = true;
      continue;
    }
    if (c == '\n' || c == '\r' || c == ' ') continue;
    const int v = value_of(c);
    if (v < 0 || padding) throw Error(ErrorCode::InvalidArgument, "invalid base64 payload");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>(acc >> bits & 0xff));
    }
  }
  return out;
}

}  // namespace dragwarp
