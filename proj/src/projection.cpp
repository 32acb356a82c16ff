#include "dragwarp/projection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "dragwarp/error.hpp"

namespace dragwarp {
namespace {

std::size_t row_major(const Cell& c, int width) {
  return static_cast<std::size_t>(c.y) * width + c.x;
}

}  // namespace

Projection project_zbuffer(std::span<const CloudPoint> points, const Vec3& origin, int height,
                           int width) {
  Projection out;
  out.cellmap = TargetCellMap(height, width);
  // Source row-major order is taken over the same grid the points came from.
  for (const auto& p : points) {
    const Vec3 global = p.pos + origin;
    const double rx = std::round(global.x());
    const double ry = std::round(global.y());
    if (!(rx >= 0.0 && ry >= 0.0 && rx < width && ry < height)) {
      ++out.out_of_bounds;
      continue;
    }
    auto& entry = out.cellmap.at(static_cast<int>(rx), static_cast<int>(ry));
    const double z = global.z();
    if (entry.state != CellState::Dragged) {
      entry = {CellState::Dragged, p.src, z};
      continue;
    }
    ++out.collisions;
    const bool wins = z > entry.z ||
                      (z == entry.z && row_major(p.src, width) < row_major(entry.src, width));
    if (wins) entry = {CellState::Dragged, p.src, z};
  }
  return out;
}

std::size_t WarpedGrid::void_count() const {
  return static_cast<std::size_t>(std::count(void_cells.begin(), void_cells.end(), 1));
}

WarpedGrid assemble_warped_grid(const FeatureGrid& source, const Mask& mask,
                                const DragPartition& partition, const TargetCellMap& dragged) {
  validate_grid(source);
  if (mask.height != source.height || mask.width != source.width ||
      dragged.height != source.height || dragged.width != source.width) {
    throw Error(ErrorCode::ShapeMismatch, "grid, mask and cell map shapes differ");
  }
  WarpedGrid out;
  out.grid = source;
  out.void_cells.assign(source.cell_count(), 0);
  out.cellmap = TargetCellMap(source.height, source.width);

  for (const auto& p : partition.static_pts.points) {
    out.cellmap.at(p.src.x, p.src.y).state = CellState::StaticCopy;
  }
  for (const auto& p : partition.movable.points) {
    out.cellmap.at(p.src.x, p.src.y).state = CellState::Void;
  }
  for (int y = 0; y < source.height; ++y) {
    for (int x = 0; x < source.width; ++x) {
      const auto& claim = dragged.at(x, y);
      auto& entry = out.cellmap.at(x, y);
      if (claim.state == CellState::Dragged) {
        entry = claim;
        const auto from = source.cell(claim.src.x, claim.src.y);
        std::copy(from.begin(), from.end(), out.grid.cell(x, y).begin());
      } else if (entry.state == CellState::Void) {
        out.void_cells[source.cell_index(x, y)] = 1;
      }
    }
  }
  return out;
}

FillResult bnni_fill(const FeatureGrid& grid, std::span<const std::uint8_t> void_cells) {
  validate_grid(grid);
  if (void_cells.size() != grid.cell_count()) {
    throw Error(ErrorCode::ShapeMismatch, "void mask does not match the grid");
  }
  FillResult out{grid, 0};
  const auto voids = static_cast<std::size_t>(std::count(void_cells.begin(), void_cells.end(), 1));
  if (voids == 0) return out;
  if (voids == grid.cell_count()) throw Error(ErrorCode::AllVoid, "every cell is void");

  const int h = grid.height;
  const int w = grid.width;
  const int d = grid.depth_dim;
  auto is_void = [&](int x, int y) { return void_cells[grid.cell_index(x, y)] != 0; };
  constexpr std::array<std::array<int, 2>, 4> kDirections{{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!is_void(x, y)) continue;
      auto dst = out.grid.cell(x, y);
      std::fill(dst.begin(), dst.end(), 0.0);

      double inv_total = 0.0;
      std::array<double, 4> inv_len{};
      std::array<Cell, 4> hit{};
      for (std::size_t k = 0; k < kDirections.size(); ++k) {
        int cx = x + kDirections[k][0];
        int cy = y + kDirections[k][1];
        int len = 1;
        while (cx >= 0 && cy >= 0 && cx < w && cy < h && is_void(cx, cy)) {
          cx += kDirections[k][0];
          cy += kDirections[k][1];
          ++len;
        }
        if (cx < 0 || cy < 0 || cx >= w || cy >= h) continue;
        inv_len[k] = 1.0 / len;
        hit[k] = {cx, cy};
        inv_total += inv_len[k];
      }

      if (inv_total > 0.0) {
        for (std::size_t k = 0; k < kDirections.size(); ++k) {
          if (inv_len[k] == 0.0) continue;
          const double weight = inv_len[k] / inv_total;
          const auto src = grid.cell(hit[k].x, hit[k].y);
          for (int c = 0; c < d; ++c) dst[static_cast<std::size_t>(c)] += weight * src[static_cast<std::size_t>(c)];
        }
      } else {
        // No axis neighbor: copy the Euclidean-nearest filled cell (row-major ties).
        long best = std::numeric_limits<long>::max();
        Cell nearest;
        for (int sy = 0; sy < h; ++sy) {
          for (int sx = 0; sx < w; ++sx) {
            if (is_void(sx, sy)) continue;
            const long d2 = static_cast<long>(sx - x) * (sx - x) + static_cast<long>(sy - y) * (sy - y);
            if (d2 < best) {
              best = d2;
              nearest = {sx, sy};
            }
          }
        }
        const auto src = grid.cell(nearest.x, nearest.y);
        std::copy(src.begin(), src.end(), dst.begin());
      }
      ++out.filled;
    }
  }
  return out;
}

}  // namespace dragwarp
