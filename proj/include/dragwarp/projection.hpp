#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dragwarp/geometry.hpp"
#include "dragwarp/grid.hpp"

namespace dragwarp {

enum class CellState : std::uint8_t { Outside, StaticCopy, Dragged, Void };

struct CellEntry {
  CellState state = CellState::Outside;
  Cell src;        // winning source cell when Dragged
  double z = 0.0;  // global depth of the winning point when Dragged
};

/// One entry per grid cell, row-major.
struct TargetCellMap {
  int height = 0;
  int width = 0;
  std::vector<CellEntry> cells;

  TargetCellMap() = default;
  TargetCellMap(int h, int w)
      : height(h), width(w), cells(static_cast<std::size_t>(h) * w) {}

  const CellEntry& at(int x, int y) const {
    return cells[static_cast<std::size_t>(y) * width + x];
  }
  CellEntry& at(int x, int y) { return cells[static_cast<std::size_t>(y) * width + x]; }
};

struct WarpDiagnostics {
  std::int64_t moved = 0;
  std::int64_t static_count = 0;
  std::int64_t voids_filled = 0;
  std::int64_t out_of_bounds = 0;
  std::int64_t collisions = 0;
};

struct Projection {
  TargetCellMap cellmap;  // only Dragged entries set, the rest Outside
  std::int64_t out_of_bounds = 0;
  std::int64_t collisions = 0;  // points discarded by the depth test
};

/// Rounds global x/y to the nearest cell and keeps the largest z per cell.
/// Equal z goes to the smaller row-major source index, so the result does
/// not depend on point order. Points landing off-grid are dropped.
Projection project_zbuffer(std::span<const CloudPoint> points, const Vec3& origin, int height,
                           int width);

struct WarpedGrid {
  FeatureGrid grid;
  std::vector<std::uint8_t> void_cells;  // 1 where the cell has no feature yet
  TargetCellMap cellmap;                 // complete: every cell has a state
  std::size_t void_count() const;
};

/// Dragged cells take the source feature of their winning point; every other
/// cell copies the source in place, except vacated movable cells, which
/// become voids.
WarpedGrid assemble_warped_grid(const FeatureGrid& source, const Mask& mask,
                                const DragPartition& partition, const TargetCellMap& dragged);

struct FillResult {
  FeatureGrid grid;
  std::int64_t filled = 0;
};

/// Fills each void from the nearest non-void cell up, right, down and left,
/// weighted by inverse distance. Reads only the pre-fill grid. A void with no
/// axis neighbor copies the Euclidean-nearest non-void cell. Throws AllVoid.
FillResult bnni_fill(const FeatureGrid& grid, std::span<const std::uint8_t> void_cells);

}  // namespace dragwarp
