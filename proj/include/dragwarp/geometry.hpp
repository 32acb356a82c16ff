#pragma once

// Point-cloud drag geometry: lift the masked region to 3D, split it into the
// movable subject and static remainder, then move the subject with a rigid
// motion from the primary drag plus a multiquadric RBF refinement driven by
// every drag.

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "dragwarp/grid.hpp"

namespace dragwarp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

struct CloudPoint {
  Vec3 pos;  // local coordinates (global minus origin)
  Cell src;  // source cell this point was lifted from
};

struct PointCloud {
  std::vector<CloudPoint> points;
  Vec3 origin = Vec3::Zero();
};

struct DragPartition {
  PointCloud movable;
  PointCloud static_pts;
};

/// Control points C = handles followed by fixed points, and per-point weights.
struct RbfField {
  std::vector<Vec3> control_points;
  Eigen::MatrixX3d weights;
  double mu = 1.0;
};

/// Norm threshold below which a rotation input is treated as zero length,
/// and angular tolerance for the parallel / antiparallel cases.
inline constexpr double kDegenerateNorm = 1e-9;
inline constexpr double kAngleEpsilon = 1e-9;
/// Partial-pivoting elimination fails when a pivot drops below this.
inline constexpr double kPivotFloor = 1e-12;

/// Bilinear resize (pixel-center aligned) followed by an affine map of the
/// resized range onto [dp_min, dp_max]. Throws DegenerateDepthRange.
DepthMap rescale_depth(const DepthMap& depth, int height, int width, double dp_min,
                       double dp_max);

/// Centroid of masked cell centers; z is the depth at the masked cell nearest
/// the centroid minus d_origin. Throws EmptyMask, ShapeMismatch.
Vec3 estimate_origin(const Mask& mask, const DepthMap& depth, double d_origin);

/// One point per masked cell, in row-major cell order. Throws ShapeMismatch.
PointCloud build_point_cloud(const Mask& mask, const DepthMap& depth, const Vec3& origin);

/// Grid cell containing a continuous grid coordinate (nearest cell center,
/// clamped to the grid).
Cell cell_of(const Vec2& p, int height, int width);

/// Movable = points within d_shield (in local z) of the point at the primary
/// handle's cell. Throws HandleOutsideMask.
DragPartition filter_drag_subject(const PointCloud& cloud, const DragPair& primary,
                                  double d_shield);

/// Rotation taking the direction of `from` onto the direction of `to`.
/// Throws DegenerateVector, AmbiguousAxis.
Mat3 rodrigues_rotation(const Vec3& from, const Vec3& to);

/// p -> R p + alpha (b1 - R a1).
std::vector<Vec3> rigid_transform(std::span<const Vec3> points, const Mat3& rotation,
                                  const Vec3& a1, const Vec3& b1, double alpha);

/// Farthest-point sampling seeded at the point farthest from all handles.
std::vector<Vec3> select_fixed_points(std::span<const Vec3> movable, std::span<const Vec3> handles,
                                      int k);

/// Multiquadric kernel sqrt(1 + (mu r)^2).
double multiquadric(double r, double mu);

/// Scale-adaptive shape parameter: 1 / mean pairwise distance (1 for a
/// single control point).
double auto_mu(std::span<const Vec3> control_points);

/// Fits weights so that handles move by (target - handle) and fixed points
/// stay put. Throws DuplicateControlPoint, SingularSystem.
RbfField solve_rbf(std::span<const Vec3> handles, std::span<const Vec3> targets,
                   std::span<const Vec3> fixed, double mu);

Vec3 eval_rbf(const RbfField& field, const Vec3& p);

/// minF / (minA + minF); 1 when there are no fixed points.
double gamma_weight(const Vec3& p, std::span<const Vec3> handles, std::span<const Vec3> fixed);

/// Dense Gaussian elimination with partial pivoting, solving A X = B in
/// place. Throws SingularSystem.
Eigen::MatrixXd solve_dense(Eigen::MatrixXd a, Eigen::MatrixXd b);

struct LiftedPair {
  Vec3 handle;
  Vec3 target;
};

/// Both endpoints take the rescaled depth at the handle's cell.
LiftedPair lift_pair(const DragPair& pair, const DepthMap& depth, const Vec3& origin);

struct HybridDragResult {
  std::vector<CloudPoint> points;  // deformed movable points, local coordinates
  Mat3 rotation = Mat3::Identity();
  bool rotation_fallback = false;  // rotation was degenerate, identity used
  std::vector<Vec3> fixed_points;
  RbfField field;
};

/// Rigid motion from the first pair, then beta * gamma * s evaluated at the
/// rigid positions with every pair as an RBF handle plus selected fixed points.
HybridDragResult hybrid_drag(const DragPartition& partition, std::span<const DragPair> pairs,
                             const PcddParams& params, const DepthMap& depth);

}  // namespace dragwarp
