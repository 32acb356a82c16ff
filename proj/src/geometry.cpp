#include "dragwarp/geometry.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dragwarp/error.hpp"

namespace dragwarp {
namespace {

void require_same_shape(const Mask& mask, const DepthMap& depth) {
  if (mask.height != depth.height || mask.width != depth.width) {
    throw Error(ErrorCode::ShapeMismatch, "mask is " + std::to_string(mask.width) + "x" +
                                              std::to_string(mask.height) + ", depth is " +
                                              std::to_string(depth.width) + "x" +
                                              std::to_string(depth.height));
  }
}

Mat3 cross_matrix(const Vec3& u) {
  Mat3 k;
  k << 0.0, -u.z(), u.y(),
       u.z(), 0.0, -u.x(),
       -u.y(), u.x(), 0.0;
  return k;
}

double min_distance(const Vec3& p, std::span<const Vec3> set) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : set) best = std::min(best, (p - q).norm());
  return best;
}

}  // namespace

DepthMap rescale_depth(const DepthMap& depth, int height, int width, double dp_min,
                       double dp_max) {
  validate_depth(depth);
  if (height <= 0 || width <= 0) {
    throw Error(ErrorCode::InvalidArgument, "target shape must be positive");
  }
  if (!(dp_max > dp_min)) throw Error(ErrorCode::InvalidArgument, "dp_max must exceed dp_min");

  DepthMap resized(height, width);
  const double sx = static_cast<double>(depth.width) / width;
  const double sy = static_cast<double>(depth.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, depth.height - 1.0);
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, depth.height - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, depth.width - 1.0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, depth.width - 1);
      const double tx = fx - x0;
      const double top = depth.at(x0, y0) * (1.0 - tx) + depth.at(x1, y0) * tx;
      const double bottom = depth.at(x0, y1) * (1.0 - tx) + depth.at(x1, y1) * tx;
      resized.at(x, y) = top * (1.0 - ty) + bottom * ty;
    }
  }

  const auto [lo_it, hi_it] = std::minmax_element(resized.values.begin(), resized.values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) {
    throw Error(ErrorCode::DegenerateDepthRange, "depth map is constant after resizing");
  }
  for (double& v : resized.values) {
    v = v == hi ? dp_max : dp_min + (v - lo) / (hi - lo) * (dp_max - dp_min);
  }
  return resized;
}

Vec3 estimate_origin(const Mask& mask, const DepthMap& depth, double d_origin) {
  validate_mask(mask);
  require_same_shape(mask, depth);
  double sx = 0.0;
  double sy = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      sx += x;
      sy += y;
      ++n;
    }
  }
  if (n == 0) throw Error(ErrorCode::EmptyMask, "mask has no cells");
  const double cx = sx / static_cast<double>(n);
  const double cy = sy / static_cast<double>(n);

  // Ties go to the first masked cell in row-major order.
  double best = std::numeric_limits<double>::infinity();
  Cell nearest;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      if (d2 < best) {
        best = d2;
        nearest = {x, y};
      }
    }
  }
  return {cx, cy, depth.at(nearest.x, nearest.y) - d_origin};
}

PointCloud build_point_cloud(const Mask& mask, const DepthMap& depth, const Vec3& origin) {
  validate_mask(mask);
  require_same_shape(mask, depth);
  PointCloud cloud;
  cloud.origin = origin;
  cloud.points.reserve(mask.count());
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      cloud.points.push_back(
          {Vec3(x - origin.x(), y - origin.y(), depth.at(x, y) - origin.z()), Cell{x, y}});
    }
  }
  return cloud;
}

Cell cell_of(const Vec2& p, int height, int width) {
  const int x = static_cast<int>(std::floor(p.x + 0.5));
  const int y = static_cast<int>(std::floor(p.y + 0.5));
  return {std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1)};
}

DragPartition filter_drag_subject(const PointCloud& cloud, const DragPair& primary,
                                  double d_shield) {
  // The handle cell is found by exact source-cell match, so the grid extent
  // only matters for clamping; use a bound that never clamps a valid handle.
  constexpr int kUnbounded = std::numeric_limits<int>::max() / 2;
  const Cell handle_cell = cell_of(primary.handle, kUnbounded, kUnbounded);
  const auto handle_it = std::find_if(cloud.points.begin(), cloud.points.end(),
                                      [&](const CloudPoint& p) { return p.src == handle_cell; });
  if (handle_it == cloud.points.end()) {
    throw Error(ErrorCode::HandleOutsideMask,
                "primary handle cell (" + std::to_string(handle_cell.x) + ", " +
                    std::to_string(handle_cell.y) + ") is not masked");
  }
  const double z_handle = handle_it->pos.z();

  DragPartition out;
  out.movable.origin = cloud.origin;
  out.static_pts.origin = cloud.origin;
  for (const auto& p : cloud.points) {
    if (std::abs(p.pos.z() - z_handle) <= d_shield) {
      out.movable.points.push_back(p);
    } else {
      out.static_pts.points.push_back(p);
    }
  }
  return out;
}

Mat3 rodrigues_rotation(const Vec3& from, const Vec3& to) {
  const double nf = from.norm();
  const double nt = to.norm();
  if (!(nf > kDegenerateNorm) || !(nt > kDegenerateNorm)) {
    throw Error(ErrorCode::DegenerateVector, "rotation input has (near) zero length");
  }
  const Vec3 a = from / nf;
  const Vec3 b = to / nt;
  const Vec3 axis = a.cross(b);
  const double sin_theta = axis.norm();
  const double cos_theta = std::clamp(a.dot(b), -1.0, 1.0);
  // atan2 keeps full precision near 0 and pi, where arccos does not.
  const double theta = std::atan2(sin_theta, cos_theta);
  if (theta < kAngleEpsilon) return Mat3::Identity();
  if (std::numbers::pi - theta < kAngleEpsilon) {
    throw Error(ErrorCode::AmbiguousAxis, "antiparallel vectors leave the axis undefined");
  }
  const Mat3 k = cross_matrix(axis / sin_theta);
  return Mat3::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * (k * k);
}

std::vector<Vec3> rigid_transform(std::span<const Vec3> points, const Mat3& rotation,
                                  const Vec3& a1, const Vec3& b1, double alpha) {
  const Vec3 translation = alpha * (b1 - rotation * a1);
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(rotation * p + translation);
  return out;
}

std::vector<Vec3> select_fixed_points(std::span<const Vec3> movable,
                                      std::span<const Vec3> handles, int k) {
  std::vector<Vec3> chosen;
  if (k <= 0 || movable.empty()) return chosen;
  // Distance from each candidate to the nearest handle or already chosen point.
  std::vector<double> reach(movable.size());
  for (std::size_t i = 0; i < movable.size(); ++i) reach[i] = min_distance(movable[i], handles);
  std::vector<bool> used(movable.size(), false);
  const auto target = std::min<std::size_t>(static_cast<std::size_t>(k), movable.size());
  while (chosen.size() < target) {
    std::size_t best = movable.size();
    for (std::size_t i = 0; i < movable.size(); ++i) {
      if (used[i]) continue;
      if (best == movable.size() || reach[i] > reach[best]) best = i;
    }
    used[best] = true;
    chosen.push_back(movable[best]);
    for (std::size_t i = 0; i < movable.size(); ++i) {
      reach[i] = std::min(reach[i], (movable[i] - movable[best]).norm());
    }
  }
  return chosen;
}

double multiquadric(double r, double mu) {
  const double s = mu * r;
  return std::sqrt(1.0 + s * s);
}

double auto_mu(std::span<const Vec3> control_points) {
  const std::size_t n = control_points.size();
  if (n < 2) return 1.0;
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      total += (control_points[i] - control_points[j]).norm();
      ++pairs;
    }
  }
  const double mean = total / static_cast<double>(pairs);
  return mean > 0.0 ? 1.0 / mean : 1.0;
}

Eigen::MatrixXd solve_dense(Eigen::MatrixXd a, Eigen::MatrixXd b) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n) {
    throw Error(ErrorCode::DimensionMismatch, "solve_dense needs a square system");
  }
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index pivot = col;
    for (Eigen::Index r = col + 1; r < n; ++r) {
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    }
    if (!(std::abs(a(pivot, col)) >= kPivotFloor)) {
      throw Error(ErrorCode::SingularSystem,
                  "pivot " + std::to_string(std::abs(a(pivot, col))) + " in column " +
                      std::to_string(col));
    }
    if (pivot != col) {
      a.row(pivot).swap(a.row(col));
      b.row(pivot).swap(b.row(col));
    }
    for (Eigen::Index r = col + 1; r < n; ++r) {
      const double factor = a(r, col) / a(col, col);
      if (factor == 0.0) continue;
      a.row(r).tail(n - col) -= factor * a.row(col).tail(n - col);
      b.row(r) -= factor * b.row(col);
    }
  }
  Eigen::MatrixXd x(n, b.cols());
  for (Eigen::Index r = n - 1; r >= 0; --r) {
    for (Eigen::Index c = 0; c < b.cols(); ++c) {
      double acc = b(r, c);
      for (Eigen::Index j = r + 1; j < n; ++j) acc -= a(r, j) * x(j, c);
      x(r, c) = acc / a(r, r);
    }
  }
  return x;
}

RbfField solve_rbf(std::span<const Vec3> handles, std::span<const Vec3> targets,
                   std::span<const Vec3> fixed, double mu) {
  if (handles.size() != targets.size()) {
    throw Error(ErrorCode::DimensionMismatch, "each handle needs a target");
  }
  if (!(std::isfinite(mu) && mu > 0.0)) throw Error(ErrorCode::InvalidArgument, "mu must be > 0");
  RbfField field;
  field.mu = mu;
  field.control_points.assign(handles.begin(), handles.end());
  field.control_points.insert(field.control_points.end(), fixed.begin(), fixed.end());
  const auto n = static_cast<Eigen::Index>(field.control_points.size());
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "RBF needs at least one control point");

  const auto& c = field.control_points;
  Eigen::MatrixXd phi(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double r = (c[static_cast<std::size_t>(i)] - c[static_cast<std::size_t>(k)]).norm();
      if (i != k && r <= kPivotFloor) {
        throw Error(ErrorCode::DuplicateControlPoint,
                    "control points " + std::to_string(i) + " and " + std::to_string(k) +
                        " coincide");
      }
      phi(i, k) = multiquadric(r, mu);
    }
  }
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 3);
  for (std::size_t i = 0; i < handles.size(); ++i) {
    rhs.row(static_cast<Eigen::Index>(i)) = (targets[i] - handles[i]).transpose();
  }
  field.weights = solve_dense(phi, rhs);
  return field;
}

Vec3 eval_rbf(const RbfField& field, const Vec3& p) {
  Vec3 s = Vec3::Zero();
  for (std::size_t k = 0; k < field.control_points.size(); ++k) {
    const double phi = multiquadric((p - field.control_points[k]).norm(), field.mu);
    s += phi * field.weights.row(static_cast<Eigen::Index>(k)).transpose();
  }
  return s;
}

double gamma_weight(const Vec3& p, std::span<const Vec3> handles, std::span<const Vec3> fixed) {
  if (fixed.empty()) return 1.0;
  const double to_handle = min_distance(p, handles);
  const double to_fixed = min_distance(p, fixed);
  return to_fixed / (to_handle + to_fixed);
}

LiftedPair lift_pair(const DragPair& pair, const DepthMap& depth, const Vec3& origin) {
  validate_pair(pair, depth.height, depth.width);
  const Cell cell = cell_of(pair.handle, depth.height, depth.width);
  const double z = depth.at(cell.x, cell.y) - origin.z();
  return {Vec3(pair.handle.x - origin.x(), pair.handle.y - origin.y(), z),
          Vec3(pair.target.x - origin.x(), pair.target.y - origin.y(), z)};
}

HybridDragResult hybrid_drag(const DragPartition& partition, std::span<const DragPair> pairs,
                             const PcddParams& params, const DepthMap& depth) {
  validate_params(params);
  if (pairs.empty()) throw Error(ErrorCode::InvalidArgument, "at least one drag pair is required");
  const Vec3& origin = partition.movable.origin;

  std::vector<Vec3> handles;
  std::vector<Vec3> targets;
  for (const auto& pair : pairs) {
    const auto lifted = lift_pair(pair, depth, origin);
    handles.push_back(lifted.handle);
    targets.push_back(lifted.target);
  }

  HybridDragResult result;
  try {
    result.rotation = rodrigues_rotation(handles.front(), targets.front());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateVector && e.code() != ErrorCode::AmbiguousAxis) throw;
    result.rotation = Mat3::Identity();
    result.rotation_fallback = true;
  }

  const auto& movable = partition.movable.points;
  std::vector<Vec3> positions;
  positions.reserve(movable.size());
  for (const auto& p : movable) positions.push_back(p.pos);
  const auto rigid = rigid_transform(positions, result.rotation, handles.front(), targets.front(),
                                     params.alpha);

  result.points.reserve(movable.size());
  if (params.beta == 0.0) {
    for (std::size_t i = 0; i < movable.size(); ++i) result.points.push_back({rigid[i], movable[i].src});
    return result;
  }

  // Candidates sitting on a handle would duplicate a control point.
  for (const auto& f : select_fixed_points(positions, handles, params.fixed_point_count)) {
    if (min_distance(f, handles) > kPivotFloor) result.fixed_points.push_back(f);
  }
  std::vector<Vec3> control = handles;
  control.insert(control.end(), result.fixed_points.begin(), result.fixed_points.end());
  const double mu = params.mu.value_or(auto_mu(control));
  result.field = solve_rbf(handles, targets, result.fixed_points, mu);

  for (std::size_t i = 0; i < movable.size(); ++i) {
    const Vec3& p = rigid[i];
    const double gamma = gamma_weight(p, handles, result.fixed_points);
    result.points.push_back({p + params.beta * gamma * eval_rbf(result.field, p), movable[i].src});
  }
  return result;
}

}  // namespace dragwarp
