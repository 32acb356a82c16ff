#include <gtest/gtest.h>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "dragwarp/geometry.hpp"
#include "support.hpp"

namespace dragwarp {
namespace {

using testing::code_of;

Vec3 random_vec(std::mt19937_64& rng, double scale = 10.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

// ---- rescale_depth ---------------------------------------------------------

TEST(RescaleDepth, AffineEndpointsAndMidpoint) {
  const DepthMap d(1, 3, std::vector<double>{0.0, 50.0, 100.0});
  const auto r = rescale_depth(d, 1, 3, 0.0, 63.0);
  EXPECT_EQ(r.values[0], 0.0);
  EXPECT_DOUBLE_EQ(r.values[1], 31.5);
  EXPECT_EQ(r.values[2], 63.0);
}

TEST(RescaleDepth, ConstantInputIsDegenerate) {
  EXPECT_EQ(code_of([] { rescale_depth(DepthMap(3, 3, 7.0), 3, 3, 0, 63); }),
            ErrorCode::DegenerateDepthRange);
}

TEST(RescaleDepth, BilinearUpsampleMatchesPixelCenterOracle) {
  const DepthMap d(2, 2, std::vector<double>{0.0, 1.0, 2.0, 3.0});
  const auto r = rescale_depth(d, 4, 4, 0.0, 3.0);
  // Output cell x samples source coordinate clamp((x + 0.5) / 2 - 0.5, 0, 1).
  auto src = [](int i) { return std::clamp((i + 0.5) * 0.5 - 0.5, 0.0, 1.0); };
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      const double expected = src(x) * 1.0 + src(y) * 2.0;  // bilinear of a plane is exact
      EXPECT_NEAR(r.at(x, y), expected, 1e-12) << x << "," << y;
    }
  }
  EXPECT_EQ(*std::min_element(r.values.begin(), r.values.end()), 0.0);
  EXPECT_EQ(*std::max_element(r.values.begin(), r.values.end()), 3.0);
}

TEST(RescaleDepth, OutputRangeIsExact) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-40, 90);
  for (int trial = 0; trial < 50; ++trial) {
    DepthMap d(5, 7);
    for (double& v : d.values) v = u(rng);
    const auto r = rescale_depth(d, 9, 4, 0.0, 63.0);
    EXPECT_EQ(*std::min_element(r.values.begin(), r.values.end()), 0.0);
    EXPECT_EQ(*std::max_element(r.values.begin(), r.values.end()), 63.0);
  }
}

// ---- origin and cloud ------------------------------------------------------

TEST(EstimateOrigin, FourCellSquare) {
  Mask m(4, 4);
  for (auto [x, y] : {std::pair{1, 1}, {1, 2}, {2, 1}, {2, 2}}) m.set(x, y);
  const Vec3 o = estimate_origin(m, DepthMap(4, 4, 40.0), 20.0);
  EXPECT_EQ(o, Vec3(1.5, 1.5, 20.0));
}

TEST(EstimateOrigin, SingleCell) {
  Mask m(10, 10);
  m.set(5, 7);
  DepthMap d(10, 10, 0.0);
  d.at(5, 7) = 10.0;
  EXPECT_EQ(estimate_origin(m, d, 0.0), Vec3(5, 7, 10));
}

TEST(EstimateOrigin, EmptyMask) {
  EXPECT_EQ(code_of([] { estimate_origin(Mask(3, 3), DepthMap(3, 3), 0); }), ErrorCode::EmptyMask);
}

TEST(EstimateOrigin, ShapeMismatch) {
  Mask m(3, 3, true);
  EXPECT_EQ(code_of([&] { estimate_origin(m, DepthMap(3, 4), 0); }), ErrorCode::ShapeMismatch);
}

TEST(PointCloud, LocalCoordinates) {
  Mask m(6, 6);
  m.set(3, 4);
  DepthMap d(6, 6, 0.0);
  d.at(3, 4) = 12.0;
  const auto cloud = build_point_cloud(m, d, Vec3(1, 1, 2));
  ASSERT_EQ(cloud.points.size(), 1u);
  EXPECT_EQ(cloud.points[0].pos, Vec3(2, 3, 10));
  EXPECT_EQ(cloud.points[0].src, (Cell{3, 4}));
}

TEST(PointCloud, ZeroOriginIsGlobal) {
  Mask m(2, 3, true);
  DepthMap d(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
  const auto cloud = build_point_cloud(m, d, Vec3::Zero());
  for (const auto& p : cloud.points) {
    EXPECT_EQ(p.pos, Vec3(p.src.x, p.src.y, d.at(p.src.x, p.src.y)));
  }
}

TEST(PointCloud, OnePointPerMaskedCellWithDistinctSources) {
  Mask m(5, 5);
  for (auto [x, y] : {std::pair{0, 0}, {4, 0}, {2, 2}, {1, 3}, {4, 4}}) m.set(x, y);
  const auto cloud = build_point_cloud(m, DepthMap(5, 5, 1.0), Vec3(1, 2, 3));
  ASSERT_EQ(cloud.points.size(), 5u);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    for (std::size_t j = i + 1; j < cloud.points.size(); ++j) {
      EXPECT_FALSE(cloud.points[i].src == cloud.points[j].src);
    }
    EXPECT_EQ(cloud.points[i].pos + cloud.origin,
              Vec3(cloud.points[i].src.x, cloud.points[i].src.y, 1.0));
  }
}

// ---- filter ----------------------------------------------------------------

PointCloud column_cloud(const std::vector<double>& local_z) {
  PointCloud c;
  for (std::size_t i = 0; i < local_z.size(); ++i) {
    c.points.push_back({Vec3(static_cast<double>(i), 0, local_z[i]), Cell{static_cast<int>(i), 0}});
  }
  return c;
}

TEST(FilterDragSubject, ShieldThreshold) {
  const auto cloud = column_cloud({0.0, 25.0, -31.0, 30.0});
  const auto part = filter_drag_subject(cloud, {{0, 0}, {1, 0}}, 30.0);
  ASSERT_EQ(part.movable.points.size(), 3u);
  ASSERT_EQ(part.static_pts.points.size(), 1u);
  EXPECT_EQ(part.static_pts.points[0].src, (Cell{2, 0}));
}

TEST(FilterDragSubject, InfiniteShieldMovesEverything) {
  const auto cloud = column_cloud({0.0, 1e6, -1e6});
  const auto part =
      filter_drag_subject(cloud, {{0, 0}, {1, 0}}, std::numeric_limits<double>::infinity());
  EXPECT_EQ(part.movable.points.size(), 3u);
  EXPECT_TRUE(part.static_pts.points.empty());
}

TEST(FilterDragSubject, HandleOutsideMask) {
  const auto cloud = column_cloud({0.0, 1.0});
  EXPECT_EQ(code_of([&] { filter_drag_subject(cloud, {{0, 1}, {0, 0}}, 30.0); }),
            ErrorCode::HandleOutsideMask);
}

TEST(FilterDragSubject, PartitionCoversMaskExactly) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-60, 60);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> z(30);
    for (double& v : z) v = u(rng);
    const auto cloud = column_cloud(z);
    const auto part = filter_drag_subject(cloud, {{static_cast<double>(trial % 30), 0}, {0, 0}}, 30.0);
    std::vector<int> seen(30, 0);
    for (const auto& p : part.movable.points) ++seen[static_cast<std::size_t>(p.src.x)];
    for (const auto& p : part.static_pts.points) ++seen[static_cast<std::size_t>(p.src.x)];
    for (int s : seen) ASSERT_EQ(s, 1);
  }
}

// ---- rotation --------------------------------------------------------------

TEST(Rodrigues, ParallelIsIdentity) {
  const Vec3 a(1.0, -2.0, 0.5);
  EXPECT_EQ(rodrigues_rotation(a, 2.0 * a), Mat3::Identity());
}

TEST(Rodrigues, QuarterTurnAboutZMatchesExplicitMatrix) {
  const Mat3 r = rodrigues_rotation(Vec3(1, 0, 0), Vec3(0, 1, 0));
  Mat3 oracle;
  oracle << 0, -1, 0,
            1,  0, 0,
            0,  0, 1;
  EXPECT_LE(max_abs(r - oracle), 1e-15);
  EXPECT_LE((r * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm(), 1e-15);
}

TEST(Rodrigues, AgreesWithAngleAxis) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3 a = random_vec(rng);
    const Vec3 b = random_vec(rng);
    const Vec3 axis = a.cross(b).normalized();
    const double theta = std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0));
    const Mat3 oracle = Eigen::AngleAxisd(theta, axis).toRotationMatrix();
    ASSERT_LE(max_abs(rodrigues_rotation(a, b) - oracle), 1e-12);
  }
}

TEST(Rodrigues, AntiparallelIsAmbiguous) {
  EXPECT_EQ(code_of([] { rodrigues_rotation(Vec3(0, 0, 1), Vec3(0, 0, -1)); }),
            ErrorCode::AmbiguousAxis);
}

TEST(Rodrigues, ZeroVectorIsDegenerate) {
  EXPECT_EQ(code_of([] { rodrigues_rotation(Vec3::Zero(), Vec3(1, 0, 0)); }),
            ErrorCode::DegenerateVector);
  EXPECT_EQ(code_of([] { rodrigues_rotation(Vec3(1, 0, 0), Vec3(1e-10, 0, 0)); }),
            ErrorCode::DegenerateVector);
}

TEST(Rodrigues, OrthonormalWithUnitDeterminant) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const Vec3 a = random_vec(rng);
    const Vec3 b = random_vec(rng);
    const Mat3 r = rodrigues_rotation(a, b);
    ASSERT_LE(max_abs(r.transpose() * r - Mat3::Identity()), 1e-9);
    ASSERT_NEAR(r.determinant(), 1.0, 1e-9);
    ASSERT_LE((r * a.normalized() - b.normalized()).norm(), 1e-9);
  }
}

// ---- rigid -----------------------------------------------------------------

TEST(RigidTransform, IdentityRotationShiftsByAlphaTimesDrag) {
  std::vector<Vec3> pts{{0, 0, 0}, {1, 2, 3}, {-4, 5, -6}};
  const auto out = rigid_transform(pts, Mat3::Identity(), Vec3(1, 1, 1), Vec3(11, 1, 1), 0.7);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(out[i] - pts[i], Vec3(7, 0, 0));
}

TEST(RigidTransform, ZeroAlphaIdentity) {
  std::vector<Vec3> pts{{0.25, 9, -3}, {1, 2, 3}};
  const auto out = rigid_transform(pts, Mat3::Identity(), Vec3(1, 1, 1), Vec3(5, 5, 5), 0.0);
  EXPECT_EQ(out[0], pts[0]);
  EXPECT_EQ(out[1], pts[1]);
}

TEST(RigidTransform, FullAlphaCarriesHandleOntoTarget) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 a = random_vec(rng);
    const Vec3 b = random_vec(rng) * 0.3 + a.normalized() * 2.0;  // keep away from antiparallel
    const Mat3 r = rodrigues_rotation(a, b);
    const Vec3 out = rigid_transform(std::vector<Vec3>{a}, r, a, b, 1.0)[0];
    ASSERT_LE((out - b).norm(), 1e-9);
  }
}

TEST(RigidTransform, IsometryAtFullAlpha) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 12; ++i) pts.push_back(random_vec(rng));
    const Vec3 a = random_vec(rng);
    const Vec3 b = random_vec(rng);
    const auto out = rigid_transform(pts, rodrigues_rotation(a, b), a, b, 1.0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        ASSERT_NEAR((out[i] - out[j]).norm(), (pts[i] - pts[j]).norm(), 1e-9);
      }
    }
  }
}

// ---- fixed points ----------------------------------------------------------

TEST(FixedPoints, ZeroRequested) {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}};
  EXPECT_TRUE(select_fixed_points(pts, std::vector<Vec3>{{0, 0, 0}}, 0).empty());
}

TEST(FixedPoints, OppositeCornerOfSquare) {
  std::vector<Vec3> square;
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 5; ++x) square.emplace_back(x, y, 0);
  }
  const auto f = select_fixed_points(square, std::vector<Vec3>{{0, 0, 0}}, 1);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0], Vec3(4, 4, 0));
}

TEST(FixedPoints, ExhaustionReturnsEachPointOnce) {
  const std::vector<Vec3> pts{{0, 0, 0}, {3, 0, 0}, {0, 7, 0}};
  const auto f = select_fixed_points(pts, std::vector<Vec3>{{1, 1, 1}}, 10);
  ASSERT_EQ(f.size(), 3u);
  for (const auto& p : pts) EXPECT_EQ(std::count(f.begin(), f.end(), p), 1);
}

// Each pick maximizes the distance to the nearest handle or earlier pick;
// recomputed from scratch at every step.
std::vector<Vec3> brute_force_fps(const std::vector<Vec3>& pts, const std::vector<Vec3>& handles,
                                  int k) {
  std::vector<Vec3> chosen;
  std::vector<bool> used(pts.size(), false);
  for (int step = 0; step < k && chosen.size() < pts.size(); ++step) {
    double best_d = -1.0;
    std::size_t best = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (used[i]) continue;
      double d = std::numeric_limits<double>::infinity();
      for (const auto& h : handles) d = std::min(d, (pts[i] - h).norm());
      for (const auto& c : chosen) d = std::min(d, (pts[i] - c).norm());
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    used[best] = true;
    chosen.push_back(pts[best]);
  }
  return chosen;
}

TEST(FixedPoints, MatchesBruteForceMaxMin) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 40; ++i) pts.push_back(random_vec(rng));
    std::vector<Vec3> handles{random_vec(rng), random_vec(rng)};
    ASSERT_EQ(select_fixed_points(pts, handles, 6), brute_force_fps(pts, handles, 6));
  }
}

// ---- RBF -------------------------------------------------------------------

TEST(Rbf, MultiquadricAndAutoMu) {
  EXPECT_EQ(multiquadric(0.0, 3.0), 1.0);
  EXPECT_DOUBLE_EQ(multiquadric(2.0, 1.5), std::sqrt(10.0));
  EXPECT_EQ(auto_mu(std::vector<Vec3>{{1, 2, 3}}), 1.0);
  const std::vector<Vec3> tri{{0, 0, 0}, {3, 0, 0}, {0, 4, 0}};
  EXPECT_DOUBLE_EQ(auto_mu(tri), 1.0 / 4.0);  // (3 + 4 + 5) / 3
}

TEST(Rbf, SingleHandleReproducesDrag) {
  const Vec3 a(1, 2, 3);
  const Vec3 b(4, -1, 3);
  const auto field = solve_rbf(std::vector<Vec3>{a}, std::vector<Vec3>{b}, {}, 0.5);
  EXPECT_LE((eval_rbf(field, a) - (b - a)).norm(), 1e-15);
}

TEST(Rbf, FixedPointsStayPut) {
  const std::vector<Vec3> h{{0, 0, 0}};
  const std::vector<Vec3> t{{5, 0, 0}};
  const std::vector<Vec3> f{{10, 0, 0}, {0, 10, 0}, {3, 3, 3}};
  const auto field = solve_rbf(h, t, f, 0.2);
  for (const auto& p : f) EXPECT_LE(eval_rbf(field, p).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Rbf, WeightsMatchLuOracle) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<Vec3> h{random_vec(rng), random_vec(rng)};
    const std::vector<Vec3> t{random_vec(rng), random_vec(rng)};
    const std::vector<Vec3> f{random_vec(rng)};
    const double mu = 0.1 + 0.5 * (trial % 4);
    const auto field = solve_rbf(h, t, f, mu);

    const std::vector<Vec3> c{h[0], h[1], f[0]};
    Eigen::Matrix3d phi;
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < 3; ++k) {
        const double r = (c[static_cast<std::size_t>(i)] - c[static_cast<std::size_t>(k)]).norm();
        phi(i, k) = std::sqrt(1.0 + mu * mu * r * r);
      }
    }
    Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
    s.row(0) = (t[0] - h[0]).transpose();
    s.row(1) = (t[1] - h[1]).transpose();
    const Eigen::Matrix3d oracle = phi.fullPivLu().solve(s);
    ASSERT_LE(max_abs(field.weights - oracle), 1e-8);
    ASSERT_LE(max_abs(phi * field.weights - s), 1e-8);
  }
}

TEST(Rbf, EvalMatchesNaiveSummation) {
  std::mt19937_64 rng(13);
  RbfField field;
  field.mu = 0.37;
  field.weights.resize(5, 3);
  for (int k = 0; k < 5; ++k) {
    field.control_points.push_back(random_vec(rng));
    field.weights.row(k) = random_vec(rng, 1.0).transpose();
  }
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 p = random_vec(rng);
    double sx = 0, sy = 0, sz = 0;
    for (int k = 0; k < 5; ++k) {
      const Vec3 d = p - field.control_points[static_cast<std::size_t>(k)];
      const double phi = std::sqrt(1.0 + std::pow(0.37 * std::sqrt(d.dot(d)), 2));
      sx += field.weights(k, 0) * phi;
      sy += field.weights(k, 1) * phi;
      sz += field.weights(k, 2) * phi;
    }
    ASSERT_LE((eval_rbf(field, p) - Vec3(sx, sy, sz)).norm(), 1e-10);
  }
}

TEST(Rbf, ZeroWeightsGiveZeroField) {
  RbfField field;
  field.control_points = {Vec3(1, 1, 1), Vec3(2, 2, 2)};
  field.weights = Eigen::MatrixX3d::Zero(2, 3);
  EXPECT_EQ(eval_rbf(field, Vec3(7, 8, 9)), Vec3::Zero());
}

TEST(Rbf, DuplicateControlPoints) {
  const std::vector<Vec3> h{{1, 1, 1}};
  const std::vector<Vec3> t{{2, 2, 2}};
  EXPECT_EQ(code_of([&] { solve_rbf(h, t, std::vector<Vec3>{{1, 1, 1}}, 1.0); }),
            ErrorCode::DuplicateControlPoint);
}

TEST(Rbf, SingularSystem) {
  Eigen::MatrixXd a(2, 2);
  a << 1, 2, 2, 4;
  EXPECT_EQ(code_of([&] { solve_dense(a, Eigen::MatrixXd::Ones(2, 1)); }), ErrorCode::SingularSystem);
}

TEST(Rbf, ConstraintsReproducedOnRandomConfigurations) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> nh(1, 6);
  std::uniform_int_distribution<int> nf(0, 4);
  std::uniform_real_distribution<double> mu(0.1, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Vec3> h, t, f;
    for (int i = nh(rng); i > 0; --i) {
      h.push_back(random_vec(rng));
      t.push_back(random_vec(rng));
    }
    for (int i = nf(rng); i > 0; --i) f.push_back(random_vec(rng));
    const auto field = solve_rbf(h, t, f, mu(rng));
    for (std::size_t i = 0; i < h.size(); ++i) {
      ASSERT_LE((eval_rbf(field, h[i]) - (t[i] - h[i])).cwiseAbs().maxCoeff(), 1e-6);
    }
    for (const auto& p : f) ASSERT_LE(eval_rbf(field, p).cwiseAbs().maxCoeff(), 1e-6);
  }
}

// ---- gamma -----------------------------------------------------------------

TEST(Gamma, Endpoints) {
  const std::vector<Vec3> a{{0, 0, 0}};
  const std::vector<Vec3> f{{4, 0, 0}};
  EXPECT_EQ(gamma_weight(a[0], a, f), 1.0);
  EXPECT_EQ(gamma_weight(f[0], a, f), 0.0);
  EXPECT_EQ(gamma_weight(Vec3(2, 5, 0), a, f), 0.5);
  EXPECT_EQ(gamma_weight(Vec3(2, 5, 0), a, {}), 1.0);
}

TEST(Gamma, StaysInUnitInterval) {
  std::mt19937_64 rng(2);
  const std::vector<Vec3> a{random_vec(rng), random_vec(rng)};
  const std::vector<Vec3> f{random_vec(rng), random_vec(rng), random_vec(rng)};
  for (int trial = 0; trial < 1000; ++trial) {
    const double g = gamma_weight(random_vec(rng, 30.0), a, f);
    ASSERT_GE(g, 0.0);
    ASSERT_LE(g, 1.0);
  }
}

// ---- hybrid drag -----------------------------------------------------------

struct Scene {
  DragPartition partition;
  DepthMap depth;
};

Scene square_scene(std::mt19937_64& rng, int n = 9) {
  std::uniform_real_distribution<double> u(0.0, 63.0);
  Scene s{{}, DepthMap(n, n)};
  for (double& v : s.depth.values) v = u(rng);
  const Mask m(n, n, true);
  const Vec3 origin = estimate_origin(m, s.depth, 20.0);
  s.partition.movable = build_point_cloud(m, s.depth, origin);
  s.partition.static_pts.origin = origin;
  return s;
}

TEST(HybridDrag, NullDragsAreExactIdentity) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = square_scene(rng);
    const std::vector<DragPair> pairs{{{2, 3}, {2, 3}}, {{6, 6}, {6, 6}}};
    const auto out = hybrid_drag(s.partition, pairs, PcddParams{}, s.depth);
    ASSERT_EQ(out.points.size(), s.partition.movable.points.size());
    for (std::size_t i = 0; i < out.points.size(); ++i) {
      ASSERT_EQ(out.points[i].pos, s.partition.movable.points[i].pos);
      ASSERT_EQ(out.points[i].src, s.partition.movable.points[i].src);
    }
  }
}

TEST(HybridDrag, ZeroBetaIsPureRigid) {
  std::mt19937_64 rng(42);
  const auto s = square_scene(rng);
  PcddParams p;
  p.beta = 0.0;
  const std::vector<DragPair> pairs{{{2, 3}, {7, 4}}};
  const auto out = hybrid_drag(s.partition, pairs, p, s.depth);
  const auto lifted = lift_pair(pairs[0], s.depth, s.partition.movable.origin);
  std::vector<Vec3> pos;
  for (const auto& q : s.partition.movable.points) pos.push_back(q.pos);
  const auto rigid =
      rigid_transform(pos, rodrigues_rotation(lifted.handle, lifted.target), lifted.handle,
                      lifted.target, 0.7);
  for (std::size_t i = 0; i < pos.size(); ++i) EXPECT_EQ(out.points[i].pos, rigid[i]);
  EXPECT_FALSE(out.rotation_fallback);
}

TEST(HybridDrag, SinglePairFullAlphaNoAnchors) {
  // Handle image = b1 + beta * s(b1); with one control point the weight is
  // (b1 - a1) / phi(0) = b1 - a1, so s(b1) = (b1 - a1) sqrt(1 + (mu |b1 - a1|)^2).
  std::mt19937_64 rng(43);
  for (double beta : {0.0, 0.3, 0.7, 1.0}) {
    const auto s = square_scene(rng);
    PcddParams p;
    p.alpha = 1.0;
    p.beta = beta;
    p.fixed_point_count = 0;
    p.mu = 0.05;
    const DragPair pair{{4, 4}, {7, 2}};
    const auto out = hybrid_drag(s.partition, std::vector<DragPair>{pair}, p, s.depth);
    const auto lifted = lift_pair(pair, s.depth, s.partition.movable.origin);
    const Vec3 d = lifted.target - lifted.handle;
    const Vec3 expected = lifted.target + beta * d * std::sqrt(1.0 + std::pow(0.05 * d.norm(), 2));
    const auto it = std::find_if(out.points.begin(), out.points.end(),
                                 [](const CloudPoint& q) { return q.src == Cell{4, 4}; });
    ASSERT_NE(it, out.points.end());
    EXPECT_LE((it->pos - expected).norm(), 1e-9) << "beta " << beta;
  }
}

TEST(HybridDrag, AntiparallelFallsBackToTranslation) {
  // Handle and target mirrored through the origin's xy; lifted z is shared, so
  // the vectors are antiparallel only when that z is zero.
  std::mt19937_64 rng(44);
  auto s = square_scene(rng);
  const Vec3 o = s.partition.movable.origin;
  s.depth.at(2, 4) = o.z();
  for (auto& q : s.partition.movable.points) {
    if (q.src == Cell{2, 4}) q.pos.z() = 0.0;
  }
  const DragPair pair{{2, 4}, {2 * o.x() - 2, 2 * o.y() - 4}};
  PcddParams p;
  p.beta = 0.0;
  const auto out = hybrid_drag(s.partition, std::vector<DragPair>{pair}, p, s.depth);
  EXPECT_TRUE(out.rotation_fallback);
  EXPECT_EQ(out.rotation, Mat3::Identity());
}

TEST(HybridDrag, NeedsAPair) {
  std::mt19937_64 rng(45);
  const auto s = square_scene(rng);
  EXPECT_EQ(code_of([&] { hybrid_drag(s.partition, {}, PcddParams{}, s.depth); }),
            ErrorCode::InvalidArgument);
}

TEST(LiftPair, BothEndpointsTakeHandleDepth) {
  DepthMap d(3, 3, 0.0);
  d.at(1, 2) = 9.0;
  const auto l = lift_pair({{1.2, 1.6}, {0, 0}}, d, Vec3(1, 1, 4));
  EXPECT_EQ(l.handle, Vec3(1.2 - 1.0, 1.6 - 1.0, 5.0));
  EXPECT_EQ(l.target, Vec3(-1, -1, 5.0));
}

}  // namespace
}  // namespace dragwarp
