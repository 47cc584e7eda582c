#include "pointdc/geometry.hpp"
#include "pointdc/knn.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <limits>

using namespace pointdc;

namespace {

PointCloud cloud_of(const std::vector<Vec3>& pts) {
    PointCloud c;
    c.xyz = pts;
    c.rgb.assign(pts.size(), Vec3(0.5, 0.5, 0.5));
    return c;
}

CameraModel camera(double f, double c, std::uint32_t size) {
    CameraModel cam;
    cam.fx = cam.fy = f;
    cam.cx = cam.cy = c;
    cam.width = cam.height = size;
    return cam;
}

} // namespace

TEST(Projection, IdentityCamera) {
    const CameraModel cam = camera(1.0, 0.0, 4);
    const auto p = project_points(cloud_of({{0.0, 0.0, 2.0}}), cam);
    EXPECT_DOUBLE_EQ(p[0].u, 0.0);
    EXPECT_DOUBLE_EQ(p[0].v, 0.0);
    EXPECT_DOUBLE_EQ(p[0].depth, 2.0);
    EXPECT_TRUE(p[0].valid);
}

TEST(Projection, BehindCameraIsInvalid) {
    const auto p = project_points(cloud_of({{0.0, 0.0, -1.0}, {0.0, 0.0, 1e-7}}), camera(1.0, 0.0, 4));
    EXPECT_FALSE(p[0].valid);
    EXPECT_FALSE(p[1].valid);
}

TEST(Projection, RightEdgeIsExclusive) {
    const auto p = project_points(cloud_of({{0.5, 0.0, 1.0}}), camera(100.0, 50.0, 100));
    EXPECT_DOUBLE_EQ(p[0].u, 100.0);
    EXPECT_DOUBLE_EQ(p[0].v, 50.0);
    EXPECT_FALSE(p[0].valid);
}

TEST(Projection, RejectsBadCamera) {
    CameraModel cam = camera(1.0, 0.0, 4);
    cam.fx = 0.0;
    EXPECT_THROW(project_points(cloud_of({{0, 0, 1}}), cam), InvalidInput);
    cam = camera(1.0, 0.0, 4);
    cam.rotation(0, 0) = 2.0;
    EXPECT_THROW(project_points(cloud_of({{0, 0, 1}}), cam), InvalidInput);
    EXPECT_THROW(project_points(PointCloud{}, camera(1.0, 0.0, 4)), InvalidInput);
}

TEST(Projection, BackProjectRoundTrip) {
    Rng rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const CameraModel cam = CameraModel::look_at({2.0, 1.0, 1.5}, {0.0, 0.0, 0.0}, 40.0, 40.0, 64, 64);
    std::vector<Vec3> pts;
    for (int i = 0; i < 500; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
    const auto proj = project_points(cloud_of(pts), cam);
    int valid = 0;
    for (const auto& p : proj) {
        if (!p.valid) continue;
        ++valid;
        EXPECT_LT((cam.back_project(p.u, p.v, p.depth) - pts[p.point_index]).cwiseAbs().maxCoeff(), 1e-9);
    }
    EXPECT_GT(valid, 100);
}

TEST(ZBuffer, NearerPointWins) {
    const CameraModel cam = camera(1.0, 3.5, 8);
    const auto vis = zbuffer_visibility(project_points(cloud_of({{0, 0, 2.0}, {0, 0, 1.0}}), cam), cam);
    EXPECT_EQ(vis.winner[3 * 8 + 3], 1);
    EXPECT_DOUBLE_EQ(vis.winner_depth[3 * 8 + 3], 1.0);
}

TEST(ZBuffer, TieGoesToLowestIndex) {
    const CameraModel cam = camera(1.0, 3.5, 8);
    const auto vis = zbuffer_visibility(project_points(cloud_of({{0, 0, 1.0}, {0, 0, 1.0}}), cam), cam);
    EXPECT_EQ(vis.winner[3 * 8 + 3], 0);
}

TEST(ZBuffer, NoValidProjectionsLeavesEveryPixelEmpty) {
    const CameraModel cam = camera(1.0, 0.0, 4);
    const auto vis = zbuffer_visibility(project_points(cloud_of({{0, 0, -1.0}}), cam), cam);
    EXPECT_TRUE(std::all_of(vis.winner.begin(), vis.winner.end(), [](long w) { return w == -1; }));
}

TEST(ZBuffer, MatchesBruteForceScan) {
    Rng rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Vec3> pts;
    for (int i = 0; i < 500; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
    const CameraModel cam = CameraModel::look_at({2.5, -1.0, 1.0}, {0.0, 0.0, 0.0}, 30.0, 30.0, 64, 64);
    const auto proj = project_points(cloud_of(pts), cam);
    const auto vis = zbuffer_visibility(proj, cam);
    for (std::size_t pix = 0; pix < vis.winner.size(); ++pix) {
        long best = -1;
        double depth = std::numeric_limits<double>::infinity();
        for (const auto& p : proj) {
            if (!p.valid || std::size_t(p.pixel_row) * 64 + std::size_t(p.pixel_col) != pix) continue;
            if (p.depth < depth) {
                depth = p.depth;
                best = long(p.point_index);
            }
        }
        ASSERT_EQ(vis.winner[pix], best) << "pixel " << pix;
    }
}

TEST(Lift, SingleWinnerCopiesFeature) {
    VisibilityMap vis{2, 1, {0, -1}, {1.0, 0.0}};
    FeatureMap fm(1, 2, 3);
    fm.data = {1, 2, 3, 9, 9, 9};
    fm.valid = {1, 1};
    const auto lf = lift_pixel_features(vis, fm, 2);
    EXPECT_EQ(lf.features.row(0), Eigen::RowVector3d(1, 2, 3));
    EXPECT_TRUE(lf.mask[0]);
    EXPECT_FALSE(lf.mask[1]);
    EXPECT_EQ(lf.features.row(1).squaredNorm(), 0.0);
}

TEST(Lift, MultiplePixelsTakeElementwiseMax) {
    VisibilityMap vis{2, 1, {0, 0}, {1.0, 1.0}};
    FeatureMap fm(1, 2, 2);
    fm.data = {1, 0, 0, 2};
    fm.valid = {1, 1};
    const auto lf = lift_pixel_features(vis, fm, 1);
    EXPECT_EQ(lf.features.row(0), Eigen::RowVector2d(1, 2));
}

TEST(Lift, RejectsSizeMismatch) {
    VisibilityMap vis{2, 1, {0, 0}, {1.0, 1.0}};
    FeatureMap fm(2, 2, 2);
    EXPECT_THROW(lift_pixel_features(vis, fm, 1), InvalidInput);
}

TEST(Knn, MatchesBruteForce) {
    Rng rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec3> pts;
    for (int i = 0; i < 300; ++i) pts.emplace_back(u(rng), u(rng), 0.1 * u(rng));
    const KnnGraph g = knn_graph(pts, 8);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::vector<std::pair<double, std::size_t>> all;
        for (std::size_t j = 0; j < pts.size(); ++j)
            if (j != i) all.emplace_back((pts[j] - pts[i]).squaredNorm(), j);
        std::sort(all.begin(), all.end());
        for (std::size_t m = 0; m < 8; ++m) ASSERT_EQ(g.row(i)[m], all[m].second);
    }
}

TEST(Knn, ClipsToAvailableNeighbours) {
    const KnnGraph g = knn_graph({{0, 0, 0}, {1, 0, 0}, {3, 0, 0}}, 8);
    EXPECT_EQ(g.k, 2u);
    EXPECT_EQ(g.row(0)[0], 1u);
    EXPECT_EQ(knn_graph({{0, 0, 0}}, 4).row(0)[0], 0u);
}
