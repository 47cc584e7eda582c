#pragma once

// Super-voxel partitioning plus the pooling / scatter operators over partitions.

#include "pointdc/core.hpp"
#include "pointdc/geometry.hpp"
#include "pointdc/knn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <queue>
#include <tuple>
#include <variant>
#include <vector>

namespace pointdc {

struct SuperVoxelPartition {
    std::vector<int> voxel_of;              // point -> voxel id in [0, M)
    std::vector<std::vector<int>> members;  // voxel -> ascending point indices

    std::size_t num_points() const { return voxel_of.size(); }
    std::size_t num_voxels() const { return members.size(); }

    // Builds from arbitrary ids, renumbering densely in first-occurrence order.
    static SuperVoxelPartition from_ids(const std::vector<long>& raw) {
        SuperVoxelPartition part;
        part.voxel_of.resize(raw.size());
        std::map<long, int> remap;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            auto [it, inserted] = remap.try_emplace(raw[i], static_cast<int>(remap.size()));
            if (inserted) part.members.emplace_back();
            part.voxel_of[i] = it->second;
            part.members[std::size_t(it->second)].push_back(static_cast<int>(i));
        }
        return part;
    }

    void validate() const {
        for (std::size_t k = 0; k < members.size(); ++k) {
            require(!members[k].empty(), "partition: empty super-voxel");
            for (int j : members[k])
                require(j >= 0 && std::size_t(j) < voxel_of.size() && voxel_of[std::size_t(j)] == int(k),
                        "partition: members do not invert voxel_of");
        }
        std::size_t total = 0;
        for (const auto& m : members) total += m.size();
        require(total == voxel_of.size(), "partition: members do not cover every point");
    }

    bool operator==(const SuperVoxelPartition&) const = default;
};

struct UniformGrid {
    double cell_size = 0.25;
};

struct RegionGrow {
    double normal_deg = 10.0;
    double color_tol = 0.1;
    std::size_t min_size = 1;
    std::size_t normal_neighbors = 16;
};

using PartitionStrategy = std::variant<UniformGrid, RegionGrow>;

inline SuperVoxelPartition partition_uniform_grid(const PointCloud& cloud, const UniformGrid& grid) {
    require(!cloud.empty(), "partition: empty cloud");
    require(grid.cell_size > 0.0, "partition: cell_size must be positive");
    std::map<std::tuple<long, long, long>, long> cell_ids;
    std::vector<long> raw(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& p = cloud.xyz[i];
        const auto key = std::make_tuple(static_cast<long>(std::floor(p.x() / grid.cell_size)),
                                         static_cast<long>(std::floor(p.y() / grid.cell_size)),
                                         static_cast<long>(std::floor(p.z() / grid.cell_size)));
        raw[i] = cell_ids.try_emplace(key, static_cast<long>(cell_ids.size())).first->second;
    }
    return SuperVoxelPartition::from_ids(raw);
}

// PCA normal over the point and its neighbours, oriented toward +z.
inline std::vector<Vec3> estimate_normals(const std::vector<Vec3>& pts, const KnnGraph& g) {
    std::vector<Vec3> normals(pts.size(), Vec3::UnitZ());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        Vec3 mean = pts[i];
        for (std::size_t m = 0; m < g.k; ++m) mean += pts[g.row(i)[m]];
        mean /= double(g.k + 1);
        Mat3 cov = (pts[i] - mean) * (pts[i] - mean).transpose();
        for (std::size_t m = 0; m < g.k; ++m) {
            const Vec3 d = pts[g.row(i)[m]] - mean;
            cov += d * d.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        Vec3 n = eig.eigenvectors().col(0);
        if (n.z() < 0.0) n = -n;
        normals[i] = n;
    }
    return normals;
}

inline SuperVoxelPartition partition_region_grow(const PointCloud& cloud, const RegionGrow& rg) {
    require(!cloud.empty(), "partition: empty cloud");
    require(rg.normal_deg >= 0.0 && rg.color_tol >= 0.0, "partition: thresholds must be non-negative");
    const std::size_t n = cloud.size();
    const KnnGraph g = knn_graph(cloud.xyz, std::max<std::size_t>(rg.normal_neighbors, 1));
    const std::vector<Vec3> normals = estimate_normals(cloud.xyz, g);

    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t m = 0; m < g.k; ++m) {
            const std::size_t j = g.row(i)[m];
            if (j == i) continue;
            adj[i].push_back(j);
            adj[j].push_back(i);
        }
    for (auto& a : adj) {
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
    }

    const double cos_limit = std::cos(rg.normal_deg * std::numbers::pi / 180.0);
    auto compatible = [&](std::size_t a, std::size_t b) {
        const double c = std::min(1.0, std::abs(normals[a].dot(normals[b])));
        const bool normal_ok = rg.normal_deg >= 90.0 || c > cos_limit;
        return normal_ok && (cloud.rgb[a] - cloud.rgb[b]).norm() < rg.color_tol;
    };

    std::vector<long> seg(n, -1);
    long next = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (seg[s] >= 0) continue;
        std::queue<std::size_t> q;
        q.push(s);
        seg[s] = next;
        while (!q.empty()) {
            const std::size_t i = q.front();
            q.pop();
            for (std::size_t j : adj[i])
                if (seg[j] < 0 && compatible(i, j)) {
                    seg[j] = next;
                    q.push(j);
                }
        }
        ++next;
    }

    // Absorb undersized segments into the segment holding the closest outside point.
    if (rg.min_size > 1) {
        for (bool changed = true; changed;) {
            changed = false;
            std::vector<std::size_t> size(static_cast<std::size_t>(next), 0);
            std::vector<std::vector<std::size_t>> pts_of(static_cast<std::size_t>(next));
            for (std::size_t i = 0; i < n; ++i) {
                ++size[std::size_t(seg[i])];
                pts_of[std::size_t(seg[i])].push_back(i);
            }
            std::size_t live = 0;
            for (std::size_t s : size) live += s > 0;
            for (long s = 0; s < next && live > 1; ++s) {
                const auto& pts = pts_of[std::size_t(s)];
                if (pts.empty() || pts.size() >= rg.min_size) continue;
                double best = std::numeric_limits<double>::infinity();
                long target = -1;
                auto consider = [&](std::size_t i, std::size_t j) {
                    if (seg[j] == s) return;
                    const double d = (cloud.xyz[i] - cloud.xyz[j]).squaredNorm();
                    if (d < best || (d == best && seg[j] < target)) {
                        best = d;
                        target = seg[j];
                    }
                };
                for (std::size_t i : pts)
                    for (std::size_t j : adj[i]) consider(i, j);
                if (target < 0)
                    for (std::size_t i : pts)
                        for (std::size_t j = 0; j < n; ++j) consider(i, j);
                for (std::size_t i : pts) seg[i] = target;
                pts_of[std::size_t(target)].insert(pts_of[std::size_t(target)].end(), pts.begin(), pts.end());
                pts_of[std::size_t(s)].clear();
                --live;
                changed = true;
            }
        }
    }
    return SuperVoxelPartition::from_ids(seg);
}

inline SuperVoxelPartition partition(const PointCloud& cloud, const PartitionStrategy& strategy) {
    return std::visit(
        [&](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, UniformGrid>) return partition_uniform_grid(cloud, s);
            else return partition_region_grow(cloud, s);
        },
        strategy);
}

inline Matrix pool_avg(const Matrix& values, const SuperVoxelPartition& part) {
    require(std::size_t(values.rows()) == part.num_points(), "pool_avg: row count does not match partition");
    Matrix out = Matrix::Zero(Eigen::Index(part.num_voxels()), values.cols());
    for (std::size_t k = 0; k < part.num_voxels(); ++k) {
        auto row = out.row(Eigen::Index(k));
        for (int j : part.members[k]) row += values.row(j);
        row /= double(part.members[k].size());
    }
    return out;
}

// Transpose of pool_avg: each member of voxel k receives grad[k] / |N(k)|.
inline Matrix pool_avg_backward(const Matrix& voxel_grad, const SuperVoxelPartition& part) {
    require(std::size_t(voxel_grad.rows()) == part.num_voxels(), "pool_avg_backward: row count does not match partition");
    Matrix out(Eigen::Index(part.num_points()), voxel_grad.cols());
    for (std::size_t k = 0; k < part.num_voxels(); ++k) {
        const double w = 1.0 / double(part.members[k].size());
        for (int j : part.members[k]) out.row(j) = w * voxel_grad.row(Eigen::Index(k));
    }
    return out;
}

inline Matrix scatter_to_points(const Matrix& voxel_values, const SuperVoxelPartition& part) {
    require(std::size_t(voxel_values.rows()) == part.num_voxels(), "scatter_to_points: row count does not match partition");
    Matrix out(Eigen::Index(part.num_points()), voxel_values.cols());
    for (std::size_t j = 0; j < part.num_points(); ++j) out.row(Eigen::Index(j)) = voxel_values.row(part.voxel_of[j]);
    return out;
}

struct MultiviewPool {
    Matrix point_features;          // N x D, per-point max over visible views
    std::vector<bool> point_mask;   // visible in >= 1 view
    Matrix voxel_features;          // M x D, mean over visible members
    std::vector<bool> voxel_mask;   // >= 1 visible member
};

inline MultiviewPool pool_multiview(const std::vector<LiftedFeatures>& per_view, const SuperVoxelPartition& part) {
    require(!per_view.empty(), "pool_multiview: no views");
    const auto n = Eigen::Index(part.num_points());
    const Eigen::Index d = per_view.front().features.cols();
    for (const auto& v : per_view)
        require(v.features.rows() == n && v.features.cols() == d && v.mask.size() == part.num_points(),
                "pool_multiview: view shapes differ");
    MultiviewPool out;
    out.point_features = Matrix::Zero(n, d);
    out.point_mask.assign(part.num_points(), false);
    for (const auto& v : per_view)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!v.mask[std::size_t(j)]) continue;
            if (!out.point_mask[std::size_t(j)]) {
                out.point_features.row(j) = v.features.row(j);
                out.point_mask[std::size_t(j)] = true;
            } else {
                out.point_features.row(j) = out.point_features.row(j).cwiseMax(v.features.row(j));
            }
        }
    out.voxel_features = Matrix::Zero(Eigen::Index(part.num_voxels()), d);
    out.voxel_mask.assign(part.num_voxels(), false);
    for (std::size_t k = 0; k < part.num_voxels(); ++k) {
        std::size_t visible = 0;
        for (int j : part.members[k])
            if (out.point_mask[std::size_t(j)]) {
                out.voxel_features.row(Eigen::Index(k)) += out.point_features.row(j);
                ++visible;
            }
        if (visible > 0) {
            out.voxel_features.row(Eigen::Index(k)) /= double(visible);
            out.voxel_mask[k] = true;
        }
    }
    return out;
}

} // namespace pointdc
