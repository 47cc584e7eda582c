#pragma once

// Cross-modal distillation: per-super-voxel targets from multi-view feature
// maps, the pooled L2 matching loss, and its training loop.

#include "pointdc/dataset.hpp"
#include "pointdc/featnet.hpp"
#include "pointdc/geometry.hpp"
#include "pointdc/supervoxel.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace pointdc {

struct DistillTargets {
    Matrix features;               // M x D; zero rows where voxel_mask is false
    std::vector<bool> voxel_mask;  // visible in at least one view
    Matrix point_features;         // N x D per-point max over views (diagnostics)
    std::vector<bool> point_mask;

    std::size_t visible_voxels() const { return std::size_t(std::count(voxel_mask.begin(), voxel_mask.end(), true)); }
};

// project -> z-buffer -> lift per view, then max over views and mean over
// visible super-voxel members. `normalize` L2-normalises the voxel targets.
inline DistillTargets build_distill_targets(const PointCloud& cloud, const std::vector<CameraModel>& cameras,
                                            const std::vector<FeatureMap>& views, const SuperVoxelPartition& part,
                                            bool normalize) {
    require(!views.empty(), "build_distill_targets: no views");
    require(cameras.size() == views.size(), "build_distill_targets: camera and view counts differ");
    require(part.num_points() == cloud.size(), "build_distill_targets: partition does not match cloud");
    for (const FeatureMap& v : views) require(v.dim == views.front().dim, "build_distill_targets: views differ in D");
    std::vector<LiftedFeatures> lifted;
    lifted.reserve(views.size());
    for (std::size_t v = 0; v < views.size(); ++v) {
        const VisibilityMap vis = zbuffer_visibility(project_points(cloud, cameras[v]), cameras[v]);
        lifted.push_back(lift_pixel_features(vis, views[v], cloud.size()));
    }
    MultiviewPool pooled = pool_multiview(lifted, part);
    DistillTargets t;
    t.features = std::move(pooled.voxel_features);
    t.voxel_mask = std::move(pooled.voxel_mask);
    t.point_features = std::move(pooled.point_features);
    t.point_mask = std::move(pooled.point_mask);
    if (normalize) normalize_rows(t.features);
    return t;
}

inline DistillTargets build_distill_targets(const Scene& scene, bool normalize) {
    return build_distill_targets(scene.cloud, scene.cameras, scene.views, scene.partition, normalize);
}

struct LossAndGrad {
    double loss = 0.0;
    Matrix grad; // d loss / d point_features
};

// Mean over visible voxels of |avgpool(features)[k] - target[k]|^2.
inline LossAndGrad cmd_loss_and_grad(const Matrix& point_features, const SuperVoxelPartition& part,
                                     const DistillTargets& targets) {
    require(std::size_t(point_features.rows()) == part.num_points(), "cmd_loss: feature rows do not match partition");
    require(targets.features.rows() == Eigen::Index(part.num_voxels()) && targets.voxel_mask.size() == part.num_voxels(),
            "cmd_loss: targets do not match partition");
    require(targets.features.cols() == point_features.cols(), "cmd_loss: feature dimension mismatch");
    const std::size_t visible = targets.visible_voxels();
    require(visible > 0, "cmd_loss: no visible super-voxel, loss undefined");

    const Matrix pooled = pool_avg(point_features, part);
    Matrix dpooled = Matrix::Zero(pooled.rows(), pooled.cols());
    LossAndGrad out;
    for (std::size_t k = 0; k < part.num_voxels(); ++k) {
        if (!targets.voxel_mask[k]) continue;
        const Eigen::RowVectorXd diff = pooled.row(Eigen::Index(k)) - targets.features.row(Eigen::Index(k));
        out.loss += diff.squaredNorm();
        dpooled.row(Eigen::Index(k)) = 2.0 * diff;
    }
    out.loss /= double(visible);
    dpooled /= double(visible);
    out.grad = pool_avg_backward(dpooled, part);
    return out;
}

struct DistillConfig {
    std::size_t epochs = 30;
    AdamConfig adam{};
    std::uint64_t seed = 0;
};

struct DistillReport {
    std::vector<double> epoch_loss; // mean over scenes
};

inline DistillReport run_cmd(const Dataset& data, PointFeatureNet& net, const DistillConfig& cfg) {
    require(!data.scenes.empty(), "run_cmd: empty dataset");
    std::vector<DistillTargets> targets;
    targets.reserve(data.scenes.size());
    for (const Scene& s : data.scenes) {
        require(!s.views.empty(), "run_cmd: scene '" + s.name + "' has no feature views");
        targets.push_back(build_distill_targets(s, net.shape().normalize_output));
    }
    Rng rng(cfg.seed);
    AdamState state = AdamState::for_params(net.params());
    std::vector<std::size_t> order(data.scenes.size());
    std::iota(order.begin(), order.end(), 0);
    DistillReport rep;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t idx : order) {
            const Scene& s = data.scenes[idx];
            try {
                const ActivationRecord rec = forward(net, s.cloud);
                const LossAndGrad lg = cmd_loss_and_grad(rec.output, s.partition, targets[idx]);
                adam_step(net, backward(net, rec, lg.grad), state, cfg.adam);
                total += lg.loss;
            } catch (const NumericError& e) {
                throw NumericError("scene '" + s.name + "': " + e.what());
            } catch (const InvalidInput& e) {
                throw InvalidInput("scene '" + s.name + "': " + e.what());
            }
        }
        rep.epoch_loss.push_back(total / double(data.scenes.size()));
    }
    return rep;
}

} // namespace pointdc
