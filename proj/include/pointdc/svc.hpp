#pragma once

// Iterative super-voxel clustering (k-means over pooled features, cosine
// pseudo-labels pooled per super-voxel, perturbed cross-entropy training) and
// the point-level deep-clustering baseline.

#include "pointdc/cluster.hpp"
#include "pointdc/dataset.hpp"
#include "pointdc/eval.hpp"
#include "pointdc/featnet.hpp"
#include "pointdc/supervoxel.hpp"
#include "pointdc/synth.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <tuple>
#include <string>
#include <vector>

namespace pointdc {

struct SvcConfig {
    std::size_t iterations = 3;
    std::size_t epochs_per_iteration = 5;
    double tau = 1.0;
    std::size_t clusters = 5;
    AdamConfig adam{};
    TransformSpec transforms{};
    std::uint64_t seed = 0;
    bool sphere = true;
    bool use_nonparametric = true;
    bool use_label_pooling = true;
    std::size_t kmeans_iters = 100;

    void validate() const {
        require(iterations >= 1, "svc: iterations must be >= 1");
        require(tau > 0.0, "svc: temperature must be positive");
        require(clusters >= 1, "svc: need at least one cluster");
        transforms.validate();
    }
};

// ---------------------------------------------------------------------------
// Shared feature / prediction helpers

inline std::vector<Matrix> scene_features(const PointFeatureNet& net, const Dataset& data) {
    std::vector<Matrix> out;
    out.reserve(data.scenes.size());
    for (const Scene& s : data.scenes) out.push_back(forward(net, s.cloud).output);
    return out;
}

inline Matrix stack_rows(const std::vector<Matrix>& parts) {
    Eigen::Index rows = 0;
    for (const Matrix& m : parts) rows += m.rows();
    Matrix out(rows, parts.empty() ? 0 : parts.front().cols());
    Eigen::Index r = 0;
    for (const Matrix& m : parts) {
        out.middleRows(r, m.rows()) = m;
        r += m.rows();
    }
    return out;
}

// Super-voxel average of every scene's point features, stacked in scene order.
inline Matrix pooled_dataset_features(const std::vector<Matrix>& feats, const Dataset& data) {
    std::vector<Matrix> pooled;
    pooled.reserve(feats.size());
    for (std::size_t i = 0; i < feats.size(); ++i) pooled.push_back(pool_avg(feats[i], data.scenes[i].partition));
    return stack_rows(pooled);
}

// Per-point cluster ids by highest cosine similarity to the centroids.
inline std::vector<int> predict_by_centroids(const std::vector<Matrix>& feats, const Matrix& centroids) {
    std::vector<int> out;
    for (const Matrix& f : feats) {
        const std::vector<int> p = harden(cosine_similarity(f, centroids));
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

inline KMeansOptions kmeans_options(const SvcConfig& cfg, std::uint64_t seed) {
    KMeansOptions o;
    o.clusters = cfg.clusters;
    o.max_iters = cfg.kmeans_iters;
    o.tol = 0.0;
    o.seed = seed;
    o.sphere = cfg.sphere;
    return o;
}

// Clusters pooled super-voxel features and labels every point by its nearest
// centroid; the evaluation protocol shared by all super-voxel variants.
struct ClusterPrediction {
    Matrix centroids;
    std::vector<int> labels;
    double objective = 0.0;
};

inline ClusterPrediction cluster_and_predict(const PointFeatureNet& net, const Dataset& data, const SvcConfig& cfg,
                                             std::uint64_t seed, const std::optional<Matrix>& warm = std::nullopt) {
    const std::vector<Matrix> feats = scene_features(net, data);
    const KMeansResult km = kmeans_fit(pooled_dataset_features(feats, data), kmeans_options(cfg, seed), warm);
    return {km.centroids, predict_by_centroids(feats, km.centroids), km.objective.back()};
}

// Point-level variant: centroids fitted on every point feature, no super-voxel pooling.
inline ClusterPrediction cluster_points_and_predict(const PointFeatureNet& net, const Dataset& data,
                                                    const SvcConfig& cfg, std::uint64_t seed) {
    const std::vector<Matrix> feats = scene_features(net, data);
    const KMeansResult km = kmeans_fit(stack_rows(feats), kmeans_options(cfg, seed));
    return {km.centroids, predict_by_centroids(feats, km.centroids), km.objective.back()};
}

inline bool has_labels(const Dataset& data) {
    return std::all_of(data.scenes.begin(), data.scenes.end(), [](const Scene& s) { return s.cloud.labels.has_value(); });
}

// ---------------------------------------------------------------------------
// SVC

struct SvcState {
    AdamState net_adam;
    ParamSet head;                              // learnable classifier when use_nonparametric is off
    AdamState head_adam;
    std::vector<std::vector<int>> voxel_clusters; // per scene k-means labels, same mode
    Rng rng;

    SvcState(const PointFeatureNet& net, std::uint64_t seed)
        : net_adam(AdamState::for_params(net.params())), rng(seed) {}
};

// Per-point one-hot targets for one scene (constant within a super-voxel
// when label pooling is on).
inline std::vector<int> svc_pseudo_labels(const PointFeatureNet& net, const Scene& scene, std::size_t scene_index,
                                          const Matrix& centroids, const SvcConfig& cfg, const SvcState& st) {
    const SuperVoxelPartition& part = scene.partition;
    std::vector<int> point_labels(scene.cloud.size());
    if (!cfg.use_nonparametric) {
        require(scene_index < st.voxel_clusters.size(), "svc: missing k-means labels for scene");
        const std::vector<int>& vox = st.voxel_clusters[scene_index];
        for (std::size_t j = 0; j < point_labels.size(); ++j) point_labels[j] = vox[std::size_t(part.voxel_of[j])];
        return point_labels;
    }
    const Matrix probs = soft_assign(forward(net, scene.cloud).output, centroids, cfg.tau).probs;
    if (!cfg.use_label_pooling) return harden(probs);
    const std::vector<int> vox = harden(pool_soft_labels(probs, part));
    for (std::size_t j = 0; j < point_labels.size(); ++j) point_labels[j] = vox[std::size_t(part.voxel_of[j])];
    return point_labels;
}

struct CrossEntropy {
    double loss = 0.0;
    Matrix dlogits;
};

inline CrossEntropy cross_entropy(const Matrix& logits, const std::vector<int>& targets) {
    CrossEntropy ce;
    ce.dlogits = softmax_rows(logits);
    const double n = double(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const auto r = Eigen::Index(i);
        const double m = logits.row(r).maxCoeff();
        const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
        ce.loss += lse - logits(r, targets[i]);
        ce.dlogits(r, targets[i]) -= 1.0;
    }
    ce.loss /= n;
    ce.dlogits /= n;
    return ce;
}

// Loss and feature gradient of cosine-similarity logits against frozen centroids.
inline std::pair<double, Matrix> centroid_ce_grad(const Matrix& features, const Matrix& centroids, double tau,
                                                  const std::vector<int>& targets) {
    Matrix fhat = features, chat = centroids;
    normalize_rows(fhat);
    normalize_rows(chat);
    const CrossEntropy ce = cross_entropy(fhat * chat.transpose() / tau, targets);
    const Matrix dfhat = ce.dlogits * chat / tau;
    return {ce.loss, normalize_rows_backward(features, fhat, dfhat)};
}

inline double svc_epoch(PointFeatureNet& net, const Dataset& data, const Matrix& centroids, const SvcConfig& cfg,
                        SvcState& st) {
    require(centroids.rows() == Eigen::Index(cfg.clusters) && centroids.cols() == Eigen::Index(net.shape().dim),
            "svc_epoch: centroids not fitted for this configuration");
    require(centroids.allFinite(), "svc_epoch: centroids are not finite");
    std::vector<std::size_t> order(data.scenes.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), st.rng);
    double total = 0.0;
    for (std::size_t idx : order) {
        const Scene& s = data.scenes[idx];
        const std::vector<int> targets = svc_pseudo_labels(net, s, idx, centroids, cfg, st);
        const PointCloud perturbed = transform_equivariant(transform_invariant(s.cloud, cfg.transforms, st.rng),
                                                           cfg.transforms, st.rng).first;
        const ActivationRecord rec = forward(net, perturbed);
        Matrix dfeat;
        double loss = 0.0;
        if (cfg.use_nonparametric) {
            std::tie(loss, dfeat) = centroid_ce_grad(rec.output, centroids, cfg.tau, targets);
        } else {
            const CrossEntropy ce = cross_entropy(linear_forward(st.head, rec.output), targets);
            loss = ce.loss;
            const ParamGradients hg = linear_backward(st.head, rec.output, ce.dlogits, &dfeat);
            adam_step(st.head, hg, st.head_adam, cfg.adam);
        }
        try {
            adam_step(net, backward(net, rec, dfeat), st.net_adam, cfg.adam);
        } catch (const NumericError& e) {
            throw NumericError("scene '" + s.name + "': " + e.what());
        }
        total += loss;
    }
    return total / double(data.scenes.size());
}

struct IterationReport {
    double kmeans_objective = 0.0;
    double loss = 0.0;                 // mean over the iteration's epochs
    std::optional<MetricsReport> metrics;
};

struct SvcReport {
    std::vector<IterationReport> iterations;
    Matrix centroids; // refit on the final features
};

inline std::vector<std::vector<int>> split_by_scene(const std::vector<int>& stacked, const Dataset& data) {
    std::vector<std::vector<int>> out;
    std::size_t off = 0;
    for (const Scene& s : data.scenes) {
        const std::size_t m = s.partition.num_voxels();
        out.emplace_back(stacked.begin() + long(off), stacked.begin() + long(off + m));
        off += m;
    }
    return out;
}

inline SvcReport run_svc(PointFeatureNet& net, const Dataset& data, const SvcConfig& cfg) {
    cfg.validate();
    require(!data.scenes.empty(), "run_svc: empty dataset");
    SvcState st(net, derive_seed(cfg.seed, 1000));
    const bool labelled = has_labels(data);
    SvcReport rep;
    std::optional<Matrix> warm;
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        try {
            const std::vector<Matrix> feats = scene_features(net, data);
            const KMeansResult km =
                kmeans_fit(pooled_dataset_features(feats, data), kmeans_options(cfg, derive_seed(cfg.seed, it)), warm);
            if (!cfg.use_nonparametric) {
                st.voxel_clusters = split_by_scene(km.assignment, data);
                st.head = make_linear_head(net.shape().dim, cfg.clusters, derive_seed(cfg.seed, 2000 + it));
                st.head_adam = AdamState::for_params(st.head);
            }
            IterationReport ir;
            ir.kmeans_objective = km.objective.back();
            for (std::size_t e = 0; e < cfg.epochs_per_iteration; ++e) ir.loss += svc_epoch(net, data, km.centroids, cfg, st);
            if (cfg.epochs_per_iteration > 0) ir.loss /= double(cfg.epochs_per_iteration);

            const ClusterPrediction pred = cluster_and_predict(net, data, cfg, derive_seed(cfg.seed, 3000 + it), km.centroids);
            warm = pred.centroids;
            if (labelled) ir.metrics = evaluate_clustering(pred.labels, data.all_labels(), cfg.clusters);
            rep.iterations.push_back(std::move(ir));
        } catch (const NumericError& e) {
            throw NumericError("svc iteration " + std::to_string(it) + ": " + e.what());
        } catch (const InvalidInput& e) {
            throw InvalidInput("svc iteration " + std::to_string(it) + ": " + e.what());
        }
    }
    rep.centroids = *warm;
    return rep;
}

// ---------------------------------------------------------------------------
// Point-level deep clustering baseline: k-means over all points, then
// cross-entropy of a linear head on the cluster ids.

struct BaselineReport {
    std::vector<IterationReport> iterations;
    ParamSet head;
};

inline std::vector<int> predict_with_head(const PointFeatureNet& net, const ParamSet& head, const Dataset& data) {
    std::vector<int> out;
    for (const Scene& s : data.scenes) {
        const std::vector<int> p = harden(linear_forward(head, forward(net, s.cloud).output));
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

inline BaselineReport run_baseline_deepcluster(PointFeatureNet& net, const Dataset& data, const SvcConfig& cfg) {
    cfg.validate();
    require(!data.scenes.empty(), "baseline: empty dataset");
    const bool labelled = has_labels(data);
    AdamState net_adam = AdamState::for_params(net.params());
    Rng rng(derive_seed(cfg.seed, 1000));
    BaselineReport rep;
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const std::vector<Matrix> feats = scene_features(net, data);
        const KMeansResult km = kmeans_fit(stack_rows(feats), kmeans_options(cfg, derive_seed(cfg.seed, it)));
        std::vector<std::vector<int>> labels;
        std::size_t off = 0;
        for (const Scene& s : data.scenes) {
            labels.emplace_back(km.assignment.begin() + long(off), km.assignment.begin() + long(off + s.cloud.size()));
            off += s.cloud.size();
        }
        rep.head = make_linear_head(net.shape().dim, cfg.clusters, derive_seed(cfg.seed, 2000 + it));
        AdamState head_adam = AdamState::for_params(rep.head);

        IterationReport ir;
        ir.kmeans_objective = km.objective.back();
        std::vector<std::size_t> order(data.scenes.size());
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t e = 0; e < cfg.epochs_per_iteration; ++e) {
            std::shuffle(order.begin(), order.end(), rng);
            double total = 0.0;
            for (std::size_t idx : order) {
                const ActivationRecord rec = forward(net, data.scenes[idx].cloud);
                const CrossEntropy ce = cross_entropy(linear_forward(rep.head, rec.output), labels[idx]);
                Matrix dfeat;
                const ParamGradients hg = linear_backward(rep.head, rec.output, ce.dlogits, &dfeat);
                adam_step(rep.head, hg, head_adam, cfg.adam);
                adam_step(net, backward(net, rec, dfeat), net_adam, cfg.adam);
                total += ce.loss;
            }
            ir.loss += total / double(data.scenes.size());
        }
        if (cfg.epochs_per_iteration > 0) ir.loss /= double(cfg.epochs_per_iteration);
        if (labelled) {
            const std::vector<int> pred =
                cfg.epochs_per_iteration > 0 ? predict_with_head(net, rep.head, data) : km.assignment;
            ir.metrics = evaluate_clustering(pred, data.all_labels(), cfg.clusters);
        }
        rep.iterations.push_back(std::move(ir));
    }
    return rep;
}

} // namespace pointdc
