#include "pointdc/pipeline.hpp"
#include "pointdc/svc.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace pointdc;

namespace {

Dataset small_dataset(std::size_t scenes, std::uint64_t seed, std::size_t points = 1024) {
    RunConfig cfg;
    cfg.set("seed", std::to_string(seed));
    cfg.set("synth.scenes", std::to_string(scenes));
    cfg.set("synth.points", std::to_string(points));
    return synthesize_dataset(cfg);
}

SvcConfig small_config() {
    SvcConfig cfg;
    cfg.iterations = 1;
    cfg.epochs_per_iteration = 1;
    cfg.clusters = 5;
    cfg.kmeans_iters = 30;
    return cfg;
}

Matrix fitted_centroids(const PointFeatureNet& net, const Dataset& ds, const SvcConfig& cfg) {
    return kmeans_fit(pooled_dataset_features(scene_features(net, ds), ds), kmeans_options(cfg, 1)).centroids;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g;
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
}

} // namespace

TEST(CrossEntropy, HandValueAndNonNegative) {
    const auto ce = cross_entropy((Matrix(1, 2) << 1.0, 0.0).finished(), {0});
    EXPECT_NEAR(ce.loss, std::log(1.0 + std::exp(-1.0)), 1e-15);
    EXPECT_GE(cross_entropy(random_matrix(20, 4, 1), std::vector<int>(20, 2)).loss, 0.0);
}

TEST(CrossEntropy, CentroidGradientMatchesFiniteDifferences) {
    Matrix f = random_matrix(15, 4, 2);
    const Matrix c = random_matrix(3, 4, 3);
    std::vector<int> t(15);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = int(i % 3);
    const Matrix g = centroid_ce_grad(f, c, 0.5, t).second;
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        const double x0 = f.data()[i];
        f.data()[i] = x0 + h;
        const double up = centroid_ce_grad(f, c, 0.5, t).first;
        f.data()[i] = x0 - h;
        const double down = centroid_ce_grad(f, c, 0.5, t).first;
        f.data()[i] = x0;
        EXPECT_NEAR(g.data()[i], (up - down) / (2.0 * h), 1e-7);
    }
}

TEST(SvcEpoch, ZeroRateLeavesNetUnchanged) {
    const Dataset ds = small_dataset(2, 1);
    PointFeatureNet net(NetShape{16, 8, 16, true}, 2);
    SvcConfig cfg = small_config();
    cfg.adam.lr = 0.0;
    const ParamSet before = net.params();
    SvcState st(net, 3);
    const double loss = svc_epoch(net, ds, fitted_centroids(net, ds, cfg), cfg, st);
    EXPECT_EQ(net.params(), before);
    EXPECT_GE(loss, 0.0);
    EXPECT_TRUE(std::isfinite(loss));
}

TEST(SvcEpoch, RejectsUnfittedCentroids) {
    const Dataset ds = small_dataset(1, 1);
    PointFeatureNet net(NetShape{16, 8, 16, true}, 2);
    SvcState st(net, 3);
    EXPECT_THROW(svc_epoch(net, ds, Matrix(), small_config(), st), InvalidInput);
    EXPECT_THROW(svc_epoch(net, ds, Matrix::Zero(4, 16), small_config(), st), InvalidInput);
}

TEST(SvcEpoch, PooledTargetsAreConstantPerVoxel) {
    const Dataset ds = small_dataset(1, 4);
    const PointFeatureNet net(NetShape{16, 8, 16, true}, 5);
    const SvcConfig cfg = small_config();
    const SvcState st(net, 1);
    const Scene& s = ds.scenes[0];
    const auto labels = svc_pseudo_labels(net, s, 0, fitted_centroids(net, ds, cfg), cfg, st);
    for (const auto& members : s.partition.members)
        for (int j : members) EXPECT_EQ(labels[std::size_t(j)], labels[std::size_t(members.front())]);
}

TEST(SvcEpoch, OneEpochLowersLossInMostSeeds) {
    int improved = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset ds = small_dataset(2, seed);
        const PointFeatureNet init(NetShape{}, seed + 10);
        SvcConfig cfg = small_config();
        cfg.transforms = TransformSpec{};
        cfg.adam.lr = 1e-2;
        const Matrix centroids = fitted_centroids(init, ds, cfg);
        SvcConfig frozen = cfg;
        frozen.adam.lr = 0.0;

        PointFeatureNet a = init;
        SvcState sa(a, 1);
        const double before = svc_epoch(a, ds, centroids, frozen, sa);
        PointFeatureNet b = init;
        SvcState sb(b, 1);
        svc_epoch(b, ds, centroids, cfg, sb);
        SvcState sc(b, 1);
        const double after = svc_epoch(b, ds, centroids, frozen, sc);
        if (after < before) ++improved;
    }
    EXPECT_GE(improved, 4);
}

TEST(RunSvc, ZeroEpochsEqualsSingleKMeans) {
    const Dataset ds = small_dataset(2, 6);
    PointFeatureNet net(NetShape{16, 8, 16, true}, 7);
    const ParamSet before = net.params();
    SvcConfig cfg = small_config();
    cfg.epochs_per_iteration = 0;
    const SvcReport rep = run_svc(net, ds, cfg);
    EXPECT_EQ(net.params(), before);
    ASSERT_EQ(rep.iterations.size(), 1u);
    const KMeansResult km = kmeans_fit(pooled_dataset_features(scene_features(net, ds), ds),
                                       kmeans_options(cfg, derive_seed(cfg.seed, 0)));
    EXPECT_DOUBLE_EQ(rep.iterations[0].kmeans_objective, km.objective.back());
    EXPECT_LT((rep.centroids - km.centroids).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RunSvc, DeterministicWithFiniteTrace) {
    const Dataset ds = small_dataset(2, 8);
    SvcConfig cfg = small_config();
    cfg.iterations = 2;
    cfg.transforms = TransformSpec{0.05, 0.01, 6.0, 0.5};
    auto run = [&] {
        PointFeatureNet net(NetShape{16, 8, 16, true}, 9);
        const SvcReport rep = run_svc(net, ds, cfg);
        return std::make_pair(net.params(), rep);
    };
    const auto [pa, ra] = run();
    const auto [pb, rb] = run();
    EXPECT_EQ(pa, pb);
    ASSERT_EQ(ra.iterations.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_TRUE(std::isfinite(ra.iterations[i].kmeans_objective));
        EXPECT_EQ(ra.iterations[i].loss, rb.iterations[i].loss);
        ASSERT_TRUE(ra.iterations[i].metrics.has_value());
        EXPECT_EQ(ra.iterations[i].metrics->to_text(), rb.iterations[i].metrics->to_text());
    }
}

TEST(RunSvc, AblationSwitchesRun) {
    const Dataset ds = small_dataset(2, 10);
    for (const auto [nonparametric, pooling] : {std::pair{false, true}, std::pair{true, false}}) {
        SvcConfig cfg = small_config();
        cfg.use_nonparametric = nonparametric;
        cfg.use_label_pooling = pooling;
        PointFeatureNet net(NetShape{16, 8, 16, true}, 11);
        const ParamSet before = net.params();
        const SvcReport rep = run_svc(net, ds, cfg);
        EXPECT_NE(net.params(), before);
        EXPECT_TRUE(std::isfinite(rep.iterations[0].loss));
    }
}

TEST(RunSvc, RejectsBadConfig) {
    const Dataset ds = small_dataset(1, 1);
    PointFeatureNet net(NetShape{16, 8, 16, true}, 2);
    SvcConfig cfg = small_config();
    cfg.tau = 0.0;
    EXPECT_THROW(run_svc(net, ds, cfg), InvalidInput);
    cfg = small_config();
    cfg.iterations = 0;
    EXPECT_THROW(run_svc(net, ds, cfg), InvalidInput);
}

TEST(Baseline, ZeroEpochsIsPointLevelKMeans) {
    const Dataset ds = small_dataset(2, 12);
    PointFeatureNet net(NetShape{16, 8, 16, true}, 13);
    SvcConfig cfg = small_config();
    cfg.epochs_per_iteration = 0;
    const BaselineReport rep = run_baseline_deepcluster(net, ds, cfg);
    const KMeansResult km = kmeans_fit(stack_rows(scene_features(net, ds)), kmeans_options(cfg, derive_seed(cfg.seed, 0)));
    const std::set<int> used(km.assignment.begin(), km.assignment.end());
    EXPECT_EQ(used.size(), cfg.clusters);
    EXPECT_EQ(rep.iterations[0].metrics->to_text(), evaluate_clustering(km.assignment, ds.all_labels(), 5).to_text());
}

TEST(Baseline, TrainsNetAndHead) {
    const Dataset ds = small_dataset(2, 14);
    PointFeatureNet net(NetShape{16, 8, 16, true}, 15);
    const ParamSet before = net.params();
    const BaselineReport rep = run_baseline_deepcluster(net, ds, small_config());
    EXPECT_NE(net.params(), before);
    EXPECT_EQ(rep.head.size(), 2u);
    EXPECT_EQ(predict_with_head(net, rep.head, ds).size(), ds.total_points());
}
