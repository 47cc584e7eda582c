#include "pointdc/pipeline.hpp"
#include "pointdc/synth.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <set>

using namespace pointdc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("pointdc_test_synth_" + name);
    fs::remove_all(p);
    return p;
}

std::uintmax_t directory_bytes(const fs::path& dir) {
    std::uintmax_t total = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) total += e.file_size();
    return total;
}

} // namespace

TEST(Synth, DeriveSeedIsSplitMix) {
    EXPECT_EQ(derive_seed(0, 0), 0xE220A8397B1DCDAFULL);
    EXPECT_NE(derive_seed(1, 0), derive_seed(0, 1));
}

TEST(Synth, SameSeedSameScene) {
    const SceneSpec spec;
    const auto a = generate_scene(spec, 7), b = generate_scene(spec, 7);
    EXPECT_EQ(a.cloud, b.cloud);
    EXPECT_EQ(a.cameras, b.cameras);
    EXPECT_NE(generate_scene(spec, 8).cloud, a.cloud);
}

TEST(Synth, LabelCoverage) {
    SceneSpec spec;
    spec.classes = 4;
    const auto s = generate_scene(spec, 3);
    EXPECT_EQ(s.cloud.size(), spec.points);
    const std::set<int> labels(s.cloud.labels->begin(), s.cloud.labels->end());
    EXPECT_EQ(labels, (std::set<int>{0, 1, 2, 3}));
    for (const Vec3& c : s.cloud.rgb) EXPECT_TRUE(c.minCoeff() >= 0.0 && c.maxCoeff() <= 1.0);
}

TEST(Synth, DensityShareMatchesAreaExpectation) {
    SceneSpec spec;
    spec.densities = {10, 1, 1, 1, 1};
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto s = generate_scene(spec, seed);
        const double expected = expected_class_share(spec, s.objects)[0];
        const double share =
            double(std::count(s.cloud.labels->begin(), s.cloud.labels->end(), kFloorClass)) / double(s.cloud.size());
        EXPECT_NEAR(share, expected, 0.2 * expected);
    }
}

TEST(Synth, RejectsOverfullRoomAndBadSpec) {
    SceneSpec spec;
    spec.objects_min = spec.objects_max = 60;
    EXPECT_THROW(generate_scene(spec, 1), InvalidInput);
    SceneSpec bad;
    bad.densities = {1, 1};
    EXPECT_THROW(generate_scene(bad, 1), InvalidInput);
    bad = SceneSpec{};
    bad.classes = 1;
    EXPECT_THROW(generate_scene(bad, 1), InvalidInput);
}

TEST(Oracle, EmbeddingsOrthonormal) {
    const auto o = FeatureOracle::make(5, 16, 0.0, 0.0, 3);
    EXPECT_LT((o.embeddings * o.embeddings.transpose() - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_THROW(FeatureOracle::make(5, 4, 0.0, 0.0, 3), InvalidInput);
}

TEST(Oracle, NoiselessPixelsCarryEmbedding) {
    const auto s = generate_scene(SceneSpec{}, 4);
    const auto o = FeatureOracle::make(5, 16, 0.0, 0.0, 5);
    const auto views = render_views(s.cloud, s.cameras, o, 6);
    for (std::size_t v = 0; v < views.size(); ++v) {
        const auto vis = zbuffer_visibility(project_points(s.cloud, s.cameras[v]), s.cameras[v]);
        for (std::size_t pix = 0; pix < views[v].pixels(); ++pix) {
            ASSERT_EQ(bool(views[v].valid[pix]), vis.occupied(pix));
            if (!vis.occupied(pix)) continue;
            const int label = (*s.cloud.labels)[std::size_t(vis.winner[pix])];
            for (std::uint32_t d = 0; d < 16; ++d)
                ASSERT_EQ(views[v].pixel(pix)[d], float(o.embeddings(label, d)));
        }
    }
}

TEST(Oracle, NoisyMeanConcentrates) {
    const auto s = generate_scene(SceneSpec{}, 4);
    const double sigma = 0.1;
    const auto o = FeatureOracle::make(5, 16, sigma, 0.0, 5);
    const auto views = render_views(s.cloud, s.cameras, o, 6);
    const auto vis = zbuffer_visibility(project_points(s.cloud, s.cameras[0]), s.cameras[0]);
    for (int cls = 0; cls < 5; ++cls) {
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(16);
        int n = 0;
        for (std::size_t pix = 0; pix < views[0].pixels(); ++pix) {
            if (!vis.occupied(pix) || (*s.cloud.labels)[std::size_t(vis.winner[pix])] != cls) continue;
            for (int d = 0; d < 16; ++d) mean(d) += views[0].pixel(pix)[d];
            ++n;
        }
        if (n < 10) continue;
        mean /= n;
        EXPECT_LT((mean - o.embeddings.row(cls)).cwiseAbs().maxCoeff(), 4.5 * sigma / std::sqrt(double(n)) + 1e-6)
            << "class " << cls;
    }
}

TEST(Oracle, NuisanceOffsetHasRequestedNorm) {
    const auto s = generate_scene(SceneSpec{}, 4);
    const auto o = FeatureOracle::make(5, 16, 0.0, 0.2, 5);
    const auto views = render_views(s.cloud, s.cameras, o, 6);
    const auto vis = zbuffer_visibility(project_points(s.cloud, s.cameras[1]), s.cameras[1]);
    for (std::size_t pix = 0; pix < views[1].pixels(); ++pix) {
        if (!vis.occupied(pix)) continue;
        const int label = (*s.cloud.labels)[std::size_t(vis.winner[pix])];
        double sq = 0.0;
        for (int d = 0; d < 16; ++d) sq += std::pow(views[1].pixel(pix)[d] - o.embeddings(label, d), 2);
        EXPECT_NEAR(std::sqrt(sq), 0.2, 1e-6);
        break;
    }
}

TEST(Dataset, SingleSceneManifest) {
    RunConfig cfg;
    cfg.set("synth.scenes", "1");
    const fs::path dir = scratch("single");
    write_dataset(synthesize_dataset(cfg), cfg, dir);
    const Manifest m = read_manifest(dir);
    ASSERT_EQ(m.scenes.size(), 1u);
    EXPECT_EQ(m.files.size(), 1u + 2u + 2u * 4u);
    const Dataset ds = load_dataset(dir);
    EXPECT_EQ(ds.scenes.size(), 1u);
    EXPECT_EQ(ds.scenes[0].views.size(), 4u);
    fs::remove_all(dir);
}

TEST(Dataset, RegenerationIsByteIdentical) {
    RunConfig cfg;
    cfg.set("synth.scenes", "2");
    cfg.set("seed", "5");
    const fs::path a = scratch("regen_a"), b = scratch("regen_b");
    write_dataset(synthesize_dataset(cfg), cfg, a);
    write_dataset(synthesize_dataset(cfg), cfg, b);
    for (const std::string& rel : read_manifest(a).files)
        EXPECT_EQ(codec::read_file((a / rel).string()), codec::read_file((b / rel).string())) << rel;
    EXPECT_EQ(codec::read_file((a / "manifest.txt").string()), codec::read_file((b / "manifest.txt").string()));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Dataset, DefaultBenchmarkUnder200MB) {
    const RunConfig cfg;
    const fs::path dir = scratch("size");
    write_dataset(synthesize_dataset(cfg), cfg, dir);
    EXPECT_LT(directory_bytes(dir), 200u * 1024u * 1024u);
    fs::remove_all(dir);
}
