#include "pointdc/config.hpp"

#include <gtest/gtest.h>

using namespace pointdc;

TEST(Config, DefaultsTranslate) {
    const RunConfig cfg;
    const SceneSpec spec = scene_spec(cfg);
    EXPECT_EQ(spec.classes, 5u);
    EXPECT_EQ(spec.points, 4096u);
    EXPECT_EQ(spec.densities, (std::vector<double>{1, 1, 10, 10, 10}));
    EXPECT_TRUE(std::holds_alternative<UniformGrid>(partition_strategy(cfg)));
    EXPECT_EQ(net_shape(cfg), NetShape{});
    const SvcConfig svc = svc_config(cfg, 7);
    EXPECT_EQ(svc.clusters, 7u);
    EXPECT_EQ(svc.iterations, 3u);
    EXPECT_EQ(distill_config(cfg).epochs, 30u);
}

TEST(Config, MergeTextAndOverrides) {
    RunConfig cfg;
    cfg.merge_text("# comment\nsvc.tau = 0.5   # trailing\n\npartition.strategy = region_grow\n");
    cfg.merge_assignment("svc.clusters=3");
    EXPECT_DOUBLE_EQ(svc_config(cfg, 5).tau, 0.5);
    EXPECT_EQ(svc_config(cfg, 5).clusters, 3u);
    EXPECT_TRUE(std::holds_alternative<RegionGrow>(partition_strategy(cfg)));
}

TEST(Config, RoundTripsThroughText) {
    RunConfig a;
    a.set("seed", "42");
    a.set("synth.densities", "2,1,3,3,3");
    RunConfig b;
    b.merge_text(a.to_text());
    EXPECT_EQ(b.to_text(), a.to_text());
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    RunConfig cfg;
    EXPECT_THROW(cfg.merge_assignment("svc.unknown=1"), InvalidInput);
    EXPECT_THROW(cfg.merge_text("no equals sign"), InvalidInput);
    EXPECT_THROW(cfg.merge_assignment("novalue"), InvalidInput);
    cfg.set("svc.tau", "abc");
    EXPECT_THROW(svc_config(cfg, 5), InvalidInput);
    cfg.set("svc.tau", "0");
    EXPECT_THROW(svc_config(cfg, 5), InvalidInput);
    RunConfig lists;
    lists.set("synth.densities", "1,x,2");
    EXPECT_THROW(scene_spec(lists), InvalidInput);
    RunConfig strategy;
    strategy.set("partition.strategy", "octree");
    EXPECT_THROW(partition_strategy(strategy), InvalidInput);
    RunConfig counts;
    counts.set("synth.points", "-5");
    EXPECT_THROW(scene_spec(counts), InvalidInput);
}
