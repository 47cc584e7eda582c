#include "pointdc/codec.hpp"

#include <gtest/gtest.h>

using namespace pointdc;

namespace {

PointCloud sample_cloud(bool labels) {
    PointCloud c;
    c.xyz = {{0.1, -2.0, 3.5}, {1e-9, 0.0, 7.25}};
    c.rgb = {{0.0, 0.5, 1.0}, {0.25, 0.75, 0.125}};
    if (labels) c.labels = std::vector<int>{3, 0};
    return c;
}

} // namespace

TEST(Codec, CloudRoundTrip) {
    for (bool labels : {false, true}) {
        const PointCloud c = sample_cloud(labels);
        const std::string bytes = codec::encode_cloud(c);
        EXPECT_EQ(bytes.substr(0, 4), "PDPC");
        EXPECT_EQ(codec::decode_cloud(bytes), c);
    }
}

TEST(Codec, CloudLayout) {
    const std::string bytes = codec::encode_cloud(sample_cloud(true));
    EXPECT_EQ(bytes.size(), 4u + 4u + 4u + 4u + 2u * 6u * 8u + 2u * 4u);
}

TEST(Codec, CameraRoundTrip) {
    CameraModel cam;
    cam.fx = 31.5;
    cam.fy = 30.0;
    cam.cx = 16.0;
    cam.cy = 15.5;
    cam.width = 32;
    cam.height = 31;
    cam.rotation = Eigen::AngleAxisd(0.3, Vec3(1, 2, 3).normalized()).toRotationMatrix();
    cam.translation = Vec3(0.5, -1.0, 2.0);
    EXPECT_EQ(codec::decode_camera(codec::encode_camera(cam)), cam);
}

TEST(Codec, FeatureMapRoundTrip) {
    FeatureMap fm(2, 3, 2);
    for (std::size_t i = 0; i < fm.data.size(); ++i) fm.data[i] = float(i) * 0.5f - 1.0f;
    fm.valid = {1, 0, 1, 1, 0, 0};
    EXPECT_EQ(codec::decode_feature_map(codec::encode_feature_map(fm)), fm);
}

TEST(Codec, PartitionRoundTripAndValidation) {
    const auto p = SuperVoxelPartition::from_ids({5, 5, 2, 9, 2});
    EXPECT_EQ(codec::decode_partition(codec::encode_partition(p)), p);
    SuperVoxelPartition bad = p;
    bad.voxel_of = {1, 1, 0, 2, 0};
    EXPECT_THROW(codec::decode_partition(codec::encode_partition(bad)), IoError);
}

TEST(Codec, CheckpointRoundTrip) {
    const PointFeatureNet net(NetShape{8, 4, 3, false}, 2);
    const codec::Checkpoint ck = codec::make_checkpoint(net, {{"centroids", Matrix::Identity(3, 3)}});
    const codec::Checkpoint back = codec::decode_checkpoint(codec::encode_checkpoint(ck));
    EXPECT_EQ(back, ck);
    EXPECT_EQ(codec::restore_net(back), net);
    ASSERT_NE(back.extra("centroids"), nullptr);
    EXPECT_EQ(back.extra("missing"), nullptr);
}

TEST(Codec, CheckpointShapeMismatchIsIoError) {
    const PointFeatureNet net(NetShape{8, 4, 3, false}, 2);
    codec::Checkpoint ck = codec::make_checkpoint(net);
    ck.shape.hidden = 9;
    EXPECT_THROW(codec::restore_net(codec::decode_checkpoint(codec::encode_checkpoint(ck))), IoError);
}

TEST(Codec, MalformedInputs) {
    const std::string bytes = codec::encode_cloud(sample_cloud(true));
    EXPECT_THROW(codec::decode_cloud(bytes.substr(0, bytes.size() - 1)), IoError);
    EXPECT_THROW(codec::decode_cloud(bytes + "x"), IoError);
    std::string wrong_magic = bytes;
    wrong_magic[0] = 'X';
    EXPECT_THROW(codec::decode_cloud(wrong_magic), IoError);
    std::string wrong_version = bytes;
    wrong_version[4] = 2;
    EXPECT_THROW(codec::decode_cloud(wrong_version), IoError);
    EXPECT_THROW(codec::decode_camera(codec::encode_cloud(sample_cloud(false))), IoError);
    EXPECT_THROW(codec::decode_checkpoint(""), IoError);
}

TEST(Codec, Fnv1aReferenceValues) {
    EXPECT_EQ(codec::fnv1a(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(codec::fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}
