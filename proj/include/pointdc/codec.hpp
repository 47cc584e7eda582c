#pragma once

// Versioned little-endian binary codecs for every pipeline artifact.
//
//   PDPC  point cloud   : N u32, flags u32 (bit0 labels), N x 6 f64, [N i32]
//   PDCM  camera        : fx fy cx cy f64, W H u32, 3x4 f64 [R|t] world-to-camera
//   PDFM  feature map   : H W D u32, H*W*D f32, H*W u8 validity
//   PDSV  partition     : N M u32, N i32
//   PDCK  checkpoint    : hidden k D u32, normalize u8, T u32, T named f64 tensors
//
// Every file starts with the 4-byte magic and a u32 format version.

#include "pointdc/core.hpp"
#include "pointdc/featnet.hpp"
#include "pointdc/geometry.hpp"
#include "pointdc/supervoxel.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace pointdc::codec {

static_assert(std::endian::native == std::endian::little, "codecs assume a little-endian host");

inline constexpr std::uint32_t kFormatVersion = 1;

class ByteWriter {
public:
    explicit ByteWriter(std::string_view magic) {
        buf_.append(magic);
        put<std::uint32_t>(kFormatVersion);
    }

    template <typename T>
    void put(T v) {
        char raw[sizeof(T)];
        std::memcpy(raw, &v, sizeof(T));
        buf_.append(raw, sizeof(T));
    }

    void put_bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }

    std::string take() { return std::move(buf_); }

private:
    std::string buf_;
};

class ByteReader {
public:
    ByteReader(std::string_view bytes, std::string_view magic, std::string what) : bytes_(bytes), what_(std::move(what)) {
        if (bytes_.substr(0, 4) != magic) fail("bad magic (expected " + std::string(magic) + ")");
        pos_ = 4;
        const auto version = get<std::uint32_t>();
        if (version != kFormatVersion) fail("unsupported version " + std::to_string(version));
    }

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    void get_bytes(void* p, std::size_t n) {
        need(n);
        std::memcpy(p, bytes_.data() + pos_, n);
        pos_ += n;
    }

    void finish() const {
        if (pos_ != bytes_.size()) fail("trailing bytes");
    }

    [[noreturn]] void fail(const std::string& msg) const { throw IoError("malformed " + what_ + ": " + msg); }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) fail("truncated");
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
    std::string what_;
};

inline std::string encode_cloud(const PointCloud& c) {
    require(c.rgb.size() == c.size(), "encode_cloud: colors do not match points");
    require(!c.labels || c.labels->size() == c.size(), "encode_cloud: labels do not match points");
    ByteWriter w("PDPC");
    w.put<std::uint32_t>(std::uint32_t(c.size()));
    w.put<std::uint32_t>(c.labels ? 1u : 0u);
    for (std::size_t i = 0; i < c.size(); ++i) {
        for (int a = 0; a < 3; ++a) w.put<double>(c.xyz[i][a]);
        for (int a = 0; a < 3; ++a) w.put<double>(c.rgb[i][a]);
    }
    if (c.labels)
        for (int l : *c.labels) w.put<std::int32_t>(l);
    return w.take();
}

inline PointCloud decode_cloud(std::string_view bytes) {
    ByteReader r(bytes, "PDPC", "point cloud");
    const auto n = r.get<std::uint32_t>();
    const auto flags = r.get<std::uint32_t>();
    if (flags > 1) r.fail("unknown flags");
    if (r.remaining() < std::size_t(n) * 48) r.fail("truncated");
    PointCloud c;
    c.xyz.resize(n);
    c.rgb.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int a = 0; a < 3; ++a) c.xyz[i][a] = r.get<double>();
        for (int a = 0; a < 3; ++a) c.rgb[i][a] = r.get<double>();
    }
    if (flags & 1u) {
        c.labels.emplace(n);
        for (auto& l : *c.labels) l = r.get<std::int32_t>();
    }
    r.finish();
    return c;
}

inline std::string encode_camera(const CameraModel& cam) {
    ByteWriter w("PDCM");
    for (double v : {cam.fx, cam.fy, cam.cx, cam.cy}) w.put<double>(v);
    w.put<std::uint32_t>(cam.width);
    w.put<std::uint32_t>(cam.height);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) w.put<double>(cam.rotation(r, c));
        w.put<double>(cam.translation(r));
    }
    return w.take();
}

inline CameraModel decode_camera(std::string_view bytes) {
    ByteReader r(bytes, "PDCM", "camera");
    CameraModel cam;
    cam.fx = r.get<double>();
    cam.fy = r.get<double>();
    cam.cx = r.get<double>();
    cam.cy = r.get<double>();
    cam.width = r.get<std::uint32_t>();
    cam.height = r.get<std::uint32_t>();
    for (int i = 0; i < 3; ++i) {
        for (int c = 0; c < 3; ++c) cam.rotation(i, c) = r.get<double>();
        cam.translation(i) = r.get<double>();
    }
    r.finish();
    return cam;
}

inline std::string encode_feature_map(const FeatureMap& fm) {
    require(fm.data.size() == fm.pixels() * fm.dim && fm.valid.size() == fm.pixels(),
            "encode_feature_map: malformed feature map");
    ByteWriter w("PDFM");
    w.put<std::uint32_t>(fm.height);
    w.put<std::uint32_t>(fm.width);
    w.put<std::uint32_t>(fm.dim);
    w.put_bytes(fm.data.data(), fm.data.size() * sizeof(float));
    w.put_bytes(fm.valid.data(), fm.valid.size());
    return w.take();
}

inline FeatureMap decode_feature_map(std::string_view bytes) {
    ByteReader r(bytes, "PDFM", "feature map");
    const auto h = r.get<std::uint32_t>(), wd = r.get<std::uint32_t>(), d = r.get<std::uint32_t>();
    const std::size_t need = std::size_t(h) * wd * d * sizeof(float) + std::size_t(h) * wd;
    if (r.remaining() != need) r.fail("payload size does not match header");
    FeatureMap fm(h, wd, d);
    r.get_bytes(fm.data.data(), fm.data.size() * sizeof(float));
    r.get_bytes(fm.valid.data(), fm.valid.size());
    r.finish();
    return fm;
}

inline std::string encode_partition(const SuperVoxelPartition& p) {
    ByteWriter w("PDSV");
    w.put<std::uint32_t>(std::uint32_t(p.num_points()));
    w.put<std::uint32_t>(std::uint32_t(p.num_voxels()));
    for (int v : p.voxel_of) w.put<std::int32_t>(v);
    return w.take();
}

inline SuperVoxelPartition decode_partition(std::string_view bytes) {
    ByteReader r(bytes, "PDSV", "partition");
    const auto n = r.get<std::uint32_t>(), m = r.get<std::uint32_t>();
    if (r.remaining() != std::size_t(n) * 4) r.fail("payload size does not match header");
    std::vector<long> ids(n);
    for (auto& id : ids) {
        id = r.get<std::int32_t>();
        if (id < 0 || id >= long(m)) r.fail("voxel id out of range");
    }
    r.finish();
    SuperVoxelPartition p = SuperVoxelPartition::from_ids(ids);
    if (p.num_voxels() != m) r.fail("voxel ids are not dense in [0, M)");
    // from_ids renumbers by first occurrence; stored ids must already be in that order.
    for (std::size_t i = 0; i < n; ++i)
        if (p.voxel_of[i] != int(ids[i])) r.fail("voxel ids are not in first-occurrence order");
    return p;
}

// Network weights plus optional extra tensors (centroids, classifier head).
struct Checkpoint {
    NetShape shape;
    ParamSet net;
    ParamSet extras;

    const Matrix* extra(const std::string& name) const {
        for (const auto& t : extras)
            if (t.name == name) return &t.value;
        return nullptr;
    }

    bool operator==(const Checkpoint&) const = default;
};

inline std::string encode_checkpoint(const Checkpoint& ck) {
    ByteWriter w("PDCK");
    w.put<std::uint32_t>(std::uint32_t(ck.shape.hidden));
    w.put<std::uint32_t>(std::uint32_t(ck.shape.neighbors));
    w.put<std::uint32_t>(std::uint32_t(ck.shape.dim));
    w.put<std::uint8_t>(ck.shape.normalize_output ? 1 : 0);
    w.put<std::uint32_t>(std::uint32_t(ck.net.size()));
    w.put<std::uint32_t>(std::uint32_t(ck.extras.size()));
    for (const ParamSet* set : {&ck.net, &ck.extras})
        for (const NamedTensor& t : *set) {
            w.put<std::uint32_t>(std::uint32_t(t.name.size()));
            w.put_bytes(t.name.data(), t.name.size());
            w.put<std::uint32_t>(std::uint32_t(t.value.rows()));
            w.put<std::uint32_t>(std::uint32_t(t.value.cols()));
            w.put_bytes(t.value.data(), std::size_t(t.value.size()) * sizeof(double));
        }
    return w.take();
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
    ByteReader r(bytes, "PDCK", "checkpoint");
    Checkpoint ck;
    ck.shape.hidden = r.get<std::uint32_t>();
    ck.shape.neighbors = r.get<std::uint32_t>();
    ck.shape.dim = r.get<std::uint32_t>();
    const auto norm = r.get<std::uint8_t>();
    if (norm > 1) r.fail("bad normalize flag");
    ck.shape.normalize_output = norm == 1;
    const auto n_net = r.get<std::uint32_t>(), n_extra = r.get<std::uint32_t>();
    for (std::uint32_t t = 0; t < n_net + n_extra; ++t) {
        NamedTensor nt;
        const auto len = r.get<std::uint32_t>();
        if (len > r.remaining()) r.fail("truncated");
        nt.name.resize(len);
        r.get_bytes(nt.name.data(), len);
        const auto rows = r.get<std::uint32_t>(), cols = r.get<std::uint32_t>();
        if (std::size_t(rows) * cols * sizeof(double) > r.remaining()) r.fail("truncated");
        nt.value.resize(rows, cols);
        r.get_bytes(nt.value.data(), std::size_t(rows) * cols * sizeof(double));
        (t < n_net ? ck.net : ck.extras).push_back(std::move(nt));
    }
    r.finish();
    return ck;
}

inline Checkpoint make_checkpoint(const PointFeatureNet& net, ParamSet extras = {}) {
    return {net.shape(), net.params(), std::move(extras)};
}

inline PointFeatureNet restore_net(const Checkpoint& ck) {
    try {
        return PointFeatureNet(ck.shape, ck.net);
    } catch (const InvalidInput& e) {
        throw IoError(std::string("malformed checkpoint: ") + e.what());
    }
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// FNV-1a 64-bit, used for manifest file digests.
inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace pointdc::codec
