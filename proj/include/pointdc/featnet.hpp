#pragma once

// Small point feature network with k-NN context blocks, analytic backward,
// Adam, and the invariant / equivariant point-cloud perturbations.

#include "pointdc/core.hpp"
#include "pointdc/knn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace pointdc {

struct NamedTensor {
    std::string name;
    Matrix value;

    bool operator==(const NamedTensor& o) const { return name == o.name && value == o.value; }
};

using ParamSet = std::vector<NamedTensor>;
using ParamGradients = std::vector<Matrix>;

inline ParamGradients zero_gradients(const ParamSet& params) {
    ParamGradients g;
    g.reserve(params.size());
    for (const auto& p : params) g.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    return g;
}

namespace detail {
inline std::uint64_t next_net_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter++;
}

// Kaiming-uniform fan-in initialisation for a (fan_in x fan_out) weight.
inline Matrix kaiming_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / double(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    return w;
}

inline Matrix relu(const Matrix& z) { return z.cwiseMax(0.0); }

inline Matrix relu_backward(const Matrix& z, const Matrix& dh) {
    return (z.array() > 0.0).select(dh, 0.0);
}

inline Matrix neighbor_mean(const Matrix& h, const KnnGraph& g) {
    Matrix out = Matrix::Zero(h.rows(), h.cols());
    const double w = 1.0 / double(g.k);
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
        const std::size_t* nb = g.row(std::size_t(i));
        for (std::size_t m = 0; m < g.k; ++m) out.row(i) += h.row(Eigen::Index(nb[m]));
        out.row(i) *= w;
    }
    return out;
}

inline Matrix neighbor_mean_backward(const Matrix& dm, const KnnGraph& g) {
    Matrix dh = Matrix::Zero(dm.rows(), dm.cols());
    const double w = 1.0 / double(g.k);
    for (Eigen::Index i = 0; i < dm.rows(); ++i) {
        const std::size_t* nb = g.row(std::size_t(i));
        for (std::size_t m = 0; m < g.k; ++m) dh.row(Eigen::Index(nb[m])) += w * dm.row(i);
    }
    return dh;
}

inline Matrix add_bias(Matrix z, const Matrix& bias) {
    z.rowwise() += bias.row(0);
    return z;
}
} // namespace detail

struct NetShape {
    std::size_t hidden = 64;
    std::size_t neighbors = 8;
    std::size_t dim = 16;
    bool normalize_output = true;

    bool operator==(const NetShape&) const = default;
};

// Layer layout: input 6->h, two context blocks [h | knn-mean(h)] 2h->h, head h->D.
class PointFeatureNet {
public:
    enum Slot : std::size_t { kInW, kInB, kCtx1W, kCtx1B, kCtx2W, kCtx2B, kOutW, kOutB, kNumSlots };
    static constexpr std::size_t kInputDim = 6;

    PointFeatureNet() = default;

    PointFeatureNet(const NetShape& shape, std::uint64_t seed) : shape_(shape), id_(detail::next_net_id()) {
        validate_shape();
        Rng rng(seed);
        const auto h = Eigen::Index(shape.hidden), d = Eigen::Index(shape.dim);
        params_ = {
            {"input.weight", detail::kaiming_uniform(kInputDim, h, rng)},
            {"input.bias", Matrix::Zero(1, h)},
            {"context1.weight", detail::kaiming_uniform(2 * h, h, rng)},
            {"context1.bias", Matrix::Zero(1, h)},
            {"context2.weight", detail::kaiming_uniform(2 * h, h, rng)},
            {"context2.bias", Matrix::Zero(1, h)},
            {"output.weight", detail::kaiming_uniform(h, d, rng)},
            {"output.bias", Matrix::Zero(1, d)},
        };
    }

    // Rebuilds a net from stored tensors (checkpoint loading).
    PointFeatureNet(const NetShape& shape, ParamSet params)
        : shape_(shape), params_(std::move(params)), id_(detail::next_net_id()) {
        validate_shape();
        const auto h = Eigen::Index(shape.hidden), d = Eigen::Index(shape.dim);
        const std::pair<Eigen::Index, Eigen::Index> expected[kNumSlots] = {
            {Eigen::Index(kInputDim), h}, {1, h}, {2 * h, h}, {1, h}, {2 * h, h}, {1, h}, {h, d}, {1, d}};
        require(params_.size() == kNumSlots, "featnet: wrong number of parameter tensors");
        for (std::size_t s = 0; s < kNumSlots; ++s) {
            require(params_[s].value.rows() == expected[s].first && params_[s].value.cols() == expected[s].second,
                    "featnet: parameter '" + params_[s].name + "' has wrong shape");
            require(params_[s].value.allFinite(), "featnet: parameter '" + params_[s].name + "' is not finite");
        }
    }

    const NetShape& shape() const { return shape_; }
    const ParamSet& params() const { return params_; }
    // Mutable access invalidates outstanding activation records.
    ParamSet& mutable_params() {
        ++version_;
        return params_;
    }
    const Matrix& param(Slot s) const { return params_[s].value; }
    std::uint64_t id() const { return id_; }
    std::uint64_t version() const { return version_; }

    bool operator==(const PointFeatureNet& o) const { return shape_ == o.shape_ && params_ == o.params_; }

private:
    void validate_shape() const {
        require(shape_.neighbors >= 1, "featnet: k must be >= 1");
        require(shape_.dim >= 2, "featnet: feature dim must be >= 2");
        require(shape_.hidden >= 1, "featnet: hidden width must be >= 1");
    }

    NetShape shape_;
    ParamSet params_;
    std::uint64_t id_ = 0;
    std::uint64_t version_ = 0;
};

struct ActivationRecord {
    std::uint64_t net_id = 0, net_version = 0;
    std::size_t effective_k = 0;
    KnnGraph graph;
    Matrix input, z0, h0, c1, z1, h1, c2, z2, h2, raw, output;
};

// Per-point input: xyz rescaled per axis to [0, 1] over the cloud's bounding box, rgb as-is.
inline Matrix net_input(const PointCloud& cloud) {
    Vec3 lo = cloud.xyz[0], hi = cloud.xyz[0];
    for (const Vec3& p : cloud.xyz) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec3 extent = hi - lo;
    Matrix x(Eigen::Index(cloud.size()), 6);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        for (int a = 0; a < 3; ++a)
            x(Eigen::Index(i), a) = extent[a] > 0.0 ? (cloud.xyz[i][a] - lo[a]) / extent[a] : 0.0;
        for (int a = 0; a < 3; ++a) x(Eigen::Index(i), 3 + a) = cloud.rgb[i][a];
    }
    return x;
}

inline ActivationRecord forward(const PointFeatureNet& net, const PointCloud& cloud) {
    using S = PointFeatureNet;
    require(!cloud.empty(), "forward: empty cloud");
    require(cloud.rgb.size() == cloud.size(), "forward: color count does not match point count");
    ActivationRecord r;
    r.net_id = net.id();
    r.net_version = net.version();
    r.graph = knn_graph(cloud.xyz, net.shape().neighbors);
    r.effective_k = r.graph.k;
    r.input = net_input(cloud);
    r.z0 = detail::add_bias(r.input * net.param(S::kInW), net.param(S::kInB));
    r.h0 = detail::relu(r.z0);
    r.c1.resize(r.h0.rows(), 2 * r.h0.cols());
    r.c1 << r.h0, detail::neighbor_mean(r.h0, r.graph);
    r.z1 = detail::add_bias(r.c1 * net.param(S::kCtx1W), net.param(S::kCtx1B));
    r.h1 = detail::relu(r.z1);
    r.c2.resize(r.h1.rows(), 2 * r.h1.cols());
    r.c2 << r.h1, detail::neighbor_mean(r.h1, r.graph);
    r.z2 = detail::add_bias(r.c2 * net.param(S::kCtx2W), net.param(S::kCtx2B));
    r.h2 = detail::relu(r.z2);
    r.raw = detail::add_bias(r.h2 * net.param(S::kOutW), net.param(S::kOutB));
    r.output = r.raw;
    if (net.shape().normalize_output) normalize_rows(r.output);
    return r;
}

// Gradients of <output, output_grad> with respect to every parameter.
inline ParamGradients backward(const PointFeatureNet& net, const ActivationRecord& r, const Matrix& output_grad) {
    using S = PointFeatureNet;
    require(r.net_id == net.id() && r.net_version == net.version(),
            "backward: activation record does not belong to this network state");
    require(output_grad.rows() == r.output.rows() && output_grad.cols() == r.output.cols(),
            "backward: output gradient shape mismatch");
    const auto h = Eigen::Index(net.shape().hidden);
    ParamGradients g(S::kNumSlots);

    const Matrix draw = net.shape().normalize_output ? normalize_rows_backward(r.raw, r.output, output_grad) : output_grad;
    g[S::kOutW] = r.h2.transpose() * draw;
    g[S::kOutB] = draw.colwise().sum();
    Matrix dh2 = draw * net.param(S::kOutW).transpose();

    Matrix dz2 = detail::relu_backward(r.z2, dh2);
    g[S::kCtx2W] = r.c2.transpose() * dz2;
    g[S::kCtx2B] = dz2.colwise().sum();
    Matrix dc2 = dz2 * net.param(S::kCtx2W).transpose();
    Matrix dh1 = dc2.leftCols(h) + detail::neighbor_mean_backward(dc2.rightCols(h), r.graph);

    Matrix dz1 = detail::relu_backward(r.z1, dh1);
    g[S::kCtx1W] = r.c1.transpose() * dz1;
    g[S::kCtx1B] = dz1.colwise().sum();
    Matrix dc1 = dz1 * net.param(S::kCtx1W).transpose();
    Matrix dh0 = dc1.leftCols(h) + detail::neighbor_mean_backward(dc1.rightCols(h), r.graph);

    Matrix dz0 = detail::relu_backward(r.z0, dh0);
    g[S::kInW] = r.input.transpose() * dz0;
    g[S::kInB] = dz0.colwise().sum();
    return g;
}

// Linear classifier D -> C used by the pseudo-label baselines.
inline ParamSet make_linear_head(std::size_t in_dim, std::size_t classes, std::uint64_t seed) {
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(double(in_dim));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix w = Matrix::Zero(Eigen::Index(in_dim), Eigen::Index(classes));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    return {{"head.weight", w}, {"head.bias", Matrix::Zero(1, Eigen::Index(classes))}};
}

inline Matrix linear_forward(const ParamSet& head, const Matrix& x) {
    return detail::add_bias(x * head[0].value, head[1].value);
}

// Returns parameter gradients and writes dL/dx into `input_grad` when non-null.
inline ParamGradients linear_backward(const ParamSet& head, const Matrix& x, const Matrix& dlogits, Matrix* input_grad) {
    ParamGradients g{x.transpose() * dlogits, dlogits.colwise().sum()};
    if (input_grad) *input_grad = dlogits * head[0].value.transpose();
    return g;
}

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Matrix> m, v;
    long step = 0;

    static AdamState for_params(const ParamSet& params) {
        AdamState s;
        s.m = zero_gradients(params);
        s.v = zero_gradients(params);
        return s;
    }
};

inline void adam_step(ParamSet& params, const ParamGradients& grads, AdamState& state, const AdamConfig& cfg) {
    require(grads.size() == params.size() && state.m.size() == params.size() && state.v.size() == params.size(),
            "adam_step: state does not match parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
        require(grads[i].rows() == params[i].value.rows() && grads[i].cols() == params[i].value.cols(),
                "adam_step: gradient shape mismatch for '" + params[i].name + "'");
        if (!grads[i].allFinite()) throw NumericError("adam_step: non-finite gradient for '" + params[i].name + "'");
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, double(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, double(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i].cwiseProduct(grads[i]);
        const Matrix m_hat = state.m[i] / c1;
        const Matrix v_hat = state.v[i] / c2;
        params[i].value.array() -= cfg.lr * m_hat.array() / (v_hat.array().sqrt() + cfg.eps);
    }
}

inline void adam_step(PointFeatureNet& net, const ParamGradients& grads, AdamState& state, const AdamConfig& cfg) {
    for (std::size_t i = 0; i < grads.size() && i < net.params().size(); ++i)
        if (!grads[i].allFinite()) throw NumericError("adam_step: non-finite gradient for '" + net.params()[i].name + "'");
    adam_step(net.mutable_params(), grads, state, cfg);
}

struct TransformSpec {
    double color_jitter = 0.0;   // uniform +/- amplitude per channel
    double coord_noise = 0.0;    // Gaussian sigma, meters
    double rotation_range = 0.0; // angle drawn from [0, rotation_range) about z
    double mirror_prob = 0.0;

    void validate() const {
        require(color_jitter >= 0.0 && coord_noise >= 0.0, "transform: amplitudes must be non-negative");
        require(rotation_range >= 0.0 && rotation_range < 2.0 * std::numbers::pi,
                "transform: rotation range must lie in [0, 2pi)");
        require(mirror_prob >= 0.0 && mirror_prob <= 1.0, "transform: mirror probability must lie in [0, 1]");
    }
};

struct EquivariantRecord {
    double angle = 0.0;
    bool mirrored = false;
    Vec3 center = Vec3::Zero();
};

inline PointCloud transform_invariant(const PointCloud& cloud, const TransformSpec& spec, Rng& rng) {
    spec.validate();
    PointCloud out = cloud;
    if (spec.color_jitter > 0.0) {
        std::uniform_real_distribution<double> u(-spec.color_jitter, spec.color_jitter);
        for (Vec3& c : out.rgb)
            for (int a = 0; a < 3; ++a) c[a] = std::clamp(c[a] + u(rng), 0.0, 1.0);
    }
    if (spec.coord_noise > 0.0) {
        std::normal_distribution<double> g(0.0, spec.coord_noise);
        for (Vec3& p : out.xyz)
            for (int a = 0; a < 3; ++a) p[a] += g(rng);
    }
    return out;
}

// Rotation by `angle` about the vertical axis through `center`.
inline void rotate_about_z(PointCloud& cloud, double angle, const Vec3& center) {
    const Mat3 rot = Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
    for (Vec3& p : cloud.xyz) p = rot * (p - center) + center;
}

inline Vec3 bbox_center(const PointCloud& cloud) {
    Vec3 lo = cloud.xyz[0], hi = cloud.xyz[0];
    for (const Vec3& p : cloud.xyz) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return 0.5 * (lo + hi);
}

// Point order is preserved, so labels indexed by point carry over unchanged.
inline std::pair<PointCloud, EquivariantRecord> transform_equivariant(const PointCloud& cloud, const TransformSpec& spec,
                                                                      Rng& rng) {
    spec.validate();
    EquivariantRecord rec;
    rec.center = bbox_center(cloud);
    if (spec.rotation_range > 0.0) rec.angle = std::uniform_real_distribution<double>(0.0, spec.rotation_range)(rng);
    if (spec.mirror_prob > 0.0) rec.mirrored = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < spec.mirror_prob;
    PointCloud out = cloud;
    if (rec.mirrored)
        for (Vec3& p : out.xyz) p.x() = 2.0 * rec.center.x() - p.x();
    if (rec.angle != 0.0) rotate_about_z(out, rec.angle, rec.center);
    return {std::move(out), rec};
}

} // namespace pointdc
