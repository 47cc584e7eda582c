#pragma once

// Pinhole projection, z-buffer visibility and pixel-to-point feature lifting.

#include "pointdc/core.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace pointdc {

inline constexpr double kDepthEpsilon = 1e-6;

// Pinhole camera with world-to-camera extrinsics: q = rotation * p + translation.
struct CameraModel {
    double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;
    std::uint32_t width = 1, height = 1;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    void validate() const {
        require(fx > 0.0 && fy > 0.0, "camera: focal lengths must be positive");
        require(width >= 1 && height >= 1, "camera: image size must be at least 1x1");
        const double ortho = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
        require(ortho <= 1e-9 && std::abs(rotation.determinant() - 1.0) <= 1e-9,
                "camera: rotation must be orthonormal with determinant +1");
    }

    Vec3 to_camera(const Vec3& p) const { return rotation * p + translation; }

    // Inverse of projection for a known depth.
    Vec3 back_project(double u, double v, double depth) const {
        const Vec3 q((u - cx) / fx * depth, (v - cy) / fy * depth, depth);
        return rotation.transpose() * (q - translation);
    }

    bool operator==(const CameraModel&) const = default;

    // Camera at `eye` looking at `target`; image y axis points down, world z is up.
    static CameraModel look_at(const Vec3& eye, const Vec3& target, double fx, double fy,
                               std::uint32_t width, std::uint32_t height) {
        const Vec3 forward = (target - eye).normalized();
        Vec3 right = forward.cross(Vec3::UnitZ());
        if (right.norm() < 1e-12) right = Vec3::UnitX();
        right.normalize();
        const Vec3 down = forward.cross(right);
        CameraModel cam;
        cam.fx = fx;
        cam.fy = fy;
        cam.cx = 0.5 * width;
        cam.cy = 0.5 * height;
        cam.width = width;
        cam.height = height;
        cam.rotation.row(0) = right.transpose();
        cam.rotation.row(1) = down.transpose();
        cam.rotation.row(2) = forward.transpose();
        cam.translation = -cam.rotation * eye;
        return cam;
    }
};

struct PointProjection {
    std::size_t point_index = 0;
    double u = 0.0, v = 0.0;
    long pixel_row = 0, pixel_col = 0;
    double depth = 0.0;
    bool valid = false;
};

// Per-pixel z-buffer result; winner[row * width + col] is -1 when unoccupied.
struct VisibilityMap {
    std::uint32_t width = 0, height = 0;
    std::vector<long> winner;
    std::vector<double> winner_depth;

    bool occupied(std::size_t pixel) const { return winner[pixel] >= 0; }
};

// Dense H x W x D feature image (float32, row-major) with per-pixel validity.
struct FeatureMap {
    std::uint32_t height = 0, width = 0, dim = 0;
    std::vector<float> data;
    std::vector<std::uint8_t> valid;

    FeatureMap() = default;
    FeatureMap(std::uint32_t h, std::uint32_t w, std::uint32_t d)
        : height(h), width(w), dim(d), data(std::size_t(h) * w * d, 0.0f), valid(std::size_t(h) * w, 0) {}

    std::size_t pixels() const { return std::size_t(height) * width; }
    float* pixel(std::size_t p) { return data.data() + p * dim; }
    const float* pixel(std::size_t p) const { return data.data() + p * dim; }

    bool operator==(const FeatureMap&) const = default;
};

struct LiftedFeatures {
    Matrix features;          // N x D, zero rows where mask is false
    std::vector<bool> mask;   // point won at least one valid pixel
};

inline std::vector<PointProjection> project_points(const PointCloud& cloud, const CameraModel& camera) {
    require(!cloud.empty(), "project_points: empty cloud");
    camera.validate();
    std::vector<PointProjection> out(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3 q = camera.to_camera(cloud.xyz[i]);
        PointProjection& p = out[i];
        p.point_index = i;
        p.depth = q.z();
        if (q.z() <= kDepthEpsilon) {
            p.u = p.v = std::numeric_limits<double>::quiet_NaN();
            p.valid = false;
            continue;
        }
        p.u = camera.fx * q.x() / q.z() + camera.cx;
        p.v = camera.fy * q.y() / q.z() + camera.cy;
        p.pixel_col = static_cast<long>(std::floor(p.u));
        p.pixel_row = static_cast<long>(std::floor(p.v));
        p.valid = p.u >= 0.0 && p.u < camera.width && p.v >= 0.0 && p.v < camera.height;
    }
    return out;
}

inline VisibilityMap zbuffer_visibility(const std::vector<PointProjection>& projections, const CameraModel& camera) {
    VisibilityMap vis;
    vis.width = camera.width;
    vis.height = camera.height;
    const std::size_t pixels = std::size_t(camera.width) * camera.height;
    vis.winner.assign(pixels, -1);
    vis.winner_depth.assign(pixels, std::numeric_limits<double>::infinity());
    for (const PointProjection& p : projections) {
        if (!p.valid) continue;
        const std::size_t pix = std::size_t(p.pixel_row) * camera.width + std::size_t(p.pixel_col);
        const long idx = static_cast<long>(p.point_index);
        const bool closer = p.depth < vis.winner_depth[pix] ||
                            (p.depth == vis.winner_depth[pix] && idx < vis.winner[pix]);
        if (vis.winner[pix] < 0 || closer) {
            vis.winner[pix] = idx;
            vis.winner_depth[pix] = p.depth;
        }
    }
    return vis;
}

// A point winning several pixels receives the elementwise max of their features.
inline LiftedFeatures lift_pixel_features(const VisibilityMap& vis, const FeatureMap& fmap, std::size_t n_points) {
    require(vis.width == fmap.width && vis.height == fmap.height,
            "lift_pixel_features: feature map size does not match visibility map");
    require(fmap.data.size() == fmap.pixels() * fmap.dim && fmap.valid.size() == fmap.pixels(),
            "lift_pixel_features: malformed feature map");
    LiftedFeatures out;
    out.features = Matrix::Zero(static_cast<Eigen::Index>(n_points), fmap.dim);
    out.mask.assign(n_points, false);
    for (std::size_t pix = 0; pix < fmap.pixels(); ++pix) {
        if (!vis.occupied(pix) || !fmap.valid[pix]) continue;
        const auto j = static_cast<std::size_t>(vis.winner[pix]);
        require(j < n_points, "lift_pixel_features: winner index out of range");
        const float* f = fmap.pixel(pix);
        auto row = out.features.row(static_cast<Eigen::Index>(j));
        if (!out.mask[j]) {
            for (std::uint32_t d = 0; d < fmap.dim; ++d) row(d) = f[d];
            out.mask[j] = true;
        } else {
            for (std::uint32_t d = 0; d < fmap.dim; ++d) row(d) = std::max<double>(row(d), f[d]);
        }
    }
    return out;
}

} // namespace pointdc
