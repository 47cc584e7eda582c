#pragma once

// Deterministic synthetic rooms (floor, walls, primitive objects) and a
// multi-view feature oracle standing in for a pretrained image backbone.

#include "pointdc/core.hpp"
#include "pointdc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace pointdc {

inline constexpr int kFloorClass = 0;
inline constexpr int kWallClass = 1;

// SplitMix64 step; derives independent stream seeds from (seed, index).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline Vec3 palette_color(std::size_t cls) {
    static const Vec3 table[] = {{0.55, 0.42, 0.30}, {0.85, 0.85, 0.80}, {0.80, 0.20, 0.20}, {0.20, 0.62, 0.25},
                                 {0.20, 0.30, 0.82}, {0.88, 0.76, 0.18}, {0.60, 0.28, 0.70}, {0.18, 0.72, 0.76}};
    if (cls < std::size(table)) return table[cls];
    Rng rng(derive_seed(0xC0104ULL, cls));
    std::uniform_real_distribution<double> u(0.1, 0.9);
    return {u(rng), u(rng), u(rng)};
}

struct SceneSpec {
    std::size_t classes = 5;
    std::size_t objects_min = 3, objects_max = 6;
    double room_x = 4.0, room_y = 4.0, wall_height = 1.5;
    std::vector<double> densities;   // per class; empty -> all 1
    std::vector<Vec3> base_colors;   // per class; empty -> palette
    double color_jitter = 0.05;
    std::size_t cameras = 4;
    double camera_radius = 1.6, camera_height = 1.4, camera_target_z = 0.3;
    double fov_deg = 90.0;
    std::uint32_t image_size = 64;
    std::size_t points = 4096;

    double density(std::size_t c) const { return densities.empty() ? 1.0 : densities[c]; }
    Vec3 color(std::size_t c) const { return base_colors.empty() ? palette_color(c) : base_colors[c]; }

    void validate() const {
        require(classes >= 2, "scene spec: need at least 2 classes");
        require(densities.empty() || densities.size() == classes, "scene spec: one density per class required");
        for (double d : densities) require(d > 0.0, "scene spec: densities must be positive");
        require(base_colors.empty() || base_colors.size() == classes, "scene spec: one base color per class required");
        require(cameras >= 1, "scene spec: need at least one camera");
        require(objects_min <= objects_max, "scene spec: objects_min exceeds objects_max");
        require(room_x > 0.0 && room_y > 0.0 && wall_height > 0.0, "scene spec: room extents must be positive");
        require(points >= 1 && image_size >= 1, "scene spec: points and image size must be positive");
        require(fov_deg > 0.0 && fov_deg < 180.0, "scene spec: field of view must lie in (0, 180)");
        require(classes <= 2 || objects_max >= classes - 2,
                "scene spec: objects_max too small to place every object class");
    }
};

enum class Shape { Box, Cylinder, Sphere };

struct SceneObject {
    Shape shape = Shape::Box;
    int label = 0;
    Vec3 center = Vec3::Zero();  // footprint center on the floor (z = 0)
    double yaw = 0.0;
    double sx = 0.0, sy = 0.0;   // box half extents, or radius in sx
    double height = 0.0;         // box / cylinder height; sphere diameter

    double footprint_radius() const { return shape == Shape::Box ? std::hypot(sx, sy) : sx; }

    double surface_area() const {
        switch (shape) {
        case Shape::Box: return 4.0 * (sx + sy) * height + 4.0 * sx * sy;
        case Shape::Cylinder: return 2.0 * std::numbers::pi * sx * height + std::numbers::pi * sx * sx;
        case Shape::Sphere: return 4.0 * std::numbers::pi * sx * sx;
        }
        return 0.0;
    }

    // Floor area hidden under the object.
    double footprint_area() const {
        switch (shape) {
        case Shape::Box: return 4.0 * sx * sy;
        case Shape::Cylinder: return std::numbers::pi * sx * sx;
        case Shape::Sphere: return 0.0;
        }
        return 0.0;
    }

    bool covers_floor(const Vec3& p) const {
        const Vec3 d = p - center;
        if (shape == Shape::Cylinder) return d.x() * d.x() + d.y() * d.y() < sx * sx;
        if (shape == Shape::Sphere) return false;
        const double c = std::cos(-yaw), s = std::sin(-yaw);
        const double lx = c * d.x() - s * d.y(), ly = s * d.x() + c * d.y();
        return std::abs(lx) < sx && std::abs(ly) < sy;
    }
};

struct SyntheticScene {
    PointCloud cloud;
    std::vector<CameraModel> cameras;
    std::vector<SceneObject> objects;
};

namespace detail {
inline Vec3 sample_object_surface(const SceneObject& o, Rng& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double pi = std::numbers::pi;
    Vec3 local;
    switch (o.shape) {
    case Shape::Box: {
        const double side_x = 2.0 * 2.0 * o.sy * o.height; // two faces normal to x
        const double side_y = 2.0 * 2.0 * o.sx * o.height;
        const double top = 4.0 * o.sx * o.sy;
        const double pick = u01(rng) * (side_x + side_y + top);
        const double a = 2.0 * u01(rng) - 1.0, b = u01(rng);
        const double sign = u01(rng) < 0.5 ? -1.0 : 1.0;
        if (pick < side_x) local = {sign * o.sx, a * o.sy, b * o.height};
        else if (pick < side_x + side_y) local = {a * o.sx, sign * o.sy, b * o.height};
        else local = {a * o.sx, (2.0 * b - 1.0) * o.sy, o.height};
        break;
    }
    case Shape::Cylinder: {
        const double side = 2.0 * pi * o.sx * o.height, top = pi * o.sx * o.sx;
        const double t = 2.0 * pi * u01(rng);
        if (u01(rng) * (side + top) < side) {
            local = {o.sx * std::cos(t), o.sx * std::sin(t), u01(rng) * o.height};
        } else {
            const double r = o.sx * std::sqrt(u01(rng));
            local = {r * std::cos(t), r * std::sin(t), o.height};
        }
        break;
    }
    case Shape::Sphere: {
        const double z = 2.0 * u01(rng) - 1.0, t = 2.0 * pi * u01(rng);
        const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
        local = {o.sx * rxy * std::cos(t), o.sx * rxy * std::sin(t), o.sx * (z + 1.0)};
        break;
    }
    }
    const double c = std::cos(o.yaw), s = std::sin(o.yaw);
    return {o.center.x() + c * local.x() - s * local.y(), o.center.y() + s * local.x() + c * local.y(), local.z()};
}

// Largest-remainder rounding of n * w / sum(w).
inline std::vector<std::size_t> apportion(std::size_t n, const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    std::vector<std::size_t> out(w.size(), 0);
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double exact = double(n) * w[i] / total;
        out[i] = std::size_t(std::floor(exact));
        assigned += out[i];
        rem.emplace_back(exact - std::floor(exact), i);
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < n; ++r, ++assigned) ++out[rem[r % rem.size()].second];
    return out;
}
} // namespace detail

// Expected share of points per class implied by surface areas and densities.
inline std::vector<double> expected_class_share(const SceneSpec& spec, const std::vector<SceneObject>& objects) {
    std::vector<double> w(spec.classes, 0.0);
    double floor = spec.room_x * spec.room_y;
    for (const SceneObject& o : objects) {
        floor -= o.footprint_area();
        w[std::size_t(o.label)] += o.surface_area() * spec.density(std::size_t(o.label));
    }
    w[kFloorClass] += floor * spec.density(kFloorClass);
    w[kWallClass] += 2.0 * (spec.room_x + spec.room_y) * spec.wall_height * spec.density(kWallClass);
    double total = 0.0;
    for (double x : w) total += x;
    for (double& x : w) x /= total;
    return w;
}

inline std::vector<CameraModel> camera_ring(const SceneSpec& spec) {
    std::vector<CameraModel> cams;
    const double f = 0.5 * spec.image_size / std::tan(0.5 * spec.fov_deg * std::numbers::pi / 180.0);
    for (std::size_t v = 0; v < spec.cameras; ++v) {
        const double a = std::numbers::pi / 4.0 + 2.0 * std::numbers::pi * double(v) / double(spec.cameras);
        const Vec3 eye(spec.camera_radius * std::cos(a), spec.camera_radius * std::sin(a), spec.camera_height);
        cams.push_back(CameraModel::look_at(eye, Vec3(0.0, 0.0, spec.camera_target_z), f, f, spec.image_size,
                                            spec.image_size));
    }
    return cams;
}

inline SyntheticScene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uni = [&](double a, double b) { return a + (b - a) * u01(rng); };

    SyntheticScene scene;
    const std::size_t object_classes = spec.classes - 2;
    std::size_t n_obj = 0;
    if (object_classes > 0) {
        n_obj = spec.objects_min + std::size_t(u01(rng) * double(spec.objects_max - spec.objects_min + 1));
        n_obj = std::clamp(n_obj, std::max(spec.objects_min, object_classes), spec.objects_max);
    }
    const double margin = 0.1, gap = 0.15;
    for (std::size_t i = 0; i < n_obj; ++i) {
        SceneObject o;
        o.label = int(2 + (i < object_classes ? i : std::size_t(u01(rng) * double(object_classes)) % object_classes));
        o.shape = static_cast<Shape>((o.label - 2) % 3);
        o.yaw = uni(0.0, std::numbers::pi);
        switch (o.shape) {
        case Shape::Box: o.sx = uni(0.2, 0.4); o.sy = uni(0.2, 0.4); o.height = uni(0.3, 0.8); break;
        case Shape::Cylinder: o.sx = uni(0.15, 0.3); o.height = uni(0.4, 1.0); break;
        case Shape::Sphere: o.sx = uni(0.2, 0.35); o.height = 2.0 * o.sx; break;
        }
        const double r = o.footprint_radius();
        const double hx = 0.5 * spec.room_x - margin - r, hy = 0.5 * spec.room_y - margin - r;
        bool placed = false;
        for (int attempt = 0; attempt < 500 && hx > 0.0 && hy > 0.0 && !placed; ++attempt) {
            o.center = Vec3(uni(-hx, hx), uni(-hy, hy), 0.0);
            placed = std::all_of(scene.objects.begin(), scene.objects.end(), [&](const SceneObject& other) {
                return (other.center - o.center).norm() > other.footprint_radius() + r + gap;
            });
        }
        if (!placed) throw InvalidInput("generate_scene: objects overflow the room (cannot place object " +
                                        std::to_string(i) + ")");
        scene.objects.push_back(o);
    }

    // Surfaces: floor, four walls, then objects.
    std::vector<double> weights;
    double floor_area = spec.room_x * spec.room_y;
    for (const SceneObject& o : scene.objects) floor_area -= o.footprint_area();
    weights.push_back(floor_area * spec.density(kFloorClass));
    const double walls[4] = {spec.room_x, spec.room_y, spec.room_x, spec.room_y};
    for (double len : walls) weights.push_back(len * spec.wall_height * spec.density(kWallClass));
    for (const SceneObject& o : scene.objects) weights.push_back(o.surface_area() * spec.density(std::size_t(o.label)));
    const std::vector<std::size_t> counts = detail::apportion(spec.points, weights);

    PointCloud& cloud = scene.cloud;
    cloud.labels.emplace();
    auto emit = [&](const Vec3& p, int label) {
        cloud.xyz.push_back(p);
        const Vec3 base = spec.color(std::size_t(label));
        Vec3 c;
        for (int a = 0; a < 3; ++a) c[a] = std::clamp(base[a] + uni(-spec.color_jitter, spec.color_jitter), 0.0, 1.0);
        cloud.rgb.push_back(c);
        cloud.labels->push_back(label);
    };
    const double hx = 0.5 * spec.room_x, hy = 0.5 * spec.room_y;
    for (std::size_t k = 0; k < counts[0]; ++k) {
        Vec3 p;
        do {
            p = Vec3(uni(-hx, hx), uni(-hy, hy), 0.0);
        } while (std::any_of(scene.objects.begin(), scene.objects.end(),
                             [&](const SceneObject& o) { return o.covers_floor(p); }));
        emit(p, kFloorClass);
    }
    for (int w = 0; w < 4; ++w)
        for (std::size_t k = 0; k < counts[std::size_t(1 + w)]; ++k) {
            const double t = u01(rng), z = uni(0.0, spec.wall_height);
            Vec3 p;
            switch (w) {
            case 0: p = Vec3(-hx + t * spec.room_x, -hy, z); break;
            case 1: p = Vec3(hx, -hy + t * spec.room_y, z); break;
            case 2: p = Vec3(hx - t * spec.room_x, hy, z); break;
            default: p = Vec3(-hx, hy - t * spec.room_y, z); break;
            }
            emit(p, kWallClass);
        }
    for (std::size_t i = 0; i < scene.objects.size(); ++i)
        for (std::size_t k = 0; k < counts[5 + i]; ++k)
            emit(detail::sample_object_surface(scene.objects[i], rng), scene.objects[i].label);

    scene.cameras = camera_ring(spec);
    return scene;
}

struct FeatureOracle {
    Matrix embeddings;     // C x D, orthonormal rows
    double noise = 0.0;    // per-pixel Gaussian sigma per channel
    double nuisance = 0.0; // norm of the per-view shared offset

    static FeatureOracle make(std::size_t classes, std::size_t dim, double noise, double nuisance, std::uint64_t seed) {
        require(dim >= classes, "feature oracle: feature dim must be >= class count for orthonormal embeddings");
        Rng rng(seed);
        std::normal_distribution<double> g(0.0, 1.0);
        Matrix a = Matrix::Zero(Eigen::Index(dim), Eigen::Index(classes));
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
        const Eigen::HouseholderQR<Matrix> qr(a);
        const Matrix q = qr.householderQ() * Matrix::Identity(Eigen::Index(dim), Eigen::Index(classes));
        FeatureOracle o;
        o.embeddings = q.transpose();
        o.noise = noise;
        o.nuisance = nuisance;
        return o;
    }
};

// One feature image per camera; occupied pixels carry the winning point's
// class embedding plus pixel noise and a per-view offset.
inline std::vector<FeatureMap> render_views(const PointCloud& cloud, const std::vector<CameraModel>& cameras,
                                            const FeatureOracle& oracle, std::uint64_t seed) {
    require(cloud.labels.has_value(), "render_views: cloud has no labels");
    const auto dim = std::uint32_t(oracle.embeddings.cols());
    std::vector<FeatureMap> maps;
    for (std::size_t v = 0; v < cameras.size(); ++v) {
        Rng rng(derive_seed(seed, v));
        std::normal_distribution<double> g(0.0, 1.0);
        Vector offset = Vector::Zero(dim);
        if (oracle.nuisance > 0.0) {
            for (std::uint32_t d = 0; d < dim; ++d) offset(d) = g(rng);
            offset *= oracle.nuisance / offset.norm();
        }
        const CameraModel& cam = cameras[v];
        const VisibilityMap vis = zbuffer_visibility(project_points(cloud, cam), cam);
        FeatureMap fm(cam.height, cam.width, dim);
        for (std::size_t pix = 0; pix < fm.pixels(); ++pix) {
            if (!vis.occupied(pix)) continue;
            const int label = (*cloud.labels)[std::size_t(vis.winner[pix])];
            require(label >= 0 && label < oracle.embeddings.rows(), "render_views: label outside oracle classes");
            float* f = fm.pixel(pix);
            for (std::uint32_t d = 0; d < dim; ++d) {
                double x = oracle.embeddings(label, d) + offset(d);
                if (oracle.noise > 0.0) x += oracle.noise * g(rng);
                f[d] = float(x);
            }
            fm.valid[pix] = 1;
        }
        maps.push_back(std::move(fm));
    }
    return maps;
}

} // namespace pointdc
