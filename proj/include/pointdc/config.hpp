#pragma once

// Flat key/value run configuration with documented defaults, plus the
// translation into per-module option structs.

#include "pointdc/core.hpp"
#include "pointdc/distill.hpp"
#include "pointdc/eval.hpp"
#include "pointdc/featnet.hpp"
#include "pointdc/supervoxel.hpp"
#include "pointdc/svc.hpp"
#include "pointdc/synth.hpp"

#include <charconv>
#include <sstream>
#include <string>
#include <vector>

namespace pointdc {

class RunConfig {
public:
    struct Entry {
        std::string key, value, doc;
    };

    RunConfig() {
        add("seed", "0", "master seed for every stage");
        add("synth.scenes", "8", "number of synthetic scenes");
        add("synth.classes", "5", "semantic classes (0 floor, 1 walls, 2.. objects)");
        add("synth.points", "4096", "points per scene");
        add("synth.objects_min", "3", "minimum objects per scene");
        add("synth.objects_max", "6", "maximum objects per scene");
        add("synth.room_x", "4.0", "room extent along x (m)");
        add("synth.room_y", "4.0", "room extent along y (m)");
        add("synth.wall_height", "1.5", "wall height (m)");
        add("synth.densities", "1,1,10,10,10", "per-class point density multipliers");
        add("synth.color_jitter", "0.05", "uniform per-channel color jitter");
        add("synth.cameras", "4", "cameras on the ring");
        add("synth.camera_radius", "1.6", "camera ring radius (m)");
        add("synth.camera_height", "1.4", "camera height (m)");
        add("synth.image_size", "64", "square image size (pixels)");
        add("synth.feature_dim", "16", "oracle feature dimension");
        add("synth.noise", "0.15", "per-pixel oracle feature noise sigma");
        add("synth.nuisance", "0.2", "per-view oracle offset norm");
        add("partition.strategy", "uniform_grid", "uniform_grid | region_grow");
        add("partition.cell_size", "0.25", "grid cell size (m)");
        add("partition.normal_deg", "10", "region_grow normal angle threshold (deg)");
        add("partition.color_tol", "0.1", "region_grow color distance threshold");
        add("partition.min_size", "1", "region_grow minimum segment size");
        add("net.hidden", "64", "hidden width");
        add("net.neighbors", "8", "k-NN context size");
        add("net.dim", "16", "output feature dimension");
        add("net.normalize", "true", "L2-normalise output features");
        add("cmd.epochs", "30", "distillation epochs");
        add("cmd.lr", "0.001", "distillation Adam learning rate");
        add("svc.iterations", "3", "clustering rounds");
        add("svc.epochs", "5", "training epochs per clustering round");
        add("svc.tau", "1.0", "soft-assignment / logit temperature");
        add("svc.clusters", "0", "cluster count (0: dataset class count)");
        add("svc.lr", "0.001", "clustering-stage Adam learning rate");
        add("svc.sphere", "true", "spherical k-means (unit-norm centroids)");
        add("svc.nonparametric", "true", "centroid-similarity classifier (off: learnable linear head)");
        add("svc.label_pooling", "true", "pool soft labels per super-voxel before hardening");
        add("svc.kmeans_iters", "100", "maximum Lloyd iterations");
        add("transform.color_jitter", "0.05", "invariant perturbation: color jitter amplitude");
        add("transform.coord_noise", "0.01", "invariant perturbation: coordinate noise sigma (m)");
        add("transform.rotation_range", "6.28", "equivariant perturbation: z-rotation range (rad, < 2pi)");
        add("transform.mirror_prob", "0.5", "equivariant perturbation: mirror probability");
        add("probe.epochs", "20", "linear probe epochs");
        add("probe.lr", "0.01", "linear probe Adam learning rate");
        add("probe.batch", "256", "linear probe mini-batch size");
        add("probe.train_fraction", "0.8", "linear probe training split");
    }

    const std::vector<Entry>& entries() const { return entries_; }

    void set(const std::string& key, const std::string& value) { find(key).value = value; }

    const std::string& get(const std::string& key) const { return const_cast<RunConfig*>(this)->find(key).value; }

    double get_double(const std::string& key) const {
        const std::string& v = get(key);
        try {
            std::size_t used = 0;
            const double d = std::stod(v, &used);
            if (used == v.size()) return d;
        } catch (const std::exception&) {
        }
        throw InvalidInput("config: '" + key + "' expects a number, got '" + v + "'");
    }

    long get_int(const std::string& key) const {
        const std::string& v = get(key);
        long out = 0;
        const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || p != v.data() + v.size())
            throw InvalidInput("config: '" + key + "' expects an integer, got '" + v + "'");
        return out;
    }

    std::size_t get_count(const std::string& key) const {
        const long v = get_int(key);
        if (v < 0) throw InvalidInput("config: '" + key + "' must be non-negative");
        return std::size_t(v);
    }

    bool get_bool(const std::string& key) const {
        const std::string& v = get(key);
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw InvalidInput("config: '" + key + "' expects true/false, got '" + v + "'");
    }

    std::vector<double> get_list(const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(get(key));
        for (std::string item; std::getline(ss, item, ',');) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(item, &used);
            } catch (const std::exception&) {
            }
            if (used == 0 || trim(item.substr(used)) != "")
                throw InvalidInput("config: '" + key + "' expects a comma-separated number list");
            out.push_back(v);
        }
        return out;
    }

    // `key = value` lines; '#' starts a comment.
    void merge_text(const std::string& text) {
        std::istringstream in(text);
        std::size_t lineno = 0;
        for (std::string line; std::getline(in, line);) {
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const std::string t = trim(line);
            if (t.empty()) continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw InvalidInput("config: line " + std::to_string(lineno) + " is not 'key = value'");
            set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        }
    }

    // Accepts "key=value".
    void merge_assignment(const std::string& kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw InvalidInput("config: override '" + kv + "' is not key=value");
        set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }

    std::string to_text() const {
        std::ostringstream os;
        os << "# pointdc effective configuration\n";
        for (const Entry& e : entries_) os << e.key << " = " << e.value << "\n";
        return os.str();
    }

    std::string describe() const {
        std::ostringstream os;
        for (const Entry& e : entries_) os << "  " << e.key << " (default " << e.value << "): " << e.doc << "\n";
        return os.str();
    }

    std::uint64_t seed() const { return std::uint64_t(get_int("seed")); }

private:
    void add(std::string key, std::string value, std::string doc) {
        entries_.push_back({std::move(key), std::move(value), std::move(doc)});
    }

    Entry& find(const std::string& key) {
        for (Entry& e : entries_)
            if (e.key == key) return e;
        throw InvalidInput("config: unknown key '" + key + "'");
    }

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    std::vector<Entry> entries_;
};

inline SceneSpec scene_spec(const RunConfig& c) {
    SceneSpec s;
    s.classes = c.get_count("synth.classes");
    s.points = c.get_count("synth.points");
    s.objects_min = c.get_count("synth.objects_min");
    s.objects_max = c.get_count("synth.objects_max");
    s.room_x = c.get_double("synth.room_x");
    s.room_y = c.get_double("synth.room_y");
    s.wall_height = c.get_double("synth.wall_height");
    s.densities = c.get_list("synth.densities");
    s.color_jitter = c.get_double("synth.color_jitter");
    s.cameras = c.get_count("synth.cameras");
    s.camera_radius = c.get_double("synth.camera_radius");
    s.camera_height = c.get_double("synth.camera_height");
    s.image_size = std::uint32_t(c.get_count("synth.image_size"));
    s.validate();
    return s;
}

inline PartitionStrategy partition_strategy(const RunConfig& c) {
    const std::string& s = c.get("partition.strategy");
    if (s == "uniform_grid") return UniformGrid{c.get_double("partition.cell_size")};
    if (s == "region_grow")
        return RegionGrow{c.get_double("partition.normal_deg"), c.get_double("partition.color_tol"),
                          c.get_count("partition.min_size")};
    throw InvalidInput("config: unknown partition.strategy '" + s + "'");
}

inline NetShape net_shape(const RunConfig& c) {
    return {c.get_count("net.hidden"), c.get_count("net.neighbors"), c.get_count("net.dim"), c.get_bool("net.normalize")};
}

inline DistillConfig distill_config(const RunConfig& c) {
    DistillConfig d;
    d.epochs = c.get_count("cmd.epochs");
    d.adam.lr = c.get_double("cmd.lr");
    d.seed = derive_seed(c.seed(), 11);
    return d;
}

inline SvcConfig svc_config(const RunConfig& c, std::size_t dataset_classes) {
    SvcConfig s;
    s.iterations = c.get_count("svc.iterations");
    s.epochs_per_iteration = c.get_count("svc.epochs");
    s.tau = c.get_double("svc.tau");
    s.clusters = c.get_count("svc.clusters");
    if (s.clusters == 0) s.clusters = dataset_classes;
    s.adam.lr = c.get_double("svc.lr");
    s.sphere = c.get_bool("svc.sphere");
    s.use_nonparametric = c.get_bool("svc.nonparametric");
    s.use_label_pooling = c.get_bool("svc.label_pooling");
    s.kmeans_iters = c.get_count("svc.kmeans_iters");
    s.transforms.color_jitter = c.get_double("transform.color_jitter");
    s.transforms.coord_noise = c.get_double("transform.coord_noise");
    s.transforms.rotation_range = c.get_double("transform.rotation_range");
    s.transforms.mirror_prob = c.get_double("transform.mirror_prob");
    s.seed = derive_seed(c.seed(), 12);
    s.validate();
    return s;
}

inline ProbeConfig probe_config(const RunConfig& c, std::size_t classes) {
    ProbeConfig p;
    p.classes = classes;
    p.epochs = c.get_count("probe.epochs");
    p.lr = c.get_double("probe.lr");
    p.batch = c.get_count("probe.batch");
    p.train_fraction = c.get_double("probe.train_fraction");
    p.seed = derive_seed(c.seed(), 13);
    return p;
}

} // namespace pointdc
