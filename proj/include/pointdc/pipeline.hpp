#pragma once

// Dataset synthesis and the on-disk run layout shared by the CLI and tests.
//
//   <dir>/manifest.txt         listing of every file with size and digest
//   <dir>/config.cfg           effective configuration echo
//   <dir>/scene_NNN/cloud.pdpc, camera_V.pdcm, features_V.pdfm, partition.pdsv

#include "pointdc/codec.hpp"
#include "pointdc/config.hpp"
#include "pointdc/dataset.hpp"
#include "pointdc/supervoxel.hpp"
#include "pointdc/synth.hpp"

#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace pointdc {

namespace fs = std::filesystem;

inline std::string scene_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%03zu", i);
    return buf;
}

inline Dataset synthesize_dataset(const RunConfig& cfg) {
    const SceneSpec spec = scene_spec(cfg);
    const std::size_t n = cfg.get_count("synth.scenes");
    require(n >= 1, "synth: need at least one scene");
    const FeatureOracle oracle = FeatureOracle::make(spec.classes, cfg.get_count("synth.feature_dim"),
                                                     cfg.get_double("synth.noise"), cfg.get_double("synth.nuisance"),
                                                     derive_seed(cfg.seed(), 1));
    const PartitionStrategy strategy = partition_strategy(cfg);
    Dataset ds;
    ds.classes = spec.classes;
    for (std::size_t i = 0; i < n; ++i) {
        SyntheticScene gen = generate_scene(spec, derive_seed(cfg.seed(), 100 + i));
        Scene s;
        s.name = scene_name(i);
        s.views = render_views(gen.cloud, gen.cameras, oracle, derive_seed(cfg.seed(), 200 + i));
        s.partition = partition(gen.cloud, strategy);
        s.cloud = std::move(gen.cloud);
        s.cameras = std::move(gen.cameras);
        ds.scenes.push_back(std::move(s));
    }
    return ds;
}

// Collects files for one output directory and writes them with a manifest.
class RunWriter {
public:
    RunWriter(fs::path dir, std::string kind) : dir_(std::move(dir)), kind_(std::move(kind)) {}

    void add(const std::string& rel, std::string bytes) { files_[rel] = std::move(bytes); }
    void header(const std::string& key, const std::string& value) { header_.emplace_back(key, value); }

    void commit() const {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create directory '" + dir_.string() + "': " + ec.message());
        std::ostringstream man;
        man << "format = pointdc-manifest\nversion = 1\nkind = " << kind_ << "\n";
        for (const auto& [k, v] : header_) man << k << " = " << v << "\n";
        for (const auto& [rel, bytes] : files_) {
            const fs::path p = dir_ / rel;
            fs::create_directories(p.parent_path(), ec);
            if (ec) throw IoError("cannot create directory '" + p.parent_path().string() + "': " + ec.message());
            codec::write_file(p.string(), bytes);
            char digest[17];
            std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(codec::fnv1a(bytes)));
            man << "file = " << rel << ' ' << bytes.size() << ' ' << digest << "\n";
        }
        codec::write_file((dir_ / "manifest.txt").string(), man.str());
    }

private:
    fs::path dir_;
    std::string kind_;
    std::vector<std::pair<std::string, std::string>> header_;
    std::map<std::string, std::string> files_;
};

struct Manifest {
    std::map<std::string, std::string> header;
    std::vector<std::string> files;
    std::vector<std::pair<std::string, std::size_t>> scenes; // name, view count
};

inline Manifest read_manifest(const fs::path& dir) {
    const fs::path p = dir / "manifest.txt";
    if (!fs::exists(p)) throw IoError("missing manifest '" + p.string() + "'");
    Manifest m;
    std::istringstream in(codec::read_file(p.string()));
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) throw IoError("malformed manifest line: '" + line + "'");
        const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
        if (key == "file") {
            m.files.push_back(value.substr(0, value.find(' ')));
        } else if (key == "scene") {
            std::istringstream sv(value);
            std::string name;
            std::size_t views = 0;
            if (!(sv >> name >> views)) throw IoError("malformed manifest scene entry: '" + value + "'");
            m.scenes.emplace_back(name, views);
        } else {
            m.header[key] = value;
        }
    }
    if (m.header["format"] != "pointdc-manifest") throw IoError("malformed manifest: bad format tag");
    return m;
}

inline void add_dataset_files(RunWriter& w, const Dataset& ds, const RunConfig& cfg) {
    w.header("classes", std::to_string(ds.classes));
    w.header("scenes", std::to_string(ds.scenes.size()));
    w.header("spec", "config.cfg");
    for (const Scene& s : ds.scenes) w.header("scene", s.name + " " + std::to_string(s.views.size()));
    w.add("config.cfg", cfg.to_text());
    for (const Scene& s : ds.scenes) {
        w.add(s.name + "/cloud.pdpc", codec::encode_cloud(s.cloud));
        w.add(s.name + "/partition.pdsv", codec::encode_partition(s.partition));
        for (std::size_t v = 0; v < s.views.size(); ++v) {
            w.add(s.name + "/camera_" + std::to_string(v) + ".pdcm", codec::encode_camera(s.cameras[v]));
            w.add(s.name + "/features_" + std::to_string(v) + ".pdfm", codec::encode_feature_map(s.views[v]));
        }
    }
}

inline void write_dataset(const Dataset& ds, const RunConfig& cfg, const fs::path& dir) {
    RunWriter w(dir, "dataset");
    add_dataset_files(w, ds, cfg);
    w.commit();
}

inline Dataset load_dataset(const fs::path& dir) {
    Manifest m = read_manifest(dir);
    if (m.header["kind"] != "dataset") throw IoError("'" + dir.string() + "' is not a dataset directory");
    Dataset ds;
    try {
        ds.classes = std::stoul(m.header.at("classes"));
    } catch (const std::exception&) {
        throw IoError("malformed manifest: missing class count");
    }
    auto load = [&](const std::string& rel) {
        const fs::path p = dir / rel;
        if (!fs::exists(p)) throw IoError("missing file '" + p.string() + "'");
        return codec::read_file(p.string());
    };
    for (const auto& [name, views] : m.scenes) {
        Scene s;
        s.name = name;
        s.cloud = codec::decode_cloud(load(name + "/cloud.pdpc"));
        s.partition = codec::decode_partition(load(name + "/partition.pdsv"));
        if (s.partition.num_points() != s.cloud.size())
            throw IoError("partition of '" + name + "' does not match its cloud");
        for (std::size_t v = 0; v < views; ++v) {
            s.cameras.push_back(codec::decode_camera(load(name + "/camera_" + std::to_string(v) + ".pdcm")));
            s.views.push_back(codec::decode_feature_map(load(name + "/features_" + std::to_string(v) + ".pdfm")));
        }
        ds.scenes.push_back(std::move(s));
    }
    if (ds.scenes.empty()) throw IoError("dataset '" + dir.string() + "' lists no scenes");
    return ds;
}

inline RunConfig load_config_echo(const fs::path& dir) {
    RunConfig cfg;
    const fs::path p = dir / "config.cfg";
    if (fs::exists(p)) cfg.merge_text(codec::read_file(p.string()));
    return cfg;
}

} // namespace pointdc
