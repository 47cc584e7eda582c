#pragma once

#include "pointdc/core.hpp"
#include "pointdc/geometry.hpp"
#include "pointdc/supervoxel.hpp"

#include <string>
#include <vector>

namespace pointdc {

struct Scene {
    std::string name;
    PointCloud cloud;
    std::vector<CameraModel> cameras;
    std::vector<FeatureMap> views; // one per camera
    SuperVoxelPartition partition;
};

struct Dataset {
    std::size_t classes = 0;
    std::vector<Scene> scenes;

    std::size_t total_points() const {
        std::size_t n = 0;
        for (const Scene& s : scenes) n += s.cloud.size();
        return n;
    }

    // Ground-truth labels of every scene, concatenated in scene order.
    std::vector<int> all_labels() const {
        std::vector<int> out;
        for (const Scene& s : scenes) {
            require(s.cloud.labels.has_value(), "dataset: scene '" + s.name + "' has no labels");
            out.insert(out.end(), s.cloud.labels->begin(), s.cloud.labels->end());
        }
        return out;
    }
};

} // namespace pointdc
