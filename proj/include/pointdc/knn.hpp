#pragma once

// Exact k-nearest-neighbour search over a uniform bucket grid.

#include "pointdc/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <utility>
#include <vector>

namespace pointdc {

struct KnnGraph {
    std::size_t k = 0;
    std::vector<std::size_t> neighbors; // row-major n x k, sorted by (distance, index)

    std::size_t size() const { return k == 0 ? 0 : neighbors.size() / k; }
    const std::size_t* row(std::size_t i) const { return neighbors.data() + i * k; }
};

// Neighbours exclude the query point itself, except for a single-point cloud
// where the point is its own (only) neighbour.
inline KnnGraph knn_graph(const std::vector<Vec3>& pts, std::size_t k) {
    const std::size_t n = pts.size();
    require(n > 0, "knn_graph: empty point set");
    require(k >= 1, "knn_graph: k must be >= 1");
    KnnGraph g;
    if (n == 1) {
        g.k = 1;
        g.neighbors = {0};
        return g;
    }
    g.k = std::min(k, n - 1);
    g.neighbors.resize(n * g.k);

    Vec3 lo = pts[0], hi = pts[0];
    for (const Vec3& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double extent = std::max((hi - lo).maxCoeff(), 1e-12);
    const int cells = std::clamp(static_cast<int>(std::cbrt(double(n) / double(g.k))), 1, 64);
    const double cell = extent / cells * (1.0 + 1e-9);

    std::array<int, 3> dims{};
    for (int a = 0; a < 3; ++a) dims[a] = std::max(1, static_cast<int>((hi[a] - lo[a]) / cell) + 1);
    auto coord = [&](const Vec3& p) {
        std::array<int, 3> c{};
        for (int a = 0; a < 3; ++a) c[a] = std::clamp(static_cast<int>((p[a] - lo[a]) / cell), 0, dims[a] - 1);
        return c;
    };
    auto flat = [&](int x, int y, int z) { return (std::size_t(z) * dims[1] + y) * dims[0] + x; };

    // Counting-sort points into cells; indices stay ascending within a cell.
    const std::size_t ncell = std::size_t(dims[0]) * dims[1] * dims[2];
    std::vector<std::size_t> start(ncell + 1, 0), order(n);
    std::vector<std::size_t> cell_of(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = coord(pts[i]);
        cell_of[i] = flat(c[0], c[1], c[2]);
        ++start[cell_of[i] + 1];
    }
    for (std::size_t c = 0; c < ncell; ++c) start[c + 1] += start[c];
    {
        std::vector<std::size_t> fill(start.begin(), start.end() - 1);
        for (std::size_t i = 0; i < n; ++i) order[fill[cell_of[i]]++] = i;
    }

    std::vector<std::pair<double, std::size_t>> cand;
    const int max_ring = std::max({dims[0], dims[1], dims[2]});
    for (std::size_t i = 0; i < n; ++i) {
        cand.clear();
        const auto c = coord(pts[i]);
        for (int r = 0; r <= max_ring; ++r) {
            for (int z = c[2] - r; z <= c[2] + r; ++z) {
                if (z < 0 || z >= dims[2]) continue;
                for (int y = c[1] - r; y <= c[1] + r; ++y) {
                    if (y < 0 || y >= dims[1]) continue;
                    for (int x = c[0] - r; x <= c[0] + r; ++x) {
                        if (x < 0 || x >= dims[0]) continue;
                        const int ring = std::max({std::abs(x - c[0]), std::abs(y - c[1]), std::abs(z - c[2])});
                        if (ring != r) continue;
                        const std::size_t f = flat(x, y, z);
                        for (std::size_t s = start[f]; s < start[f + 1]; ++s) {
                            const std::size_t j = order[s];
                            if (j == i) continue;
                            cand.emplace_back((pts[j] - pts[i]).squaredNorm(), j);
                        }
                    }
                }
            }
            if (cand.size() >= g.k) {
                std::nth_element(cand.begin(), cand.begin() + long(g.k) - 1, cand.end());
                const double kth = cand[g.k - 1].first;
                const double reach = r * cell;
                if (kth < reach * reach) break;
            }
        }
        std::partial_sort(cand.begin(), cand.begin() + long(g.k), cand.end());
        for (std::size_t m = 0; m < g.k; ++m) g.neighbors[i * g.k + m] = cand[m].second;
    }
    return g;
}

} // namespace pointdc
