#pragma once

// K-means over super-voxel features, cosine soft assignment to centroids,
// super-voxel label pooling and hardening.

#include "pointdc/core.hpp"
#include "pointdc/supervoxel.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace pointdc {

struct KMeansOptions {
    std::size_t clusters = 5;
    std::size_t max_iters = 100;
    double tol = 1e-9;
    std::uint64_t seed = 0;
    bool sphere = true; // renormalise centroids to the unit sphere every update
};

struct KMeansResult {
    Matrix centroids;            // C x D
    std::vector<int> assignment; // per row
    std::vector<double> objective;
    std::size_t iterations = 0;
};

namespace detail {
inline double assign_nearest(const Matrix& x, const Matrix& centroids, std::vector<int>& assignment,
                             std::vector<double>& dist) {
    double total = 0.0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
            const double d = (x.row(r) - centroids.row(c)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = int(c);
            }
        }
        assignment[std::size_t(r)] = best;
        dist[std::size_t(r)] = best_d;
        total += best_d;
    }
    return total;
}

inline void project_centroid(Eigen::Ref<Eigen::RowVectorXd> row, bool sphere) {
    if (!sphere) return;
    const double n = row.norm();
    if (n > 0.0) row /= n;
}

inline Matrix kmeanspp_init(const Matrix& x, std::size_t c, Rng& rng, bool sphere) {
    const Eigen::Index r = x.rows();
    Matrix cent(Eigen::Index(c), x.cols());
    std::uniform_int_distribution<Eigen::Index> first(0, r - 1);
    cent.row(0) = x.row(first(rng));
    project_centroid(cent.row(0), sphere);
    std::vector<double> d2(std::size_t(r), std::numeric_limits<double>::infinity());
    for (std::size_t k = 1; k < c; ++k) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < r; ++i) {
            d2[std::size_t(i)] = std::min(d2[std::size_t(i)], (x.row(i) - cent.row(Eigen::Index(k - 1))).squaredNorm());
            total += d2[std::size_t(i)];
        }
        Eigen::Index pick = 0;
        if (total > 0.0) {
            double target = std::uniform_real_distribution<double>(0.0, total)(rng);
            pick = r - 1;
            for (Eigen::Index i = 0; i < r; ++i) {
                target -= d2[std::size_t(i)];
                if (target < 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = Eigen::Index(k) % r;
        }
        cent.row(Eigen::Index(k)) = x.row(pick);
        project_centroid(cent.row(Eigen::Index(k)), sphere);
    }
    return cent;
}
} // namespace detail

// Lloyd iterations; the objective is recorded after every assignment step.
inline KMeansResult kmeans_fit(const Matrix& features, const KMeansOptions& opt,
                               const std::optional<Matrix>& warm_start = std::nullopt) {
    const std::size_t rows = std::size_t(features.rows());
    require(opt.clusters >= 1, "kmeans_fit: need at least one cluster");
    require(rows >= opt.clusters, "kmeans_fit: fewer rows than clusters");
    require(features.allFinite(), "kmeans_fit: non-finite features");

    KMeansResult res;
    Rng rng(opt.seed);
    if (warm_start) {
        require(std::size_t(warm_start->rows()) == opt.clusters && warm_start->cols() == features.cols(),
                "kmeans_fit: warm-start centroids have the wrong shape");
        res.centroids = *warm_start;
        for (Eigen::Index c = 0; c < res.centroids.rows(); ++c) detail::project_centroid(res.centroids.row(c), opt.sphere);
    } else {
        res.centroids = detail::kmeanspp_init(features, opt.clusters, rng, opt.sphere);
    }

    res.assignment.assign(rows, -1);
    std::vector<int> previous;
    std::vector<double> dist(rows);
    for (std::size_t it = 0; it < std::max<std::size_t>(opt.max_iters, 1); ++it) {
        previous = res.assignment;
        const double obj = detail::assign_nearest(features, res.centroids, res.assignment, dist);
        res.objective.push_back(obj);
        res.iterations = it + 1;
        if (res.assignment == previous) break;
        if (res.objective.size() >= 2 && res.objective[res.objective.size() - 2] - obj < opt.tol) break;
        if (it + 1 == opt.max_iters) break;

        Matrix sums = Matrix::Zero(res.centroids.rows(), features.cols());
        std::vector<std::size_t> counts(opt.clusters, 0);
        for (std::size_t i = 0; i < rows; ++i) {
            sums.row(res.assignment[i]) += features.row(Eigen::Index(i));
            ++counts[std::size_t(res.assignment[i])];
        }
        std::vector<bool> taken(rows, false);
        for (std::size_t c = 0; c < opt.clusters; ++c) {
            if (counts[c] > 0) {
                res.centroids.row(Eigen::Index(c)) = sums.row(Eigen::Index(c)) / double(counts[c]);
                detail::project_centroid(res.centroids.row(Eigen::Index(c)), opt.sphere);
                continue;
            }
            // Empty cluster: re-seed at the row farthest from its current centroid.
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < rows; ++i)
                if (!taken[i] && dist[i] > far_d) {
                    far_d = dist[i];
                    far = i;
                }
            taken[far] = true;
            res.centroids.row(Eigen::Index(c)) = features.row(Eigen::Index(far));
            detail::project_centroid(res.centroids.row(Eigen::Index(c)), opt.sphere);
        }
    }
    return res;
}

// Nearest-centroid assignment under the same metric kmeans_fit uses.
inline std::vector<int> nearest_centroid(const Matrix& features, const Matrix& centroids) {
    std::vector<int> a(std::size_t(features.rows()));
    std::vector<double> d(a.size());
    detail::assign_nearest(features, centroids, a, d);
    return a;
}

struct SoftAssignment {
    Matrix probs;                  // rows x C, each row on the simplex
    std::size_t zero_rows = 0;     // feature rows with zero norm (given uniform rows)
};

inline Matrix cosine_similarity(const Matrix& features, const Matrix& centroids) {
    Matrix f = features, c = centroids;
    normalize_rows(f);
    normalize_rows(c);
    return f * c.transpose();
}

// Row-wise softmax with max subtraction.
inline Matrix softmax_rows(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double m = logits.row(r).maxCoeff();
        p.row(r) = (logits.row(r).array() - m).exp();
        p.row(r) /= p.row(r).sum();
    }
    return p;
}

inline SoftAssignment soft_assign(const Matrix& features, const Matrix& centroids, double tau) {
    require(tau > 0.0, "soft_assign: temperature must be positive");
    require(features.cols() == centroids.cols(), "soft_assign: feature dimension does not match centroids");
    SoftAssignment out;
    out.probs = softmax_rows(cosine_similarity(features, centroids) / tau);
    const double uniform = 1.0 / double(centroids.rows());
    for (Eigen::Index r = 0; r < features.rows(); ++r)
        if (features.row(r).squaredNorm() == 0.0) {
            out.probs.row(r).setConstant(uniform);
            ++out.zero_rows;
        }
    return out;
}

inline Matrix pool_soft_labels(const Matrix& point_labels, const SuperVoxelPartition& part) {
    return pool_avg(point_labels, part);
}

// argmax per row; ties go to the lowest class index.
inline std::vector<int> harden(const Matrix& soft) {
    std::vector<int> out(std::size_t(soft.rows()), 0);
    for (Eigen::Index r = 0; r < soft.rows(); ++r) {
        int best = 0;
        for (Eigen::Index c = 1; c < soft.cols(); ++c)
            if (soft(r, c) > soft(r, best)) best = int(c);
        out[std::size_t(r)] = best;
    }
    return out;
}

inline Matrix one_hot(const std::vector<int>& labels, std::size_t classes) {
    Matrix m = Matrix::Zero(Eigen::Index(labels.size()), Eigen::Index(classes));
    for (std::size_t i = 0; i < labels.size(); ++i) m(Eigen::Index(i), labels[i]) = 1.0;
    return m;
}

} // namespace pointdc
