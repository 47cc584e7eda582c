#pragma once

// Hungarian-matched clustering metrics and the frozen-feature linear probe.

#include "pointdc/cluster.hpp"
#include "pointdc/core.hpp"
#include "pointdc/featnet.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace pointdc {

// counts(pred, gt), square C x C.
struct ConfusionMatrix {
    std::size_t classes = 0;
    std::vector<long> counts;

    explicit ConfusionMatrix(std::size_t c = 0) : classes(c), counts(c * c, 0) {}
    long& at(std::size_t pred, std::size_t gt) { return counts[pred * classes + gt]; }
    long at(std::size_t pred, std::size_t gt) const { return counts[pred * classes + gt]; }
    long total() const { return std::accumulate(counts.begin(), counts.end(), 0L); }
};

inline ConfusionMatrix confusion_matrix(const std::vector<int>& pred, const std::vector<int>& gt, std::size_t classes) {
    require(pred.size() == gt.size(), "confusion_matrix: label vectors differ in length");
    ConfusionMatrix m(classes);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        require(pred[i] >= 0 && std::size_t(pred[i]) < classes && gt[i] >= 0 && std::size_t(gt[i]) < classes,
                "confusion_matrix: label out of range");
        ++m.at(std::size_t(pred[i]), std::size_t(gt[i]));
    }
    return m;
}

// Maximum-weight perfect matching (pred -> gt) by the O(C^3) shortest
// augmenting path method on costs -count.
inline std::vector<int> hungarian_match(const ConfusionMatrix& conf) {
    const std::size_t n = conf.classes;
    require(n > 0 && conf.counts.size() == n * n, "hungarian_match: confusion matrix must be square and non-empty");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    auto cost = [&](std::size_t i, std::size_t j) { return -double(conf.at(i - 1, j - 1)); };
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> perm(n, -1);
    for (std::size_t j = 1; j <= n; ++j) perm[p[j] - 1] = int(j - 1);
    return perm;
}

inline long matched_total(const ConfusionMatrix& conf, const std::vector<int>& perm) {
    long s = 0;
    for (std::size_t i = 0; i < conf.classes; ++i) s += conf.at(i, std::size_t(perm[i]));
    return s;
}

struct ClassStats {
    long tp = 0, fp = 0, fn = 0;
    bool present() const { return tp + fp + fn > 0; }
    double iou() const { return present() ? double(tp) / double(tp + fp + fn) : 0.0; }
};

struct MetricsReport {
    std::size_t points = 0;
    std::vector<int> permutation;
    std::vector<ClassStats> per_class;
    double miou = 0.0;
    double accuracy = 0.0;
    double mean_class_accuracy = 0.0;

    // Stable `key = value` text plus a per-class table.
    std::string to_text() const {
        auto fixed = [](double x) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.6f", x);
            return std::string(buf);
        };
        std::ostringstream os;
        os << "format = pointdc-metrics\n";
        os << "version = 1\n";
        os << "points = " << points << "\n";
        os << "classes = " << per_class.size() << "\n";
        os << "miou = " << fixed(miou) << "\n";
        os << "accuracy = " << fixed(accuracy) << "\n";
        os << "mean_class_accuracy = " << fixed(mean_class_accuracy) << "\n";
        os << "permutation =";
        for (int p : permutation) os << ' ' << p;
        os << "\n\n";
        os << "# class iou tp fp fn\n";
        for (std::size_t c = 0; c < per_class.size(); ++c) {
            const ClassStats& s = per_class[c];
            os << c << ' ' << (s.present() ? fixed(s.iou()) : std::string("n/a")) << ' ' << s.tp << ' ' << s.fp << ' '
               << s.fn << "\n";
        }
        return os.str();
    }
};

// Relabels predictions through `permutation` (pred -> gt) and scores them.
inline MetricsReport segmentation_metrics(const std::vector<int>& pred, const std::vector<int>& gt,
                                          const std::vector<int>& permutation) {
    require(pred.size() == gt.size(), "segmentation_metrics: label vectors differ in length");
    const std::size_t classes = permutation.size();
    MetricsReport rep;
    rep.points = pred.size();
    rep.permutation = permutation;
    rep.per_class.assign(classes, {});
    long correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        require(pred[i] >= 0 && std::size_t(pred[i]) < classes && gt[i] >= 0 && std::size_t(gt[i]) < classes,
                "segmentation_metrics: label out of range");
        const auto mapped = std::size_t(permutation[std::size_t(pred[i])]);
        const auto truth = std::size_t(gt[i]);
        if (mapped == truth) {
            ++rep.per_class[truth].tp;
            ++correct;
        } else {
            ++rep.per_class[mapped].fp;
            ++rep.per_class[truth].fn;
        }
    }
    double iou_sum = 0.0, acc_sum = 0.0;
    std::size_t present = 0, with_gt = 0;
    for (const ClassStats& s : rep.per_class) {
        if (s.present()) {
            iou_sum += s.iou();
            ++present;
        }
        if (s.tp + s.fn > 0) {
            acc_sum += double(s.tp) / double(s.tp + s.fn);
            ++with_gt;
        }
    }
    rep.miou = present ? iou_sum / double(present) : 0.0;
    rep.mean_class_accuracy = with_gt ? acc_sum / double(with_gt) : 0.0;
    rep.accuracy = pred.empty() ? 0.0 : double(correct) / double(pred.size());
    return rep;
}

// Unsupervised protocol: Hungarian-align cluster ids to classes, then score.
inline MetricsReport evaluate_clustering(const std::vector<int>& pred, const std::vector<int>& gt, std::size_t classes) {
    const ConfusionMatrix conf = confusion_matrix(pred, gt, classes);
    return segmentation_metrics(pred, gt, hungarian_match(conf));
}

struct ProbeConfig {
    std::size_t classes = 0; // 0: infer from labels
    std::size_t epochs = 50;
    std::size_t batch = 256;
    double lr = 1e-2;
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
};

struct ProbeResult {
    ParamSet head;
    MetricsReport report; // on held-out points, identity matching
};

inline ProbeResult linear_probe(const Matrix& features, const std::vector<int>& gt, const ProbeConfig& cfg) {
    require(std::size_t(features.rows()) == gt.size(), "linear_probe: feature rows do not match labels");
    require(!gt.empty(), "linear_probe: no points");
    const int max_label = *std::max_element(gt.begin(), gt.end());
    require(*std::min_element(gt.begin(), gt.end()) >= 0, "linear_probe: negative label");
    const std::size_t classes = cfg.classes ? cfg.classes : std::size_t(max_label) + 1;
    require(std::size_t(max_label) < classes, "linear_probe: label out of range");
    require(std::adjacent_find(gt.begin(), gt.end(), std::not_equal_to<>()) != gt.end(),
            "linear_probe: single-class ground truth is degenerate");

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(gt.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = std::size_t(cfg.train_fraction * double(order.size()));
    std::vector<std::size_t> train(order.begin(), order.begin() + long(n_train));
    std::vector<std::size_t> test(order.begin() + long(n_train), order.end());
    require(!test.empty(), "linear_probe: held-out split is empty");

    ProbeResult res;
    res.head = make_linear_head(std::size_t(features.cols()), classes, cfg.seed + 1);
    AdamState state = AdamState::for_params(res.head);
    const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};
    const std::size_t batch = std::max<std::size_t>(cfg.batch, 1);
    for (std::size_t epoch = 0; epoch < cfg.epochs && !train.empty(); ++epoch) {
        std::shuffle(train.begin(), train.end(), rng);
        for (std::size_t b = 0; b < train.size(); b += batch) {
            const std::size_t e = std::min(train.size(), b + batch);
            Matrix x(Eigen::Index(e - b), features.cols());
            std::vector<int> y(e - b);
            for (std::size_t i = b; i < e; ++i) {
                x.row(Eigen::Index(i - b)) = features.row(Eigen::Index(train[i]));
                y[i - b] = gt[train[i]];
            }
            Matrix dlogits = softmax_rows(linear_forward(res.head, x));
            for (std::size_t i = 0; i < y.size(); ++i) dlogits(Eigen::Index(i), y[i]) -= 1.0;
            dlogits /= double(y.size());
            adam_step(res.head, linear_backward(res.head, x, dlogits, nullptr), state, adam);
        }
    }

    Matrix xt(Eigen::Index(test.size()), features.cols());
    std::vector<int> yt(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        xt.row(Eigen::Index(i)) = features.row(Eigen::Index(test[i]));
        yt[i] = gt[test[i]];
    }
    const std::vector<int> pred = harden(linear_forward(res.head, xt));
    std::vector<int> identity(classes);
    std::iota(identity.begin(), identity.end(), 0);
    res.report = segmentation_metrics(pred, yt, identity);
    return res;
}

} // namespace pointdc
