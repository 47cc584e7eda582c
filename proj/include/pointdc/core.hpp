#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace pointdc {

// Row-major dense matrices: one row per point / super-voxel / cluster.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

using Rng = std::mt19937_64;

// Thrown when an operation receives arguments that violate its preconditions.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Thrown for non-finite values surfacing during optimization.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidInput(msg);
}

struct PointCloud {
    std::vector<Vec3> xyz;
    std::vector<Vec3> rgb;                // each channel in [0, 1]
    std::optional<std::vector<int>> labels;

    std::size_t size() const { return xyz.size(); }
    bool empty() const { return xyz.empty(); }

    bool operator==(const PointCloud&) const = default;
};

// L2-normalizes every row in place; zero rows stay zero.
inline void normalize_rows(Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double n = m.row(r).norm();
        if (n > 0.0) m.row(r) /= n;
    }
}

// Reverse-mode of row normalization: y = x / |x|, given dL/dy returns dL/dx.
inline Matrix normalize_rows_backward(const Matrix& x, const Matrix& y, const Matrix& dy) {
    Matrix dx = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double n = x.row(r).norm();
        if (n == 0.0) continue;
        const double proj = y.row(r).dot(dy.row(r));
        dx.row(r) = (dy.row(r) - proj * y.row(r)) / n;
    }
    return dx;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

} // namespace pointdc
