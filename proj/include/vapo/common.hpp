#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vapo {

/// A point in data space. Dimension is a runtime property.
using Vec = std::vector<double>;
using ConstVecView = std::span<const double>;

/// Invalid argument values (out-of-range times, non-positive scales, ...).
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Mismatched dimensions between model, data and query points.
class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or unreadable files.
class FormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values appearing during training or integration.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Dense row-major N x D matrix of points.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t n, std::size_t d) : rows(n), cols(d), data(n * d, 0.0) {}

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    static Matrix from_rows(const std::vector<Vec>& pts) {
        Matrix m;
        if (pts.empty()) return m;
        m = Matrix(pts.size(), pts.front().size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (pts[i].size() != m.cols) throw DimensionError("Matrix::from_rows: ragged rows");
            std::copy(pts[i].begin(), pts[i].end(), m.row(i).begin());
        }
        return m;
    }

    std::vector<Vec> to_rows() const {
        std::vector<Vec> out;
        out.reserve(rows);
        for (std::size_t i = 0; i < rows; ++i) out.emplace_back(row(i).begin(), row(i).end());
        return out;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

namespace detail {

inline void require_same_dim(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                             " vs " + std::to_string(b) + ")");
    }
}

inline bool all_finite(ConstVecView v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

inline double squared_norm(ConstVecView v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

}  // namespace detail
}  // namespace vapo
