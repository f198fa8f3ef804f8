#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace fusionsearch {

// Dense row-major matrix of doubles. On-disk feature files hold f32; all
// in-memory computation happens at 64-bit precision.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), values(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

    double* row(std::size_t r) { return values.data() + r * cols; }
    const double* row(std::size_t r) const { return values.data() + r * cols; }

    bool all_finite() const {
        for (double v : values) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool operator==(const Matrix& other) const = default;
};

// Copies the given rows (in order) into a new matrix.
inline Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& row_indices) {
    Matrix out(row_indices.size(), m.cols);
    for (std::size_t i = 0; i < row_indices.size(); ++i) {
        const double* src = m.row(row_indices[i]);
        double* dst = out.row(i);
        for (std::size_t j = 0; j < m.cols; ++j) dst[j] = src[j];
    }
    return out;
}

}  // namespace fusionsearch
