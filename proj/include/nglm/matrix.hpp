#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace nglm {

/// Dense row-major matrix of doubles. Small and deliberately plain; the
/// hot loops in the LSTM pass index into data() directly.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double* row(std::size_t r) { return data.data() + r * cols; }

    std::size_t size() const { return data.size(); }

    void fill(double v) { data.assign(rows * cols, v); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    Matrix& operator+=(const Matrix& o) {
        if (!same_shape(o)) throw std::invalid_argument("matrix shape mismatch");
        for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
        return *this;
    }

    bool operator==(const Matrix& o) const {
        return rows == o.rows && cols == o.cols && data == o.data;
    }
};

/// y += A x  (A: m×n, x: n, y: m)
inline void matvec_acc(const Matrix& a, const double* x, double* y) {
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double* row = a.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < a.cols; ++c) acc += row[c] * x[c];
        y[r] += acc;
    }
}

/// y += A^T x  (A: m×n, x: m, y: n)
inline void matvec_t_acc(const Matrix& a, const double* x, double* y) {
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double xr = x[r];
        if (xr == 0.0) continue;
        const double* row = a.row(r);
        for (std::size_t c = 0; c < a.cols; ++c) y[c] += xr * row[c];
    }
}

/// A += x y^T  (x: m, y: n, A: m×n)
inline void outer_acc(const double* x, const double* y, Matrix& a) {
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double xr = x[r];
        if (xr == 0.0) continue;
        double* row = a.row(r);
        for (std::size_t c = 0; c < a.cols; ++c) row[c] += xr * y[c];
    }
}

}  // namespace nglm
