#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fleetcast/errors.hpp"

namespace fleetcast {

/// Dense row-major matrix of doubles. data.size() == rows * cols always.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<const double> row(std::size_t i) const {
        return {data.data() + i * cols, cols};
    }
    std::span<double> row(std::size_t i) {
        return {data.data() + i * cols, cols};
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

/// out = M * x  (out must not alias x).
inline void matvec(const Matrix& m, std::span<const double> x, std::span<double> out) {
    if (x.size() != m.cols || out.size() != m.rows)
        throw ShapeError("matvec: dimension mismatch");
    const double* w = m.data.data();
    for (std::size_t i = 0; i < m.rows; ++i) {
        double acc = 0.0;
        const double* wr = w + i * m.cols;
        for (std::size_t j = 0; j < m.cols; ++j) acc += wr[j] * x[j];
        out[i] = acc;
    }
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) {
        const double a = std::fabs(x);
        if (a > m) m = a;
    }
    return m;
}

}  // namespace fleetcast
