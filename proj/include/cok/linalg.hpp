#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "cok/errors.hpp"

namespace cok {

using Vec = std::vector<double>;

// Small dense row-major matrix; all we need for d x d relation projections.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }

    bool operator==(const Mat& other) const = default;
};

inline double dot(const Vec& x, const Vec& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm2_sq(const Vec& x) { return dot(x, x); }

inline double norm2(const Vec& x) { return std::sqrt(norm2_sq(x)); }

// y += a * x
inline void add_scaled(Vec& y, const Vec& x, double a) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline void scale(Vec& x, double a) {
    for (double& v : x) v *= a;
}

inline Vec sub(const Vec& x, const Vec& y) {
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
    return out;
}

// Row vector times matrix: out_j = sum_i x_i * M(i, j).
inline Vec row_times_mat(const Vec& x, const Mat& m) {
    if (static_cast<int>(x.size()) != m.rows) {
        throw ContractViolation("row_times_mat: vector length " +
                                std::to_string(x.size()) + " vs matrix rows " +
                                std::to_string(m.rows));
    }
    Vec out(static_cast<std::size_t>(m.cols), 0.0);
    for (int i = 0; i < m.rows; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        for (int j = 0; j < m.cols; ++j) out[j] += xi * m(i, j);
    }
    return out;
}

// Projects onto the unit ball: vectors longer than 1 are rescaled to norm 1.
inline void project_unit_ball(Vec& x) {
    const double n = norm2(x);
    if (n > 1.0) scale(x, 1.0 / n);
}

}  // namespace cok
