#pragma once

#include <cmath>

#include "common.hpp"
#include "matrix.hpp"

namespace altmin {

// Standard Adam with bias correction. One state per parameter matrix.
struct AdamState {
    Matrix m, v;
    long t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    AdamState() = default;
    AdamState(size_t rows, size_t cols) : m(rows, cols), v(rows, cols) {}

    void apply(Matrix& w, const Matrix& grad, double lr) {
        if (grad.rows() != m.rows() || grad.cols() != m.cols())
            throw DimensionError("adam: gradient is " + shape_str(grad.rows(), grad.cols()) +
                                 ", state is " + shape_str(m.rows(), m.cols()));
        ++t;
        double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (size_t i = 0; i < w.size(); ++i) {
            double g = grad.data()[i];
            double mi = beta1 * m.data()[i] + (1.0 - beta1) * g;
            double vi = beta2 * v.data()[i] + (1.0 - beta2) * g * g;
            m.data()[i] = mi;
            v.data()[i] = vi;
            w.data()[i] -= lr * (mi / c1) / (std::sqrt(vi / c2) + eps);
        }
    }
};

}  // namespace altmin
