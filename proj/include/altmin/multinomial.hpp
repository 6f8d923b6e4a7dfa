#pragma once

// Multinomial (softmax cross-entropy) loss with analytic gradients, plus the
// Lipschitz bound used to validate step sizes for the sparse-coding-style
// subproblem 1/2 ||D c - x||^2 + multinomial loss.
//
// Class weights are stored column-wise: W is (x.len x m) and the logit of
// class i is w_i^T x with w_i the i-th column of W.

#include <cmath>

#include "common.hpp"
#include "matrix.hpp"

namespace altmin {

inline void check_one_hot(const Vector& y) {
    size_t ones = 0;
    for (size_t i = 0; i < y.len(); ++i) {
        if (y[i] == 1.0) {
            ++ones;
        } else if (y[i] != 0.0) {
            throw DimensionError("label vector is not one-hot: entry " + std::to_string(i) +
                                 " is neither 0 nor 1");
        }
    }
    if (ones != 1)
        throw DimensionError("label vector is not one-hot: " + std::to_string(ones) +
                             " entries equal 1");
}

// Softmax of a logit vector, stabilized by max subtraction.
inline Vector softmax(const Vector& z) {
    double zmax = z[0];
    for (size_t i = 1; i < z.len(); ++i) zmax = std::max(zmax, z[i]);
    Vector p(z.len());
    double sum = 0.0;
    for (size_t i = 0; i < z.len(); ++i) {
        p[i] = std::exp(z[i] - zmax);
        sum += p[i];
    }
    for (size_t i = 0; i < z.len(); ++i) p[i] /= sum;
    return p;
}

// log sum_i exp(z_i), stabilized.
inline double log_sum_exp(const Vector& z) {
    double zmax = z[0];
    for (size_t i = 1; i < z.len(); ++i) zmax = std::max(zmax, z[i]);
    double sum = 0.0;
    for (size_t i = 0; i < z.len(); ++i) sum += std::exp(z[i] - zmax);
    return zmax + std::log(sum);
}

inline void check_multinomial_shapes(const Vector& y, const Vector& x, const Matrix& w) {
    check_one_hot(y);
    if (w.rows() != x.len() || w.cols() != y.len())
        throw DimensionError("multinomial: W is " + shape_str(w.rows(), w.cols()) +
                             ", expected " + shape_str(x.len(), y.len()));
}

// -sum_i y_i w_i^T x + log sum_l exp(w_l^T x)
inline double multinomial_loss(const Vector& y, const Vector& x, const Matrix& w) {
    check_multinomial_shapes(y, x, w);
    Vector z = matvec_t(w, x);
    double picked = 0.0;
    for (size_t i = 0; i < y.len(); ++i)
        if (y[i] == 1.0) picked = z[i];
    return log_sum_exp(z) - picked;
}

struct MultinomialGrads {
    Vector grad_x;
    Matrix grad_w;
};

// grad_x = W (p - y), grad_W = x (p - y)^T with p = softmax(W^T x).
inline MultinomialGrads multinomial_grads(const Vector& y, const Vector& x, const Matrix& w) {
    check_multinomial_shapes(y, x, w);
    Vector p = softmax(matvec_t(w, x));
    Vector r(p.len());
    for (size_t i = 0; i < p.len(); ++i) r[i] = p[i] - y[i];
    MultinomialGrads g;
    g.grad_x = matvec(w, r);
    g.grad_w = Matrix(x.len(), y.len());
    for (size_t i = 0; i < x.len(); ++i)
        for (size_t j = 0; j < y.len(); ++j) g.grad_w(i, j) = x[i] * r[j];
    return g;
}

// Upper bound on the largest Hessian eigenvalue of
//   f(c) = 1/2 ||D c - x||^2 - sum_i y_i w_i^T c + log(1 + sum_l exp(w_l^T c))
// over all c, with W holding the k-1 non-reference class columns:
//   lambda_max(D^T D) + k * lambda_max(W W^T), k = W.cols + 1.
inline double lipschitz_bound(const Matrix& d, const Matrix& w) {
    if (d.cols() != w.rows())
        throw DimensionError("lipschitz_bound: D is " + shape_str(d.rows(), d.cols()) +
                             " but W is " + shape_str(w.rows(), w.cols()));
    double k = static_cast<double>(w.cols()) + 1.0;
    return lambda_max(matmul_tn(d, d)) + k * lambda_max(matmul_nt(w, w));
}

}  // namespace altmin
