#pragma once

// Dense double-precision matrix/vector types and the handful of products the
// trainers need. Conventions used throughout the library:
//   - Matrix storage is row-major.
//   - Sample batches are row-wise: batch matrices are (n_samples x features).
//   - Weight matrices map layer l-1 to layer l as (m_l x m_{l-1}), so a batch
//     propagates as A_in * W^T.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <vector>

#include "common.hpp"

namespace altmin {

class Vector {
public:
    Vector() = default;
    explicit Vector(size_t len, double fill = 0.0) : data_(len, fill) {}
    Vector(std::initializer_list<double> v) : data_(v) {}

    size_t len() const { return data_.size(); }
    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }
    bool operator==(const Vector&) const = default;

private:
    std::vector<double> data_;
};

class Matrix {
public:
    Matrix() = default;
    Matrix(size_t rows, size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(size_t n) {
        Matrix m(n, n);
        for (size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    size_t size() const { return data_.size(); }

    double& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
    double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }

    double* row(size_t r) { return data_.data() + r * cols_; }
    const double* row(size_t r) const { return data_.data() + r * cols_; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    Vector row_vec(size_t r) const {
        Vector v(cols_);
        std::copy(row(r), row(r) + cols_, v.data());
        return v;
    }

    void set_row(size_t r, const Vector& v) {
        std::copy(v.data(), v.data() + cols_, row(r));
    }

    bool operator==(const Matrix&) const = default;

private:
    size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

inline std::string shape_str(size_t r, size_t c) {
    std::ostringstream os;
    os << r << "x" << c;
    return os.str();
}

inline bool all_finite(const double* p, size_t n) {
    for (size_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

inline bool all_finite(const Matrix& m) { return all_finite(m.data(), m.size()); }
inline bool all_finite(const Vector& v) { return all_finite(v.data(), v.len()); }

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.rows(), a.cols()) +
                             " * " + shape_str(b.rows(), b.cols()));
    Matrix out(a.rows(), b.cols());
    for (size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i);
        double* oi = out.row(i);
        for (size_t k = 0; k < a.cols(); ++k) {
            double aik = ai[k];
            if (aik == 0.0) continue;
            const double* bk = b.row(k);
            for (size_t j = 0; j < b.cols(); ++j) oi[j] += aik * bk[j];
        }
    }
    return out;
}

// a * b^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw DimensionError("matmul_nt: inner dimensions disagree, " + shape_str(a.rows(), a.cols()) +
                             " * " + shape_str(b.cols(), b.rows()));
    Matrix out(a.rows(), b.rows());
    for (size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i);
        double* oi = out.row(i);
        for (size_t j = 0; j < b.rows(); ++j) {
            const double* bj = b.row(j);
            double s = 0.0;
            for (size_t k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
            oi[j] = s;
        }
    }
    return out;
}

// a^T * b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw DimensionError("matmul_tn: inner dimensions disagree, " + shape_str(a.cols(), a.rows()) +
                             " * " + shape_str(b.rows(), b.cols()));
    Matrix out(a.cols(), b.cols());
    for (size_t k = 0; k < a.rows(); ++k) {
        const double* ak = a.row(k);
        const double* bk = b.row(k);
        for (size_t i = 0; i < a.cols(); ++i) {
            double aki = ak[i];
            if (aki == 0.0) continue;
            double* oi = out.row(i);
            for (size_t j = 0; j < b.cols(); ++j) oi[j] += aki * bk[j];
        }
    }
    return out;
}

inline Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (size_t i = 0; i < a.rows(); ++i)
        for (size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

// y = A x
inline Vector matvec(const Matrix& a, const Vector& x) {
    if (a.cols() != x.len())
        throw DimensionError("matvec: " + shape_str(a.rows(), a.cols()) + " * vector of length " +
                             std::to_string(x.len()));
    Vector y(a.rows());
    for (size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i);
        double s = 0.0;
        for (size_t j = 0; j < a.cols(); ++j) s += ai[j] * x[j];
        y[i] = s;
    }
    return y;
}

// y = A^T x
inline Vector matvec_t(const Matrix& a, const Vector& x) {
    if (a.rows() != x.len())
        throw DimensionError("matvec_t: " + shape_str(a.cols(), a.rows()) + " * vector of length " +
                             std::to_string(x.len()));
    Vector y(a.cols());
    for (size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i);
        double xi = x[i];
        if (xi == 0.0) continue;
        for (size_t j = 0; j < a.cols(); ++j) y[j] += ai[j] * xi;
    }
    return y;
}

inline double dot(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.len(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_sq(const Vector& v) { return dot(v, v); }

inline double norm_sq(const Matrix& m) {
    double s = 0.0;
    for (size_t i = 0; i < m.size(); ++i) s += m.data()[i] * m.data()[i];
    return s;
}

// Largest eigenvalue of a symmetric PSD matrix by power iteration.
// Relative tolerance 1e-10 on the Rayleigh quotient, at most 10000 iterations.
inline double lambda_max(const Matrix& m) {
    if (m.rows() != m.cols())
        throw DimensionError("lambda_max: matrix is not square, " + shape_str(m.rows(), m.cols()));
    double scale = 0.0;
    for (size_t i = 0; i < m.size(); ++i) scale = std::max(scale, std::abs(m.data()[i]));
    double sym_tol = 1e-10 * std::max(1.0, scale);
    for (size_t i = 0; i < m.rows(); ++i)
        for (size_t j = i + 1; j < m.cols(); ++j)
            if (std::abs(m(i, j) - m(j, i)) > sym_tol)
                throw DimensionError("lambda_max: matrix is not symmetric at (" + std::to_string(i) +
                                     "," + std::to_string(j) + ")");
    size_t n = m.rows();
    if (n == 0) return 0.0;
    Vector v(n);
    // Mildly uneven start so no single eigenvector is systematically missed.
    for (size_t i = 0; i < n; ++i) v[i] = 1.0 + 1e-3 * static_cast<double>(i % 17);
    double inv = 1.0 / std::sqrt(norm_sq(v));
    for (size_t i = 0; i < n; ++i) v[i] *= inv;
    double lam = 0.0;
    for (int it = 0; it < 10000; ++it) {
        Vector w = matvec(m, v);
        double n2 = std::sqrt(norm_sq(w));
        if (n2 == 0.0) return 0.0;
        for (size_t i = 0; i < n; ++i) w[i] /= n2;
        double lam_new = dot(w, matvec(m, w));
        v = w;
        if (std::abs(lam_new - lam) <= 1e-10 * std::max(std::abs(lam_new), 1e-300)) return lam_new;
        lam = lam_new;
    }
    return lam;
}

}  // namespace altmin
