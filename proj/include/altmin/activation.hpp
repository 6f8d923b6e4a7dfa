#pragma once

#include <cmath>
#include <string>

#include "common.hpp"
#include "matrix.hpp"

namespace altmin {

enum class Activation { ReLU, Tanh, Sign, Identity };

inline std::string activation_name(Activation a) {
    switch (a) {
        case Activation::ReLU: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Sign: return "sign";
        case Activation::Identity: return "identity";
    }
    return "?";
}

inline Activation activation_from_name(const std::string& s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "tanh") return Activation::Tanh;
    if (s == "sign") return Activation::Sign;
    if (s == "identity") return Activation::Identity;
    throw ConfigError("unknown activation '" + s + "' (expected relu|tanh|sign|identity)");
}

// Conventions fixed for determinism: Sign(0) = +1, ReLU'(0) = 0.
inline double activate_scalar(Activation a, double x) {
    switch (a) {
        case Activation::ReLU: return x > 0.0 ? x : 0.0;
        case Activation::Tanh: return std::tanh(x);
        case Activation::Sign: return x >= 0.0 ? 1.0 : -1.0;
        case Activation::Identity: return x;
    }
    return x;
}

inline double activate_grad_scalar(Activation a, double x) {
    switch (a) {
        case Activation::ReLU: return x > 0.0 ? 1.0 : 0.0;
        case Activation::Tanh: {
            double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case Activation::Sign:
            throw Error("activate_grad: sign has no usable derivative");
        case Activation::Identity: return 1.0;
    }
    return 0.0;
}

inline Vector activate(Activation a, const Vector& v) {
    Vector out(v.len());
    for (size_t i = 0; i < v.len(); ++i) out[i] = activate_scalar(a, v[i]);
    return out;
}

inline Vector activate_grad(Activation a, const Vector& v) {
    if (a == Activation::Sign) throw Error("activate_grad: sign has no usable derivative");
    Vector out(v.len());
    for (size_t i = 0; i < v.len(); ++i) out[i] = activate_grad_scalar(a, v[i]);
    return out;
}

inline Matrix activate(Activation a, const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (size_t i = 0; i < m.size(); ++i) out.data()[i] = activate_scalar(a, m.data()[i]);
    return out;
}

}  // namespace altmin
