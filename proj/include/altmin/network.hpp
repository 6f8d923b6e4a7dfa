#pragma once

// Feedforward classifier with per-layer auxiliary codes.
//
// Architecture: layer_sizes = [N, m_1, ..., m_L, m] with L hidden layers and
// an m-class softmax readout; no bias terms (append a constant-1 feature if
// you want one). Codes are pre-activations: c^1 = x W^1T, c^l = a^{l-1} W^lT
// with a^l = sigma_l(c^l), and class probabilities are
// softmax(sigma_L(c^L) W^{L+1,T}) row-wise.

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "activation.hpp"
#include "common.hpp"
#include "matrix.hpp"
#include "multinomial.hpp"

namespace altmin {

struct NetworkSpec {
    std::vector<size_t> layer_sizes;           // [N, m_1, ..., m_L, m]
    std::vector<Activation> hidden_activations;  // length L
    uint64_t seed = 0;

    size_t hidden_count() const { return hidden_activations.size(); }
    size_t input_dim() const { return layer_sizes.front(); }
    size_t class_count() const { return layer_sizes.back(); }

    void validate() const {
        if (layer_sizes.size() < 3)
            throw ConfigError("network needs at least one hidden layer: got " +
                              std::to_string(layer_sizes.size()) + " sizes");
        for (size_t s : layer_sizes)
            if (s < 1) throw ConfigError("network layer sizes must be >= 1");
        if (hidden_activations.size() != layer_sizes.size() - 2)
            throw ConfigError("expected " + std::to_string(layer_sizes.size() - 2) +
                              " hidden activations, got " +
                              std::to_string(hidden_activations.size()));
    }
};

struct NetworkState {
    NetworkSpec spec;
    std::vector<Matrix> weights;  // weights[l]: (m_{l+1} x m_l) over layer_sizes
};

// Codes for one minibatch plus the inputs they were encoded from (the l=1
// penalty term needs a^0 = x).
struct CodeBatch {
    Matrix input;               // batch x N
    std::vector<Matrix> codes;  // codes[l]: batch x m_{l+1}, l = 0..L-1

    size_t batch() const { return input.rows(); }
};

inline NetworkState init_network(const NetworkSpec& spec) {
    spec.validate();
    NetworkState net{spec, {}};
    for (size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        size_t fan_in = spec.layer_sizes[l];
        size_t fan_out = spec.layer_sizes[l + 1];
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Rng rng(substream(spec.seed, l));
        Matrix w(fan_out, fan_in);
        for (size_t i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
        net.weights.push_back(std::move(w));
    }
    return net;
}

inline void check_codes_shape(const NetworkState& net, const CodeBatch& cb) {
    const auto& sz = net.spec.layer_sizes;
    size_t hidden = net.spec.hidden_count();
    if (cb.codes.size() != hidden)
        throw DimensionError("code batch has " + std::to_string(cb.codes.size()) +
                             " layers, network has " + std::to_string(hidden));
    if (cb.input.cols() != sz[0])
        throw DimensionError("code batch input has " + std::to_string(cb.input.cols()) +
                             " features, network expects " + std::to_string(sz[0]));
    for (size_t l = 0; l < hidden; ++l)
        if (cb.codes[l].rows() != cb.input.rows() || cb.codes[l].cols() != sz[l + 1])
            throw DimensionError("code layer " + std::to_string(l + 1) + " is " +
                                 shape_str(cb.codes[l].rows(), cb.codes[l].cols()) +
                                 ", expected " + shape_str(cb.input.rows(), sz[l + 1]));
}

inline CodeBatch encode_input(const NetworkState& net, const Matrix& x) {
    if (x.cols() != net.spec.input_dim())
        throw DimensionError("encode_input: batch has " + std::to_string(x.cols()) +
                             " features, network expects " +
                             std::to_string(net.spec.input_dim()));
    CodeBatch cb;
    cb.input = x;
    size_t hidden = net.spec.hidden_count();
    const Matrix* a = &x;
    Matrix act;
    for (size_t l = 0; l < hidden; ++l) {
        cb.codes.push_back(matmul_nt(*a, net.weights[l]));
        if (l + 1 < hidden) {
            act = activate(net.spec.hidden_activations[l], cb.codes[l]);
            a = &act;
        }
    }
    return cb;
}

// sigma_L(c^L) row-wise; a^0 = input for layer == 0.
inline Matrix layer_activation(const NetworkState& net, const CodeBatch& cb, size_t layer) {
    if (layer == 0) return cb.input;
    return activate(net.spec.hidden_activations[layer - 1], cb.codes[layer - 1]);
}

inline Matrix predict(const NetworkState& net, const CodeBatch& cb) {
    check_codes_shape(net, cb);
    Matrix logits = matmul_nt(layer_activation(net, cb, net.spec.hidden_count()),
                              net.weights.back());
    Matrix probs(logits.rows(), logits.cols());
    for (size_t i = 0; i < logits.rows(); ++i)
        probs.set_row(i, softmax(logits.row_vec(i)));
    return probs;
}

// labels: batch x m one-hot rows.
inline double batch_loss(const NetworkState& net, const CodeBatch& cb, const Matrix& labels) {
    check_codes_shape(net, cb);
    if (labels.rows() != cb.batch() || labels.cols() != net.spec.class_count())
        throw DimensionError("batch_loss: labels are " + shape_str(labels.rows(), labels.cols()) +
                             ", expected " + shape_str(cb.batch(), net.spec.class_count()));
    Matrix logits = matmul_nt(layer_activation(net, cb, net.spec.hidden_count()),
                              net.weights.back());
    double total = 0.0;
    for (size_t i = 0; i < logits.rows(); ++i) {
        Vector z = logits.row_vec(i);
        check_one_hot(labels.row_vec(i));
        double picked = 0.0;
        for (size_t j = 0; j < labels.cols(); ++j)
            if (labels(i, j) == 1.0) picked = z[j];
        total += log_sum_exp(z) - picked;
    }
    return total / static_cast<double>(logits.rows());
}

// Fraction of rows whose predicted argmax matches the one-hot label. Ties
// break toward the lowest class index.
inline double batch_accuracy(const NetworkState& net, const CodeBatch& cb, const Matrix& labels) {
    Matrix probs = predict(net, cb);
    size_t hits = 0;
    for (size_t i = 0; i < probs.rows(); ++i) {
        size_t arg = 0;
        for (size_t j = 1; j < probs.cols(); ++j)
            if (probs(i, j) > probs(i, arg)) arg = j;
        if (labels(i, arg) == 1.0) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(probs.rows());
}

// mu * sum_l ||c^l - W^l a^{l-1}||_F^2 over the batch (the coupling penalty;
// zero on freshly encoded codes).
inline double penalty_value(const NetworkState& net, const CodeBatch& cb, double mu) {
    check_codes_shape(net, cb);
    double total = 0.0;
    for (size_t l = 0; l < net.spec.hidden_count(); ++l) {
        Matrix pred = matmul_nt(layer_activation(net, cb, l), net.weights[l]);
        for (size_t i = 0; i < pred.size(); ++i) {
            double r = cb.codes[l].data()[i] - pred.data()[i];
            total += r * r;
        }
    }
    return mu * total;
}

// --- checkpoint I/O ---------------------------------------------------------
//
// Flat little-endian container:
//   bytes 0..7   magic "AMNET1\0\0"
//   u32          version (1)
//   u32          L (hidden layer count)
//   u64 * (L+2)  layer sizes
//   u32 * L      hidden activation tags (0 relu, 1 tanh, 2 sign, 3 identity)
//   u64          seed
//   f64 payload  weights W^1..W^{L+1}, row-major
// Round-trips must be bit-exact.

namespace detail {

template <typename T>
void put(std::ofstream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& is, const char* what) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError(std::string("checkpoint truncated while reading ") + what);
    return v;
}

inline uint32_t activation_tag(Activation a) {
    switch (a) {
        case Activation::ReLU: return 0;
        case Activation::Tanh: return 1;
        case Activation::Sign: return 2;
        case Activation::Identity: return 3;
    }
    return 0;
}

inline Activation activation_from_tag(uint32_t t) {
    switch (t) {
        case 0: return Activation::ReLU;
        case 1: return Activation::Tanh;
        case 2: return Activation::Sign;
        case 3: return Activation::Identity;
    }
    throw FormatError("checkpoint has unknown activation tag " + std::to_string(t));
}

}  // namespace detail

inline void save_checkpoint(const NetworkState& net, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open checkpoint for writing: " + path.string());
    os.write("AMNET1\0\0", 8);
    detail::put<uint32_t>(os, 1);
    detail::put<uint32_t>(os, static_cast<uint32_t>(net.spec.hidden_count()));
    for (size_t s : net.spec.layer_sizes) detail::put<uint64_t>(os, s);
    for (Activation a : net.spec.hidden_activations)
        detail::put<uint32_t>(os, detail::activation_tag(a));
    detail::put<uint64_t>(os, net.spec.seed);
    for (const Matrix& w : net.weights)
        os.write(reinterpret_cast<const char*>(w.data()),
                 static_cast<std::streamsize>(w.size() * sizeof(double)));
    if (!os) throw FormatError("checkpoint write failed: " + path.string());
}

inline NetworkState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open checkpoint: " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "AMNET1\0\0", 8) != 0)
        throw FormatError("checkpoint magic mismatch: " + path.string());
    uint32_t version = detail::take<uint32_t>(is, "version");
    if (version != 1)
        throw FormatError("checkpoint version " + std::to_string(version) + " unsupported");
    uint32_t hidden = detail::take<uint32_t>(is, "layer count");
    if (hidden < 1 || hidden > 1 << 20)
        throw FormatError("checkpoint layer count " + std::to_string(hidden) + " out of range");
    NetworkSpec spec;
    for (size_t i = 0; i < static_cast<size_t>(hidden) + 2; ++i) {
        uint64_t s = detail::take<uint64_t>(is, "layer size");
        if (s < 1 || s > 1ULL << 32) throw FormatError("checkpoint layer size out of range");
        spec.layer_sizes.push_back(static_cast<size_t>(s));
    }
    for (size_t i = 0; i < hidden; ++i)
        spec.hidden_activations.push_back(
            detail::activation_from_tag(detail::take<uint32_t>(is, "activation tag")));
    spec.seed = detail::take<uint64_t>(is, "seed");
    NetworkState net{spec, {}};
    for (size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        Matrix w(spec.layer_sizes[l + 1], spec.layer_sizes[l]);
        is.read(reinterpret_cast<char*>(w.data()),
                static_cast<std::streamsize>(w.size() * sizeof(double)));
        if (!is) throw FormatError("checkpoint truncated in weight payload");
        if (!all_finite(w)) throw FormatError("checkpoint weight payload has non-finite entries");
        net.weights.push_back(std::move(w));
    }
    return net;
}

}  // namespace altmin
