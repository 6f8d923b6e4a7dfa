#pragma once

// Backpropagation baselines (SGD with epoch-wise decay, Adam) over the same
// network, data, shuffling, and metrics paths as the alternating-minimization
// trainers, so optimizer comparisons isolate the optimizer.

#include <string>
#include <vector>

#include "altmin.hpp"

namespace altmin {

enum class BaselineAlgo { Sgd, Adam };

struct BaselineConfig {
    BaselineAlgo algo = BaselineAlgo::Sgd;
    double lr = 0.01;
    double sgd_epoch_decay = 0.9;

    void validate() const {
        if (lr <= 0.0) throw ConfigError("baseline lr must be > 0");
        if (sgd_epoch_decay <= 0.0 || sgd_epoch_decay > 1.0)
            throw ConfigError("sgd_epoch_decay must be in (0, 1]");
    }
};

namespace detail {

// Chain rule over codes already materialized by encode_input.
inline std::vector<Matrix> backprop_grads_at(const NetworkState& net, const CodeBatch& cb,
                                             const Matrix& labels) {
    size_t hidden = net.spec.hidden_count();
    for (Activation a : net.spec.hidden_activations)
        if (a == Activation::Sign)
            throw Error("backprop does not support sign layers; train those with AM");
    double inv_batch = 1.0 / static_cast<double>(cb.batch());
    std::vector<Matrix> grads(net.weights.size());
    Matrix a_last = layer_activation(net, cb, hidden);
    Matrix delta = matmul_nt(a_last, net.weights[hidden]);  // logits
    for (size_t i = 0; i < delta.rows(); ++i) {
        Vector p = softmax(delta.row_vec(i));
        for (size_t j = 0; j < p.len(); ++j) delta(i, j) = (p[j] - labels(i, j)) * inv_batch;
    }
    grads[hidden] = matmul_tn(delta, a_last);
    Matrix d_act = matmul(delta, net.weights[hidden]);  // d loss / d a^L
    for (size_t li = hidden; li-- > 0;) {
        Activation act = net.spec.hidden_activations[li];
        const Matrix& c = cb.codes[li];
        Matrix d_code(d_act.rows(), d_act.cols());
        for (size_t i = 0; i < d_code.size(); ++i)
            d_code.data()[i] = d_act.data()[i] * activate_grad_scalar(act, c.data()[i]);
        grads[li] = matmul_tn(d_code, layer_activation(net, cb, li));
        if (li > 0) d_act = matmul(d_code, net.weights[li]);
    }
    return grads;
}

}  // namespace detail

// Exact gradients of the mean multinomial loss w.r.t. every weight matrix.
inline std::vector<Matrix> backprop_grads(const NetworkState& net, const Matrix& x,
                                          const Matrix& labels) {
    return detail::backprop_grads_at(net, encode_input(net, x), labels);
}

// Same cadence as altmin::fit: per-batch rows with pre-update metrics, one
// evaluation row per epoch plus the initial one; the mu column is 0.
inline std::vector<MetricsRow> baseline_fit(NetworkState& net, const Dataset& train,
                                            const Dataset& eval, const BaselineConfig& cfg,
                                            int epochs, size_t batch, uint64_t seed,
                                            const std::string& algo,
                                            const std::string& eval_split = "val") {
    cfg.validate();
    train.validate();
    eval.validate();
    std::vector<AdamState> opt = make_adam_states(net);
    std::vector<MetricsRow> rows;
    double lr = cfg.lr;
    long global_batch = 0;
    auto eval_metrics = evaluate_dataset(net, eval);
    rows.push_back({0, 0, eval_split, eval_metrics.loss, eval_metrics.accuracy, 0.0, algo, seed});
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        MinibatchStream stream(train, batch, seed, static_cast<uint64_t>(epoch));
        for (size_t k = 0; k < stream.count(); ++k) {
            Batch b = stream.get(k);
            CodeBatch cb = encode_input(net, b.x);
            double loss = batch_loss(net, cb, b.y);
            double acc = batch_accuracy(net, cb, b.y);
            std::vector<Matrix> grads = detail::backprop_grads_at(net, cb, b.y);
            for (size_t li = 0; li < net.weights.size(); ++li) {
                if (!all_finite(grads[li]))
                    throw NumericError("non-finite baseline gradient at layer " +
                                       std::to_string(li + 1), static_cast<int>(li + 1));
                if (cfg.algo == BaselineAlgo::Adam) {
                    opt[li].apply(net.weights[li], grads[li], lr);
                } else {
                    Matrix& w = net.weights[li];
                    for (size_t i = 0; i < w.size(); ++i) w.data()[i] -= lr * grads[li].data()[i];
                }
            }
            ++global_batch;
            rows.push_back({epoch, global_batch, "train", loss, acc, 0.0, algo, seed});
        }
        if (cfg.algo == BaselineAlgo::Sgd) lr *= cfg.sgd_epoch_decay;
        eval_metrics = evaluate_dataset(net, eval);
        rows.push_back({epoch, global_batch, eval_split, eval_metrics.loss, eval_metrics.accuracy,
                        0.0, algo, seed});
    }
    return rows;
}

}  // namespace altmin
