#pragma once

// Elman RNN for sequential classification, trained either by alternating
// minimization (per-time-step codes c^t plus the output sequence z as an
// auxiliary variable) or by full backpropagation through time.
//
//   c^t = U x^t + W tanh(c^{t-1}) + b,  h^0 = 0,  z^t = V tanh(c^t) (scalar),
//   loss = mean_n L(y_n, ReLU(z_n), C)  with C mapping the length-T ReLU'd
//   output sequence to class logits.

#include <string>
#include <vector>

#include "activation.hpp"
#include "adam.hpp"
#include "altmin.hpp"
#include "baselines.hpp"
#include "common.hpp"
#include "datasets.hpp"
#include "matrix.hpp"
#include "metrics.hpp"
#include "multinomial.hpp"

namespace altmin {

struct ElmanState {
    Matrix U;  // d x p
    Matrix W;  // d x d
    Matrix V;  // 1 x d
    Vector b;  // d
    Matrix C;  // m x T
    size_t d = 0, T = 0, p = 0, m = 0;
    uint64_t seed = 0;
};

struct RnnCodeBatch {
    std::vector<Matrix> codes;  // codes[t]: batch x d, t = 0..T-1
    Matrix z;                   // batch x T

    size_t batch() const { return z.rows(); }
};

inline ElmanState init_elman(size_t d, size_t T, size_t p, size_t m, uint64_t seed) {
    ElmanState st;
    st.d = d;
    st.T = T;
    st.p = p;
    st.m = m;
    st.seed = seed;
    auto fill = [](Matrix& w, uint64_t sub, double bound) {
        Rng rng(sub);
        for (size_t i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
    };
    st.U = Matrix(d, p);
    fill(st.U, substream(seed, 1), 1.0 / std::sqrt(static_cast<double>(p)));
    st.W = Matrix(d, d);
    fill(st.W, substream(seed, 2), 1.0 / std::sqrt(static_cast<double>(d)));
    st.V = Matrix(1, d);
    fill(st.V, substream(seed, 3), 1.0 / std::sqrt(static_cast<double>(d)));
    st.b = Vector(d);
    st.C = Matrix(m, T);
    fill(st.C, substream(seed, 4), 1.0 / std::sqrt(static_cast<double>(T)));
    return st;
}

namespace detail {

// x rows hold time-major flattened sequences; slice out step t as batch x p.
inline Matrix time_slice(const Matrix& x, size_t t, size_t p) {
    Matrix out(x.rows(), p);
    for (size_t i = 0; i < x.rows(); ++i) {
        const double* src = x.row(i) + t * p;
        std::copy(src, src + p, out.row(i));
    }
    return out;
}

// U x^t + W h_prev + b, vectorized over the batch.
inline Matrix rnn_drive(const ElmanState& st, const Matrix& x_t, const Matrix& h_prev) {
    Matrix c = matmul_nt(x_t, st.U);
    if (h_prev.rows() > 0) {
        Matrix rec = matmul_nt(h_prev, st.W);
        for (size_t i = 0; i < c.size(); ++i) c.data()[i] += rec.data()[i];
    }
    for (size_t i = 0; i < c.rows(); ++i)
        for (size_t j = 0; j < c.cols(); ++j) c(i, j) += st.b[j];
    return c;
}

}  // namespace detail

inline void check_rnn_input(const ElmanState& st, const Matrix& x) {
    if (x.cols() != st.T * st.p)
        throw DimensionError("rnn: sequence batch has " + std::to_string(x.cols()) +
                             " values per row, expected T*p = " + std::to_string(st.T * st.p));
}

// Feedforward unroll; returned codes satisfy all coupling penalties exactly.
inline RnnCodeBatch rnn_encode(const ElmanState& st, const Matrix& x) {
    check_rnn_input(st, x);
    RnnCodeBatch cb;
    cb.z = Matrix(x.rows(), st.T);
    Matrix h;  // empty means h^0 = 0
    for (size_t t = 0; t < st.T; ++t) {
        cb.codes.push_back(detail::rnn_drive(st, detail::time_slice(x, t, st.p), h));
        h = activate(Activation::Tanh, cb.codes[t]);
        Matrix zt = matmul_nt(h, st.V);
        for (size_t i = 0; i < x.rows(); ++i) cb.z(i, t) = zt(i, 0);
    }
    return cb;
}

// Mean multinomial loss of C applied to ReLU(z) row-wise.
inline double rnn_loss(const ElmanState& st, const Matrix& z, const Matrix& labels) {
    if (z.cols() != st.T || labels.rows() != z.rows() || labels.cols() != st.m)
        throw DimensionError("rnn_loss: z is " + shape_str(z.rows(), z.cols()) + ", labels " +
                             shape_str(labels.rows(), labels.cols()));
    Matrix logits = matmul_nt(activate(Activation::ReLU, z), st.C);
    double total = 0.0;
    for (size_t i = 0; i < z.rows(); ++i) {
        check_one_hot(labels.row_vec(i));
        Vector zl = logits.row_vec(i);
        double picked = 0.0;
        for (size_t j = 0; j < labels.cols(); ++j)
            if (labels(i, j) == 1.0) picked = zl[j];
        total += log_sum_exp(zl) - picked;
    }
    return total / static_cast<double>(z.rows());
}

inline Matrix rnn_logits(const ElmanState& st, const Matrix& x) {
    RnnCodeBatch cb = rnn_encode(st, x);
    return matmul_nt(activate(Activation::ReLU, cb.z), st.C);
}

// Code phase. First the output auxiliary z takes cfg.code_iters gradient
// steps on L(y, ReLU(z), C) + mu ||z - V tanh(c)||^2 (per sample), then the
// per-step codes are swept t = T..1 with gradient steps on
//   mu ||c^{t+1} - (U x^{t+1} + W tanh(c^t) + b)||^2
// + mu ||z^t - V tanh(c^t)||^2
// + mu ||c^t - (U x^t + W tanh(c^{t-1}) + b)||^2     (first term absent at T).
inline RnnCodeBatch rnn_update_codes(const ElmanState& st, RnnCodeBatch cb, const Matrix& x,
                                     const Matrix& labels, const AmConfig& cfg, double mu) {
    check_rnn_input(st, x);
    if (mu <= 0.0) throw ConfigError("rnn_update_codes requires mu > 0");
    size_t batch = cb.batch();
    for (int it = 0; it < cfg.code_iters; ++it) {
        Matrix a = activate(Activation::ReLU, cb.z);
        Matrix resid = matmul_nt(a, st.C);  // logits, then p - y in place
        for (size_t i = 0; i < batch; ++i) {
            Vector p = softmax(resid.row_vec(i));
            for (size_t j = 0; j < st.m; ++j) resid(i, j) = p[j] - labels(i, j);
        }
        Matrix grad = matmul(resid, st.C);  // batch x T
        for (size_t t = 0; t < st.T; ++t) {
            Matrix h = activate(Activation::Tanh, cb.codes[t]);
            Matrix zhat = matmul_nt(h, st.V);
            for (size_t i = 0; i < batch; ++i) {
                double g = grad(i, t) * (cb.z(i, t) > 0.0 ? 1.0 : 0.0) +
                           2.0 * mu * (cb.z(i, t) - zhat(i, 0));
                cb.z(i, t) -= cfg.code_lr * g;
            }
        }
    }
    if (!all_finite(cb.z)) throw NumericError("rnn_update_codes: non-finite z");
    for (size_t t = st.T; t-- > 0;) {
        Matrix h_prev = t == 0 ? Matrix() : activate(Activation::Tanh, cb.codes[t - 1]);
        Matrix drive = detail::rnn_drive(st, detail::time_slice(x, t, st.p), h_prev);
        Matrix x_next = t + 1 < st.T ? detail::time_slice(x, t + 1, st.p) : Matrix();
        for (int it = 0; it < cfg.code_iters; ++it) {
            Matrix h = activate(Activation::Tanh, cb.codes[t]);
            Matrix grad(batch, st.d);
            if (t + 1 < st.T) {
                // r1 = c^{t+1} - (U x^{t+1} + W tanh(c^t) + b)
                Matrix pred = detail::rnn_drive(st, x_next, h);
                for (size_t i = 0; i < pred.size(); ++i)
                    pred.data()[i] = cb.codes[t + 1].data()[i] - pred.data()[i];
                Matrix back = matmul(pred, st.W);
                for (size_t i = 0; i < grad.size(); ++i) grad.data()[i] = -2.0 * mu * back.data()[i];
            }
            Matrix zhat = matmul_nt(h, st.V);
            for (size_t i = 0; i < batch; ++i) {
                double r2 = cb.z(i, t) - zhat(i, 0);
                for (size_t j = 0; j < st.d; ++j) grad(i, j) += -2.0 * mu * r2 * st.V(0, j);
            }
            for (size_t i = 0; i < grad.size(); ++i) {
                double ct = cb.codes[t].data()[i];
                double th = std::tanh(ct);
                grad.data()[i] = grad.data()[i] * (1.0 - th * th) +
                                 2.0 * mu * (ct - drive.data()[i]);
            }
            for (size_t i = 0; i < grad.size(); ++i)
                cb.codes[t].data()[i] -= cfg.code_lr * grad.data()[i];
        }
        if (!all_finite(cb.codes[t]))
            throw NumericError("rnn_update_codes: non-finite code at time " + std::to_string(t + 1),
                               static_cast<int>(t + 1));
    }
    return cb;
}

struct RnnAdamStates {
    AdamState u, w, v, b, c;
};

inline RnnAdamStates make_rnn_adam_states(const ElmanState& st) {
    return {AdamState(st.d, st.p), AdamState(st.d, st.d), AdamState(1, st.d), AdamState(1, st.d),
            AdamState(st.m, st.T)};
}

struct RnnBlockGrads {
    Matrix u, w, v, c;
    Vector b;
};

// Block gradients at fixed codes: (U, W, b) on the recurrence residuals, V on
// the readout residuals (both mu-weighted, mean over the batch), C on the
// mean multinomial loss at fixed ReLU(z). Blocks read only codes.
inline RnnBlockGrads rnn_weight_grads(const ElmanState& st, const RnnCodeBatch& cb, const Matrix& x,
                                      const Matrix& labels, double mu) {
    check_rnn_input(st, x);
    size_t batch = cb.batch();
    double inv_batch = 1.0 / static_cast<double>(batch);
    RnnBlockGrads g;
    g.u = Matrix(st.d, st.p);
    g.w = Matrix(st.d, st.d);
    g.v = Matrix(1, st.d);
    g.b = Vector(st.d);
    Matrix h_prev;
    for (size_t t = 0; t < st.T; ++t) {
        Matrix x_t = detail::time_slice(x, t, st.p);
        Matrix resid = detail::rnn_drive(st, x_t, h_prev);  // prediction, then residual
        for (size_t i = 0; i < resid.size(); ++i)
            resid.data()[i] = (resid.data()[i] - cb.codes[t].data()[i]) * 2.0 * mu * inv_batch;
        Matrix gu = matmul_tn(resid, x_t);
        for (size_t i = 0; i < g.u.size(); ++i) g.u.data()[i] += gu.data()[i];
        if (t > 0) {
            Matrix gw = matmul_tn(resid, h_prev);
            for (size_t i = 0; i < g.w.size(); ++i) g.w.data()[i] += gw.data()[i];
        }
        for (size_t i = 0; i < batch; ++i)
            for (size_t j = 0; j < st.d; ++j) g.b[j] += resid(i, j);
        Matrix h = activate(Activation::Tanh, cb.codes[t]);
        Matrix zhat = matmul_nt(h, st.V);
        for (size_t i = 0; i < batch; ++i) {
            double r2 = (zhat(i, 0) - cb.z(i, t)) * 2.0 * mu * inv_batch;
            for (size_t j = 0; j < st.d; ++j) g.v(0, j) += r2 * h(i, j);
        }
        h_prev = std::move(h);
    }
    Matrix a = activate(Activation::ReLU, cb.z);
    Matrix dl = matmul_nt(a, st.C);
    for (size_t i = 0; i < batch; ++i) {
        Vector p = softmax(dl.row_vec(i));
        for (size_t j = 0; j < st.m; ++j) dl(i, j) = (p[j] - labels(i, j)) * inv_batch;
    }
    g.c = matmul_tn(dl, a);
    return g;
}

// cfg.weight_iters independent Adam steps per block.
inline void rnn_update_weights(ElmanState& st, const RnnCodeBatch& cb, const Matrix& x,
                               const Matrix& labels, const AmConfig& cfg, double mu,
                               RnnAdamStates& opt) {
    for (int it = 0; it < cfg.weight_iters; ++it) {
        RnnBlockGrads g = rnn_weight_grads(st, cb, x, labels, mu);
        if (!all_finite(g.u) || !all_finite(g.w) || !all_finite(g.v) || !all_finite(g.b) ||
            !all_finite(g.c))
            throw NumericError("rnn_update_weights: non-finite block gradient");
        opt.u.apply(st.U, g.u, cfg.weight_lr);
        opt.w.apply(st.W, g.w, cfg.weight_lr);
        opt.v.apply(st.V, g.v, cfg.weight_lr);
        Matrix b_mat(1, st.d), b_grad(1, st.d);
        for (size_t j = 0; j < st.d; ++j) {
            b_mat(0, j) = st.b[j];
            b_grad(0, j) = g.b[j];
        }
        opt.b.apply(b_mat, b_grad, cfg.weight_lr);
        for (size_t j = 0; j < st.d; ++j) st.b[j] = b_mat(0, j);
        opt.c.apply(st.C, g.c, cfg.weight_lr);
    }
}

// Full-unroll BPTT gradients of the mean loss w.r.t. every block.
inline RnnBlockGrads bptt_grads(const ElmanState& st, const Matrix& x, const Matrix& labels) {
    check_rnn_input(st, x);
    size_t batch = x.rows();
    double inv_batch = 1.0 / static_cast<double>(batch);
    RnnCodeBatch cb = rnn_encode(st, x);
    std::vector<Matrix> h(st.T);
    for (size_t t = 0; t < st.T; ++t) h[t] = activate(Activation::Tanh, cb.codes[t]);
    Matrix a = activate(Activation::ReLU, cb.z);
    Matrix dl = matmul_nt(a, st.C);
    for (size_t i = 0; i < batch; ++i) {
        Vector p = softmax(dl.row_vec(i));
        for (size_t j = 0; j < st.m; ++j) dl(i, j) = (p[j] - labels(i, j)) * inv_batch;
    }
    RnnBlockGrads g;
    g.c = matmul_tn(dl, a);
    g.u = Matrix(st.d, st.p);
    g.w = Matrix(st.d, st.d);
    g.v = Matrix(1, st.d);
    g.b = Vector(st.d);
    Matrix dz = matmul(dl, st.C);  // batch x T
    for (size_t i = 0; i < dz.size(); ++i)
        dz.data()[i] *= cb.z.data()[i] > 0.0 ? 1.0 : 0.0;
    Matrix dc_next;  // d loss / d c^{t+1}
    for (size_t t = st.T; t-- > 0;) {
        // d loss / d h^t: readout plus recurrence into t+1.
        Matrix dh(batch, st.d);
        for (size_t i = 0; i < batch; ++i)
            for (size_t j = 0; j < st.d; ++j) dh(i, j) = dz(i, t) * st.V(0, j);
        if (dc_next.rows() > 0) {
            Matrix rec = matmul(dc_next, st.W);
            for (size_t i = 0; i < dh.size(); ++i) dh.data()[i] += rec.data()[i];
        }
        for (size_t i = 0; i < batch; ++i) {
            double zt = dz(i, t);
            for (size_t j = 0; j < st.d; ++j) g.v(0, j) += zt * h[t](i, j);
        }
        Matrix dc(batch, st.d);
        for (size_t i = 0; i < dc.size(); ++i) {
            double th = h[t].data()[i];
            dc.data()[i] = dh.data()[i] * (1.0 - th * th);
        }
        Matrix x_t = detail::time_slice(x, t, st.p);
        Matrix gu = matmul_tn(dc, x_t);
        for (size_t i = 0; i < g.u.size(); ++i) g.u.data()[i] += gu.data()[i];
        if (t > 0) {
            Matrix gw = matmul_tn(dc, h[t - 1]);
            for (size_t i = 0; i < g.w.size(); ++i) g.w.data()[i] += gw.data()[i];
        }
        for (size_t i = 0; i < batch; ++i)
            for (size_t j = 0; j < st.d; ++j) g.b[j] += dc(i, j);
        dc_next = std::move(dc);
    }
    return g;
}

// --- training loops -----------------------------------------------------------

struct SeqDataset {
    Matrix sequences;  // n x (T*p)
    std::vector<int> labels;
    int num_classes = 0;
    size_t T = 0, p = 1;

    size_t size() const { return sequences.rows(); }
};

inline SeqDataset make_seq_dataset(const Sequences& seqs, const std::vector<int>& labels,
                                   int num_classes) {
    if (seqs.data.rows() != labels.size())
        throw DimensionError("sequence count does not match label count");
    return {seqs.data, labels, num_classes, seqs.T, seqs.p};
}

inline BatchMetrics rnn_evaluate(const ElmanState& st, const SeqDataset& ds) {
    constexpr size_t kChunk = 2048;
    double loss_sum = 0.0, hits = 0.0;
    for (size_t lo = 0; lo < ds.size(); lo += kChunk) {
        size_t hi = std::min(lo + kChunk, ds.size());
        Matrix x(hi - lo, ds.sequences.cols());
        Matrix y(hi - lo, static_cast<size_t>(ds.num_classes));
        for (size_t i = lo; i < hi; ++i) {
            x.set_row(i - lo, ds.sequences.row_vec(i));
            y(i - lo, static_cast<size_t>(ds.labels[i])) = 1.0;
        }
        RnnCodeBatch cb = rnn_encode(st, x);
        loss_sum += rnn_loss(st, cb.z, y) * static_cast<double>(hi - lo);
        Matrix logits = matmul_nt(activate(Activation::ReLU, cb.z), st.C);
        for (size_t i = 0; i < logits.rows(); ++i) {
            size_t arg = 0;
            for (size_t j = 1; j < logits.cols(); ++j)
                if (logits(i, j) > logits(i, arg)) arg = j;
            if (y(i, arg) == 1.0) hits += 1.0;
        }
    }
    double n = static_cast<double>(ds.size());
    return {loss_sum / n, hits / n};
}

namespace detail {

inline Batch seq_batch(const SeqDataset& ds, const std::vector<size_t>& order, size_t lo, size_t hi,
                       int num_classes) {
    Batch b;
    b.x = Matrix(hi - lo, ds.sequences.cols());
    b.y = Matrix(hi - lo, static_cast<size_t>(num_classes));
    for (size_t i = lo; i < hi; ++i) {
        b.x.set_row(i - lo, ds.sequences.row_vec(order[i]));
        b.y(i - lo, static_cast<size_t>(ds.labels[order[i]])) = 1.0;
    }
    return b;
}

}  // namespace detail

// AM trainer for the Elman unit; same cadence and mu events as altmin::fit.
inline std::vector<MetricsRow> rnn_fit(ElmanState& st, const SeqDataset& train,
                                       const SeqDataset& eval, const AmConfig& cfg, int epochs,
                                       size_t batch, uint64_t seed, const std::string& algo,
                                       const std::string& eval_split = "val") {
    RnnAdamStates opt = make_rnn_adam_states(st);
    std::vector<MetricsRow> rows;
    double mu = cfg.mu.mu0;
    long global_batch = 0;
    BatchMetrics em = rnn_evaluate(st, eval);
    rows.push_back({0, 0, eval_split, em.loss, em.accuracy, mu, algo, seed});
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        auto order = shuffled_indices(train.size(), seed ^ static_cast<uint64_t>(epoch));
        for (size_t lo = 0; lo < train.size(); lo += batch) {
            size_t hi = std::min(lo + batch, train.size());
            Batch b = detail::seq_batch(train, order, lo, hi, train.num_classes);
            RnnCodeBatch cb = rnn_encode(st, b.x);
            double loss = rnn_loss(st, cb.z, b.y);
            Matrix logits = matmul_nt(activate(Activation::ReLU, cb.z), st.C);
            size_t hits = 0;
            for (size_t i = 0; i < logits.rows(); ++i) {
                size_t arg = 0;
                for (size_t j = 1; j < logits.cols(); ++j)
                    if (logits(i, j) > logits(i, arg)) arg = j;
                if (b.y(i, arg) == 1.0) ++hits;
            }
            cb = rnn_update_codes(st, std::move(cb), b.x, b.y, cfg, mu);
            rnn_update_weights(st, cb, b.x, b.y, cfg, mu, opt);
            ++global_batch;
            rows.push_back({epoch, global_batch, "train", loss,
                            static_cast<double>(hits) / static_cast<double>(hi - lo), mu, algo,
                            seed});
            mu = mu_step(cfg.mu, mu, MuEvent::Batch);
        }
        mu = mu_step(cfg.mu, mu, MuEvent::Epoch);
        em = rnn_evaluate(st, eval);
        rows.push_back({epoch, global_batch, eval_split, em.loss, em.accuracy, mu, algo, seed});
    }
    return rows;
}

// Full-BPTT baseline (SGD with epoch decay, or Adam), same cadence.
inline std::vector<MetricsRow> bptt_fit(ElmanState& st, const SeqDataset& train,
                                        const SeqDataset& eval, const BaselineConfig& cfg,
                                        int epochs, size_t batch, uint64_t seed,
                                        const std::string& algo,
                                        const std::string& eval_split = "val") {
    cfg.validate();
    RnnAdamStates opt = make_rnn_adam_states(st);
    std::vector<MetricsRow> rows;
    double lr = cfg.lr;
    long global_batch = 0;
    BatchMetrics em = rnn_evaluate(st, eval);
    rows.push_back({0, 0, eval_split, em.loss, em.accuracy, 0.0, algo, seed});
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        auto order = shuffled_indices(train.size(), seed ^ static_cast<uint64_t>(epoch));
        for (size_t lo = 0; lo < train.size(); lo += batch) {
            size_t hi = std::min(lo + batch, train.size());
            Batch b = detail::seq_batch(train, order, lo, hi, train.num_classes);
            RnnCodeBatch cb = rnn_encode(st, b.x);
            double loss = rnn_loss(st, cb.z, b.y);
            Matrix logits = matmul_nt(activate(Activation::ReLU, cb.z), st.C);
            size_t hits = 0;
            for (size_t i = 0; i < logits.rows(); ++i) {
                size_t arg = 0;
                for (size_t j = 1; j < logits.cols(); ++j)
                    if (logits(i, j) > logits(i, arg)) arg = j;
                if (b.y(i, arg) == 1.0) ++hits;
            }
            RnnBlockGrads g = bptt_grads(st, b.x, b.y);
            auto step = [&](Matrix& w, const Matrix& grad, AdamState& state) {
                if (cfg.algo == BaselineAlgo::Adam) {
                    state.apply(w, grad, lr);
                } else {
                    for (size_t i = 0; i < w.size(); ++i) w.data()[i] -= lr * grad.data()[i];
                }
            };
            step(st.U, g.u, opt.u);
            step(st.W, g.w, opt.w);
            step(st.V, g.v, opt.v);
            Matrix b_mat(1, st.d), b_grad(1, st.d);
            for (size_t j = 0; j < st.d; ++j) {
                b_mat(0, j) = st.b[j];
                b_grad(0, j) = g.b[j];
            }
            step(b_mat, b_grad, opt.b);
            for (size_t j = 0; j < st.d; ++j) st.b[j] = b_mat(0, j);
            step(st.C, g.c, opt.c);
            ++global_batch;
            rows.push_back({epoch, global_batch, "train", loss,
                            static_cast<double>(hits) / static_cast<double>(hi - lo), 0.0, algo,
                            seed});
        }
        if (cfg.algo == BaselineAlgo::Sgd) lr *= cfg.sgd_epoch_decay;
        em = rnn_evaluate(st, eval);
        rows.push_back({epoch, global_batch, eval_split, em.loss, em.accuracy, 0.0, algo, seed});
    }
    return rows;
}

// --- checkpoint I/O ---------------------------------------------------------
//
// Sibling container to the feedforward one:
//   bytes 0..7   magic "AMRNN1\0\0"
//   u32          version (1)
//   u64 * 4      d, T, p, m
//   u64          seed
//   f64 payload  U, W, V, b, C row-major
// Round-trips must be bit-exact.

inline void save_rnn_checkpoint(const ElmanState& st, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open checkpoint for writing: " + path.string());
    os.write("AMRNN1\0\0", 8);
    detail::put<uint32_t>(os, 1);
    detail::put<uint64_t>(os, st.d);
    detail::put<uint64_t>(os, st.T);
    detail::put<uint64_t>(os, st.p);
    detail::put<uint64_t>(os, st.m);
    detail::put<uint64_t>(os, st.seed);
    auto blob = [&](const double* ptr, size_t n) {
        os.write(reinterpret_cast<const char*>(ptr), static_cast<std::streamsize>(n * sizeof(double)));
    };
    blob(st.U.data(), st.U.size());
    blob(st.W.data(), st.W.size());
    blob(st.V.data(), st.V.size());
    blob(st.b.data(), st.b.len());
    blob(st.C.data(), st.C.size());
    if (!os) throw FormatError("checkpoint write failed: " + path.string());
}

inline ElmanState load_rnn_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open checkpoint: " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "AMRNN1\0\0", 8) != 0)
        throw FormatError("checkpoint magic mismatch: " + path.string());
    uint32_t version = detail::take<uint32_t>(is, "version");
    if (version != 1)
        throw FormatError("checkpoint version " + std::to_string(version) + " unsupported");
    uint64_t dims[4];
    const char* names[] = {"hidden width", "sequence length", "step width", "class count"};
    for (int i = 0; i < 4; ++i) {
        dims[i] = detail::take<uint64_t>(is, names[i]);
        if (dims[i] < 1 || dims[i] > 1ULL << 32)
            throw FormatError(std::string("checkpoint ") + names[i] + " out of range");
    }
    uint64_t seed = detail::take<uint64_t>(is, "seed");
    ElmanState st = init_elman(static_cast<size_t>(dims[0]), static_cast<size_t>(dims[1]),
                               static_cast<size_t>(dims[2]), static_cast<size_t>(dims[3]), seed);
    auto blob = [&](double* ptr, size_t n, const char* what) {
        is.read(reinterpret_cast<char*>(ptr), static_cast<std::streamsize>(n * sizeof(double)));
        if (!is) throw FormatError(std::string("checkpoint truncated in ") + what);
        if (!all_finite(ptr, n))
            throw FormatError(std::string("checkpoint ") + what + " has non-finite entries");
    };
    blob(st.U.data(), st.U.size(), "input weights");
    blob(st.W.data(), st.W.size(), "recurrent weights");
    blob(st.V.data(), st.V.size(), "readout weights");
    blob(st.b.data(), st.b.len(), "bias");
    blob(st.C.data(), st.C.size(), "class weights");
    return st;
}

}  // namespace altmin
