#pragma once

// Online alternating minimization for the code-augmented objective
//
//   sum_t L(y_t, sigma_L(c_t^L), W^{L+1})
//     + mu * sum_t sum_l ||c_t^l - W^l sigma_{l-1}(c_t^{l-1})||^2
//
// Each minibatch alternates: encode codes feedforward, update codes layer by
// layer backward (gradient steps on smooth layers, coordinate descent on Sign
// layers), then update every weight matrix on its own decoupled subproblem.
//
// Two variants:
//   AmAdam - each layer's subproblem is minimized by Adam steps on the
//            current minibatch only.
//   AmMem  - hidden layers minimize a running surrogate over the whole
//            stream, represented by co-activation memory A = sum a a^T,
//            B = sum c a^T, via block coordinate descent on columns; the
//            output layer keeps the Adam path (the multinomial loss has no
//            memory form).

#include <string>
#include <vector>

#include "activation.hpp"
#include "adam.hpp"
#include "common.hpp"
#include "datasets.hpp"
#include "matrix.hpp"
#include "metrics.hpp"
#include "multinomial.hpp"
#include "network.hpp"

namespace altmin {

// --- mu schedule -------------------------------------------------------------

struct MuSchedule {
    double mu0 = 0.01;
    double batch_increment = 0.0;
    double epoch_multiplier = 1.0;
    double mu_max = 1.5;

    void validate() const {
        if (mu0 < 0.0 || batch_increment < 0.0 || epoch_multiplier < 1.0 || mu_max <= 0.0)
            throw ConfigError("mu schedule requires mu0 >= 0, increment >= 0, multiplier >= 1, "
                              "mu_max > 0");
    }
};

enum class MuEvent { Batch, Epoch };

inline double mu_step(const MuSchedule& s, double mu, MuEvent event) {
    double next = event == MuEvent::Batch ? mu + s.batch_increment : mu * s.epoch_multiplier;
    return std::min(next, s.mu_max);
}

// --- configuration -----------------------------------------------------------

enum class AmVariant { AmAdam, AmMem };

struct AmConfig {
    AmVariant variant = AmVariant::AmAdam;
    double weight_lr = 0.001;
    double code_lr = 0.5;
    int code_iters = 1;
    int weight_iters = 1;
    MuSchedule mu;

    void validate() const {
        if (weight_lr <= 0.0 || code_lr <= 0.0)
            throw ConfigError("learning rates must be > 0");
        if (code_iters < 1 || weight_iters < 1)
            throw ConfigError("code_iters and weight_iters must be >= 1");
        mu.validate();
    }
};

// --- co-activation memory ------------------------------------------------------

struct MemoryState {
    std::vector<Matrix> A;  // A[l]: m_{l-1} x m_{l-1}
    std::vector<Matrix> B;  // B[l]: m_l x m_{l-1}
    size_t sample_count = 0;

    static MemoryState zeros(const NetworkSpec& spec) {
        MemoryState mem;
        for (size_t l = 0; l + 2 < spec.layer_sizes.size(); ++l) {
            mem.A.emplace_back(spec.layer_sizes[l], spec.layer_sizes[l]);
            mem.B.emplace_back(spec.layer_sizes[l + 1], spec.layer_sizes[l]);
        }
        return mem;
    }
};

// --- binary (Sign) code updates ------------------------------------------------

namespace detail {

inline double sign_of(double v) { return v >= 0.0 ? 1.0 : -1.0; }

constexpr double kSignBoundary = 1e-3;

// Penalty contribution (c_i - drive_i)^2 at the best c_i consistent with
// pattern sign s: zero when the drive already has that sign, else the
// boundary value s*eps.
inline double sign_penalty(double drive, double s) {
    if (sign_of(drive) == s) return 0.0;
    double d = s * kSignBoundary - drive;
    return d * d;
}

inline double resolve_sign_code(double drive, double s) {
    return sign_of(drive) == s ? drive : s * kSignBoundary;
}

}  // namespace detail

// One coordinate-descent sweep for a Sign layer coupled to the next linear
// layer: over sign patterns s (and the pre-activation c consistent with s),
// minimizes ||next_c - next_w s||^2 + ||c - drive||^2 (both terms share the
// same mu weight, which therefore cancels). Coordinates visited in ascending
// order; the residual r = next_c - next_w s is maintained incrementally.
// Never increases the objective. Ties prefer the drive's sign.
inline Vector binary_code_update(const Vector& c, const Vector& drive, const Matrix& next_w,
                                 const Vector& next_c, double /*mu*/) {
    size_t width = c.len();
    if (next_w.cols() != width || drive.len() != width || next_w.rows() != next_c.len())
        throw DimensionError("binary_code_update: inconsistent shapes");
    std::vector<double> s(width);
    for (size_t i = 0; i < width; ++i) s[i] = detail::sign_of(c[i]);
    Vector r(next_c.len());
    for (size_t j = 0; j < next_c.len(); ++j) {
        double pred = 0.0;
        for (size_t i = 0; i < width; ++i) pred += next_w(j, i) * s[i];
        r[j] = next_c[j] - pred;
    }
    for (size_t i = 0; i < width; ++i) {
        double col_r = 0.0, col_sq = 0.0;
        for (size_t j = 0; j < next_c.len(); ++j) {
            col_r += r[j] * next_w(j, i);
            col_sq += next_w(j, i) * next_w(j, i);
        }
        // ||r_flip||^2 - ||r||^2 for flipping s_i, since r_flip = r + 2 s_i w_i.
        double delta_quad = 4.0 * s[i] * col_r + 4.0 * col_sq;
        double stay = detail::sign_penalty(drive[i], s[i]);
        double flip = delta_quad + detail::sign_penalty(drive[i], -s[i]);
        bool do_flip = flip < stay || (flip == stay && detail::sign_of(drive[i]) == -s[i]);
        if (do_flip) {
            for (size_t j = 0; j < next_c.len(); ++j) r[j] += 2.0 * s[i] * next_w(j, i);
            s[i] = -s[i];
        }
    }
    Vector out(width);
    for (size_t i = 0; i < width; ++i) out[i] = detail::resolve_sign_code(drive[i], s[i]);
    return out;
}

// Sign layer feeding the classifier: minimizes
// L(y, s, W_out columns) + mu ||c - drive||^2. w_out maps the sign pattern to
// class logits as z = w_out s (w_out is m x width).
inline Vector binary_code_update_output(const Vector& c, const Vector& drive, const Matrix& w_out,
                                        const Vector& y, double mu) {
    size_t width = c.len();
    if (w_out.cols() != width || drive.len() != width || w_out.rows() != y.len())
        throw DimensionError("binary_code_update_output: inconsistent shapes");
    check_one_hot(y);
    size_t y_idx = 0;
    for (size_t j = 0; j < y.len(); ++j)
        if (y[j] == 1.0) y_idx = j;
    std::vector<double> s(width);
    for (size_t i = 0; i < width; ++i) s[i] = detail::sign_of(c[i]);
    Vector z(w_out.rows());
    for (size_t j = 0; j < w_out.rows(); ++j) {
        double acc = 0.0;
        for (size_t i = 0; i < width; ++i) acc += w_out(j, i) * s[i];
        z[j] = acc;
    }
    Vector z_flip(w_out.rows());
    for (size_t i = 0; i < width; ++i) {
        for (size_t j = 0; j < w_out.rows(); ++j) z_flip[j] = z[j] - 2.0 * s[i] * w_out(j, i);
        double stay = log_sum_exp(z) - z[y_idx] + mu * detail::sign_penalty(drive[i], s[i]);
        double flip = log_sum_exp(z_flip) - z_flip[y_idx] + mu * detail::sign_penalty(drive[i], -s[i]);
        bool do_flip = flip < stay || (flip == stay && detail::sign_of(drive[i]) == -s[i]);
        if (do_flip) {
            z = z_flip;
            s[i] = -s[i];
        }
    }
    Vector out(width);
    for (size_t i = 0; i < width; ++i) out[i] = detail::resolve_sign_code(drive[i], s[i]);
    return out;
}

// --- code updates ----------------------------------------------------------------

// Backward Gauss-Seidel sweep l = L..1. Layer L minimizes
//   L(y, sigma_L(c), W^{L+1}) + mu ||c - W^L sigma(c^{L-1})||^2
// and l < L minimizes
//   mu ||c^{l+1} - W^{l+1} sigma_l(c)||^2 + mu ||c - W^l sigma(c^{l-1})||^2,
// each by cfg.code_iters plain gradient steps of size cfg.code_lr (samples
// independent, so the batch is updated as whole matrices). Sign layers run
// cfg.code_iters coordinate-descent sweeps instead.
inline CodeBatch update_codes(const NetworkState& net, CodeBatch cb, const Matrix& labels,
                              const AmConfig& cfg, double mu) {
    check_codes_shape(net, cb);
    if (mu <= 0.0) throw ConfigError("update_codes requires mu > 0");
    size_t hidden = net.spec.hidden_count();
    if (labels.rows() != cb.batch() || labels.cols() != net.spec.class_count())
        throw DimensionError("update_codes: labels are " + shape_str(labels.rows(), labels.cols()) +
                             ", expected " + shape_str(cb.batch(), net.spec.class_count()));
    for (size_t li = hidden; li-- > 0;) {
        Activation act = net.spec.hidden_activations[li];
        bool is_last = li + 1 == hidden;
        // Drive term W^l a^{l-1}; c^{l-1} is untouched until later in the sweep.
        Matrix drive = matmul_nt(layer_activation(net, cb, li), net.weights[li]);
        Matrix& c = cb.codes[li];
        if (act == Activation::Sign) {
            for (int it = 0; it < cfg.code_iters; ++it) {
                for (size_t i = 0; i < cb.batch(); ++i) {
                    Vector updated =
                        is_last ? binary_code_update_output(c.row_vec(i), drive.row_vec(i),
                                                            net.weights[li + 1], labels.row_vec(i),
                                                            mu)
                                : binary_code_update(c.row_vec(i), drive.row_vec(i),
                                                     net.weights[li + 1],
                                                     cb.codes[li + 1].row_vec(i), mu);
                    c.set_row(i, updated);
                }
            }
            continue;
        }
        const Matrix& next_w = net.weights[li + 1];
        for (int it = 0; it < cfg.code_iters; ++it) {
            Matrix a = activate(act, c);
            Matrix grad(c.rows(), c.cols());
            if (is_last) {
                Matrix logits = matmul_nt(a, next_w);
                for (size_t i = 0; i < logits.rows(); ++i) {
                    Vector p = softmax(logits.row_vec(i));
                    for (size_t j = 0; j < p.len(); ++j) logits(i, j) = p[j] - labels(i, j);
                }
                grad = matmul(logits, next_w);  // rows: W^{L+1,T} (p - y)
            } else {
                Matrix resid = matmul_nt(a, next_w);
                for (size_t i = 0; i < resid.size(); ++i)
                    resid.data()[i] = cb.codes[li + 1].data()[i] - resid.data()[i];
                grad = matmul(resid, next_w);
                for (size_t i = 0; i < grad.size(); ++i) grad.data()[i] *= -2.0 * mu;
            }
            for (size_t i = 0; i < grad.size(); ++i) {
                double chain = activate_grad_scalar(act, c.data()[i]);
                grad.data()[i] = grad.data()[i] * chain + 2.0 * mu * (c.data()[i] - drive.data()[i]);
            }
            for (size_t i = 0; i < c.size(); ++i) c.data()[i] -= cfg.code_lr * grad.data()[i];
        }
        if (!all_finite(c))
            throw NumericError("update_codes: non-finite code at layer " + std::to_string(li + 1),
                               static_cast<int>(li + 1));
    }
    return cb;
}

// --- weight updates ---------------------------------------------------------------

// Gradient of the layer subproblem at the current weights. Hidden layer l:
// (mu/batch) ||C^l - A_in W^T||_F^2; output layer: mean multinomial loss.
inline Matrix layer_weight_grad(const NetworkState& net, const CodeBatch& cb, const Matrix& labels,
                                double mu, size_t li) {
    size_t hidden = net.spec.hidden_count();
    Matrix a_in = layer_activation(net, cb, li);
    double inv_batch = 1.0 / static_cast<double>(cb.batch());
    if (li == hidden) {
        Matrix logits = matmul_nt(a_in, net.weights[li]);
        for (size_t i = 0; i < logits.rows(); ++i) {
            Vector p = softmax(logits.row_vec(i));
            for (size_t j = 0; j < p.len(); ++j) logits(i, j) = (p[j] - labels(i, j)) * inv_batch;
        }
        return matmul_tn(logits, a_in);
    }
    Matrix resid = matmul_nt(a_in, net.weights[li]);
    for (size_t i = 0; i < resid.size(); ++i)
        resid.data()[i] = (resid.data()[i] - cb.codes[li].data()[i]) * 2.0 * mu * inv_batch;
    return matmul_tn(resid, a_in);
}

// cfg.weight_iters Adam steps on one layer's subproblem. Layers read only
// codes, never other layers' weights, so update order is immaterial.
inline void adam_update_layer(NetworkState& net, const CodeBatch& cb, const Matrix& labels,
                              const AmConfig& cfg, double mu, AdamState& opt, size_t li) {
    for (int it = 0; it < cfg.weight_iters; ++it) {
        Matrix g = layer_weight_grad(net, cb, labels, mu, li);
        if (!all_finite(g))
            throw NumericError("non-finite weight gradient at layer " + std::to_string(li + 1),
                               static_cast<int>(li + 1));
        opt.apply(net.weights[li], g, cfg.weight_lr);
    }
}

inline void update_weights_adam(NetworkState& net, const CodeBatch& cb, const Matrix& labels,
                                const AmConfig& cfg, double mu, std::vector<AdamState>& opt) {
    check_codes_shape(net, cb);
    if (opt.size() != net.weights.size())
        throw DimensionError("update_weights_adam: expected " + std::to_string(net.weights.size()) +
                             " optimizer states, got " + std::to_string(opt.size()));
    for (size_t li = 0; li < net.weights.size(); ++li)
        adam_update_layer(net, cb, labels, cfg, mu, opt[li], li);
}

// Rank-1 accumulations A^l += a^{l-1} a^{l-1,T}, B^l += c^l a^{l-1,T}, sample
// index ascending (fixed order, so batched and single-sample streams agree
// bit for bit).
inline void update_memory(MemoryState& mem, const NetworkState& net, const CodeBatch& cb) {
    check_codes_shape(net, cb);
    size_t hidden = net.spec.hidden_count();
    if (mem.A.size() != hidden)
        throw DimensionError("memory state has " + std::to_string(mem.A.size()) +
                             " layers, network has " + std::to_string(hidden));
    for (size_t li = 0; li < hidden; ++li) {
        Matrix a_in = layer_activation(net, cb, li);
        Matrix& A = mem.A[li];
        Matrix& B = mem.B[li];
        for (size_t i = 0; i < cb.batch(); ++i) {
            const double* a = a_in.row(i);
            const double* c = cb.codes[li].row(i);
            for (size_t r = 0; r < A.rows(); ++r) {
                double ar = a[r];
                if (ar == 0.0) continue;
                double* Arow = A.row(r);
                for (size_t q = 0; q < A.cols(); ++q) Arow[q] += ar * a[q];
            }
            for (size_t r = 0; r < B.rows(); ++r) {
                double cr = c[r];
                if (cr == 0.0) continue;
                double* Brow = B.row(r);
                for (size_t q = 0; q < B.cols(); ++q) Brow[q] += cr * a[q];
            }
        }
    }
    mem.sample_count += cb.batch();
}

// Surrogate value Tr(W^T W A) - 2 Tr(W^T B) for one hidden layer.
inline double memory_surrogate(const Matrix& w, const Matrix& A, const Matrix& B) {
    Matrix wa = matmul(w, A);
    double v = 0.0;
    for (size_t i = 0; i < w.size(); ++i) v += w.data()[i] * (wa.data()[i] - 2.0 * B.data()[i]);
    return v;
}

// Hidden layers only: cfg.weight_iters block-coordinate sweeps over columns,
// w_j += (b_j - W a_j) / A_jj, ascending j, skipping columns with
// A_jj < 1e-12. The output layer keeps the Adam path.
inline void update_weights_mem(NetworkState& net, const MemoryState& mem, const AmConfig& cfg) {
    size_t hidden = net.spec.hidden_count();
    if (mem.sample_count < 1) throw ConfigError("update_weights_mem: empty memory");
    for (size_t li = 0; li < hidden; ++li) {
        Matrix& w = net.weights[li];
        const Matrix& A = mem.A[li];
        const Matrix& B = mem.B[li];
        for (int sweep = 0; sweep < cfg.weight_iters; ++sweep) {
            for (size_t j = 0; j < w.cols(); ++j) {
                double ajj = A(j, j);
                if (ajj < 1e-12) continue;
                for (size_t r = 0; r < w.rows(); ++r) {
                    double wa = 0.0;
                    const double* wrow = w.row(r);
                    for (size_t k = 0; k < w.cols(); ++k) wa += wrow[k] * A(k, j);
                    w(r, j) += (B(r, j) - wa) / ajj;
                }
            }
        }
    }
}

// --- minibatch step and epoch loop --------------------------------------------------

struct BatchMetrics {
    double loss = 0.0;
    double accuracy = 0.0;
};

// encode -> (metrics at feedforward codes) -> update codes -> update weights
// (AmMem additionally folds the batch into memory first). `mem` may be null
// for AmAdam.
inline BatchMetrics train_minibatch(NetworkState& net, MemoryState* mem, const Matrix& x,
                                    const Matrix& y, const AmConfig& cfg, double mu,
                                    std::vector<AdamState>& opt) {
    CodeBatch cb = encode_input(net, x);
    BatchMetrics metrics{batch_loss(net, cb, y), batch_accuracy(net, cb, y)};
    cb = update_codes(net, cb, y, cfg, mu);
    if (cfg.variant == AmVariant::AmMem) {
        if (!mem) throw ConfigError("AM-mem requires a memory state");
        update_memory(*mem, net, cb);
        update_weights_mem(net, *mem, cfg);
        adam_update_layer(net, cb, y, cfg, mu, opt.back(), net.spec.hidden_count());
    } else {
        update_weights_adam(net, cb, y, cfg, mu, opt);
    }
    return metrics;
}

inline BatchMetrics evaluate_dataset(const NetworkState& net, const Dataset& ds) {
    constexpr size_t kChunk = 2048;
    double loss_sum = 0.0;
    double hit_sum = 0.0;
    for (size_t lo = 0; lo < ds.size(); lo += kChunk) {
        size_t hi = std::min(lo + kChunk, ds.size());
        Matrix x(hi - lo, ds.features.cols());
        Matrix y(hi - lo, static_cast<size_t>(ds.num_classes));
        for (size_t i = lo; i < hi; ++i) {
            x.set_row(i - lo, ds.features.row_vec(i));
            y(i - lo, static_cast<size_t>(ds.labels[i])) = 1.0;
        }
        CodeBatch cb = encode_input(net, x);
        double n = static_cast<double>(hi - lo);
        loss_sum += batch_loss(net, cb, y) * n;
        hit_sum += batch_accuracy(net, cb, y) * n;
    }
    double n = static_cast<double>(ds.size());
    return {loss_sum / n, hit_sum / n};
}

inline std::vector<AdamState> make_adam_states(const NetworkState& net) {
    std::vector<AdamState> opt;
    for (const Matrix& w : net.weights) opt.emplace_back(w.rows(), w.cols());
    return opt;
}

// Epoch loop: seeded shuffle per epoch, one metrics row per minibatch
// (pre-update loss/accuracy), a mu Batch event per minibatch and an Epoch
// event per epoch, one held-out evaluation row per epoch plus one before
// training. The batch column is the cumulative minibatch count.
inline std::vector<MetricsRow> fit(NetworkState& net, const Dataset& train, const Dataset& eval,
                                   const AmConfig& cfg, int epochs, size_t batch, uint64_t seed,
                                   const std::string& algo, const std::string& eval_split = "val") {
    train.validate();
    eval.validate();
    MemoryState mem = MemoryState::zeros(net.spec);
    std::vector<AdamState> opt = make_adam_states(net);
    std::vector<MetricsRow> rows;
    double mu = cfg.mu.mu0;
    long global_batch = 0;
    auto eval_metrics = evaluate_dataset(net, eval);
    rows.push_back({0, 0, eval_split, eval_metrics.loss, eval_metrics.accuracy, mu, algo, seed});
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        MinibatchStream stream(train, batch, seed, static_cast<uint64_t>(epoch));
        for (size_t k = 0; k < stream.count(); ++k) {
            Batch b = stream.get(k);
            BatchMetrics m = train_minibatch(net, &mem, b.x, b.y, cfg, mu, opt);
            ++global_batch;
            rows.push_back({epoch, global_batch, "train", m.loss, m.accuracy, mu, algo, seed});
            mu = mu_step(cfg.mu, mu, MuEvent::Batch);
        }
        mu = mu_step(cfg.mu, mu, MuEvent::Epoch);
        eval_metrics = evaluate_dataset(net, eval);
        rows.push_back({epoch, global_batch, eval_split, eval_metrics.loss, eval_metrics.accuracy,
                        mu, algo, seed});
    }
    return rows;
}

}  // namespace altmin
