#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "altmin/common.hpp"
#include "altmin/gradcheck.hpp"
#include "altmin/matrix.hpp"
#include "altmin/rnn.hpp"

using namespace altmin;
namespace fs = std::filesystem;

namespace {

Matrix random_batch(Rng& rng, size_t rows, size_t cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

Matrix labels_for(Rng& rng, size_t rows, size_t m) {
    Matrix y(rows, m);
    for (size_t i = 0; i < rows; ++i) y(i, rng.below(m)) = 1.0;
    return y;
}

void zero_weights(ElmanState& st) {
    for (size_t i = 0; i < st.U.size(); ++i) st.U.data()[i] = 0.0;
    for (size_t i = 0; i < st.W.size(); ++i) st.W.data()[i] = 0.0;
    for (size_t i = 0; i < st.V.size(); ++i) st.V.data()[i] = 0.0;
    for (size_t i = 0; i < st.b.len(); ++i) st.b[i] = 0.0;
}

// Length-T sequences whose mean sign carries the class.
SeqDataset easy_sequences(size_t n, size_t T, uint64_t seed) {
    Rng rng(substream(seed, 0x5eb));
    SeqDataset ds;
    ds.T = T;
    ds.p = 1;
    ds.num_classes = 2;
    ds.sequences = Matrix(n, T);
    for (size_t i = 0; i < n; ++i) {
        int cls = static_cast<int>(i % 2);
        double center = cls == 0 ? 2.0 : -2.0;
        for (size_t t = 0; t < T; ++t) ds.sequences(i, t) = center + 0.2 * rng.normal();
        ds.labels.push_back(cls);
    }
    return ds;
}

}  // namespace

TEST_CASE("elman init is shaped, bounded, and deterministic") {
    ElmanState st = init_elman(5, 7, 3, 4, 77);
    REQUIRE(st.U.rows() == 5);
    REQUIRE(st.U.cols() == 3);
    REQUIRE(st.W.rows() == 5);
    REQUIRE(st.W.cols() == 5);
    REQUIRE(st.V.rows() == 1);
    REQUIRE(st.V.cols() == 5);
    REQUIRE(st.b.len() == 5);
    REQUIRE(st.C.rows() == 4);
    REQUIRE(st.C.cols() == 7);
    for (size_t i = 0; i < st.b.len(); ++i) REQUIRE(st.b[i] == 0.0);
    double bound_u = 1.0 / std::sqrt(3.0);
    for (size_t i = 0; i < st.U.size(); ++i) REQUIRE(std::abs(st.U.data()[i]) <= bound_u);
    double bound_c = 1.0 / std::sqrt(7.0);
    for (size_t i = 0; i < st.C.size(); ++i) REQUIRE(std::abs(st.C.data()[i]) <= bound_c);

    ElmanState again = init_elman(5, 7, 3, 4, 77);
    REQUIRE(st.U == again.U);
    REQUIRE(st.W == again.W);
    REQUIRE(st.C == again.C);
    ElmanState other = init_elman(5, 7, 3, 4, 78);
    REQUIRE(st.U != other.U);
}

TEST_CASE("input shape is checked") {
    ElmanState st = init_elman(3, 4, 2, 2, 79);
    REQUIRE_THROWS_AS(rnn_encode(st, Matrix(2, 7)), DimensionError);
    REQUIRE_NOTHROW(rnn_encode(st, Matrix(2, 8)));
}

TEST_CASE("silent unit produces zero codes and chance loss") {
    ElmanState st = init_elman(3, 4, 2, 5, 81);
    zero_weights(st);
    Rng rng(61);
    Matrix x = random_batch(rng, 3, 8);
    RnnCodeBatch cb = rnn_encode(st, x);
    for (const Matrix& c : cb.codes)
        for (size_t i = 0; i < c.size(); ++i) REQUIRE(c.data()[i] == 0.0);
    for (size_t i = 0; i < cb.z.size(); ++i) REQUIRE(cb.z.data()[i] == 0.0);
    Matrix y = labels_for(rng, 3, 5);
    REQUIRE(rnn_loss(st, cb.z, y) == Catch::Approx(std::log(5.0)).margin(1e-12));
}

TEST_CASE("encoded codes satisfy the recurrence exactly") {
    ElmanState st = init_elman(4, 5, 2, 3, 83);
    Rng rng(62);
    Matrix x = random_batch(rng, 3, 10);
    RnnCodeBatch cb = rnn_encode(st, x);
    Matrix h;
    for (size_t t = 0; t < st.T; ++t) {
        Matrix drive = detail::rnn_drive(st, detail::time_slice(x, t, st.p), h);
        for (size_t i = 0; i < drive.size(); ++i)
            REQUIRE(cb.codes[t].data()[i] == drive.data()[i]);
        h = activate(Activation::Tanh, cb.codes[t]);
        Matrix zt = matmul_nt(h, st.V);
        for (size_t i = 0; i < x.rows(); ++i) REQUIRE(cb.z(i, t) == zt(i, 0));
    }
}

TEST_CASE("a single unrolled step is an mlp with a constant-one feature") {
    ElmanState st = init_elman(4, 1, 3, 3, 85);
    Rng rng(63);
    st.b = Vector(4);
    for (size_t i = 0; i < 4; ++i) st.b[i] = 0.3 * rng.normal();
    Matrix x = random_batch(rng, 5, 3);
    Matrix y = labels_for(rng, 5, 3);

    NetworkSpec spec{{4, 4, 1, 3}, {Activation::Tanh, Activation::ReLU}, 0};
    NetworkState net{spec, {}};
    Matrix w1(4, 4);
    for (size_t i = 0; i < 4; ++i) {
        for (size_t j = 0; j < 3; ++j) w1(i, j) = st.U(i, j);
        w1(i, 3) = st.b[i];
    }
    net.weights.push_back(w1);
    net.weights.push_back(st.V);
    net.weights.push_back(st.C);

    Matrix x1(5, 4);
    for (size_t i = 0; i < 5; ++i) {
        for (size_t j = 0; j < 3; ++j) x1(i, j) = x(i, j);
        x1(i, 3) = 1.0;
    }

    RnnCodeBatch rcb = rnn_encode(st, x);
    CodeBatch mcb = encode_input(net, x1);
    for (size_t i = 0; i < 5; ++i) {
        for (size_t j = 0; j < 4; ++j)
            REQUIRE(rcb.codes[0](i, j) == Catch::Approx(mcb.codes[0](i, j)).margin(1e-12));
        REQUIRE(rcb.z(i, 0) == Catch::Approx(mcb.codes[1](i, 0)).margin(1e-12));
    }
    REQUIRE(rnn_loss(st, rcb.z, y) == Catch::Approx(batch_loss(net, mcb, y)).margin(1e-12));

    RnnBlockGrads rg = bptt_grads(st, x, y);
    std::vector<Matrix> mg = backprop_grads(net, x1, y);
    for (size_t i = 0; i < 4; ++i) {
        for (size_t j = 0; j < 3; ++j)
            REQUIRE(rg.u(i, j) == Catch::Approx(mg[0](i, j)).margin(1e-10));
        REQUIRE(rg.b[i] == Catch::Approx(mg[0](i, 3)).margin(1e-10));
    }
    for (size_t j = 0; j < 4; ++j) REQUIRE(rg.v(0, j) == Catch::Approx(mg[1](0, j)).margin(1e-10));
    for (size_t i = 0; i < rg.c.size(); ++i)
        REQUIRE(rg.c.data()[i] == Catch::Approx(mg[2].data()[i]).margin(1e-10));
    for (size_t i = 0; i < rg.w.size(); ++i) REQUIRE(rg.w.data()[i] == 0.0);
}

TEST_CASE("loss is invariant to a per-step rescaling absorbed by the readout") {
    ElmanState st = init_elman(3, 4, 2, 3, 87);
    Rng rng(64);
    Matrix z = random_batch(rng, 5, 4);
    Matrix y = labels_for(rng, 5, 3);
    double base = rnn_loss(st, z, y);

    ElmanState scaled = st;
    Vector s{0.5, 2.0, 3.0, 0.25};
    Matrix z2 = z;
    for (size_t i = 0; i < 5; ++i)
        for (size_t t = 0; t < 4; ++t) z2(i, t) *= s[t];
    for (size_t j = 0; j < 3; ++j)
        for (size_t t = 0; t < 4; ++t) scaled.C(j, t) /= s[t];
    REQUIRE(rnn_loss(scaled, z2, y) == Catch::Approx(base).margin(1e-12));
}

TEST_CASE("code phase with zero iterations is the identity") {
    ElmanState st = init_elman(3, 3, 2, 2, 89);
    Rng rng(65);
    Matrix x = random_batch(rng, 2, 6);
    Matrix y = labels_for(rng, 2, 2);
    RnnCodeBatch cb = rnn_encode(st, x);
    AmConfig cfg;
    cfg.code_iters = 0;
    RnnCodeBatch out = rnn_update_codes(st, cb, x, y, cfg, 0.5);
    REQUIRE(out.z == cb.z);
    for (size_t t = 0; t < 3; ++t) REQUIRE(out.codes[t] == cb.codes[t]);
    REQUIRE_THROWS_AS(rnn_update_codes(st, cb, x, y, cfg, 0.0), ConfigError);
}

TEST_CASE("decoupled code subproblems solve in closed form") {
    // W = 0 and V = 0 reduce every c-subproblem to mu ||c - drive||^2 and the
    // z-phase (with C = 0) to mu ||z||^2; one gradient step at lr = 1/(2 mu)
    // lands on the minimizer.
    ElmanState st = init_elman(4, 3, 2, 3, 91);
    Rng rng(66);
    for (size_t i = 0; i < st.W.size(); ++i) st.W.data()[i] = 0.0;
    for (size_t i = 0; i < st.V.size(); ++i) st.V.data()[i] = 0.0;
    for (size_t i = 0; i < st.C.size(); ++i) st.C.data()[i] = 0.0;
    for (size_t i = 0; i < 4; ++i) st.b[i] = 0.2 * rng.normal();

    Matrix x = random_batch(rng, 3, 6);
    Matrix y = labels_for(rng, 3, 3);
    RnnCodeBatch cb = rnn_encode(st, x);
    for (Matrix& c : cb.codes)
        for (size_t i = 0; i < c.size(); ++i) c.data()[i] += rng.normal();
    for (size_t i = 0; i < cb.z.size(); ++i) cb.z.data()[i] += rng.normal();

    double mu = 0.7;
    AmConfig cfg;
    cfg.code_iters = 1;
    cfg.code_lr = 0.5 / mu;
    RnnCodeBatch out = rnn_update_codes(st, cb, x, y, cfg, mu);

    for (size_t i = 0; i < out.z.size(); ++i)
        REQUIRE(out.z.data()[i] == Catch::Approx(0.0).margin(1e-12));
    for (size_t t = 0; t < st.T; ++t) {
        // W = 0: the drive ignores the previous code entirely.
        Matrix drive = detail::rnn_drive(st, detail::time_slice(x, t, st.p), Matrix());
        for (size_t i = 0; i < drive.size(); ++i)
            REQUIRE(out.codes[t].data()[i] == Catch::Approx(drive.data()[i]).margin(1e-12));
    }
}

TEST_CASE("z phase never increases its objective") {
    ElmanState st = init_elman(4, 5, 2, 3, 93);
    Rng rng(67);
    Matrix x = random_batch(rng, 4, 10);
    Matrix y = labels_for(rng, 4, 3);
    RnnCodeBatch cb = rnn_encode(st, x);
    for (size_t i = 0; i < cb.z.size(); ++i) cb.z.data()[i] += rng.normal();

    double mu = 0.4;
    Matrix ctc(5, 5);
    for (size_t a = 0; a < 5; ++a)
        for (size_t b = 0; b < 5; ++b)
            for (size_t k = 0; k < 3; ++k) ctc(a, b) += st.C(k, a) * st.C(k, b);
    AmConfig cfg;
    cfg.code_iters = 1;
    cfg.code_lr = 1.0 / (lambda_max(ctc) + 2.0 * mu);

    // zhat is frozen at the pre-sweep codes; the z phase runs before any code
    // moves, so the phase objective is measurable from outside.
    Matrix zhat(4, 5);
    for (size_t t = 0; t < 5; ++t) {
        Matrix h = activate(Activation::Tanh, cb.codes[t]);
        Matrix zt = matmul_nt(h, st.V);
        for (size_t i = 0; i < 4; ++i) zhat(i, t) = zt(i, 0);
    }
    auto phase_obj = [&](const Matrix& z) {
        double v = 0.0;
        Matrix logits = matmul_nt(activate(Activation::ReLU, z), st.C);
        for (size_t i = 0; i < 4; ++i) {
            Vector zl = logits.row_vec(i);
            double picked = 0.0;
            for (size_t j = 0; j < 3; ++j)
                if (y(i, j) == 1.0) picked = zl[j];
            v += log_sum_exp(zl) - picked;
        }
        for (size_t i = 0; i < z.size(); ++i) {
            double r = z.data()[i] - zhat.data()[i];
            v += mu * r * r;
        }
        return v;
    };

    // The step size only guarantees descent while the ReLU stays on one side
    // per coordinate (a coordinate whose optimum sits at the kink flips sign
    // every step), so sample fresh states and check the steps whose endpoints
    // share signs: those segments stay in one region.
    int checked = 0;
    for (int trial = 0; trial < 200 && checked < 10; ++trial) {
        RnnCodeBatch cur = cb;
        for (size_t i = 0; i < cur.z.size(); ++i) cur.z.data()[i] += rng.normal();
        for (size_t t = 0; t < 5; ++t) {
            Matrix h = activate(Activation::Tanh, cur.codes[t]);
            Matrix zt = matmul_nt(h, st.V);
            for (size_t i = 0; i < 4; ++i) zhat(i, t) = zt(i, 0);
        }
        double prev = phase_obj(cur.z);
        Matrix z_before = cur.z;
        RnnCodeBatch stepped = rnn_update_codes(st, cur, x, y, cfg, mu);
        bool mask_stable = true;
        for (size_t i = 0; i < stepped.z.size(); ++i)
            if ((z_before.data()[i] > 0.0) != (stepped.z.data()[i] > 0.0)) mask_stable = false;
        if (mask_stable) {
            ++checked;
            REQUIRE(phase_obj(stepped.z) <= prev + 1e-9 * (1.0 + std::abs(prev)));
        }
    }
    REQUIRE(checked >= 10);
}

TEST_CASE("feedforward codes move only the class weights") {
    ElmanState st = init_elman(3, 4, 2, 3, 95);
    Rng rng(68);
    Matrix x = random_batch(rng, 3, 8);
    Matrix y = labels_for(rng, 3, 3);
    RnnCodeBatch cb = rnn_encode(st, x);
    ElmanState before = st;
    AmConfig cfg;
    RnnAdamStates opt = make_rnn_adam_states(st);
    rnn_update_weights(st, cb, x, y, cfg, 0.3, opt);
    REQUIRE(st.U == before.U);
    REQUIRE(st.W == before.W);
    REQUIRE(st.V == before.V);
    REQUIRE(st.b == before.b);
    REQUIRE(st.C != before.C);
}

TEST_CASE("weight blocks are order independent") {
    ElmanState st = init_elman(3, 4, 2, 3, 97);
    Rng rng(69);
    Matrix x = random_batch(rng, 3, 8);
    Matrix y = labels_for(rng, 3, 3);
    RnnCodeBatch cb = rnn_encode(st, x);
    AmConfig cfg;
    cfg.code_iters = 2;
    cb = rnn_update_codes(st, cb, x, y, cfg, 0.3);

    ElmanState forward = st;
    RnnAdamStates opt_f = make_rnn_adam_states(forward);
    cfg.weight_iters = 1;
    rnn_update_weights(forward, cb, x, y, cfg, 0.3, opt_f);

    // Reverse application order by hand; the gradients are all computed from
    // the same frozen codes, so the result must match bit for bit.
    ElmanState reversed = st;
    RnnAdamStates opt_r = make_rnn_adam_states(reversed);
    RnnBlockGrads g = rnn_weight_grads(reversed, cb, x, y, 0.3);
    opt_r.c.apply(reversed.C, g.c, cfg.weight_lr);
    Matrix b_mat(1, 3), b_grad(1, 3);
    for (size_t j = 0; j < 3; ++j) {
        b_mat(0, j) = reversed.b[j];
        b_grad(0, j) = g.b[j];
    }
    opt_r.b.apply(b_mat, b_grad, cfg.weight_lr);
    for (size_t j = 0; j < 3; ++j) reversed.b[j] = b_mat(0, j);
    opt_r.v.apply(reversed.V, g.v, cfg.weight_lr);
    opt_r.w.apply(reversed.W, g.w, cfg.weight_lr);
    opt_r.u.apply(reversed.U, g.u, cfg.weight_lr);

    REQUIRE(forward.U == reversed.U);
    REQUIRE(forward.W == reversed.W);
    REQUIRE(forward.V == reversed.V);
    REQUIRE(forward.b == reversed.b);
    REQUIRE(forward.C == reversed.C);
}

TEST_CASE("rnn gradient families pass") {
    GradcheckOptions opts;
    CheckResult r = check_rnn_blocks(opts);
    INFO(r.detail);
    REQUIRE(r.pass);
}

TEST_CASE("zero input with zero bias silences the input gradient") {
    ElmanState st = init_elman(3, 4, 2, 3, 99);
    Rng rng(70);
    Matrix x(3, 8);
    Matrix y = labels_for(rng, 3, 3);
    RnnBlockGrads g = bptt_grads(st, x, y);
    for (size_t i = 0; i < g.u.size(); ++i) REQUIRE(g.u.data()[i] == 0.0);
}

TEST_CASE("both rnn trainers run deterministically and learn an easy task") {
    SeqDataset train = easy_sequences(16, 3, 41);
    SeqDataset val = easy_sequences(8, 3, 42);

    auto run_am = [&]() {
        ElmanState st = init_elman(5, 3, 1, 2, 101);
        AmConfig cfg;
        cfg.weight_lr = 0.05;
        cfg.code_iters = 2;
        cfg.weight_iters = 2;
        return rnn_fit(st, train, val, cfg, 6, 16, 51, "rnn-am");
    };
    auto a = run_am();
    auto b = run_am();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i)
        REQUIRE(metrics_row_csv(a[i]) == metrics_row_csv(b[i]));
    REQUIRE(a.size() == 1 + 6 * 2);
    REQUIRE(a.back().loss < a.front().loss);

    ElmanState st = init_elman(5, 3, 1, 2, 101);
    BaselineConfig bcfg;
    bcfg.algo = BaselineAlgo::Adam;
    bcfg.lr = 0.02;
    auto rows = bptt_fit(st, train, val, bcfg, 6, 16, 51, "rnn-adam");
    REQUIRE(rows.size() == 1 + 6 * 2);
    REQUIRE(rows.back().loss < rows.front().loss);
}

TEST_CASE("diverging z updates raise a numeric error") {
    ElmanState st = init_elman(3, 3, 2, 2, 103);
    Rng rng(71);
    Matrix x = random_batch(rng, 2, 6);
    Matrix y = labels_for(rng, 2, 2);
    RnnCodeBatch cb = rnn_encode(st, x);
    for (size_t i = 0; i < cb.z.size(); ++i) cb.z.data()[i] += 1.0;
    AmConfig cfg;
    cfg.code_lr = 1e30;
    cfg.code_iters = 100;
    REQUIRE_THROWS_AS(rnn_update_codes(st, cb, x, y, cfg, 0.5), NumericError);
}

TEST_CASE("rnn checkpoint round-trip is bit-exact") {
    ElmanState st = init_elman(4, 6, 3, 5, 105);
    Rng rng(72);
    for (size_t i = 0; i < st.b.len(); ++i) st.b[i] = rng.normal();
    fs::path path = fs::temp_directory_path() /
                    ("altmin-rnn-ckpt-" + std::to_string(::getpid()) + ".bin");
    save_rnn_checkpoint(st, path);
    ElmanState back = load_rnn_checkpoint(path);
    REQUIRE(back.d == st.d);
    REQUIRE(back.T == st.T);
    REQUIRE(back.p == st.p);
    REQUIRE(back.m == st.m);
    REQUIRE(back.seed == st.seed);
    REQUIRE(back.U == st.U);
    REQUIRE(back.W == st.W);
    REQUIRE(back.V == st.V);
    REQUIRE(back.b == st.b);
    REQUIRE(back.C == st.C);

    std::ifstream is(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    is.close();
    SECTION("magic mismatch") {
        bytes[2] ^= 0x11;
        std::ofstream os(path, std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        os.close();
        REQUIRE_THROWS_AS(load_rnn_checkpoint(path), FormatError);
    }
    SECTION("truncated payload") {
        std::ofstream os(path, std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        os.close();
        REQUIRE_THROWS_AS(load_rnn_checkpoint(path), FormatError);
    }
    fs::remove(path);
}

TEST_CASE("sequence dataset helpers") {
    Sequences seqs;
    seqs.T = 3;
    seqs.p = 2;
    seqs.data = Matrix(4, 6);
    std::vector<int> labels{0, 1, 0, 1};
    SeqDataset ds = make_seq_dataset(seqs, labels, 2);
    REQUIRE(ds.size() == 4);
    REQUIRE(ds.T == 3);
    REQUIRE(ds.p == 2);
    REQUIRE_THROWS_AS(make_seq_dataset(seqs, std::vector<int>{0, 1}, 2), DimensionError);
}
