#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "altmin/common.hpp"
#include "altmin/matrix.hpp"
#include "altmin/multinomial.hpp"
#include "altmin/network.hpp"

using namespace altmin;
namespace fs = std::filesystem;

namespace {

NetworkSpec small_spec(uint64_t seed = 42) {
    return NetworkSpec{{4, 3, 2}, {Activation::ReLU}, seed};
}

Matrix random_batch(Rng& rng, size_t rows, size_t cols) {
    Matrix m(rows, cols);
    for (size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

Matrix one_hot_labels(const std::vector<size_t>& classes, size_t m) {
    Matrix y(classes.size(), m);
    for (size_t i = 0; i < classes.size(); ++i) y(i, classes[i]) = 1.0;
    return y;
}

fs::path temp_file(const char* stem) {
    return fs::temp_directory_path() / (std::string(stem) + "-" +
                                        std::to_string(::getpid()) + ".bin");
}

}  // namespace

TEST_CASE("spec validation") {
    REQUIRE_THROWS_AS((NetworkSpec{{4, 2}, {}, 0}).validate(), ConfigError);
    REQUIRE_THROWS_AS((NetworkSpec{{4, 0, 2}, {Activation::ReLU}, 0}).validate(), ConfigError);
    REQUIRE_THROWS_AS((NetworkSpec{{4, 3, 2}, {}, 0}).validate(), ConfigError);
    REQUIRE_THROWS_AS(
        (NetworkSpec{{4, 3, 2}, {Activation::ReLU, Activation::Tanh}, 0}).validate(),
        ConfigError);
    REQUIRE_NOTHROW(small_spec().validate());
}

TEST_CASE("init is deterministic in the seed") {
    NetworkState a = init_network(small_spec(42));
    NetworkState b = init_network(small_spec(42));
    NetworkState c = init_network(small_spec(43));
    REQUIRE(a.weights.size() == 2);
    REQUIRE(a.weights[0] == b.weights[0]);
    REQUIRE(a.weights[1] == b.weights[1]);
    REQUIRE(a.weights[0] != c.weights[0]);
}

TEST_CASE("init shapes and bounds") {
    NetworkState net = init_network(small_spec());
    REQUIRE(net.weights[0].rows() == 3);
    REQUIRE(net.weights[0].cols() == 4);
    REQUIRE(net.weights[1].rows() == 2);
    REQUIRE(net.weights[1].cols() == 3);
    // fan_in 4: every entry of W^1 lies in [-1/2, 1/2]; spread should reach
    // past half the range somewhere.
    double peak = 0.0;
    for (size_t i = 0; i < net.weights[0].size(); ++i) {
        double v = net.weights[0].data()[i];
        REQUIRE(std::abs(v) <= 0.5);
        peak = std::max(peak, std::abs(v));
    }
    REQUIRE(peak > 0.25);
}

TEST_CASE("encode matches the layer maps") {
    Rng rng(5);
    NetworkSpec spec{{4, 3, 5, 2}, {Activation::ReLU, Activation::Tanh}, 9};
    NetworkState net = init_network(spec);
    Matrix x = random_batch(rng, 6, 4);
    CodeBatch cb = encode_input(net, x);
    REQUIRE(cb.codes.size() == 2);

    Matrix c1 = matmul_nt(x, net.weights[0]);
    REQUIRE(cb.codes[0] == c1);
    Matrix c2 = matmul_nt(activate(Activation::ReLU, c1), net.weights[1]);
    REQUIRE(cb.codes[1] == c2);

    // Freshly encoded codes satisfy the coupling exactly.
    REQUIRE(penalty_value(net, cb, 1.0) < 1e-20);

    REQUIRE_THROWS_AS(encode_input(net, Matrix(6, 5)), DimensionError);
}

TEST_CASE("zero weights give zero codes and uniform predictions") {
    NetworkState net = init_network(small_spec());
    for (Matrix& w : net.weights)
        for (size_t i = 0; i < w.size(); ++i) w.data()[i] = 0.0;
    Rng rng(6);
    Matrix x = random_batch(rng, 3, 4);
    CodeBatch cb = encode_input(net, x);
    for (size_t i = 0; i < cb.codes[0].size(); ++i) REQUIRE(cb.codes[0].data()[i] == 0.0);
    Matrix p = predict(net, cb);
    for (size_t i = 0; i < p.size(); ++i) REQUIRE(p.data()[i] == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("prediction rows are distributions") {
    Rng rng(7);
    NetworkState net = init_network(NetworkSpec{{5, 6, 3}, {Activation::Tanh}, 11});
    Matrix x = random_batch(rng, 8, 5);
    Matrix p = predict(net, encode_input(net, x));
    for (size_t i = 0; i < p.rows(); ++i) {
        double s = 0.0;
        for (size_t j = 0; j < p.cols(); ++j) {
            REQUIRE(p(i, j) >= 0.0);
            s += p(i, j);
        }
        REQUIRE(s == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("accuracy matches a brute-force count") {
    Rng rng(8);
    NetworkState net = init_network(NetworkSpec{{5, 6, 4}, {Activation::ReLU}, 13});
    Matrix x = random_batch(rng, 32, 5);
    std::vector<size_t> cls(32);
    for (auto& c : cls) c = rng.below(4);
    Matrix y = one_hot_labels(cls, 4);
    CodeBatch cb = encode_input(net, x);
    Matrix p = predict(net, cb);
    size_t hits = 0;
    for (size_t i = 0; i < 32; ++i) {
        size_t arg = 0;
        for (size_t j = 1; j < 4; ++j)
            if (p(i, j) > p(i, arg)) arg = j;
        if (arg == cls[i]) ++hits;
    }
    REQUIRE(batch_accuracy(net, cb, y) == Catch::Approx(hits / 32.0).margin(1e-15));
}

TEST_CASE("batch loss pinned and consistent with the single-sample loss") {
    // Zero weights, 10 classes: mean loss is ln 10 regardless of inputs.
    NetworkSpec spec{{4, 3, 10}, {Activation::ReLU}, 17};
    NetworkState zero = init_network(spec);
    for (Matrix& w : zero.weights)
        for (size_t i = 0; i < w.size(); ++i) w.data()[i] = 0.0;
    Rng rng(9);
    Matrix x = random_batch(rng, 5, 4);
    Matrix y = one_hot_labels({0, 3, 9, 2, 5}, 10);
    REQUIRE(batch_loss(zero, encode_input(zero, x), y) ==
            Catch::Approx(std::log(10.0)).margin(1e-12));

    // One row: batch_loss equals multinomial_loss on sigma_L(c^L) with the
    // transposed readout.
    NetworkState net = init_network(spec);
    Matrix x1 = random_batch(rng, 1, 4);
    Matrix y1 = one_hot_labels({7}, 10);
    CodeBatch cb = encode_input(net, x1);
    Matrix a = layer_activation(net, cb, 1);
    const Matrix& w = net.weights.back();
    Matrix wt(w.cols(), w.rows());
    for (size_t i = 0; i < w.rows(); ++i)
        for (size_t j = 0; j < w.cols(); ++j) wt(j, i) = w(i, j);
    REQUIRE(batch_loss(net, cb, y1) ==
            Catch::Approx(multinomial_loss(y1.row_vec(0), a.row_vec(0), wt)).margin(1e-12));
}

TEST_CASE("batch loss is invariant to row order") {
    Rng rng(10);
    NetworkState net = init_network(NetworkSpec{{6, 5, 3}, {Activation::Tanh}, 19});
    Matrix x = random_batch(rng, 7, 6);
    std::vector<size_t> cls{0, 1, 2, 0, 1, 2, 1};
    Matrix y = one_hot_labels(cls, 3);
    double base = batch_loss(net, encode_input(net, x), y);

    std::vector<size_t> perm{3, 6, 0, 5, 2, 4, 1};
    Matrix xp(7, 6), yp(7, 3);
    for (size_t i = 0; i < 7; ++i) {
        xp.set_row(i, x.row_vec(perm[i]));
        yp.set_row(i, y.row_vec(perm[i]));
    }
    REQUIRE(batch_loss(net, encode_input(net, xp), yp) == Catch::Approx(base).margin(1e-12));
}

TEST_CASE("code shape checks reject mismatches") {
    NetworkState net = init_network(small_spec());
    Rng rng(11);
    Matrix x = random_batch(rng, 3, 4);
    CodeBatch good = encode_input(net, x);
    Matrix y = one_hot_labels({0, 1, 0}, 2);

    CodeBatch missing = good;
    missing.codes.clear();
    REQUIRE_THROWS_AS(batch_loss(net, missing, y), DimensionError);

    CodeBatch wrong_width = good;
    wrong_width.codes[0] = Matrix(3, 5);
    REQUIRE_THROWS_AS(predict(net, wrong_width), DimensionError);

    CodeBatch wrong_input = good;
    wrong_input.input = Matrix(3, 2);
    REQUIRE_THROWS_AS(predict(net, wrong_input), DimensionError);

    REQUIRE_THROWS_AS(batch_loss(net, good, one_hot_labels({0, 1}, 2)), DimensionError);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    NetworkSpec spec{{7, 5, 4, 3}, {Activation::Sign, Activation::Tanh}, 12345};
    NetworkState net = init_network(spec);
    fs::path path = temp_file("altmin-ckpt");
    save_checkpoint(net, path);
    NetworkState back = load_checkpoint(path);
    REQUIRE(back.spec.layer_sizes == spec.layer_sizes);
    REQUIRE(back.spec.hidden_activations == spec.hidden_activations);
    REQUIRE(back.spec.seed == spec.seed);
    for (size_t l = 0; l < net.weights.size(); ++l) REQUIRE(back.weights[l] == net.weights[l]);
    fs::remove(path);
}

TEST_CASE("checkpoint rejects corruption") {
    NetworkState net = init_network(small_spec());
    fs::path path = temp_file("altmin-ckpt-bad");
    save_checkpoint(net, path);

    std::ifstream is(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    is.close();

    SECTION("magic mismatch") {
        std::string bad = bytes;
        bad[0] ^= 0x40;
        std::ofstream os(path, std::ios::binary);
        os.write(bad.data(), static_cast<std::streamsize>(bad.size()));
        os.close();
        REQUIRE_THROWS_AS(load_checkpoint(path), FormatError);
    }
    SECTION("truncated header") {
        std::ofstream os(path, std::ios::binary);
        os.write(bytes.data(), 10);
        os.close();
        REQUIRE_THROWS_AS(load_checkpoint(path), FormatError);
    }
    SECTION("truncated payload") {
        std::ofstream os(path, std::ios::binary);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 9));
        os.close();
        REQUIRE_THROWS_AS(load_checkpoint(path), FormatError);
    }
    SECTION("missing file") {
        fs::remove(path);
        REQUIRE_THROWS_AS(load_checkpoint(path), FormatError);
    }
    fs::remove(path);
}
