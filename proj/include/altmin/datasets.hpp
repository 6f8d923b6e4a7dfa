#pragma once

// Data ingestion and synthetic corpora.
//
// IDX containers (big-endian headers, unsigned-byte payloads) are the
// on-disk interchange format for image data; pixel bytes scale to [0,1].
// Tabular CSV uses the first column as an integer class label. Synthetic
// generators exist so every trainer can be exercised hermetically at desk
// scale: Gaussian blobs for quick separable problems and a procedural
// 28x28 digit-glyph corpus shaped like the classic handwritten-digit sets.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "matrix.hpp"

namespace altmin {

struct Dataset {
    Matrix features;          // n x p
    std::vector<int> labels;  // values in [0, num_classes)
    int num_classes = 0;

    size_t size() const { return features.rows(); }

    void validate() const {
        if (features.rows() != labels.size())
            throw DimensionError("dataset has " + std::to_string(features.rows()) +
                                 " feature rows but " + std::to_string(labels.size()) + " labels");
        for (int l : labels)
            if (l < 0 || l >= num_classes)
                throw DimensionError("label " + std::to_string(l) + " outside [0, " +
                                     std::to_string(num_classes) + ")");
        if (!all_finite(features)) throw NumericError("dataset features contain NaN/Inf");
    }
};

inline Matrix one_hot(const std::vector<int>& labels, int num_classes) {
    Matrix y(labels.size(), static_cast<size_t>(num_classes));
    for (size_t i = 0; i < labels.size(); ++i) y(i, static_cast<size_t>(labels[i])) = 1.0;
    return y;
}

// --- IDX -------------------------------------------------------------------

namespace detail {

inline uint32_t read_be_u32(std::ifstream& is, size_t offset, const char* what) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is)
        throw FormatError(std::string("IDX: truncated while reading ") + what + " at offset " +
                          std::to_string(offset));
    return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

inline void write_be_u32(std::ofstream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline size_t file_size_or_throw(const std::filesystem::path& path) {
    std::error_code ec;
    auto n = std::filesystem::file_size(path, ec);
    if (ec) throw FormatError("cannot stat " + path.string() + ": " + ec.message());
    return static_cast<size_t>(n);
}

}  // namespace detail

struct IdxImages {
    Matrix data;  // n x (rows*cols), values in [0,1]
    size_t rows = 0, cols = 0;
};

inline IdxImages read_idx_images_full(const std::filesystem::path& path) {
    size_t fsize = detail::file_size_or_throw(path);
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open IDX file: " + path.string());
    uint32_t magic = detail::read_be_u32(is, 0, "magic");
    if (magic != 0x00000803)
        throw FormatError("IDX image magic mismatch at offset 0: got " + std::to_string(magic) +
                          ", expected 2051");
    uint64_t n = detail::read_be_u32(is, 4, "image count");
    uint64_t rows = detail::read_be_u32(is, 8, "row count");
    uint64_t cols = detail::read_be_u32(is, 12, "column count");
    if (rows == 0 || cols == 0 || rows > 1 << 16 || cols > 1 << 16)
        throw FormatError("IDX image dimensions out of range: " + std::to_string(rows) + "x" +
                          std::to_string(cols));
    uint64_t expected = 16 + n * rows * cols;
    if (fsize != expected)
        throw FormatError("IDX image payload length mismatch: expected " +
                          std::to_string(expected) + " bytes, file has " + std::to_string(fsize));
    IdxImages out;
    out.rows = static_cast<size_t>(rows);
    out.cols = static_cast<size_t>(cols);
    out.data = Matrix(static_cast<size_t>(n), static_cast<size_t>(rows * cols));
    std::vector<unsigned char> buf(static_cast<size_t>(rows * cols));
    for (size_t i = 0; i < n; ++i) {
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!is)
            throw FormatError("IDX image payload truncated at offset " +
                              std::to_string(16 + i * buf.size()));
        double* row = out.data.row(i);
        for (size_t j = 0; j < buf.size(); ++j) row[j] = static_cast<double>(buf[j]) / 255.0;
    }
    return out;
}

inline Matrix read_idx_images(const std::filesystem::path& path) {
    return read_idx_images_full(path).data;
}

inline std::vector<int> read_idx_labels(const std::filesystem::path& path) {
    size_t fsize = detail::file_size_or_throw(path);
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open IDX file: " + path.string());
    uint32_t magic = detail::read_be_u32(is, 0, "magic");
    if (magic != 0x00000801)
        throw FormatError("IDX label magic mismatch at offset 0: got " + std::to_string(magic) +
                          ", expected 2049");
    uint64_t n = detail::read_be_u32(is, 4, "label count");
    uint64_t expected = 8 + n;
    if (fsize != expected)
        throw FormatError("IDX label payload length mismatch: expected " + std::to_string(expected) +
                          " bytes, file has " + std::to_string(fsize));
    std::vector<unsigned char> buf(static_cast<size_t>(n));
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is) throw FormatError("IDX label payload truncated after offset 8");
    return std::vector<int>(buf.begin(), buf.end());
}

// Values are quantized to the byte grid round(v*255); inputs read from IDX
// round-trip bit-exactly.
inline void write_idx_images(const std::filesystem::path& path, const Matrix& images, size_t rows,
                             size_t cols) {
    if (images.cols() != rows * cols)
        throw DimensionError("write_idx_images: " + std::to_string(images.cols()) +
                             " pixels per row, expected " + std::to_string(rows * cols));
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open IDX file for writing: " + path.string());
    detail::write_be_u32(os, 0x00000803);
    detail::write_be_u32(os, static_cast<uint32_t>(images.rows()));
    detail::write_be_u32(os, static_cast<uint32_t>(rows));
    detail::write_be_u32(os, static_cast<uint32_t>(cols));
    std::vector<unsigned char> buf(images.cols());
    for (size_t i = 0; i < images.rows(); ++i) {
        const double* row = images.row(i);
        for (size_t j = 0; j < buf.size(); ++j) {
            double v = std::clamp(row[j], 0.0, 1.0) * 255.0;
            buf[j] = static_cast<unsigned char>(v + 0.5);
        }
        os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    }
    if (!os) throw FormatError("IDX write failed: " + path.string());
}

inline void write_idx_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open IDX file for writing: " + path.string());
    detail::write_be_u32(os, 0x00000801);
    detail::write_be_u32(os, static_cast<uint32_t>(labels.size()));
    for (int l : labels) {
        if (l < 0 || l > 255) throw FormatError("IDX labels must fit a byte, got " + std::to_string(l));
        unsigned char b = static_cast<unsigned char>(l);
        os.write(reinterpret_cast<const char*>(&b), 1);
    }
    if (!os) throw FormatError("IDX write failed: " + path.string());
}

// --- CSV -------------------------------------------------------------------

// First column: integer class label. Remaining columns: numeric features.
// A non-numeric first row is treated as a header. When `standardize` is set,
// columns are shifted/scaled to mean 0 variance 1 over the whole file; pass
// false and use `standardize_columns` to base the statistics on a train split.
inline Dataset read_csv_labeled(const std::filesystem::path& path, bool standardize = true);

struct ColumnStats {
    std::vector<double> mean, sd;
};

inline ColumnStats column_stats(const Matrix& features) {
    ColumnStats st;
    st.mean.assign(features.cols(), 0.0);
    st.sd.assign(features.cols(), 0.0);
    if (features.rows() == 0) return st;
    for (size_t i = 0; i < features.rows(); ++i)
        for (size_t j = 0; j < features.cols(); ++j) st.mean[j] += features(i, j);
    for (double& m : st.mean) m /= static_cast<double>(features.rows());
    for (size_t i = 0; i < features.rows(); ++i)
        for (size_t j = 0; j < features.cols(); ++j) {
            double d = features(i, j) - st.mean[j];
            st.sd[j] += d * d;
        }
    for (double& s : st.sd) s = std::sqrt(s / static_cast<double>(features.rows()));
    return st;
}

// Columns with sd below 1e-12 standardize to zero.
inline void standardize_columns(Matrix& features, const ColumnStats& st) {
    for (size_t i = 0; i < features.rows(); ++i)
        for (size_t j = 0; j < features.cols(); ++j) {
            double d = features(i, j) - st.mean[j];
            features(i, j) = st.sd[j] < 1e-12 ? 0.0 : d / st.sd[j];
        }
}

namespace detail {

inline bool parse_double(const std::string& cell, double& out) {
    const char* s = cell.c_str();
    char* end = nullptr;
    out = std::strtod(s, &end);
    if (end == s) return false;
    while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
    return *end == '\0';
}

}  // namespace detail

inline Dataset read_csv_labeled(const std::filesystem::path& path, bool standardize) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open CSV file: " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    size_t line_no = 0;
    size_t width = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            ++col;
            double v;
            if (!detail::parse_double(cell, v)) {
                if (line_no == 1 && rows.empty()) {
                    numeric = false;  // header row
                    break;
                }
                throw FormatError("CSV: non-numeric cell at row " + std::to_string(line_no) +
                                  ", column " + std::to_string(col) + ": '" + cell + "'");
            }
            vals.push_back(v);
        }
        if (!numeric) continue;
        if (vals.size() < 2)
            throw FormatError("CSV: row " + std::to_string(line_no) +
                              " needs a label and at least one feature");
        if (width == 0) width = vals.size();
        if (vals.size() != width)
            throw FormatError("CSV: row " + std::to_string(line_no) + " has " +
                              std::to_string(vals.size()) + " cells, expected " +
                              std::to_string(width));
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw FormatError("CSV file has no data rows: " + path.string());
    Dataset ds;
    ds.features = Matrix(rows.size(), width - 1);
    int max_label = 0;
    for (size_t i = 0; i < rows.size(); ++i) {
        double lab = rows[i][0];
        int l = static_cast<int>(lab);
        if (lab != static_cast<double>(l) || l < 0)
            throw FormatError("CSV: row " + std::to_string(i + 1) +
                              " label is not a nonnegative integer");
        ds.labels.push_back(l);
        max_label = std::max(max_label, l);
        for (size_t j = 1; j < width; ++j) ds.features(i, j - 1) = rows[i][j];
    }
    ds.num_classes = max_label + 1;
    if (standardize) standardize_columns(ds.features, column_stats(ds.features));
    ds.validate();
    return ds;
}

// --- synthetic corpora -----------------------------------------------------

// m Gaussian clusters in p dimensions, unit variance, pairwise center
// distance `separation`; class of sample i is i mod m.
inline Dataset make_blobs(size_t n, size_t p, int m, double separation, uint64_t seed) {
    Dataset ds;
    ds.num_classes = m;
    ds.features = Matrix(n, p);
    Rng center_rng(substream(seed, 0xb10b5));
    std::vector<Vector> centers;
    for (int j = 0; j < m; ++j) {
        Vector c(p);
        if (static_cast<size_t>(j) < p) {
            c[static_cast<size_t>(j)] = 1.0;
        } else {
            double nrm = 0.0;
            while (nrm < 1e-12) {
                for (size_t k = 0; k < p; ++k) c[k] = center_rng.normal();
                nrm = std::sqrt(norm_sq(c));
            }
            for (size_t k = 0; k < p; ++k) c[k] /= nrm;
        }
        for (size_t k = 0; k < p; ++k) c[k] *= separation / std::sqrt(2.0);
        centers.push_back(std::move(c));
    }
    Rng rng(substream(seed, 0x5a3b1e5));
    for (size_t i = 0; i < n; ++i) {
        int cls = static_cast<int>(i % static_cast<size_t>(m));
        ds.labels.push_back(cls);
        for (size_t k = 0; k < p; ++k)
            ds.features(i, k) = centers[static_cast<size_t>(cls)][k] + rng.normal();
    }
    return ds;
}

namespace detail {

inline const std::array<std::array<const char*, 7>, 10>& digit_glyphs() {
    static const std::array<std::array<const char*, 7>, 10> g = {{
        {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."},
        {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."},
        {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"},
        {".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###."},
        {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."},
        {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."},
        {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."},
        {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."},
        {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."},
        {".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."},
    }};
    return g;
}

}  // namespace detail

// Procedural 28x28 10-class digit corpus: 7x5 glyph bitmaps upscaled 3x,
// randomly placed, with per-sample intensity jitter and Gaussian pixel noise.
// Deterministic under seed; class of sample i is i mod 10. Values land on the
// byte grid so IDX round trips are exact.
inline Dataset make_digits(size_t n, uint64_t seed) {
    constexpr size_t kSide = 28, kScale = 3, kGlyphRows = 7, kGlyphCols = 5;
    Dataset ds;
    ds.num_classes = 10;
    ds.features = Matrix(n, kSide * kSide);
    Rng rng(substream(seed, 0xd161));
    const auto& glyphs = detail::digit_glyphs();
    for (size_t i = 0; i < n; ++i) {
        int cls = static_cast<int>(i % 10);
        ds.labels.push_back(cls);
        size_t row_off = rng.below(kSide - kGlyphRows * kScale + 1);
        size_t col_off = rng.below(kSide - kGlyphCols * kScale + 1);
        double intensity = rng.uniform(0.6, 1.0);
        double* px = ds.features.row(i);
        for (size_t r = 0; r < kGlyphRows * kScale; ++r)
            for (size_t c = 0; c < kGlyphCols * kScale; ++c)
                if (glyphs[static_cast<size_t>(cls)][r / kScale][c / kScale] == '#')
                    px[(row_off + r) * kSide + col_off + c] = intensity;
        for (size_t j = 0; j < kSide * kSide; ++j) {
            double v = std::clamp(px[j] + 0.12 * rng.normal(), 0.0, 1.0);
            px[j] = std::round(v * 255.0) / 255.0;
        }
    }
    return ds;
}

// --- splits and minibatches --------------------------------------------------

inline std::vector<size_t> shuffled_indices(size_t n, uint64_t seed) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(substream(seed, 0x5f7f1e));
    for (size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    return idx;
}

struct SplitSpec {
    double train_fraction = 5.0 / 6.0;
    uint64_t seed = 0;
};

inline Dataset take_rows(const Dataset& ds, const std::vector<size_t>& rows) {
    Dataset out;
    out.num_classes = ds.num_classes;
    out.features = Matrix(rows.size(), ds.features.cols());
    for (size_t i = 0; i < rows.size(); ++i) {
        out.features.set_row(i, ds.features.row_vec(rows[i]));
        out.labels.push_back(ds.labels[rows[i]]);
    }
    return out;
}

// Seeded exact disjoint partition into (train, held-out).
inline std::pair<Dataset, Dataset> split(const Dataset& ds, const SplitSpec& spec) {
    if (spec.train_fraction <= 0.0 || spec.train_fraction > 1.0)
        throw ConfigError("split: train_fraction must be in (0, 1]");
    size_t n = ds.size();
    auto idx = shuffled_indices(n, spec.seed);
    size_t n_train = static_cast<size_t>(
        std::llround(spec.train_fraction * static_cast<double>(n)));
    n_train = std::min(n_train, n);
    std::vector<size_t> a(idx.begin(), idx.begin() + static_cast<long>(n_train));
    std::vector<size_t> b(idx.begin() + static_cast<long>(n_train), idx.end());
    return {take_rows(ds, a), take_rows(ds, b)};
}

struct Batch {
    Matrix x;  // batch x p
    Matrix y;  // batch x m one-hot
};

// Seeded per-epoch permutation (seed XOR epoch); the final partial batch is
// included.
class MinibatchStream {
public:
    MinibatchStream(const Dataset& ds, size_t batch, uint64_t seed, uint64_t epoch)
        : ds_(&ds), batch_(batch), order_(shuffled_indices(ds.size(), seed ^ epoch)) {
        if (batch < 1) throw ConfigError("minibatch size must be >= 1");
    }

    size_t count() const { return (ds_->size() + batch_ - 1) / batch_; }

    Batch get(size_t k) const {
        size_t lo = k * batch_;
        size_t hi = std::min(lo + batch_, ds_->size());
        if (lo >= hi) throw DimensionError("minibatch index out of range");
        Batch b;
        b.x = Matrix(hi - lo, ds_->features.cols());
        b.y = Matrix(hi - lo, static_cast<size_t>(ds_->num_classes));
        for (size_t i = lo; i < hi; ++i) {
            b.x.set_row(i - lo, ds_->features.row_vec(order_[i]));
            b.y(i - lo, static_cast<size_t>(ds_->labels[order_[i]])) = 1.0;
        }
        return b;
    }

private:
    const Dataset* ds_;
    size_t batch_;
    std::vector<size_t> order_;
};

// --- sequence transform ------------------------------------------------------

struct Sequences {
    size_t T = 0, p = 1;
    Matrix data;  // n x (T*p), time-major per row
};

// k x k average pooling followed by row-major scan order; one scalar per step.
inline Sequences pool_sequence(const Matrix& images, size_t rows, size_t cols, size_t k) {
    if (k == 0 || rows % k != 0 || cols % k != 0)
        throw ConfigError("pool_sequence: factor " + std::to_string(k) + " must divide " +
                          std::to_string(rows) + "x" + std::to_string(cols));
    if (images.cols() != rows * cols)
        throw DimensionError("pool_sequence: images have " + std::to_string(images.cols()) +
                             " pixels, expected " + std::to_string(rows * cols));
    size_t pr = rows / k, pc = cols / k;
    Sequences out;
    out.T = pr * pc;
    out.p = 1;
    out.data = Matrix(images.rows(), out.T);
    for (size_t i = 0; i < images.rows(); ++i) {
        const double* px = images.row(i);
        double* o = out.data.row(i);
        for (size_t br = 0; br < pr; ++br)
            for (size_t bc = 0; bc < pc; ++bc) {
                double s = 0.0;
                for (size_t r = 0; r < k; ++r)
                    for (size_t c = 0; c < k; ++c) s += px[(br * k + r) * cols + bc * k + c];
                o[br * pc + bc] = s / static_cast<double>(k * k);
            }
    }
    return out;
}

}  // namespace altmin
