#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "common.hpp"

namespace altmin {

struct MetricsRow {
    int epoch = 0;
    long batch = 0;
    std::string split;
    double loss = 0.0;
    double accuracy = 0.0;
    double mu = 0.0;
    std::string algo;
    uint64_t seed = 0;
};

// Shortest representation that round-trips a double exactly; bit-identical
// across runs so metrics files can be compared byte-wise.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    for (int prec = 1; prec < 17; ++prec) {
        char trial[40];
        std::snprintf(trial, sizeof(trial), "%.*g", prec, v);
        std::sscanf(trial, "%lf", &back);
        if (back == v) return trial;
    }
    return buf;
}

inline std::string metrics_row_csv(const MetricsRow& r) {
    return std::to_string(r.epoch) + "," + std::to_string(r.batch) + "," + r.split + "," +
           format_double(r.loss) + "," + format_double(r.accuracy) + "," + format_double(r.mu) +
           "," + r.algo + "," + std::to_string(r.seed);
}

// Header comment lines (one "# key = value" per line) carry the resolved
// configuration so a metrics file is self-describing.
inline void write_metrics_csv(const std::filesystem::path& path,
                              const std::vector<MetricsRow>& rows,
                              const std::vector<std::string>& config_lines) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open metrics file for writing: " + path.string());
    for (const auto& line : config_lines) os << "# " << line << "\n";
    os << "epoch,batch,split,loss,accuracy,mu,algo,seed\n";
    for (const auto& r : rows) os << metrics_row_csv(r) << "\n";
    if (!os) throw FormatError("metrics write failed: " + path.string());
}

}  // namespace altmin
