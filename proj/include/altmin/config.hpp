#pragma once

// Flat experiment configuration: `key = value` lines, `#` comments, list
// values as `key = [a, b, c]`. Values are kept as trimmed strings and parsed
// on access; serialization is canonical (keys sorted, one space around `=`),
// so parse(canonical(parse(text))) is the identity on the key-value map.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"

namespace altmin {

namespace detail {

inline std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

class Config {
public:
    Config() = default;

    static Config parse_text(const std::string& text) {
        Config cfg;
        std::istringstream is(text);
        std::string line;
        size_t line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            size_t hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = detail::trim(line);
            if (line.empty()) continue;
            size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(line_no) +
                                  " has no '=': '" + line + "'");
            std::string key = detail::trim(line.substr(0, eq));
            std::string value = detail::trim(line.substr(eq + 1));
            if (key.empty())
                throw ConfigError("config line " + std::to_string(line_no) + " has an empty key");
            if (value.empty())
                throw ConfigError("config key '" + key + "' has an empty value (line " +
                                  std::to_string(line_no) + ")");
            if (cfg.values_.count(key))
                throw ConfigError("duplicate config key '" + key + "' at line " +
                                  std::to_string(line_no));
            cfg.values_[key] = value;
        }
        return cfg;
    }

    static Config parse_file(const std::filesystem::path& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot open config file: " + path.string());
        std::ostringstream buf;
        buf << is.rdbuf();
        return parse_text(buf.str());
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    void erase(const std::string& key) { values_.erase(key); }

    const std::map<std::string, std::string>& values() const { return values_; }

    std::string get_string(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing required config key '" + key + "'");
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    bool is_list(const std::string& key) const {
        auto it = values_.find(key);
        return it != values_.end() && !it->second.empty() && it->second.front() == '[';
    }

    // `[a, b, c]` split on commas; a bare scalar is a one-element list.
    std::vector<std::string> get_list(const std::string& key) const {
        std::string raw = get_string(key);
        if (raw.front() != '[') return {raw};
        if (raw.back() != ']')
            throw ConfigError("config key '" + key + "' has an unterminated list: '" + raw + "'");
        std::string body = raw.substr(1, raw.size() - 2);
        std::vector<std::string> items;
        std::string cell;
        std::istringstream ss(body);
        while (std::getline(ss, cell, ',')) {
            cell = detail::trim(cell);
            if (cell.empty())
                throw ConfigError("config key '" + key + "' has an empty list element");
            items.push_back(cell);
        }
        if (detail::trim(body).empty()) items.clear();
        return items;
    }

    double get_double(const std::string& key) const { return to_double(key, get_string(key)); }

    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    long get_int(const std::string& key) const { return to_int(key, get_string(key)); }

    long get_int(const std::string& key, long fallback) const {
        return has(key) ? get_int(key) : fallback;
    }

    uint64_t get_u64(const std::string& key) const {
        long v = get_int(key);
        if (v < 0) throw ConfigError("config key '" + key + "' must be >= 0");
        return static_cast<uint64_t>(v);
    }

    uint64_t get_u64(const std::string& key, uint64_t fallback) const {
        return has(key) ? get_u64(key) : fallback;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        std::string v = get_string(key);
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw ConfigError("config key '" + key + "' must be true|false, got '" + v + "'");
    }

    std::vector<double> get_double_list(const std::string& key) const {
        std::vector<double> out;
        for (const auto& s : get_list(key)) out.push_back(to_double(key, s));
        return out;
    }

    std::vector<long> get_int_list(const std::string& key) const {
        std::vector<long> out;
        for (const auto& s : get_list(key)) out.push_back(to_int(key, s));
        return out;
    }

    void require_known_keys(const std::vector<std::string>& allowed) const {
        for (const auto& [key, value] : values_) {
            bool ok = false;
            for (const auto& a : allowed)
                if (key == a) {
                    ok = true;
                    break;
                }
            if (!ok) throw ConfigError("unknown config key '" + key + "'");
        }
    }

    // Keys sorted, `key = value` per line.
    std::string canonical() const {
        std::string out;
        for (const auto& [key, value] : values_) out += key + " = " + value + "\n";
        return out;
    }

    std::vector<std::string> canonical_lines() const {
        std::vector<std::string> out;
        for (const auto& [key, value] : values_) out.push_back(key + " = " + value);
        return out;
    }

    bool operator==(const Config&) const = default;

private:
    static double to_double(const std::string& key, const std::string& s) {
        const char* c = s.c_str();
        char* end = nullptr;
        double v = std::strtod(c, &end);
        if (end == c || *end != '\0')
            throw ConfigError("config key '" + key + "' is not a number: '" + s + "'");
        return v;
    }

    static long to_int(const std::string& key, const std::string& s) {
        const char* c = s.c_str();
        char* end = nullptr;
        long v = std::strtol(c, &end, 10);
        if (end == c || *end != '\0')
            throw ConfigError("config key '" + key + "' is not an integer: '" + s + "'");
        return v;
    }

    std::map<std::string, std::string> values_;
};

}  // namespace altmin
