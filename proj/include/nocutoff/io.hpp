#pragma once

// CSV/JSON serialization and atomic artifact writes.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"

namespace nocutoff::io {

/// 17 significant digits round-trips every double.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// RFC-4180 field: quoted when it contains a comma, quote or line break.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

class CsvWriter {
  public:
    explicit CsvWriter(const std::vector<std::string>& header) { row_strings(header); }

    void row_strings(const std::vector<std::string>& fields) {
        for (std::size_t k = 0; k < fields.size(); ++k) {
            if (k) buf_ << ',';
            buf_ << csv_field(fields[k]);
        }
        buf_ << "\r\n";
    }

    template <class... Ts>
    void row(const Ts&... fields) {
        std::vector<std::string> f;
        (f.push_back(to_field(fields)), ...);
        row_strings(f);
    }

    std::string str() const { return buf_.str(); }

  private:
    static std::string to_field(double x) { return format_double(x); }
    static std::string to_field(const std::string& s) { return s; }
    static std::string to_field(const char* s) { return s; }
    static std::string to_field(bool b) { return b ? "1" : "0"; }
    template <class T>
    static std::string to_field(const T& x) {
        return std::to_string(x);
    }

    std::ostringstream buf_;
};

/// Writes to `path.tmp` and renames, so an interrupted run leaves no
/// partial artifact under the final name.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace nocutoff::io
