#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gaptv/dataset.hpp"

namespace gaptv {

/// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Write-then-rename so consumers never observe a truncated file.
inline void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
        out << content;
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw std::runtime_error("rename failed: " + path);
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace csv {

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    for (std::string& f : fields) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.erase(f.begin());
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t')) f.pop_back();
    }
    return fields;
}

inline double parse_number(const std::string& field, std::size_t line_no,
                           const std::string& column) {
    const char* begin = field.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || (end != nullptr && *end != '\0')) {
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ", column '" + column +
                                    "': cannot parse number from '" + field + "'");
    }
    return v;
}

}  // namespace csv

struct CsvColumns {
    std::string x1 = "x1";
    std::string x2 = "x2";
    std::string y = "y";
};

/// Read a headered CSV into a Dataset. Extra columns are ignored; rows with
/// non-finite values (or non-binary labels under the binomial loss) are hard
/// errors that name the offending line.
inline Dataset ingest_csv(const std::string& path, LossKind loss,
                          const CsvColumns& cols = {}) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) {
        throw std::invalid_argument(path + ": empty file");
    }
    const auto header = csv::split_line(line);
    auto col_index = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw std::invalid_argument(path + ": missing column '" + name + "'");
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t ix1 = col_index(cols.x1);
    const std::size_t ix2 = col_index(cols.x2);
    const std::size_t iy = col_index(cols.y);

    Dataset data;
    data.loss = loss;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = csv::split_line(line);
        const std::size_t needed = std::max({ix1, ix2, iy});
        if (fields.size() <= needed) {
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": too few columns");
        }
        DataPoint p;
        p.x1 = csv::parse_number(fields[ix1], line_no, cols.x1);
        p.x2 = csv::parse_number(fields[ix2], line_no, cols.x2);
        p.y = csv::parse_number(fields[iy], line_no, cols.y);
        if (!std::isfinite(p.x1) || !std::isfinite(p.x2) || !std::isfinite(p.y)) {
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": non-finite value");
        }
        if (loss == LossKind::binomial && p.y != 0.0 && p.y != 1.0) {
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": binomial label must be 0 or 1");
        }
        data.points.push_back(p);
    }
    if (data.points.empty()) {
        throw std::invalid_argument(path + ": no data rows");
    }
    return data;
}

inline void write_dataset_csv(const std::string& path, const Dataset& data) {
    std::string out = "x1,x2,y\n";
    for (const DataPoint& p : data.points) {
        out += format_double(p.x1);
        out += ',';
        out += format_double(p.x2);
        out += ',';
        out += format_double(p.y);
        out += '\n';
    }
    atomic_write(path, out);
}

inline void write_predictions_csv(const std::string& path,
                                  std::span<const DataPoint> points,
                                  std::span<const double> yhat) {
    std::string out = "x1,x2,yhat\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        out += format_double(points[i].x1);
        out += ',';
        out += format_double(points[i].x2);
        out += ',';
        out += format_double(yhat[i]);
        out += '\n';
    }
    atomic_write(path, out);
}

/// Plain (P2) PGM with linear min-max scaling to 0..255; the value range goes
/// into a JSON sidecar next to the image.
inline void write_pgm(const std::string& path,
                      std::span<const double> values, int width, int height) {
    if (static_cast<std::size_t>(width) * static_cast<std::size_t>(height) !=
        values.size()) {
        throw std::invalid_argument("write_pgm: size mismatch");
    }
    double lo = values[0], hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    std::string out = "P2\n" + std::to_string(width) + " " +
                      std::to_string(height) + "\n255\n";
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            const double v = values[static_cast<std::size_t>(r) * width + c];
            const int g = static_cast<int>(
                std::lround(255.0 * (v - lo) / span));
            out += std::to_string(std::clamp(g, 0, 255));
            out += c + 1 < width ? ' ' : '\n';
        }
    }
    atomic_write(path, out);
    atomic_write(path + ".json", "{\"min\": " + format_double(lo) +
                                     ", \"max\": " + format_double(hi) + "}\n");
}

}  // namespace gaptv
