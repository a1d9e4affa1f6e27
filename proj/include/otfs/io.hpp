#pragma once

// PGM images (P2 ASCII, P5 binary) and CSV point clouds.

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "measures.hpp"

namespace otfs::io {

namespace detail {

// Next whitespace-separated token of a PGM header, skipping '#' comments.
inline std::string pgm_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    if (tok.empty()) throw IoError("pgm: unexpected end of header");
    return tok;
}

inline unsigned long pgm_number(std::istream& in) {
    const std::string tok = pgm_token(in);
    unsigned long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw IoError("pgm: bad number '" + tok + "'");
    return v;
}

inline bool parse_double(std::string_view s, double& out) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    if (s.empty()) return false;
    // from_chars rejects a leading '+'
    if (s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

/// Reads P2 or P5 PGM data, scaling gray levels by maxval into [0,1].
inline GrayscaleImage read_pgm(std::istream& in) {
    const std::string magic = detail::pgm_token(in);
    if (magic != "P2" && magic != "P5") throw IoError("pgm: unsupported magic '" + magic + "'");
    const unsigned long cols = detail::pgm_number(in);
    const unsigned long rows = detail::pgm_number(in);
    const unsigned long maxval = detail::pgm_number(in);
    if (cols == 0 || rows == 0) throw IoError("pgm: empty image");
    if (maxval == 0 || maxval > 65535) throw IoError("pgm: maxval must be in [1, 65535]");

    const std::size_t count = static_cast<std::size_t>(rows) * cols;
    std::vector<double> px(count);
    const double scale = 1.0 / static_cast<double>(maxval);
    if (magic == "P2") {
        for (std::size_t i = 0; i < count; ++i) {
            const unsigned long v = detail::pgm_number(in);
            if (v > maxval) throw IoError("pgm: sample exceeds maxval");
            px[i] = static_cast<double>(v) * scale;
        }
    } else {
        // exactly one whitespace byte after maxval was consumed by pgm_token
        const bool wide = maxval > 255;
        for (std::size_t i = 0; i < count; ++i) {
            unsigned long v;
            const int hi = in.get();
            if (hi == EOF) throw IoError("pgm: truncated raster");
            if (wide) {
                const int lo = in.get();
                if (lo == EOF) throw IoError("pgm: truncated raster");
                v = (static_cast<unsigned long>(hi) << 8) | static_cast<unsigned long>(lo);
            } else {
                v = static_cast<unsigned long>(hi);
            }
            if (v > maxval) throw IoError("pgm: sample exceeds maxval");
            px[i] = static_cast<double>(v) * scale;
        }
    }
    return GrayscaleImage(rows, cols, std::move(px));
}

inline GrayscaleImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    return read_pgm(in);
}

/// Writes binary P5 with maxval 255 (or 65535 when `wide`).
inline void write_pgm(std::ostream& out, const GrayscaleImage& img, bool wide = false) {
    const unsigned maxval = wide ? 65535u : 255u;
    out << "P5\n" << img.cols << ' ' << img.rows << '\n' << maxval << '\n';
    for (double g : img.pixels) {
        const auto v = static_cast<unsigned>(g * maxval + 0.5);
        if (wide) out.put(static_cast<char>(v >> 8));
        out.put(static_cast<char>(v & 0xff));
    }
}

struct CsvOptions {
    /// Without a header, treat the last column as the weight.
    bool weight_column = false;
};

/// Reads a point cloud: one row per atom, columns x1..xD[,w]. A header row is
/// detected by a non-numeric first field; a header column named "w" or
/// "weight" marks the weight column. Without weights the atoms are uniform.
inline DiscreteMeasure read_csv_measure(std::istream& in, CsvOptions opts = {}) {
    std::string line;
    std::vector<std::vector<double>> rows;
    bool header_seen = false;
    bool weighted = opts.weight_column;
    std::size_t width = 0;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto fields = detail::split_csv_line(line);
        std::vector<double> vals(fields.size());
        bool numeric = true;
        for (std::size_t k = 0; k < fields.size(); ++k)
            numeric = numeric && detail::parse_double(fields[k], vals[k]);
        if (!numeric) {
            if (header_seen || !rows.empty())
                throw IoError("csv: non-numeric field on line " + std::to_string(line_no));
            header_seen = true;
            std::string last = fields.back();
            for (auto& c : last) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            while (!last.empty() && std::isspace(static_cast<unsigned char>(last.back()))) last.pop_back();
            while (!last.empty() && std::isspace(static_cast<unsigned char>(last.front()))) last.erase(0, 1);
            weighted = (last == "w" || last == "weight");
            width = fields.size();
            continue;
        }
        if (width == 0) width = vals.size();
        if (vals.size() != width)
            throw IoError("csv: inconsistent column count on line " + std::to_string(line_no));
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw IoError("csv: no data rows");
    const std::size_t dim = weighted ? width - 1 : width;
    if (dim < 1 || dim > 3) throw IoError("csv: expected 1 to 3 coordinate columns");

    std::vector<double> coords;
    std::vector<double> weights;
    coords.reserve(rows.size() * dim);
    weights.reserve(rows.size());
    for (const auto& r : rows) {
        coords.insert(coords.end(), r.begin(), r.begin() + static_cast<std::ptrdiff_t>(dim));
        weights.push_back(weighted ? r[dim] : 1.0);
    }
    return DiscreteMeasure(static_cast<int>(dim), std::move(coords), std::move(weights));
}

inline DiscreteMeasure read_csv_measure(const std::string& path, CsvOptions opts = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return read_csv_measure(in, opts);
}

inline void write_csv_measure(std::ostream& out, const DiscreteMeasure& m) {
    for (int k = 0; k < m.dim(); ++k) out << 'x' << (k + 1) << ',';
    out << "w\n";
    out.precision(17);
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (double c : m.point(i)) out << c << ',';
        out << m.weight(i) << '\n';
    }
}

}  // namespace otfs::io
