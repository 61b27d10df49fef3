#pragma once

#include "polyterm/errors.hpp"

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace polyterm {

/// Shortest round-trip-safe text for a double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// CSV file with '#' comment lines ahead of the header row.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& comments, const std::vector<std::string>& header)
        : out_(path, std::ios::binary), width_(header.size()) {
        if (!out_) throw ConfigError("cannot write '" + path + "'");
        for (const auto& c : comments) out_ << "# " << c << "\n";
        write_cells(header);
    }

    void row(const std::vector<double>& values) {
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(format_double(v));
        write_cells(cells);
    }

    void row(const std::vector<std::string>& cells) { write_cells(cells); }

private:
    void write_cells(const std::vector<std::string>& cells) {
        if (cells.size() != width_) throw ConfigError("CSV row width does not match the header");
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << "\n";
    }

    std::ofstream out_;
    std::size_t width_;
};

} // namespace polyterm
