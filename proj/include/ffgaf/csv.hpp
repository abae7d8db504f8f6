#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace ffgaf::csv {

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string join(const std::vector<std::string>& cells) {
    std::ostringstream os;
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    return os.str();
}

// Minimal row splitter for the spike-rate CSV the energy command reads back.
inline std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

} // namespace ffgaf::csv
