#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

namespace scatlen {

/// Cell text: doubles in round-trip scientific notation, integers and bools
/// as integers, strings verbatim (quoted when they contain a comma).
inline std::string csv_cell(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17e", x);
    return buf;
}
inline std::string csv_cell(bool b) { return b ? "1" : "0"; }
inline std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}
inline std::string csv_cell(const char* s) { return csv_cell(std::string(s)); }
template <typename T>
    requires std::is_integral_v<T>
std::string csv_cell(T x) {
    return std::to_string(x);
}

/// Values joined with ';' inside one cell.
inline std::string csv_list(const std::vector<double>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ";" : "") + csv_cell(xs[i]);
    return out;
}

inline void csv_line(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
    os << '\n';
}

}  // namespace scatlen
