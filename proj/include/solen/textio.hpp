#pragma once

// Text helpers shared by the CSV and scene-file code paths: 9-significant-digit
// number formatting, strict double parsing, comment-aware line splitting.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "solen/error.hpp"

namespace solen::textio {

/// Fixed "%.9g" rendering used by every exported table.
inline std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

inline std::string format_int(long v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%ld", v);
    return buf;
}

inline std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.emplace_back(trim(s.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

/// Whole-token double parse; throws ParseError with context on junk.
inline double parse_double(std::string_view token, const std::string& context) {
    const std::string t{trim(token)};
    if (t.empty()) throw ParseError(context + ": empty numeric field");
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size())
        throw ParseError(context + ": not a number: '" + t + "'");
    return v;
}

inline long parse_long(std::string_view token, const std::string& context) {
    const std::string t{trim(token)};
    if (t.empty()) throw ParseError(context + ": empty integer field");
    char* end = nullptr;
    const long v = std::strtol(t.c_str(), &end, 10);
    if (end != t.c_str() + t.size())
        throw ParseError(context + ": not an integer: '" + t + "'");
    return v;
}

/// Data lines of a text stream: blank lines dropped, '#' lines kept or
/// dropped on request (the profile exporter writes '#' metadata).
struct Line {
    std::string text;
    long number;  // 1-based line number in the source
};

inline std::vector<Line> read_lines(std::istream& in, bool keep_comments = false) {
    std::vector<Line> out;
    std::string raw;
    long number = 0;
    while (std::getline(in, raw)) {
        ++number;
        const std::string_view t = trim(raw);
        if (t.empty()) continue;
        if (t.front() == '#' && !keep_comments) continue;
        out.push_back({std::string{t}, number});
    }
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw IoError("failed writing '" + path + "'");
}

} // namespace solen::textio
