#ifndef ATTNFMRI_TEXT_HPP
#define ATTNFMRI_TEXT_HPP

#include "core.hpp"

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace attnfmri {

/**
 * Render a double with 17 significant digits, which is enough for
 * `parse_double(format_double(x)) == x` for every finite `x`.
 */
inline std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

/**
 * Full-token parse; returns nullopt unless the whole trimmed token is a number.
 */
inline std::optional<double> parse_double(std::string_view token) {
    token = trim(token);
    if (token.empty()) {
        return std::nullopt;
    }
    if (token.front() == '+') {
        token.remove_prefix(1);
    }
    double out = 0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), out);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
        return std::nullopt;
    }
    return out;
}

inline std::optional<long long> parse_int(std::string_view token) {
    token = trim(token);
    if (token.empty()) {
        return std::nullopt;
    }
    if (token.front() == '+') {
        token.remove_prefix(1);
    }
    long long out = 0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), out);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
        return std::nullopt;
    }
    return out;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open '" + path + "' for reading");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw Error(ErrorCode::Io, "failed writing '" + path + "'");
    }
}

/**
 * Non-empty lines of a text file, with trailing carriage returns removed.
 */
inline std::vector<std::string> nonempty_lines(const std::string& content) {
    std::vector<std::string> lines;
    std::istringstream in(content);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!trim(line).empty()) {
            lines.push_back(line);
        }
    }
    return lines;
}

}

#endif
