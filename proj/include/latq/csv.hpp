#pragma once

// Plain CSV matrix I/O: comma separated, '.' decimal point, one row per
// line. Doubles are written in shortest round-trip form, so
// parse(serialize(m)) == m bit for bit.

#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"

namespace latq {

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(pos));
            break;
        }
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    return lines;
}

template <typename T>
T parse_token(std::string_view raw, std::size_t line, std::size_t col) {
    std::string_view tok = trim(raw);
    std::string_view body = tok;
    if (!body.empty() && body.front() == '+') body.remove_prefix(1);
    T value{};
    const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
    if (body.empty() || ec != std::errc{} || ptr != body.data() + body.size())
        throw ParseError(line, col, std::string(tok));
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(value)) throw ParseError(line, col, std::string(tok));
    }
    return value;
}

template <typename T>
basic_matrix<T> parse_csv_impl(std::string_view text, bool expect_header) {
    const auto lines = split_lines(text);
    std::size_t first = expect_header ? 1 : 0;
    if (lines.size() <= first) throw Error("csv: no data rows");

    std::size_t cols = 0;
    std::vector<T> entries;
    for (std::size_t li = first; li < lines.size(); ++li) {
        const std::size_t line_no = li + 1;
        std::size_t field = 0, pos = 0;
        const std::string_view line = lines[li];
        for (;;) {
            const std::size_t comma = line.find(',', pos);
            const std::string_view tok =
                line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
            ++field;
            if (li == first || field <= cols)
                entries.push_back(parse_token<T>(tok, line_no, field));
            if (comma == std::string_view::npos) break;
            pos = comma + 1;
        }
        if (li == first)
            cols = field;
        else if (field != cols)
            throw RaggedRows(line_no);
    }
    return basic_matrix<T>(lines.size() - first, cols, std::move(entries));
}

template <typename T>
void append_value(std::string& out, T value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    out.append(buf, ptr);
}

template <typename T>
std::string serialize_csv_impl(const basic_matrix<T>& m) {
    std::string out;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out.push_back(',');
            append_value(out, m(i, j));
        }
        out.push_back('\n');
    }
    return out;
}

}  // namespace detail

inline Matrix parse_matrix_csv(std::string_view text, bool expect_header = false) {
    return detail::parse_csv_impl<double>(text, expect_header);
}

inline IntMatrix parse_int_matrix_csv(std::string_view text, bool expect_header = false) {
    return detail::parse_csv_impl<std::int64_t>(text, expect_header);
}

inline std::string serialize_matrix_csv(const Matrix& m) { return detail::serialize_csv_impl(m); }

inline std::string serialize_matrix_csv(const IntMatrix& m) { return detail::serialize_csv_impl(m); }

}  // namespace latq
