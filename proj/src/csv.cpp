#include "csv.hpp"

#include <charconv>
#include <cmath>

namespace lfsim {

std::string format_number(double v) {
    if (v == 0.0) return "0";  // also folds -0
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

namespace csv {

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

Reader::Reader(std::istream& in, std::string name, std::vector<std::string_view> expected_header)
    : in_(in), name_(std::move(name)), columns_(expected_header.size()) {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (!trim(line).empty()) break;
        line.clear();
    }
    if (trim(line).empty()) throw ParseError(name_, line_ == 0 ? 1 : line_, "missing header row");
    auto header = split(trim(line));
    if (header.size() != columns_) throw ParseError(name_, line_, "header has wrong number of columns");
    for (std::size_t i = 0; i < columns_; ++i) {
        if (trim(header[i]) != expected_header[i]) {
            throw ParseError(name_, line_, "expected column '" + std::string(expected_header[i]) + "', got '" +
                                               trim(header[i]) + "'");
        }
    }
}

bool Reader::next(Row& row) {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        auto t = trim(line);
        if (t.empty()) continue;
        row.line = line_;
        row.fields = split(t);
        if (row.fields.size() != columns_) {
            fail(row, "expected " + std::to_string(columns_) + " fields, got " + std::to_string(row.fields.size()));
        }
        for (auto& f : row.fields) f = trim(f);
        return true;
    }
    return false;
}

void Reader::fail(const Row& row, const std::string& what) const { throw ParseError(name_, row.line, what); }

std::int64_t Reader::to_int(const Row& row, std::size_t col) const {
    const auto& s = row.fields.at(col);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail(row, "column " + std::to_string(col + 1) + ": not an integer: '" + s + "'");
    return v;
}

double Reader::to_double(const Row& row, std::size_t col) const {
    const auto& s = row.fields.at(col);
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        fail(row, "column " + std::to_string(col + 1) + ": not a number: '" + s + "'");
    }
    return v;
}

const std::string& Reader::to_id(const Row& row, std::size_t col) const {
    const auto& s = row.fields.at(col);
    if (s.empty()) fail(row, "column " + std::to_string(col + 1) + ": empty identifier");
    return s;
}

}  // namespace csv
}  // namespace lfsim
