#pragma once

// Minimal CSV reader for the project's fixed schemas: comma separated,
// no quoting, header row required.

#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "lfsim/common.hpp"

namespace lfsim::csv {

struct Row {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

class Reader {
public:
    Reader(std::istream& in, std::string name, std::vector<std::string_view> expected_header);

    // Returns false at end of input. Blank lines are skipped.
    bool next(Row& row);

    const std::string& name() const { return name_; }

    [[noreturn]] void fail(const Row& row, const std::string& what) const;

    std::int64_t to_int(const Row& row, std::size_t col) const;
    double to_double(const Row& row, std::size_t col) const;
    const std::string& to_id(const Row& row, std::size_t col) const;

private:
    std::istream& in_;
    std::string name_;
    std::size_t columns_;
    std::size_t line_ = 0;
};

std::vector<std::string> split(std::string_view line, char sep = ',');
std::string trim(std::string_view s);

}  // namespace lfsim::csv
