#pragma once

#include <string>
#include <vector>

namespace z2s {

// Shortest decimal that reads back to the same double; "nan", "inf", "-inf" otherwise.
std::string format_double(double x);

// Header row plus one line per row, comma separated, no quoting (fields never contain commas).
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
    void add_row(std::vector<std::string> row);
    std::string str() const;
    std::size_t rows() const { return rows_.size(); }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace z2s
