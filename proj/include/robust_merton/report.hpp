#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace robust_merton {

/// Shortest decimal string that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

enum class OutputFormat { Csv, JsonLines };

OutputFormat parse_format(std::string_view name);
std::string extension(OutputFormat format);

using TableValue = std::variant<double, std::string, std::vector<double>>;

class Table {
public:
    Table() = default;
    explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    const std::vector<std::string>& columns() const { return columns_; }
    const std::vector<std::vector<TableValue>>& rows() const { return rows_; }
    std::size_t row_count() const { return rows_.size(); }

    void add_row(std::vector<TableValue> row);
    std::size_t column(std::string_view name) const;

    double number(std::size_t row, std::string_view name) const;
    std::string text(std::size_t row, std::string_view name) const;
    std::vector<double> numbers(std::size_t row, std::string_view name) const;

    std::string to_string(OutputFormat format) const;
    static Table parse(std::string_view content, OutputFormat format);

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<TableValue>> rows_;
};

/// Writes content to a temporary file beside path and renames it into place.
void write_atomic(const std::string& path, const std::string& content);

void write_table(const std::string& path, const Table& table, OutputFormat format);
/// Format inferred from the extension (.csv or .jsonl).
Table read_table(const std::string& path);

}  // namespace robust_merton
