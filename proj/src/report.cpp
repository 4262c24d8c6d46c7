#include "robust_merton/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "robust_merton/errors.hpp"

namespace robust_merton {

namespace {

using json = nlohmann::ordered_json;

std::string csv_field(const TableValue& value) {
    if (const auto* d = std::get_if<double>(&value)) return format_double(*d);
    if (const auto* v = std::get_if<std::vector<double>>(&value)) {
        std::string out = "[";
        for (std::size_t i = 0; i < v->size(); ++i) {
            if (i > 0) out += ';';
            out += format_double((*v)[i]);
        }
        return out + "]";
    }
    const auto& s = std::get<std::string>(value);
    if (s.find_first_of(",\"\n") == std::string::npos && !s.empty() && s.front() != '[') return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

bool looks_numeric(std::string_view s) {
    if (s == "inf" || s == "-inf" || s == "nan") return true;
    double value;
    const auto result = std::from_chars(s.data(), s.data() + s.size(), value);
    return result.ec == std::errc() && result.ptr == s.data() + s.size();
}

TableValue csv_value(const std::string& raw, bool quoted) {
    if (quoted) return raw;
    if (!raw.empty() && raw.front() == '[' && raw.back() == ']') {
        std::vector<double> values;
        std::string_view body(raw.data() + 1, raw.size() - 2);
        while (!body.empty()) {
            const auto sep = body.find(';');
            values.push_back(parse_double(body.substr(0, sep)));
            if (sep == std::string_view::npos) break;
            body.remove_prefix(sep + 1);
        }
        return values;
    }
    if (looks_numeric(raw)) return parse_double(raw);
    return raw;
}

std::vector<std::pair<std::string, bool>> split_csv_line(std::string_view line) {
    std::vector<std::pair<std::string, bool>> fields;
    std::string current;
    bool quoted = false;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_quotes) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                current += '"';
                ++i;
            } else if (c == '"') {
                in_quotes = false;
            } else {
                current += c;
            }
        } else if (c == '"') {
            in_quotes = true;
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back(current, quoted);
            current.clear();
            quoted = false;
        } else {
            current += c;
        }
    }
    fields.emplace_back(current, quoted);
    return fields;
}

std::string json_number(double value) {
    if (std::isfinite(value)) return format_double(value);
    return json(format_double(value)).dump();
}

}  // namespace

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

double parse_double(std::string_view text) {
    if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (text == "inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    double value;
    const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
    if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
        throw ParseError("not a number: '" + std::string(text) + "'");
    }
    return value;
}

OutputFormat parse_format(std::string_view name) {
    if (name == "csv") return OutputFormat::Csv;
    if (name == "jsonl" || name == "json-lines") return OutputFormat::JsonLines;
    throw ParseError("unknown output format '" + std::string(name) + "'");
}

std::string extension(OutputFormat format) { return format == OutputFormat::Csv ? "csv" : "jsonl"; }

void Table::add_row(std::vector<TableValue> row) {
    if (row.size() != columns_.size()) throw ValidationError("row width does not match the header");
    rows_.push_back(std::move(row));
}

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (columns_[i] == name) return i;
    }
    throw ParseError("missing column '" + std::string(name) + "'");
}

double Table::number(std::size_t row, std::string_view name) const {
    const auto& value = rows_.at(row).at(column(name));
    if (const auto* d = std::get_if<double>(&value)) return *d;
    if (const auto* v = std::get_if<std::vector<double>>(&value); v && v->size() == 1) return v->front();
    throw ParseError("column '" + std::string(name) + "' is not numeric");
}

std::string Table::text(std::size_t row, std::string_view name) const {
    const auto& value = rows_.at(row).at(column(name));
    if (const auto* s = std::get_if<std::string>(&value)) return *s;
    if (const auto* d = std::get_if<double>(&value)) return format_double(*d);
    throw ParseError("column '" + std::string(name) + "' is not text");
}

std::vector<double> Table::numbers(std::size_t row, std::string_view name) const {
    const auto& value = rows_.at(row).at(column(name));
    if (const auto* v = std::get_if<std::vector<double>>(&value)) return *v;
    if (const auto* d = std::get_if<double>(&value)) return {*d};
    throw ParseError("column '" + std::string(name) + "' is not a vector");
}

std::string Table::to_string(OutputFormat format) const {
    std::ostringstream out;
    if (format == OutputFormat::Csv) {
        for (std::size_t c = 0; c < columns_.size(); ++c) out << (c ? "," : "") << columns_[c];
        out << '\n';
        for (const auto& row : rows_) {
            for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << csv_field(row[c]);
            out << '\n';
        }
        return out.str();
    }
    for (const auto& row : rows_) {
        out << '{';
        for (std::size_t c = 0; c < row.size(); ++c) {
            out << (c ? "," : "") << json(columns_[c]).dump() << ':';
            const auto& value = row[c];
            if (const auto* d = std::get_if<double>(&value)) {
                out << json_number(*d);
            } else if (const auto* v = std::get_if<std::vector<double>>(&value)) {
                out << '[';
                for (std::size_t i = 0; i < v->size(); ++i) out << (i ? "," : "") << json_number((*v)[i]);
                out << ']';
            } else {
                out << json(std::get<std::string>(value)).dump();
            }
        }
        out << "}\n";
    }
    return out.str();
}

Table Table::parse(std::string_view content, OutputFormat format) {
    std::vector<std::string> lines;
    std::istringstream in{std::string(content)};
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) lines.push_back(line);
    }
    if (format == OutputFormat::Csv) {
        if (lines.empty()) throw ParseError("empty table");
        std::vector<std::string> header;
        for (auto& [name, quoted] : split_csv_line(lines.front())) header.push_back(name);
        Table table(header);
        for (std::size_t i = 1; i < lines.size(); ++i) {
            std::vector<TableValue> row;
            for (auto& [raw, quoted] : split_csv_line(lines[i])) row.push_back(csv_value(raw, quoted));
            if (row.size() != header.size()) {
                throw ParseError("line " + std::to_string(i + 1) + ": wrong number of fields");
            }
            table.add_row(std::move(row));
        }
        return table;
    }
    Table table;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        json object;
        try {
            object = json::parse(lines[i]);
        } catch (const json::parse_error&) {
            throw ParseError("line " + std::to_string(i + 1) + ": malformed JSON");
        }
        if (i == 0) {
            for (const auto& [key, value] : object.items()) table.columns_.push_back(key);
        }
        std::vector<TableValue> row;
        for (const auto& name : table.columns_) {
            const auto it = object.find(name);
            if (it == object.end()) throw ParseError("line " + std::to_string(i + 1) + ": missing " + name);
            auto scalar = [&](const json& v) -> double {
                if (v.is_number()) return parse_double(v.dump());
                if (v.is_string()) return parse_double(v.get<std::string>());
                throw ParseError("line " + std::to_string(i + 1) + ": expected a number in " + name);
            };
            if (it->is_array()) {
                std::vector<double> values;
                for (const auto& v : *it) values.push_back(scalar(v));
                row.emplace_back(std::move(values));
            } else if (it->is_number()) {
                row.emplace_back(scalar(*it));
            } else if (it->is_string() && looks_numeric(it->get<std::string>())) {
                row.emplace_back(scalar(*it));
            } else {
                row.emplace_back(it->get<std::string>());
            }
        }
        table.add_row(std::move(row));
    }
    return table;
}

void write_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path temp = target.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + temp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw Error("cannot write '" + temp.string() + "'");
    }
    fs::rename(temp, target);
}

void write_table(const std::string& path, const Table& table, OutputFormat format) {
    write_atomic(path, table.to_string(format));
}

Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot read '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const bool jsonl = path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl";
    return Table::parse(buffer.str(), jsonl ? OutputFormat::JsonLines : OutputFormat::Csv);
}

}  // namespace robust_merton
