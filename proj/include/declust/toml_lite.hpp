#pragma once

// Minimal TOML-style reader/writer covering what scenario files need:
// bare keys, strings, integers, floats, booleans, (nested, multi-line)
// arrays, [table] headers and [[array-of-table]] headers, '#' comments.
// Inline tables, dotted keys, dates and multi-line strings are rejected.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "declust/errors.hpp"

namespace declust::toml {

class Value;
using Array = std::vector<Value>;
using Table = std::map<std::string, Value>;

class Value {
public:
    Value() : data_(std::int64_t{0}) {}
    Value(bool b) : data_(b) {}
    Value(std::int64_t i) : data_(i) {}
    Value(int i) : data_(static_cast<std::int64_t>(i)) {}
    Value(double d) : data_(d) {}
    Value(const char* s) : data_(std::string(s)) {}
    Value(std::string s) : data_(std::move(s)) {}
    Value(Array a) : data_(std::move(a)) {}
    Value(Table t) : data_(std::move(t)) {}

    bool is_bool() const { return std::holds_alternative<bool>(data_); }
    bool is_integer() const { return std::holds_alternative<std::int64_t>(data_); }
    bool is_float() const { return std::holds_alternative<double>(data_); }
    bool is_number() const { return is_integer() || is_float(); }
    bool is_string() const { return std::holds_alternative<std::string>(data_); }
    bool is_array() const { return std::holds_alternative<Array>(data_); }
    bool is_table() const { return std::holds_alternative<Table>(data_); }

    bool as_bool() const { return std::get<bool>(data_); }
    std::int64_t as_integer() const { return std::get<std::int64_t>(data_); }
    double as_number() const {
        return is_integer() ? static_cast<double>(as_integer()) : std::get<double>(data_);
    }
    const std::string& as_string() const { return std::get<std::string>(data_); }
    const Array& as_array() const { return std::get<Array>(data_); }
    Array& as_array() { return std::get<Array>(data_); }
    const Table& as_table() const { return std::get<Table>(data_); }
    Table& as_table() { return std::get<Table>(data_); }

    const char* type_name() const;

    bool operator==(const Value& other) const = default;

private:
    std::variant<bool, std::int64_t, double, std::string, Array, Table> data_;
};

// Throws ConfigError with a line reference on syntax problems.
Table parse(const std::string& text);
Table parse_file(const std::string& path);

// Canonical text form: scalars sorted by key, then sub-tables, then arrays
// of tables. parse(emit(t)) == t.
std::string emit(const Table& table);

}  // namespace declust::toml
