#include "declust/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace declust::toml {

namespace {

[[noreturn]] void fail(long line, const std::string& message) {
    throw ConfigError({{"", "line " + std::to_string(line), message}});
}

bool is_bare_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

struct Cursor {
    const std::string& text;
    size_t pos = 0;
    long line = 1;

    bool done() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }
    char take() {
        char c = text[pos++];
        if (c == '\n') ++line;
        return c;
    }

    void skip_ws_and_comments(bool cross_lines) {
        while (!done()) {
            char c = peek();
            if (c == '#') {
                while (!done() && peek() != '\n') take();
            } else if (c == ' ' || c == '\t' || c == '\r') {
                take();
            } else if (c == '\n' && cross_lines) {
                take();
            } else {
                break;
            }
        }
    }
};

std::string parse_basic_string(Cursor& cur) {
    const long start = cur.line;
    cur.take();  // opening quote
    std::string out;
    while (true) {
        if (cur.done()) fail(start, "unterminated string");
        char c = cur.take();
        if (c == '"') break;
        if (c == '\n') fail(start, "strings may not span lines");
        if (c == '\\') {
            if (cur.done()) fail(start, "unterminated escape");
            char e = cur.take();
            switch (e) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                default: fail(cur.line, std::string("unsupported escape \\") + e);
            }
        } else {
            out += c;
        }
    }
    return out;
}

Value parse_number(Cursor& cur) {
    const long line = cur.line;
    std::string token;
    while (!cur.done()) {
        char c = cur.peek();
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' ||
            c == '.' || c == 'e' || c == 'E' || c == '_') {
            if (c != '_') token += c;
            cur.take();
        } else {
            break;
        }
    }
    if (token.empty()) fail(line, "expected a number");

    const bool is_float = token.find_first_of(".eE") != std::string::npos;
    if (!is_float) {
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
        if (ec != std::errc{} || ptr != token.data() + token.size()) {
            fail(line, "malformed integer '" + token + "'");
        }
        return Value(v);
    }
    try {
        size_t used = 0;
        double v = std::stod(token, &used);
        if (used != token.size() || !std::isfinite(v)) {
            fail(line, "malformed number '" + token + "'");
        }
        return Value(v);
    } catch (const std::exception&) {
        fail(line, "malformed number '" + token + "'");
    }
}

Value parse_value(Cursor& cur);

Value parse_array(Cursor& cur) {
    cur.take();  // '['
    Array items;
    while (true) {
        cur.skip_ws_and_comments(true);
        if (cur.done()) fail(cur.line, "unterminated array");
        if (cur.peek() == ']') {
            cur.take();
            break;
        }
        items.push_back(parse_value(cur));
        cur.skip_ws_and_comments(true);
        if (cur.done()) fail(cur.line, "unterminated array");
        if (cur.peek() == ',') {
            cur.take();
        } else if (cur.peek() != ']') {
            fail(cur.line, "expected ',' or ']' in array");
        }
    }
    return Value(std::move(items));
}

Value parse_value(Cursor& cur) {
    cur.skip_ws_and_comments(true);
    if (cur.done()) fail(cur.line, "expected a value");
    char c = cur.peek();
    if (c == '"') return Value(parse_basic_string(cur));
    if (c == '[') return parse_array(cur);
    if (c == '{') fail(cur.line, "inline tables are not supported");
    if (std::isalpha(static_cast<unsigned char>(c))) {
        std::string word;
        while (!cur.done() && is_bare_key_char(cur.peek())) word += cur.take();
        if (word == "true") return Value(true);
        if (word == "false") return Value(false);
        fail(cur.line, "unrecognized value '" + word + "'");
    }
    return parse_number(cur);
}

std::string parse_key(Cursor& cur) {
    std::string key;
    while (!cur.done() && is_bare_key_char(cur.peek())) key += cur.take();
    if (key.empty()) fail(cur.line, "expected a key");
    return key;
}

std::vector<std::string> parse_header_path(Cursor& cur) {
    std::vector<std::string> path;
    while (true) {
        cur.skip_ws_and_comments(false);
        path.push_back(parse_key(cur));
        cur.skip_ws_and_comments(false);
        if (!cur.done() && cur.peek() == '.') {
            cur.take();
            continue;
        }
        break;
    }
    return path;
}

// Walks to (and creates) the table addressed by a [header] path; the last
// element of an array-of-tables is entered when a path segment names one.
Table* descend(Table* root, const std::vector<std::string>& path, long line,
               size_t count) {
    Table* where = root;
    for (size_t i = 0; i < count; ++i) {
        auto it = where->find(path[i]);
        if (it == where->end()) {
            it = where->emplace(path[i], Value(Table{})).first;
        }
        Value& v = it->second;
        if (v.is_array()) {
            if (v.as_array().empty() || !v.as_array().back().is_table()) {
                fail(line, "'" + path[i] + "' is not a table");
            }
            where = &v.as_array().back().as_table();
        } else if (v.is_table()) {
            where = &v.as_table();
        } else {
            fail(line, "'" + path[i] + "' is not a table");
        }
    }
    return where;
}

}  // namespace

const char* Value::type_name() const {
    if (is_bool()) return "boolean";
    if (is_integer()) return "integer";
    if (is_float()) return "float";
    if (is_string()) return "string";
    if (is_array()) return "array";
    return "table";
}

Table parse(const std::string& text) {
    Table root;
    Cursor cur{text};
    Table* current = &root;

    while (true) {
        cur.skip_ws_and_comments(true);
        if (cur.done()) break;

        if (cur.peek() == '[') {
            const long line = cur.line;
            cur.take();
            const bool array_of_tables = !cur.done() && cur.peek() == '[';
            if (array_of_tables) cur.take();

            auto path = parse_header_path(cur);
            cur.skip_ws_and_comments(false);
            if (cur.done() || cur.take() != ']') fail(line, "unterminated table header");
            if (array_of_tables) {
                if (cur.done() || cur.take() != ']') {
                    fail(line, "unterminated array-of-tables header");
                }
            }

            Table* parent = descend(&root, path, line, path.size() - 1);
            const std::string& name = path.back();
            if (array_of_tables) {
                auto it = parent->find(name);
                if (it == parent->end()) {
                    it = parent->emplace(name, Value(Array{})).first;
                }
                if (!it->second.is_array()) {
                    fail(line, "'" + name + "' already holds a non-array value");
                }
                it->second.as_array().push_back(Value(Table{}));
                current = &it->second.as_array().back().as_table();
            } else {
                auto it = parent->find(name);
                if (it != parent->end()) {
                    fail(line, "table '" + name + "' re-opened");
                }
                it = parent->emplace(name, Value(Table{})).first;
                current = &it->second.as_table();
            }
            continue;
        }

        const long line = cur.line;
        std::string key = parse_key(cur);
        cur.skip_ws_and_comments(false);
        if (cur.done() || cur.take() != '=') {
            fail(line, "expected '=' after key '" + key + "'");
        }
        cur.skip_ws_and_comments(false);
        Value value = parse_value(cur);
        if (!current->emplace(std::move(key), std::move(value)).second) {
            fail(line, "duplicate key");
        }
        cur.skip_ws_and_comments(false);
        if (!cur.done() && cur.peek() != '\n' && cur.peek() != '#') {
            fail(line, "trailing characters after value");
        }
    }
    return root;
}

Table parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError({{"", path, "cannot open configuration file"}});
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

namespace {

std::string escape(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    out += '"';
    return out;
}

std::string scalar_text(const Value& v);

std::string array_text(const Array& items) {
    std::string out = "[";
    for (size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += scalar_text(items[i]);
    }
    out += "]";
    return out;
}

std::string scalar_text(const Value& v) {
    if (v.is_bool()) return v.as_bool() ? "true" : "false";
    if (v.is_integer()) return std::to_string(v.as_integer());
    if (v.is_float()) {
        // shortest round-trip formatting
        std::string s = nlohmann::json(v.as_number()).dump();
        if (s.find_first_of(".eE") == std::string::npos) s += ".0";
        return s;
    }
    if (v.is_string()) return escape(v.as_string());
    if (v.is_array()) return array_text(v.as_array());
    throw ConfigError("cannot emit a nested table as a scalar");
}

void emit_table(const Table& table, const std::string& prefix, std::string& out) {
    for (const auto& [key, value] : table) {
        if (!value.is_table() &&
            !(value.is_array() && !value.as_array().empty() &&
              value.as_array().front().is_table())) {
            out += key + " = " + scalar_text(value) + "\n";
        }
    }
    for (const auto& [key, value] : table) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (value.is_table()) {
            out += "\n[" + path + "]\n";
            emit_table(value.as_table(), path, out);
        } else if (value.is_array() && !value.as_array().empty() &&
                   value.as_array().front().is_table()) {
            for (const auto& item : value.as_array()) {
                out += "\n[[" + path + "]]\n";
                emit_table(item.as_table(), path, out);
            }
        }
    }
}

}  // namespace

std::string emit(const Table& table) {
    std::string out;
    emit_table(table, "", out);
    return out;
}

}  // namespace declust::toml
