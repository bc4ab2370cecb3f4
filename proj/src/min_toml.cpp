#include "emrg/min_toml.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "emrg/errors.hpp"

namespace emrg::toml {

double Value::as_double() const {
    if (kind == Kind::floating) return floating;
    if (kind == Kind::integer) return static_cast<double>(integer);
    throw parse_error("value is not a number");
}

std::int64_t Value::as_int() const {
    if (kind == Kind::integer) return integer;
    throw parse_error("value is not an integer");
}

const std::string& Value::as_string() const {
    if (kind == Kind::string) return str;
    throw parse_error("value is not a string");
}

bool Value::as_bool() const {
    if (kind == Kind::boolean) return boolean;
    throw parse_error("value is not a boolean");
}

const std::vector<Value>& Value::as_array() const {
    if (kind == Kind::array) return array;
    throw parse_error("value is not an array");
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

[[noreturn]] void fail(int line, const std::string& what) {
    throw parse_error("line " + std::to_string(line) + ": " + what);
}

// Removes a trailing comment that starts outside any quoted string.
std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) quoted = !quoted;
        if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

std::string parse_quoted(const std::string& text, int line) {
    std::string out;
    for (std::size_t i = 1; i < text.size(); ++i) {
        char ch = text[i];
        if (ch == '\\') {
            if (i + 1 >= text.size()) fail(line, "dangling escape");
            char esc = text[++i];
            switch (esc) {
            case '"': out += '"'; break;
            case '\\': out += '\\'; break;
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            default: fail(line, std::string("unsupported escape \\") + esc);
            }
        } else if (ch == '"') {
            if (i + 1 != text.size()) fail(line, "trailing characters after string");
            return out;
        } else {
            out += ch;
        }
    }
    fail(line, "unterminated string");
}

Value parse_value(const std::string& raw, int line);

Value parse_array(const std::string& text, int line) {
    Value v;
    v.kind = Value::Kind::array;
    std::string inner = trim(text.substr(1, text.size() - 2));
    if (inner.empty()) return v;
    std::vector<std::string> items;
    std::string cur;
    bool quoted = false;
    int depth = 0;
    for (std::size_t i = 0; i < inner.size(); ++i) {
        char ch = inner[i];
        if (ch == '"' && (i == 0 || inner[i - 1] != '\\')) quoted = !quoted;
        if (!quoted && ch == '[') ++depth;
        if (!quoted && ch == ']') --depth;
        if (ch == ',' && !quoted && depth == 0) {
            items.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    items.push_back(cur);
    for (const std::string& item : items) {
        std::string t = trim(item);
        if (t.empty()) fail(line, "empty array element");
        v.array.push_back(parse_value(t, line));
    }
    return v;
}

bool looks_like_integer(const std::string& s) {
    std::size_t i = (s[0] == '+' || s[0] == '-') ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    return true;
}

Value parse_value(const std::string& raw, int line) {
    Value v;
    if (raw.front() == '"') {
        v.kind = Value::Kind::string;
        v.str = parse_quoted(raw, line);
        return v;
    }
    if (raw.front() == '[') {
        if (raw.back() != ']') fail(line, "unterminated array");
        return parse_array(raw, line);
    }
    if (raw == "true" || raw == "false") {
        v.kind = Value::Kind::boolean;
        v.boolean = raw == "true";
        return v;
    }
    if (looks_like_integer(raw)) {
        v.kind = Value::Kind::integer;
        v.integer = std::strtoll(raw.c_str(), nullptr, 10);
        return v;
    }
    char* end = nullptr;
    double d = std::strtod(raw.c_str(), &end);
    if (end == raw.c_str() || *end != '\0') fail(line, "cannot parse value '" + raw + "'");
    v.kind = Value::Kind::floating;
    v.floating = d;
    return v;
}

bool valid_key(const std::string& key) {
    if (key.empty()) return false;
    for (char ch : key) {
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-') {
            return false;
        }
    }
    return true;
}

} // namespace

Document parse(const std::string& text) {
    Document doc;
    doc.sections[""];
    std::string section;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = trim(strip_comment(line));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') fail(line_no, "unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (!valid_key(section)) fail(line_no, "bad section name '" + section + "'");
            doc.sections[section];
            continue;
        }
        std::size_t eq = std::string::npos;
        bool quoted = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') quoted = !quoted;
            if (s[i] == '=' && !quoted) {
                eq = i;
                break;
            }
        }
        if (eq == std::string::npos) fail(line_no, "expected key = value");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (!valid_key(key)) fail(line_no, "bad key '" + key + "'");
        if (value.empty()) fail(line_no, "missing value for '" + key + "'");
        if (doc.sections[section].count(key)) fail(line_no, "duplicate key '" + key + "'");
        doc.sections[section][key] = parse_value(value, line_no);
    }
    return doc;
}

Document parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

bool Document::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

const Value* Document::find(const std::string& section, const std::string& key) const {
    auto sec = sections.find(section);
    if (sec == sections.end()) return nullptr;
    auto val = sec->second.find(key);
    return val == sec->second.end() ? nullptr : &val->second;
}

namespace {

std::string where(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
}

} // namespace

double Document::get_double(const std::string& section, const std::string& key,
                            double fallback) const {
    const Value* v = find(section, key);
    if (!v) return fallback;
    if (!v->is_number()) throw parse_error("'" + where(section, key) + "' must be a number");
    return v->as_double();
}

std::int64_t Document::get_int(const std::string& section, const std::string& key,
                               std::int64_t fallback) const {
    const Value* v = find(section, key);
    if (!v) return fallback;
    if (v->kind != Value::Kind::integer) {
        throw parse_error("'" + where(section, key) + "' must be an integer");
    }
    return v->integer;
}

bool Document::get_bool(const std::string& section, const std::string& key,
                        bool fallback) const {
    const Value* v = find(section, key);
    if (!v) return fallback;
    if (v->kind != Value::Kind::boolean) {
        throw parse_error("'" + where(section, key) + "' must be a boolean");
    }
    return v->boolean;
}

std::string Document::get_string(const std::string& section, const std::string& key,
                                 std::string fallback) const {
    const Value* v = find(section, key);
    if (!v) return fallback;
    if (v->kind != Value::Kind::string) {
        throw parse_error("'" + where(section, key) + "' must be a string");
    }
    return v->str;
}

std::vector<double> Document::get_double_array(const std::string& section,
                                               const std::string& key,
                                               std::vector<double> fallback) const {
    const Value* v = find(section, key);
    if (!v) return fallback;
    std::vector<double> out;
    for (const Value& item : v->as_array()) {
        if (!item.is_number()) {
            throw parse_error("'" + where(section, key) + "' must hold numbers");
        }
        out.push_back(item.as_double());
    }
    return out;
}

std::vector<std::int64_t> Document::get_int_array(const std::string& section,
                                                  const std::string& key,
                                                  std::vector<std::int64_t> fallback) const {
    const Value* v = find(section, key);
    if (!v) return fallback;
    std::vector<std::int64_t> out;
    for (const Value& item : v->as_array()) {
        if (item.kind != Value::Kind::integer) {
            throw parse_error("'" + where(section, key) + "' must hold integers");
        }
        out.push_back(item.integer);
    }
    return out;
}

std::vector<std::string> Document::get_string_array(const std::string& section,
                                                    const std::string& key,
                                                    std::vector<std::string> fallback) const {
    const Value* v = find(section, key);
    if (!v) return fallback;
    std::vector<std::string> out;
    for (const Value& item : v->as_array()) {
        if (item.kind != Value::Kind::string) {
            throw parse_error("'" + where(section, key) + "' must hold strings");
        }
        out.push_back(item.str);
    }
    return out;
}

} // namespace emrg::toml
