#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace emrg::toml {

/// Minimal TOML subset: [section] headers, key = value lines, # comments.
/// Values: quoted strings, integers, floats, booleans, and flat arrays of
/// those. No nested tables, no dates, no multi-line strings.
struct Value {
    enum class Kind { string, integer, floating, boolean, array };

    Kind kind = Kind::string;
    std::string str;
    std::int64_t integer = 0;
    double floating = 0.0;
    bool boolean = false;
    std::vector<Value> array;

    bool is_number() const { return kind == Kind::integer || kind == Kind::floating; }
    /// Numeric coercion: integers widen to double, nothing else converts.
    double as_double() const;
    std::int64_t as_int() const;
    const std::string& as_string() const;
    bool as_bool() const;
    const std::vector<Value>& as_array() const;
};

/// Keys at the document root live in the "" section.
struct Document {
    std::map<std::string, std::map<std::string, Value>> sections;

    bool has(const std::string& section, const std::string& key) const;
    const Value* find(const std::string& section, const std::string& key) const;

    // Typed getters returning the fallback when the key is absent; a present
    // key of the wrong type throws parse_error.
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& section, const std::string& key,
                         std::int64_t fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::string get_string(const std::string& section, const std::string& key,
                           std::string fallback) const;
    std::vector<double> get_double_array(const std::string& section, const std::string& key,
                                         std::vector<double> fallback) const;
    std::vector<std::int64_t> get_int_array(const std::string& section, const std::string& key,
                                            std::vector<std::int64_t> fallback) const;
    std::vector<std::string> get_string_array(const std::string& section, const std::string& key,
                                              std::vector<std::string> fallback) const;
};

/// Throws parse_error with a line number on malformed input.
Document parse(const std::string& text);
Document parse_file(const std::string& path);

} // namespace emrg::toml
