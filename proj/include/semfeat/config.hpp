#pragma once

// TOML-like run configuration.
//
// Grammar (one statement per line):
//   line     := blank | comment | section | pair
//   comment  := '#' anything
//   section  := '[' name ']'
//   pair     := key '=' value [comment]
//   value    := string | bare | list
//   string   := '"' chars '"'         (\" and \\ escapes)
//   bare     := run of non-space chars (numbers, true/false, paths)
//   list     := '[' [value {',' value}] ']'   (single line, no nesting)
// Keys inside a section are addressed as "section.key". A key may be set
// once per file; `--set section.key=value` overrides afterwards.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "util.hpp"

namespace semfeat {

struct ConfigValue {
    std::vector<std::string> items; // scalars hold exactly one item
    bool is_list = false;
};

class Config {
public:
    static Config parse(std::string_view text, std::string_view origin = "config") {
        Config c;
        std::string section;
        std::size_t line_no = 0;
        for (auto raw : split(text, '\n')) {
            ++line_no;
            std::string_view line = trim(strip_comment(raw));
            if (line.empty()) continue;
            const std::string where = std::string(origin) + " line " + std::to_string(line_no);
            if (line.front() == '[') {
                if (line.back() != ']' || line.size() < 3) fail(ErrorKind::schema, where + ": malformed section header");
                section = std::string(trim(line.substr(1, line.size() - 2)));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) fail(ErrorKind::schema, where + ": expected key = value");
            const std::string key = std::string(trim(line.substr(0, eq)));
            if (key.empty()) fail(ErrorKind::schema, where + ": empty key");
            const std::string full = section.empty() ? key : section + "." + key;
            if (c.values_.contains(full)) fail(ErrorKind::schema, where + ": duplicate key '" + full + "'");
            c.values_[full] = parse_value(trim(line.substr(eq + 1)), where);
        }
        return c;
    }

    static Config load(const std::filesystem::path& path) { return parse(read_file(path), path.string()); }

    /// Apply "key=value" with the file's value grammar.
    void set(std::string_view assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string_view::npos) fail(ErrorKind::usage, "--set expects key=value, got '" + std::string(assignment) + "'");
        const std::string key = std::string(trim(assignment.substr(0, eq)));
        if (key.empty()) fail(ErrorKind::usage, "--set with empty key");
        values_[key] = parse_value(trim(assignment.substr(eq + 1)), "--set " + key);
    }

    bool has(const std::string& key) const { return values_.contains(key); }

    std::optional<std::string> get_string(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        if (it->second.is_list) fail(ErrorKind::schema, "'" + key + "' must be a scalar");
        return it->second.items.front();
    }

    std::string string_or(const std::string& key, std::string fallback) const {
        auto v = get_string(key);
        return v ? *v : fallback;
    }

    std::string require_string(const std::string& key) const {
        auto v = get_string(key);
        if (!v) fail(ErrorKind::schema, "config key '" + key + "' is required");
        return *v;
    }

    template <typename Int>
    std::optional<Int> get_int(const std::string& key) const {
        auto v = get_string(key);
        if (!v) return std::nullopt;
        Int out{};
        if (!parse_int(*v, out)) fail(ErrorKind::schema, "'" + key + "' must be an integer, got '" + *v + "'");
        return out;
    }

    std::optional<double> get_double(const std::string& key) const {
        auto v = get_string(key);
        if (!v) return std::nullopt;
        double out = 0.0;
        if (!parse_double(*v, out)) fail(ErrorKind::schema, "'" + key + "' must be a number, got '" + *v + "'");
        return out;
    }

    std::optional<bool> get_bool(const std::string& key) const {
        auto v = get_string(key);
        if (!v) return std::nullopt;
        if (*v == "true") return true;
        if (*v == "false") return false;
        fail(ErrorKind::schema, "'" + key + "' must be true or false, got '" + *v + "'");
    }

    /// A list, or a scalar read as a one-element list.
    std::optional<std::vector<std::string>> get_list(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        return it->second.items;
    }

    std::optional<std::vector<std::size_t>> get_index_list(const std::string& key) const {
        auto items = get_list(key);
        if (!items) return std::nullopt;
        std::vector<std::size_t> out;
        for (const auto& s : *items) {
            std::size_t v = 0;
            if (!parse_int(s, v)) fail(ErrorKind::schema, "'" + key + "' must list non-negative integers, got '" + s + "'");
            out.push_back(v);
        }
        return out;
    }

    /// Canonical text of every setting, sorted by key; the input to the
    /// config hash.
    std::string canonical() const {
        std::string out;
        for (const auto& [k, v] : values_) {
            out += k + "=";
            if (v.is_list) out += "[";
            for (std::size_t i = 0; i < v.items.size(); ++i) {
                if (i) out += ",";
                out += quote(v.items[i]);
            }
            if (v.is_list) out += "]";
            out += "\n";
        }
        return out;
    }

    const std::map<std::string, ConfigValue>& values() const { return values_; }

private:
    static std::string_view strip_comment(std::string_view line) {
        bool in_string = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '\\' && in_string) {
                ++i;
            } else if (line[i] == '"') {
                in_string = !in_string;
            } else if (line[i] == '#' && !in_string) {
                return line.substr(0, i);
            }
        }
        return line;
    }

    static std::string quote(const std::string& s) {
        std::string out = "\"";
        for (char c : s) {
            if (c == '"' || c == '\\') out += '\\';
            out += c;
        }
        return out + "\"";
    }

    static std::string parse_scalar(std::string_view s, const std::string& where) {
        s = trim(s);
        if (s.empty()) fail(ErrorKind::schema, where + ": empty value");
        if (s.front() != '"') {
            for (char c : s)
                if (c == '"' || c == ' ' || c == '\t') fail(ErrorKind::schema, where + ": unquoted value contains space or quote");
            return std::string(s);
        }
        if (s.size() < 2 || s.back() != '"') fail(ErrorKind::schema, where + ": unterminated string");
        std::string out;
        for (std::size_t i = 1; i + 1 < s.size(); ++i) {
            if (s[i] == '\\') {
                if (i + 2 >= s.size()) fail(ErrorKind::schema, where + ": dangling escape");
                out += s[++i];
            } else if (s[i] == '"') {
                fail(ErrorKind::schema, where + ": stray quote in string");
            } else {
                out += s[i];
            }
        }
        return out;
    }

    static ConfigValue parse_value(std::string_view s, const std::string& where) {
        ConfigValue v;
        if (!s.empty() && s.front() == '[') {
            if (s.back() != ']') fail(ErrorKind::schema, where + ": unterminated list");
            v.is_list = true;
            std::string_view body = trim(s.substr(1, s.size() - 2));
            if (body.empty()) return v;
            // Split on commas outside quotes.
            bool in_string = false;
            std::size_t start = 0;
            for (std::size_t i = 0; i <= body.size(); ++i) {
                if (i < body.size() && body[i] == '\\' && in_string) {
                    ++i;
                    continue;
                }
                if (i < body.size() && body[i] == '"') in_string = !in_string;
                if (i == body.size() || (body[i] == ',' && !in_string)) {
                    v.items.push_back(parse_scalar(body.substr(start, i - start), where));
                    start = i + 1;
                }
            }
            return v;
        }
        v.items.push_back(parse_scalar(s, where));
        return v;
    }

    std::map<std::string, ConfigValue> values_;
};

} // namespace semfeat
