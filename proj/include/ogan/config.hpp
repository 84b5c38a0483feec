#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace ogan {

/// Flat `dotted.key = value` document. Keys keep insertion order, so a
/// formatted document echoes back byte for byte.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::string_view text, const std::string& origin = "config") {
        KeyValueConfig cfg;
        std::size_t lineno = 0;
        while (!text.empty()) {
            const auto nl = text.find('\n');
            std::string_view line = text.substr(0, nl);
            text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
            ++lineno;
            line = trim(line);
            if (line.empty() || line.front() == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string_view::npos)
                throw ArgumentError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
            const auto key = trim(line.substr(0, eq));
            if (key.empty()) throw ArgumentError(origin + ":" + std::to_string(lineno) + ": empty key");
            cfg.set(std::string(key), std::string(trim(line.substr(eq + 1))));
        }
        return cfg;
    }

    std::string format() const {
        std::string out;
        for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
        return out;
    }

    void set(const std::string& key, std::string value) {
        for (auto& [k, v] : entries_)
            if (k == key) {
                v = std::move(value);
                return;
            }
        entries_.emplace_back(key, std::move(value));
    }

    bool contains(const std::string& key) const { return find(key) != nullptr; }

    const std::string& get(const std::string& key) const {
        if (const auto* v = find(key)) return *v;
        throw ArgumentError("missing config key '" + key + "'");
    }

    double get_double(const std::string& key) const { return parse_number<double>(key, get(key)); }
    std::uint64_t get_u64(const std::string& key) const { return parse_number<std::uint64_t>(key, get(key)); }

    bool get_bool(const std::string& key) const {
        const auto& v = get(key);
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw ArgumentError("config key '" + key + "': expected true/false, got '" + v + "'");
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

    /// Every key must already be present in `known`.
    void require_known(const KeyValueConfig& known) const {
        for (const auto& [k, v] : entries_)
            if (!known.contains(k)) throw ArgumentError("unknown config key '" + k + "'");
    }

    /// Shortest text that parses back to exactly `v`.
    static std::string format_double(double v) {
        char buf[64];
        auto res = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, res.ptr);
    }

    template <typename N>
    static N parse_number(const std::string& key, const std::string& text) {
        N value{};
        const char* end = text.data() + text.size();
        auto res = std::from_chars(text.data(), end, value);
        if (res.ec != std::errc{} || res.ptr != end)
            throw ArgumentError("config key '" + key + "': cannot parse '" + text + "' as a number");
        return value;
    }

private:
    static std::string_view trim(std::string_view s) {
        const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
        while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
        while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
        return s;
    }

    const std::string* find(const std::string& key) const {
        for (const auto& [k, v] : entries_)
            if (k == key) return &v;
        return nullptr;
    }

    std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace ogan
