#include "srcplan/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

#include "srcplan/error.hpp"
#include "srcplan/rng.hpp"

namespace srcplan {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::pair<std::string, std::string> split_assignment(std::string_view line) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw UsageError("expected key = value, got '" + std::string(line) + "'");
    std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw UsageError("empty key in '" + std::string(line) + "'");
    return {key, std::string(trim(line.substr(eq + 1)))};
}

[[noreturn]] void bad_value(std::string_view key, std::string_view what, const std::string& value) {
    throw UsageError(fmt::format("config key '{}': expected {}, got '{}'", key, what, value));
}

}  // namespace

Config Config::parse(std::string_view text) {
    Config c;
    std::size_t lineno = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++lineno;
        if (line.empty() || line.front() == '#') continue;
        try {
            auto [k, v] = split_assignment(line);
            if (!c.values_.emplace(k, v).second) throw UsageError("key '" + k + "' given twice");
        } catch (const UsageError& e) {
            throw UsageError(fmt::format("config line {}: {}", lineno, e.what()));
        }
    }
    return c;
}

Config Config::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse(ss.str());
    } catch (const UsageError& e) {
        throw UsageError(path.string() + ": " + e.what());
    }
}

void Config::set_override(std::string_view assignment) {
    auto [k, v] = split_assignment(trim(assignment));
    values_[k] = v;
}

const std::string* Config::find(std::string_view key) const {
    auto it = values_.find(std::string(key));
    return it == values_.end() ? nullptr : &it->second;
}

std::string Config::get_string(std::string_view key, std::string_view fallback) const {
    const auto* v = find(key);
    return v ? *v : std::string(fallback);
}

std::uint64_t Config::get_u64(std::string_view key, std::uint64_t fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc{} || p != v->data() + v->size()) bad_value(key, "a non-negative integer", *v);
    return out;
}

std::size_t Config::get_size(std::string_view key, std::size_t fallback) const {
    return static_cast<std::size_t>(get_u64(key, fallback));
}

double Config::get_double(std::string_view key, double fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    double out = 0.0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc{} || p != v->data() + v->size()) bad_value(key, "a number", *v);
    return out;
}

bool Config::get_bool(std::string_view key, bool fallback) const {
    const auto* v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    bad_value(key, "true or false", *v);
}

std::vector<std::string> Config::get_list(std::string_view key) const {
    std::vector<std::string> out;
    const auto* v = find(key);
    if (!v) return out;
    std::string_view rest = *v;
    while (true) {
        const auto comma = rest.find(',');
        auto item = trim(rest.substr(0, comma));
        if (!item.empty()) out.emplace_back(item);
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
    }
    return out;
}

void Config::require_known(std::span<const std::string_view> known) const {
    std::string unknown;
    for (const auto& [k, _] : values_) {
        bool ok = false;
        for (auto kk : known) ok = ok || kk == k;
        if (!ok) unknown += (unknown.empty() ? "" : ", ") + k;
    }
    if (!unknown.empty()) throw UsageError("unknown config keys: " + unknown);
}

std::string Config::canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
}

std::string Config::hash() const { return fmt::format("{:016x}", fnv1a(canonical())); }

}  // namespace srcplan
