#pragma once

// Flat key = value run configuration. Lines starting with '#' are comments.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace srcplan {

class Config {
public:
    // Throws UsageError with the 1-based line number on malformed lines or
    // repeated keys.
    static Config parse(std::string_view text);
    static Config load(const std::filesystem::path& path);

    // Applies "key=value".
    void set_override(std::string_view assignment);
    void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }
    bool has(std::string_view key) const { return values_.find(std::string(key)) != values_.end(); }

    std::string get_string(std::string_view key, std::string_view fallback) const;
    std::size_t get_size(std::string_view key, std::size_t fallback) const;
    std::uint64_t get_u64(std::string_view key, std::uint64_t fallback) const;
    double get_double(std::string_view key, double fallback) const;
    bool get_bool(std::string_view key, bool fallback) const;
    // Comma-separated, trimmed, empty entries dropped.
    std::vector<std::string> get_list(std::string_view key) const;

    // Throws UsageError naming every key not in `known`.
    void require_known(std::span<const std::string_view> known) const;

    // Sorted "key=value" lines.
    std::string canonical() const;
    // 16 hex digits of FNV-1a over canonical().
    std::string hash() const;
    const std::map<std::string, std::string>& values() const { return values_; }

private:
    const std::string* find(std::string_view key) const;
    std::map<std::string, std::string> values_;
};

}  // namespace srcplan
