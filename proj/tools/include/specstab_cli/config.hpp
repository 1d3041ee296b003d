#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace specstab::cli {

/// Malformed or unknown configuration entries (exit code 1).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// INI-style `key = value` entries under [net], [train], [experiment], [output].
/// Keys outside the known set for their section are rejected with the line number.
class RunConfig {
public:
    static RunConfig parse(std::string_view text);
    static RunConfig load(const std::string& path);

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    std::uint64_t get_u64(const std::string& section, const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> get_list(const std::string& section, const std::string& key,
                                 const std::vector<double>& fallback) const;

    void set(const std::string& section, const std::string& key, const std::string& value);

    /// Sorted, normalized INI text; the manifest hash is taken over this.
    std::string canonical() const;

    static const std::map<std::string, std::vector<std::string>>& schema();

private:
    std::map<std::string, std::map<std::string, std::string>> values_;
};

/// FNV-1a 64-bit, hex encoded.
std::string config_hash(std::string_view canonical_text);

}  // namespace specstab::cli
