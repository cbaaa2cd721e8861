#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace remtime::config {

enum class KeyType { text, integer, real, boolean, reals, integers, texts };

struct KeySpec {
    std::string key;
    KeyType type;
    std::string default_value;
    std::string help;
};

/// Every key a run may set. Lists are comma-separated; `integers` also accepts "auto".
const std::vector<KeySpec>& registry();

class RunConfig {
public:
    /// All registry keys at their defaults.
    RunConfig();

    /// Throws ConfigError for unknown keys or values of the wrong type.
    void set(const std::string& key, const std::string& value);
    /// Parses "key=value".
    void set_assignment(const std::string& assignment);
    /// Nested YAML maps become dotted keys; scalar sequences become lists.
    void merge_yaml(std::string_view text);
    void merge_yaml_file(const std::filesystem::path& path);

    const std::string& raw(const std::string& key) const;
    std::string text(const std::string& key) const { return raw(key); }
    std::int64_t integer(const std::string& key) const;
    std::size_t count(const std::string& key) const;  // integer >= 0
    double real(const std::string& key) const;
    bool boolean(const std::string& key) const;
    std::vector<double> reals(const std::string& key) const;
    /// Empty for "auto".
    std::vector<std::size_t> integers(const std::string& key) const;
    std::vector<std::string> texts(const std::string& key) const;

    /// Sorted `key=value` lines; the hash input.
    std::string canonical() const;
    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace remtime::config
