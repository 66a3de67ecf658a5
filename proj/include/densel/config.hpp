#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace densel {

/*
 * Plain-text key=value configuration.
 *
 * Lines are `key = value`; blank lines and lines starting with '#' are
 * ignored. Keys are unique; a repeated key is a ConfigError. Entries are kept
 * sorted by key so that serialization is deterministic.
 */
class KeyValueConfig
{
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse(std::string_view text);
    static KeyValueConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const;
    void set(const std::string& key, std::string value);
    void erase(const std::string& key);

    /* Applies a single `key=value` override string. */
    void applyOverride(std::string_view assignment);

    /* Copies every entry of `other` that is not already present. */
    void mergeDefaults(const KeyValueConfig& other);

    std::optional<std::string> find(const std::string& key) const;
    std::string getString(const std::string& key) const;
    std::string getString(const std::string& key, const std::string& fallback) const;
    double getDouble(const std::string& key) const;
    double getDouble(const std::string& key, double fallback) const;
    long long getInt(const std::string& key) const;
    long long getInt(const std::string& key, long long fallback) const;
    std::vector<double> getDoubleList(const std::string& key) const;
    std::vector<int> getIntList(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const { return mEntries; }

    std::string serialize() const;

private:
    std::map<std::string, std::string> mEntries;
};

std::vector<double> parseDoubleList(std::string_view text, const std::string& key);
std::vector<int> parseIntList(std::string_view text, const std::string& key);

} // namespace densel
