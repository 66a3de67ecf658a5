#include "densel/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "densel/errors.hpp"

namespace densel {

namespace {

std::string_view trim(std::string_view s)
{
    const auto isSpace = [](char c) {
        return c == ' ' || c == '\t' || c == '\r' || c == '\n';
    };
    while (!s.empty() && isSpace(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && isSpace(s.back()))
        s.remove_suffix(1);
    return s;
}

double toDouble(std::string_view text, const std::string& key)
{
    const auto t = trim(text);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty() ||
        !std::isfinite(value))
        throw ConfigError(fmt::format("key '{}': '{}' is not a finite number", key, t));
    return value;
}

long long toInt(std::string_view text, const std::string& key)
{
    const auto t = trim(text);
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
        throw ConfigError(fmt::format("key '{}': '{}' is not an integer", key, t));
    return value;
}

template <typename T, typename Convert>
std::vector<T> splitList(std::string_view text, const std::string& key, Convert convert)
{
    std::vector<T> out;
    if (trim(text).empty())
        return out;
    std::size_t start = 0;
    while (true) {
        const auto comma = text.find(',', start);
        const auto item = text.substr(start, comma == std::string_view::npos
                                                 ? std::string_view::npos
                                                 : comma - start);
        out.push_back(static_cast<T>(convert(item, key)));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return out;
}

} // namespace

std::vector<double> parseDoubleList(std::string_view text, const std::string& key)
{
    return splitList<double>(text, key, toDouble);
}

std::vector<int> parseIntList(std::string_view text, const std::string& key)
{
    return splitList<int>(text, key, [](std::string_view item, const std::string& k) {
        const auto v = toInt(item, k);
        if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
            throw ConfigError(fmt::format("key '{}': {} out of range", k, v));
        return v;
    });
}

KeyValueConfig KeyValueConfig::parse(std::string_view text)
{
    KeyValueConfig config;
    std::size_t lineNo = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto eol = text.find('\n', pos);
        const auto raw = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos
                                                                         : eol - pos);
        ++lineNo;
        const auto line = trim(raw);
        if (!line.empty() && line.front() != '#') {
            const auto eq = line.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError(fmt::format("line {}: expected key=value", lineNo));
            const std::string key(trim(line.substr(0, eq)));
            if (key.empty())
                throw ConfigError(fmt::format("line {}: empty key", lineNo));
            if (config.has(key))
                throw ConfigError(fmt::format("line {}: duplicate key '{}'", lineNo, key));
            config.set(key, std::string(trim(line.substr(eq + 1))));
        }
        if (eol == std::string_view::npos)
            break;
        pos = eol + 1;
    }
    return config;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError(fmt::format("cannot open config file '{}'", path.string()));
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

bool KeyValueConfig::has(const std::string& key) const
{
    return mEntries.count(key) != 0;
}

void KeyValueConfig::set(const std::string& key, std::string value)
{
    mEntries[key] = std::move(value);
}

void KeyValueConfig::erase(const std::string& key)
{
    mEntries.erase(key);
}

void KeyValueConfig::applyOverride(std::string_view assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos)
        throw ConfigError(fmt::format("override '{}' is not key=value", assignment));
    const std::string key(trim(assignment.substr(0, eq)));
    if (key.empty())
        throw ConfigError(fmt::format("override '{}' has an empty key", assignment));
    set(key, std::string(trim(assignment.substr(eq + 1))));
}

void KeyValueConfig::mergeDefaults(const KeyValueConfig& other)
{
    for (const auto& [key, value] : other.mEntries)
        mEntries.emplace(key, value);
}

std::optional<std::string> KeyValueConfig::find(const std::string& key) const
{
    const auto it = mEntries.find(key);
    if (it == mEntries.end())
        return std::nullopt;
    return it->second;
}

std::string KeyValueConfig::getString(const std::string& key) const
{
    const auto value = find(key);
    if (!value)
        throw ConfigError(fmt::format("missing required key '{}'", key));
    return *value;
}

std::string KeyValueConfig::getString(const std::string& key, const std::string& fallback) const
{
    return find(key).value_or(fallback);
}

double KeyValueConfig::getDouble(const std::string& key) const
{
    return toDouble(getString(key), key);
}

double KeyValueConfig::getDouble(const std::string& key, double fallback) const
{
    const auto value = find(key);
    return value ? toDouble(*value, key) : fallback;
}

long long KeyValueConfig::getInt(const std::string& key) const
{
    return toInt(getString(key), key);
}

long long KeyValueConfig::getInt(const std::string& key, long long fallback) const
{
    const auto value = find(key);
    return value ? toInt(*value, key) : fallback;
}

std::vector<double> KeyValueConfig::getDoubleList(const std::string& key) const
{
    return parseDoubleList(getString(key), key);
}

std::vector<int> KeyValueConfig::getIntList(const std::string& key) const
{
    return parseIntList(getString(key), key);
}

std::string KeyValueConfig::serialize() const
{
    std::string out;
    for (const auto& [key, value] : mEntries)
        out += fmt::format("{} = {}\n", key, value);
    return out;
}

} // namespace densel
