#pragma once

#include <map>
#include <string>
#include <vector>

#include "unts/error.hpp"

namespace unts {

// Flat key=value configuration: one pair per line, '#' starts a comment,
// blank lines ignored. Keys must come from a declared schema; unknown keys
// raise ConfigError.
class KeyValueConfig {
public:
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    long get_int(const std::string& key, long fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

    void check_schema(const std::vector<std::string>& allowed_keys) const;

    static KeyValueConfig parse_file(const std::string& path);
    void merge(const KeyValueConfig& overrides); // overrides win
    void save(const std::string& path) const;

private:
    std::map<std::string, std::string> values_;
};

} // namespace unts
