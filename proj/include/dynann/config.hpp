#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynann/index.hpp"

namespace dynann {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One parsed value: a scalar or a single-line homogeneous array of scalars.
struct ConfigNode {
    bool is_array = false;
    ParamValue scalar;
    std::vector<ParamValue> array;

    std::vector<ParamValue> choices() const {
        if (is_array) return array;
        return {scalar};
    }
};

// A parsed config file: dotted-path keys ("dataset.n0") in file order
// within each section, sections in file order.  The accepted grammar is a
// strict subset of TOML (documented in docs/formats.md): [section] headers,
// bare keys, strings with basic escapes, integers, floats, booleans,
// single-line homogeneous arrays, and # comments.  Anything else is a
// parse error with a line number.
class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_text(const std::string& text, const std::string& origin = "<config>");

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    const ConfigNode& at(const std::string& key) const;

    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;

    std::int64_t require_int(const std::string& key) const;
    std::string require_string(const std::string& key) const;

    // Keys under "<prefix>." in file order, suffix only.
    std::vector<std::string> keys_under(const std::string& prefix) const;

    const std::vector<std::string>& ordered_keys() const { return order_; }

private:
    const ConfigNode* find(const std::string& key) const;
    [[noreturn]] void missing(const std::string& key) const;

    std::string origin_;
    std::map<std::string, ConfigNode> entries_;
    std::vector<std::string> order_;
};

// Cartesian product of the per-key choice lists, keys iterated in sorted
// (ParamMap) order, first key slowest.  A section of scalars yields exactly
// one grid point; an empty section yields one empty point.
std::vector<ParamMap> expand_grid(const ConfigFile& config, const std::string& prefix);

}  // namespace dynann
