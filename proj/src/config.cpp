#include "dynann/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace dynann {

namespace {

[[noreturn]] void fail(const std::string& origin, std::size_t line, const std::string& message) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + message);
}

bool is_bare_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-';
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a])) != 0) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])) != 0) --b;
    return s.substr(a, b - a);
}

// Cuts a trailing comment, respecting string quoting.
std::string strip_comment(const std::string& line, const std::string& origin, std::size_t ln) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
        } else if (c == '"') {
            in_string = true;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    if (in_string) fail(origin, ln, "unterminated string");
    return line;
}

class ValueParser {
public:
    ValueParser(const std::string& text, const std::string& origin, std::size_t line)
        : text_(text), origin_(origin), line_(line) {}

    // Parses the whole remaining text as one value (scalar or array).
    ConfigNode parse() {
        ConfigNode node;
        skip_ws();
        if (peek() == '[') {
            node.is_array = true;
            node.array = parse_array();
        } else {
            node.scalar = parse_scalar();
        }
        skip_ws();
        if (pos_ != text_.size()) fail(origin_, line_, "trailing characters after value");
        return node;
    }

private:
    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])) != 0) {
            ++pos_;
        }
    }

    std::vector<ParamValue> parse_array() {
        ++pos_;  // consume '['
        std::vector<ParamValue> values;
        skip_ws();
        if (peek() == ']') {
            ++pos_;
            return values;
        }
        while (true) {
            values.push_back(parse_scalar());
            if (values.size() > 1 && values.back().index() != values.front().index()) {
                // Integers promoted to double keep a mixed numeric array legal.
                const bool numeric_mix =
                    (std::holds_alternative<double>(values.front()) ||
                     std::holds_alternative<std::int64_t>(values.front())) &&
                    (std::holds_alternative<double>(values.back()) ||
                     std::holds_alternative<std::int64_t>(values.back()));
                if (!numeric_mix) fail(origin_, line_, "arrays must be homogeneous");
            }
            skip_ws();
            if (peek() == ',') {
                ++pos_;
                skip_ws();
                continue;
            }
            if (peek() == ']') {
                ++pos_;
                return values;
            }
            fail(origin_, line_, "expected ',' or ']' in array");
        }
    }

    ParamValue parse_scalar() {
        skip_ws();
        const char c = peek();
        if (c == '"') return parse_string();
        if (c == '[') fail(origin_, line_, "nested arrays are not supported");
        std::size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ']' &&
               std::isspace(static_cast<unsigned char>(text_[pos_])) == 0) {
            ++pos_;
        }
        const std::string token = text_.substr(start, pos_ - start);
        if (token.empty()) fail(origin_, line_, "empty value");
        if (token == "true") return true;
        if (token == "false") return false;
        return parse_number(token);
    }

    ParamValue parse_string() {
        ++pos_;  // consume '"'
        std::string out;
        while (pos_ < text_.size()) {
            const char c = text_[pos_++];
            if (c == '"') return out;
            if (c == '\\') {
                if (pos_ >= text_.size()) fail(origin_, line_, "dangling escape");
                const char e = text_[pos_++];
                switch (e) {
                    case '"': out.push_back('"'); break;
                    case '\\': out.push_back('\\'); break;
                    case 'n': out.push_back('\n'); break;
                    case 't': out.push_back('\t'); break;
                    default: fail(origin_, line_, std::string("unknown escape \\") + e);
                }
            } else {
                out.push_back(c);
            }
        }
        fail(origin_, line_, "unterminated string");
    }

    ParamValue parse_number(const std::string& token) {
        const bool looks_float = token.find_first_of(".eE") != std::string::npos;
        if (!looks_float) {
            std::int64_t v = 0;
            const auto [ptr, ec] =
                std::from_chars(token.data(), token.data() + token.size(), v);
            if (ec == std::errc() && ptr == token.data() + token.size()) return v;
            fail(origin_, line_, "not a valid integer: '" + token + "'");
        }
        try {
            std::size_t used = 0;
            const double v = std::stod(token, &used);
            if (used != token.size()) fail(origin_, line_, "not a valid number: '" + token + "'");
            return v;
        } catch (const std::exception&) {
            fail(origin_, line_, "not a valid number: '" + token + "'");
        }
    }

    const std::string& text_;
    const std::string& origin_;
    std::size_t line_;
    std::size_t pos_ = 0;
};

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
}

ConfigFile ConfigFile::parse_text(const std::string& text, const std::string& origin) {
    ConfigFile config;
    config.origin_ = origin;

    std::istringstream in(text);
    std::string raw;
    std::string section;
    std::size_t ln = 0;
    while (std::getline(in, raw)) {
        ++ln;
        const std::string line = trim(strip_comment(raw, origin, ln));
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') fail(origin, ln, "unterminated section header");
            const std::string name = trim(line.substr(1, line.size() - 2));
            if (name.empty()) fail(origin, ln, "empty section name");
            for (std::size_t i = 0; i < name.size(); ++i) {
                if (!is_bare_char(name[i]) && name[i] != '.') {
                    fail(origin, ln, "bad character in section name");
                }
                if (name[i] == '.' && (i == 0 || i + 1 == name.size() || name[i + 1] == '.')) {
                    fail(origin, ln, "malformed dotted section name");
                }
            }
            section = name;
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(origin, ln, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) fail(origin, ln, "empty key");
        for (char c : key) {
            if (!is_bare_char(c)) fail(origin, ln, "bad character in key '" + key + "'");
        }

        const std::string full = section.empty() ? key : section + "." + key;
        if (config.entries_.count(full) != 0) fail(origin, ln, "duplicate key '" + full + "'");

        const std::string value_text = trim(line.substr(eq + 1));
        if (value_text.empty()) fail(origin, ln, "missing value for '" + full + "'");
        ValueParser parser(value_text, origin, ln);
        config.entries_.emplace(full, parser.parse());
        config.order_.push_back(full);
    }
    return config;
}

const ConfigNode* ConfigFile::find(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
}

void ConfigFile::missing(const std::string& key) const {
    throw ConfigError(origin_ + ": missing required key '" + key + "'");
}

const ConfigNode& ConfigFile::at(const std::string& key) const {
    const ConfigNode* node = find(key);
    if (node == nullptr) missing(key);
    return *node;
}

namespace {

[[noreturn]] void wrong_type(const std::string& key, const char* expected) {
    throw ConfigError("key '" + key + "' must be " + expected);
}

std::int64_t as_int(const ConfigNode& node, const std::string& key) {
    if (node.is_array) wrong_type(key, "a scalar integer");
    if (const auto* v = std::get_if<std::int64_t>(&node.scalar)) return *v;
    wrong_type(key, "an integer");
}

}  // namespace

std::int64_t ConfigFile::get_int(const std::string& key, std::int64_t fallback) const {
    const ConfigNode* node = find(key);
    return node == nullptr ? fallback : as_int(*node, key);
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
    const ConfigNode* node = find(key);
    if (node == nullptr) return fallback;
    if (node->is_array) wrong_type(key, "a scalar number");
    if (const auto* v = std::get_if<double>(&node->scalar)) return *v;
    if (const auto* v = std::get_if<std::int64_t>(&node->scalar)) return static_cast<double>(*v);
    wrong_type(key, "a number");
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
    const ConfigNode* node = find(key);
    if (node == nullptr) return fallback;
    if (node->is_array) wrong_type(key, "a scalar boolean");
    if (const auto* v = std::get_if<bool>(&node->scalar)) return *v;
    wrong_type(key, "a boolean");
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
    const ConfigNode* node = find(key);
    if (node == nullptr) return fallback;
    if (node->is_array) wrong_type(key, "a scalar string");
    if (const auto* v = std::get_if<std::string>(&node->scalar)) return *v;
    wrong_type(key, "a string");
}

std::int64_t ConfigFile::require_int(const std::string& key) const {
    return as_int(at(key), key);
}

std::string ConfigFile::require_string(const std::string& key) const {
    const ConfigNode& node = at(key);
    if (node.is_array) wrong_type(key, "a scalar string");
    if (const auto* v = std::get_if<std::string>(&node.scalar)) return *v;
    wrong_type(key, "a string");
}

std::vector<std::string> ConfigFile::keys_under(const std::string& prefix) const {
    const std::string full = prefix + ".";
    std::vector<std::string> out;
    for (const std::string& key : order_) {
        if (key.size() > full.size() && key.compare(0, full.size(), full) == 0 &&
            key.find('.', full.size()) == std::string::npos) {
            out.push_back(key.substr(full.size()));
        }
    }
    return out;
}

std::vector<ParamMap> expand_grid(const ConfigFile& config, const std::string& prefix) {
    std::vector<std::string> keys = config.keys_under(prefix);
    std::sort(keys.begin(), keys.end());

    std::vector<ParamMap> grid{ParamMap{}};
    for (const std::string& key : keys) {
        const std::vector<ParamValue> choices = config.at(prefix + "." + key).choices();
        if (choices.empty()) {
            throw ConfigError("key '" + prefix + "." + key + "' has an empty choice list");
        }
        std::vector<ParamMap> next;
        next.reserve(grid.size() * choices.size());
        for (const ParamMap& base : grid) {
            for (const ParamValue& choice : choices) {
                ParamMap point = base;
                point[key] = choice;
                next.push_back(std::move(point));
            }
        }
        grid = std::move(next);
    }
    return grid;
}

}  // namespace dynann
