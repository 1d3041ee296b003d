#include "specstab_cli/config.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "specstab/io.hpp"

namespace specstab::cli {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

const std::map<std::string, std::vector<std::string>>& RunConfig::schema() {
    static const std::map<std::string, std::vector<std::string>> keys{
        {"net", {"widths", "activation", "bias", "gain", "init", "loss", "model"}},
        {"train",
         {"epochs", "batch_size", "learning_rate", "penalty", "penalty_weight", "curvature_guard", "probe_size"}},
        {"experiment",
         {"data", "n", "d", "classes", "separation", "noise", "outputs", "images", "labels", "dataset", "limit",
          "seed", "threads", "epsilon", "n_mc", "law", "n_inits", "gains", "x_index", "pairs", "grid_points",
          "psi_lipschitz", "dy_scale", "eta", "steps", "hessian", "hessian_cap", "eval_points"}},
        {"output", {"dir"}},
    };
    return keys;
}

RunConfig RunConfig::parse(std::string_view text) {
    RunConfig cfg;
    std::string section;
    std::size_t lineno = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw;
        if (const auto hash = line.find_first_of("#;"); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const std::string where = "config line " + std::to_string(lineno) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(where + "unterminated section header");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (!schema().contains(section))
                throw ConfigError(where + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + "expected 'key = value'");
        if (section.empty())
            throw ConfigError(where + "entry outside of any section");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        const auto& allowed = schema().at(section);
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError(where + "unknown key '" + key + "' in [" + section + "]");
        if (cfg.values_[section].contains(key))
            throw ConfigError(where + "duplicate key '" + key + "'");
        cfg.values_[section][key] = value;
    }
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    return parse(read_file(path));
}

bool RunConfig::has(const std::string& section, const std::string& key) const {
    const auto s = values_.find(section);
    return s != values_.end() && s->second.contains(key);
}

std::string RunConfig::get(const std::string& section, const std::string& key, const std::string& fallback) const {
    if (!has(section, key))
        return fallback;
    return values_.at(section).at(key);
}

double RunConfig::get_double(const std::string& section, const std::string& key, double fallback) const {
    if (!has(section, key))
        return fallback;
    try {
        return parse_double(values_.at(section).at(key));
    } catch (const std::invalid_argument&) {
        throw ConfigError("[" + section + "] " + key + ": not a number '" + values_.at(section).at(key) + "'");
    }
}

std::uint64_t RunConfig::get_u64(const std::string& section, const std::string& key, std::uint64_t fallback) const {
    if (!has(section, key))
        return fallback;
    const std::string& v = values_.at(section).at(key);
    std::uint64_t out = 0;
    std::size_t used = 0;
    try {
        if (v.empty() || v.front() == '-')
            throw std::invalid_argument(v);
        out = std::stoull(v, &used, 10);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || v.empty())
        throw ConfigError("[" + section + "] " + key + ": not a nonnegative integer '" + v + "'");
    return out;
}

bool RunConfig::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key))
        return fallback;
    const std::string& v = values_.at(section).at(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    throw ConfigError("[" + section + "] " + key + ": not a boolean '" + v + "'");
}

std::vector<double> RunConfig::get_list(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback) const {
    if (!has(section, key))
        return fallback;
    std::vector<double> out;
    std::stringstream ss(values_.at(section).at(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(parse_double(trim(item)));
        } catch (const std::invalid_argument&) {
            throw ConfigError("[" + section + "] " + key + ": bad list entry '" + item + "'");
        }
    }
    if (out.empty())
        throw ConfigError("[" + section + "] " + key + ": empty list");
    return out;
}

void RunConfig::set(const std::string& section, const std::string& key, const std::string& value) {
    const auto& allowed = schema().at(section);
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        throw ConfigError("unknown key '" + key + "' in [" + section + "]");
    values_[section][key] = value;
}

std::string RunConfig::canonical() const {
    std::string out;
    for (const auto& [section, kv] : values_) {
        out += "[" + section + "]\n";
        for (const auto& [k, v] : kv)
            out += k + " = " + v + "\n";
    }
    return out;
}

std::string config_hash(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace specstab::cli
