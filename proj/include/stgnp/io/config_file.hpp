#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "stgnp/core/errors.hpp"

namespace stgnp::io {

/// Plain UTF-8 key/value configuration with [section] headers. Lines starting
/// with '#' are comments; keys and values are trimmed of surrounding spaces.
using ConfigSections = std::map<std::string, std::map<std::string, std::string>>;

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
    return s.substr(a, b - a);
}

inline ConfigSections parse_config_text(std::istream& is, const std::string& what) {
    ConfigSections sections;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw format_error(what + ":" + std::to_string(lineno) + ": unterminated section");
            section = trim(t.substr(1, t.size() - 2));
            sections[section];
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw format_error(what + ":" + std::to_string(lineno) + ": expected key = value");
        sections[section][trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return sections;
}

inline ConfigSections load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw format_error("cannot open config file " + path.string());
    return parse_config_text(is, path.string());
}

inline void save_config(const std::filesystem::path& path, const ConfigSections& sections) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw format_error("cannot write config file " + path.string());
    for (const auto& [section, kv] : sections) {
        os << "[" << section << "]\n";
        for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
        os << "\n";
    }
}

}  // namespace stgnp::io
