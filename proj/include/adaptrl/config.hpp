#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "adaptrl/errors.hpp"

namespace adaptrl {

/// Strict INI-style configuration: `[section]` headers and `key = value`
/// lines, '#' comments. Every key must be consumed by the run; leftovers are
/// rejected with their line numbers so typos cannot silently fall back to
/// defaults.
class Config {
public:
    static Config parse(const std::string& text) {
        Config cfg;
        cfg.text_ = text;
        std::istringstream is(text);
        std::string line, section;
        int line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            std::string s = strip(line);
            if (s.empty() || s[0] == '#') continue;
            if (s.front() == '[') {
                if (s.back() != ']')
                    throw ConfigInvalid("line " + std::to_string(line_no) +
                                        ": malformed section header");
                section = strip(s.substr(1, s.size() - 2));
                if (section.empty())
                    throw ConfigInvalid("line " + std::to_string(line_no) + ": empty section");
                cfg.sections_.insert(section);
                continue;
            }
            auto eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigInvalid("line " + std::to_string(line_no) +
                                    ": expected key = value");
            std::string key = strip(s.substr(0, eq));
            std::string value = strip(s.substr(eq + 1));
            if (key.empty())
                throw ConfigInvalid("line " + std::to_string(line_no) + ": empty key");
            if (cfg.entries_.count({section, key}))
                throw ConfigInvalid("line " + std::to_string(line_no) + ": duplicate key '" +
                                    key + "'");
            cfg.entries_[{section, key}] = {value, line_no};
        }
        return cfg;
    }

    static Config load(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw ConfigInvalid("cannot open config file: " + path);
        std::ostringstream buf;
        buf << is.rdbuf();
        return parse(buf.str());
    }

    const std::string& text() const { return text_; }

    bool has_section(const std::string& section) const { return sections_.count(section) > 0; }

    bool has(const std::string& section, const std::string& key) const {
        return entries_.count({section, key}) > 0;
    }

    std::string get_string(const std::string& section, const std::string& key) {
        auto it = entries_.find({section, key});
        if (it == entries_.end())
            throw ConfigInvalid("missing required key '" + key + "' in section [" + section +
                                "]");
        consumed_.insert({section, key});
        return it->second.value;
    }

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) {
        return has(section, key) ? get_string(section, key) : fallback;
    }

    double get_double(const std::string& section, const std::string& key) {
        return parse_number<double>(section, key, get_string(section, key));
    }
    double get_double(const std::string& section, const std::string& key, double fallback) {
        return has(section, key) ? get_double(section, key) : fallback;
    }

    long get_int(const std::string& section, const std::string& key) {
        return parse_number<long>(section, key, get_string(section, key));
    }
    long get_int(const std::string& section, const std::string& key, long fallback) {
        return has(section, key) ? get_int(section, key) : fallback;
    }

    std::uint64_t get_u64(const std::string& section, const std::string& key,
                          std::uint64_t fallback) {
        if (!has(section, key)) return fallback;
        return parse_number<std::uint64_t>(section, key, get_string(section, key));
    }

    bool get_bool(const std::string& section, const std::string& key, bool fallback) {
        if (!has(section, key)) return fallback;
        std::string v = get_string(section, key);
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw ConfigInvalid(where(section, key) + ": expected boolean, got '" + v + "'");
    }

    std::vector<double> get_doubles(const std::string& section, const std::string& key) {
        std::istringstream is(get_string(section, key));
        std::vector<double> out;
        std::string tok;
        while (std::getline(is, tok, ',')) {
            tok = strip(tok);
            if (!tok.empty()) out.push_back(parse_number<double>(section, key, tok));
        }
        if (out.empty()) throw ConfigInvalid(where(section, key) + ": empty list");
        return out;
    }

    /// Throws unless every parsed key has been read by the run.
    void ensure_all_consumed() const {
        for (const auto& [sk, entry] : entries_) {
            if (consumed_.count(sk)) continue;
            throw ConfigInvalid("line " + std::to_string(entry.line) + ": unknown key '" +
                                sk.second + "' in section [" + sk.first + "]");
        }
    }

private:
    struct Entry {
        std::string value;
        int line = 0;
    };

    static std::string strip(const std::string& s) {
        auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    std::string where(const std::string& section, const std::string& key) const {
        auto it = entries_.find({section, key});
        return "line " + std::to_string(it == entries_.end() ? 0 : it->second.line);
    }

    template <typename T>
    T parse_number(const std::string& section, const std::string& key,
                   const std::string& value) {
        std::istringstream is(value);
        T out{};
        is >> out;
        if (is.fail() || !is.eof())
            throw ConfigInvalid(where(section, key) + ": expected number, got '" + value + "'");
        return out;
    }

    std::string text_;
    std::set<std::string> sections_;
    std::map<std::pair<std::string, std::string>, Entry> entries_;
    std::set<std::pair<std::string, std::string>> consumed_;
};

}  // namespace adaptrl
