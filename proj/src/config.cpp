#include "extsolve/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace extsolve {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& s) {
    const auto p = s.find_first_of("#;");
    return p == std::string::npos ? s : s.substr(0, p);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
}

std::optional<double> to_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || errno == ERANGE) return std::nullopt;
    return v;
}

std::optional<long> to_long(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    errno = 0;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size() || errno == ERANGE) return std::nullopt;
    return v;
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& msg)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + msg), source_(source), line_(line), msg_(msg) {}

ConfigFile::ConfigFile(ConfigFile&& other) noexcept { *this = std::move(other); }

ConfigFile& ConfigFile::operator=(ConfigFile&& other) noexcept {
    source_ = std::move(other.source_);
    sections_ = std::move(other.sections_);
    for (auto& s : sections_) s.owner_ = this;
    empty_ = Section(this, "", 0);
    return *this;
}

ConfigFile ConfigFile::parse(std::istream& in, const std::string& source) {
    ConfigFile cfg;
    cfg.source_ = source;
    cfg.empty_ = Section(&cfg, "", 0);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string text = trim(strip_comment(raw));
        if (text.empty()) continue;
        if (text.front() == '[') {
            if (text.back() != ']') throw ConfigError(source, line, "unterminated section header");
            const std::string name = trim(text.substr(1, text.size() - 2));
            if (!valid_name(name)) throw ConfigError(source, line, "invalid section name '" + name + "'");
            for (const auto& s : cfg.sections_) {
                if (s.name() == name)
                    throw ConfigError(source, line,
                                      "section [" + name + "] repeats line " + std::to_string(s.line()));
            }
            cfg.sections_.emplace_back(&cfg, name, line);
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) throw ConfigError(source, line, "expected 'key = value'");
        if (cfg.sections_.empty()) throw ConfigError(source, line, "key outside of any section");
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (!valid_name(key)) throw ConfigError(source, line, "invalid key '" + key + "'");
        if (value.empty()) throw ConfigError(source, line, "key '" + key + "' has no value");
        auto& sec = cfg.sections_.back();
        if (sec.entries_.count(key))
            throw ConfigError(source, line,
                              "key '" + key + "' repeats line " + std::to_string(sec.entries_.at(key).line));
        sec.entries_[key] = Entry{value, line};
    }
    return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, 0, "cannot open config file");
    return parse(in, path);
}

bool ConfigFile::has(const std::string& section) const {
    return std::any_of(sections_.begin(), sections_.end(), [&](const Section& s) { return s.name() == section; });
}

const ConfigFile::Section& ConfigFile::section(const std::string& name) const {
    for (const auto& s : sections_) {
        if (s.name() == name) return s;
    }
    return empty_;
}

std::vector<const ConfigFile::Section*> ConfigFile::sections_with_prefix(const std::string& prefix) const {
    std::vector<const Section*> out;
    for (const auto& s : sections_) {
        if (s.name().rfind(prefix + ".", 0) == 0) out.push_back(&s);
    }
    return out;
}

void ConfigFile::reject_unused() const {
    for (const auto& s : sections_) {
        if (s.used_.empty() && s.entries_.empty()) continue;
        for (const auto& [key, e] : s.entries_) {
            if (!s.used_.count(key))
                throw ConfigError(source_, e.line, "unknown key '" + key + "' in [" + s.name() + "]");
        }
    }
}

int ConfigFile::Section::line_of(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? line_ : it->second.line;
}

void ConfigFile::Section::fail(const std::string& key, const std::string& msg) const {
    const std::string where = name_.empty() ? msg : "[" + name_ + "] " + (key.empty() ? "" : key + ": ") + msg;
    throw ConfigError(owner_ ? owner_->source() : std::string("<config>"), line_of(key), where);
}

const ConfigFile::Entry& ConfigFile::Section::entry(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        if (name_.empty()) throw ConfigError(owner_ ? owner_->source() : "<config>", 0, "missing key '" + key + "'");
        fail("", "missing key '" + key + "'");
    }
    used_.insert(key);
    return it->second;
}

std::string ConfigFile::Section::get_string(const std::string& key) const { return entry(key).value; }

std::string ConfigFile::Section::get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
}

double ConfigFile::Section::get_double(const std::string& key) const {
    const auto v = to_double(entry(key).value);
    if (!v) fail(key, "expected a number, got '" + entry(key).value + "'");
    return *v;
}

double ConfigFile::Section::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

long ConfigFile::Section::get_int(const std::string& key) const {
    const auto v = to_long(entry(key).value);
    if (!v) fail(key, "expected an integer, got '" + entry(key).value + "'");
    return *v;
}

long ConfigFile::Section::get_int(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
}

bool ConfigFile::Section::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = entry(key).value;
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    fail(key, "expected true or false, got '" + v + "'");
}

std::vector<double> ConfigFile::Section::get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(entry(key).value)) {
        const auto v = to_double(item);
        if (!v) fail(key, "expected a list of numbers, got '" + item + "'");
        out.push_back(*v);
    }
    return out;
}

std::vector<long> ConfigFile::Section::get_ints(const std::string& key) const {
    std::vector<long> out;
    for (const auto& item : split_list(entry(key).value)) {
        const auto v = to_long(item);
        if (!v) fail(key, "expected a list of integers, got '" + item + "'");
        out.push_back(*v);
    }
    return out;
}

std::string ConfigFile::Section::get_choice(const std::string& key, const std::vector<std::string>& allowed,
                                            const std::string& fallback) const {
    const std::string v = get_string(key, fallback);
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        fail(key, "unknown value '" + v + "' (expected one of: " + list + ")");
    }
    return v;
}

}  // namespace extsolve
