#pragma once

#include "extsolve/types.hpp"

#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace extsolve {

// Config problems carry the file name and line so the CLI can point at them.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& source, int line, const std::string& msg);

    const std::string& source() const { return source_; }
    int line() const { return line_; }
    const std::string& message() const { return msg_; }

private:
    std::string source_;
    int line_;
    std::string msg_;
};

/// Sectioned key = value text:
///
///   # comment
///   [section.sub]
///   key = value            ; lists are comma separated
///
/// Keys before the first header are an error, as are repeated sections or
/// keys. Lookups mark entries as used so leftovers can be reported.
class ConfigFile {
public:
    struct Entry {
        std::string value;
        int line = 0;
    };

    class Section {
    public:
        Section(const ConfigFile* owner, std::string name, int line) : owner_(owner), name_(std::move(name)), line_(line) {}

        const std::string& name() const { return name_; }
        int line() const { return line_; }
        bool has(const std::string& key) const { return entries_.count(key) != 0; }

        std::string get_string(const std::string& key) const;
        std::string get_string(const std::string& key, const std::string& fallback) const;
        double get_double(const std::string& key) const;
        double get_double(const std::string& key, double fallback) const;
        long get_int(const std::string& key) const;
        long get_int(const std::string& key, long fallback) const;
        bool get_bool(const std::string& key, bool fallback) const;
        std::vector<double> get_doubles(const std::string& key) const;
        std::vector<long> get_ints(const std::string& key) const;
        std::string get_choice(const std::string& key, const std::vector<std::string>& allowed,
                               const std::string& fallback) const;

        /// Line of the key when present, otherwise the section header.
        int line_of(const std::string& key) const;
        [[noreturn]] void fail(const std::string& key, const std::string& msg) const;

    private:
        friend class ConfigFile;
        const Entry& entry(const std::string& key) const;

        const ConfigFile* owner_;
        std::string name_;
        int line_;
        std::map<std::string, Entry> entries_;
        mutable std::set<std::string> used_;
    };

    static ConfigFile parse(std::istream& in, const std::string& source);
    static ConfigFile load(const std::string& path);

    ConfigFile() = default;
    ConfigFile(const ConfigFile&) = delete;
    ConfigFile& operator=(const ConfigFile&) = delete;
    ConfigFile(ConfigFile&& other) noexcept;
    ConfigFile& operator=(ConfigFile&& other) noexcept;

    const std::string& source() const { return source_; }
    bool has(const std::string& section) const;
    /// Missing sections come back empty, anchored at line 0.
    const Section& section(const std::string& name) const;
    /// Sections whose name starts with "prefix.", in file order.
    std::vector<const Section*> sections_with_prefix(const std::string& prefix) const;
    const std::vector<Section>& sections() const { return sections_; }

    /// Throws for the first key that was never looked up.
    void reject_unused() const;

private:
    std::string source_;
    std::vector<Section> sections_;
    Section empty_{nullptr, "", 0};
};

}  // namespace extsolve
