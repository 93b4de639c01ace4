#pragma once

// Run configuration: flat `key = value` text with dotted sections
// (`lattice.k = 6`, or `[lattice]` followed by `k = 6`), checked against a
// typed schema. Unknown keys and malformed values are usage errors.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vdwalk/dyadic.hpp"

namespace vdwalk::cli {

class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

enum class ValueType : std::uint8_t { Int, UInt, Real, Dyadic, Text, Bool, RealList, IntList, TextList };

struct KeySpec {
    std::string key;
    ValueType type;
    std::string default_value;
    std::string help;
};

inline constexpr int kSchemaVersion = 1;

const std::vector<KeySpec>& schema();
const KeySpec* find_key(std::string_view key);

/// Sections a subcommand reads; `run` and `lattice` are always included.
std::vector<std::string> command_sections(std::string_view subcommand);

const std::vector<std::string>& subcommands();

class RunConfig {
public:
    /// Every schema key at its default.
    RunConfig();

    /// Parses config text; later keys override earlier ones. `origin` names
    /// the source in diagnostics.
    void merge_text(std::string_view text, std::string_view origin);
    void set(const std::string& key, const std::string& value);

    const std::string& raw(const std::string& key) const;

    std::int64_t get_int(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key) const;
    double get_real(const std::string& key) const;
    Dyadic get_dyadic(const std::string& key) const;
    const std::string& get_text(const std::string& key) const { return raw(key); }
    bool get_bool(const std::string& key) const;
    std::vector<double> get_reals(const std::string& key) const;
    std::vector<std::int64_t> get_ints(const std::string& key) const;
    std::vector<std::string> get_texts(const std::string& key) const;

    /// Canonical text of the keys in the given sections (all keys if empty),
    /// sorted, one `key = value` per line. Re-parsing it restores the config.
    std::string to_text(const std::vector<std::string>& sections = {}) const;
    std::map<std::string, std::string> subset(const std::vector<std::string>& sections) const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace vdwalk::cli
