#pragma once

// Machine-readable outputs: RFC-4180 CSV with round-trip doubles, SHA-256
// content hashes, and a run directory that writes files atomically and can
// roll back everything it wrote.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace vdwalk {

/// Shortest text that round-trips (%.17g), with "inf", "-inf", "nan".
std::string format_double(double v);

/// Quotes a field if it holds a comma, quote, CR or LF.
std::string csv_field(std::string_view text);

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    template <typename... Cells>
    void row(const Cells&... cells) {
        std::vector<std::string> r;
        r.reserve(sizeof...(cells));
        (r.push_back(cell(cells)), ...);
        add(std::move(r));
    }
    void add(std::vector<std::string> cells);

    std::size_t rows() const { return rows_.size(); }
    /// CRLF line endings per RFC 4180.
    std::string str() const;

    static std::string cell(double v) { return format_double(v); }
    static std::string cell(float v) { return format_double(v); }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(std::string_view s) { return std::string(s); }
    static std::string cell(const char* s) { return s; }
    static std::string cell(bool b) { return b ? "true" : "false"; }
    template <typename I>
        requires std::is_integral_v<I>
    static std::string cell(I v) {
        return std::to_string(v);
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

struct OutputEntry {
    std::string name;
    std::string sha256;
    std::uintmax_t bytes = 0;
};

/// Files of one run. Every write is atomic and recorded; discard() removes
/// all of them (and the directory if this object created it).
class RunDirectory {
public:
    explicit RunDirectory(std::filesystem::path dir);

    const std::filesystem::path& path() const { return dir_; }
    void write(const std::string& name, std::string_view content);
    const std::vector<OutputEntry>& entries() const { return entries_; }
    void discard();

private:
    std::filesystem::path dir_;
    bool created_ = false;
    std::vector<OutputEntry> entries_;
};

}  // namespace vdwalk
