#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ecx {

// Minimal delimited-text reader: RFC 4180 style quoting, CR/LF tolerant.
// Fields are returned unquoted and untrimmed.
std::vector<std::string> split_delimited(std::string_view line, char delim);

struct DelimitedTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line of each row

    // Index of `name` in the header, or nullopt.
    std::optional<std::size_t> column(std::string_view name) const;
};

DelimitedTable read_delimited(const std::filesystem::path& path, char delim = ',', bool has_header = true);
DelimitedTable parse_delimited(std::string_view text, char delim = ',', bool has_header = true);

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary sibling and rename so readers never see half a file.
void write_file(const std::filesystem::path& path, std::string_view content);

// Shortest decimal representation that parses back to the identical double.
std::string format_double(double value);
std::string format_fixed(double value, int decimals);

std::optional<double> parse_double(std::string_view text);
std::optional<std::int64_t> parse_int(std::string_view text);
std::string trim(std::string_view text);
std::string quote_field(std::string_view field, char delim = ',');

// Hex SHA-256 of a byte string / file.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace ecx
