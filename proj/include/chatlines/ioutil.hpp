#ifndef CHATLINES_IOUTIL_HPP
#define CHATLINES_IOUTIL_HPP

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace chatlines {

/// RFC 4180 field quoting; quotes only when needed.
std::string csv_escape(std::string_view field);

std::string csv_row(const std::vector<std::string>& fields);

/// Parses RFC 4180 CSV (quoted fields, embedded newlines and doubled
/// quotes) into rows of fields.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

std::string read_file(const std::filesystem::path& path);

/// Writes via a temp file in the same directory, then renames into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Hex-encoded SHA-256 of a byte string.
std::string sha256_hex(std::string_view data);

}  // namespace chatlines

#endif  // CHATLINES_IOUTIL_HPP
