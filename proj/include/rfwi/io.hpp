// SPDX-License-Identifier: Apache-2.0

#ifndef RFWI_IO_HPP
#define RFWI_IO_HPP

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rfwi
{

/// Shortest decimal text that round-trips to the same double ("nan", "inf" for specials).
std::string format_double(double v);

/// Parses a double, throwing ValidationError on trailing garbage.
double parse_double(std::string_view text);
long long parse_integer(std::string_view text);

std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(std::string_view text);
std::string sha256_file(const std::filesystem::path &path);

std::string read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, std::string_view contents);

/// Splits on a delimiter, trimming surrounding whitespace from each field.
std::vector<std::string> split_fields(std::string_view line, char delim = ',');
std::string trim(std::string_view s);

}  // namespace rfwi

#endif  // RFWI_IO_HPP
