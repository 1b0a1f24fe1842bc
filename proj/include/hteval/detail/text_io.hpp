#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hteval::detail {

/// One parsed delimited record with the 1-based line on which it started.
struct DelimitedRecord {
    std::size_t line = 0;
    std::vector<std::string> fields;
};

/// Parses RFC-4180 style delimited text: quoted fields may contain the
/// delimiter, doubled quotes and line breaks. Both LF and CRLF terminators
/// are accepted. Throws LoadError naming the line of an unterminated quote.
std::vector<DelimitedRecord> parse_delimited(std::string_view text, char delimiter);

/// Quotes a field only when it contains the delimiter, a quote or a line break.
std::string quote_field(std::string_view field, char delimiter);

std::string join_record(const std::vector<std::string>& fields, char delimiter);

/// Returns the byte offset of the first invalid UTF-8 sequence, or npos.
std::size_t find_invalid_utf8(std::string_view text);

std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temporary file and renames it into place, so a
/// failed write never leaves a truncated artifact behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string_view trim(std::string_view s);
std::string ascii_fold(std::string_view s);

/// Fixed-point rendering with round-half-up applied to the decimal value
/// `numerator / denominator`, computed in integers.
std::string format_ratio_percent(long long numerator, long long denominator, int decimals);

/// Shortest decimal text that round-trips the double.
std::string format_exact(double value);

}  // namespace hteval::detail
