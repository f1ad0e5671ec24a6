#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace macsql {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

/// Replaces every invalid UTF-8 sequence with U+FFFD and drops a leading BOM.
std::string sanitize_utf8(std::string_view bytes);

/// Reads a whole file as UTF-8 with lossy replacement. Throws std::runtime_error when unreadable.
std::string read_text_file(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, std::string_view text);

/// RFC 4180 style CSV: quoted fields, doubled quotes, embedded newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

/// Single-pass substitution of `{name}` placeholders. Unknown `{...}` sequences are copied verbatim,
/// and substituted values are never rescanned.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

}  // namespace macsql
