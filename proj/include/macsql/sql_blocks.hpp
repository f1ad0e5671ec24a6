#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace macsql {

/// A ``` fenced region of an LLM response.
struct FencedBlock {
    std::string language;  // lower-cased info string, empty when untagged
    std::string body;      // interior, trimmed
    size_t begin = 0;      // offset of the opening fence
    size_t end = 0;        // offset just past the closing fence line
};

/// All fenced blocks in order of appearance. An unterminated final block runs to end of text.
std::vector<FencedBlock> find_fenced_blocks(std::string_view text);

/// True when `sql` starts with the SELECT or WITH keyword.
bool starts_with_query_keyword(std::string_view sql);

/// SQL bodies in order: every `sql`-tagged block; failing that, untagged blocks holding a query;
/// failing that, a trailing unfenced SELECT/WITH region.
std::vector<FencedBlock> find_sql_blocks(std::string_view text);

/// Last SQL body of a response, if any.
std::optional<std::string> extract_final_sql(std::string_view text);

/// First balanced `{...}` object that parses as JSON, preferring fenced json blocks.
std::optional<std::string> extract_json_object(std::string_view text);

}  // namespace macsql
