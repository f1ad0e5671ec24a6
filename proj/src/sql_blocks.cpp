#include "macsql/sql_blocks.hpp"

#include <cctype>
#include <json.hpp>

#include "macsql/text_util.hpp"

namespace macsql {

namespace {

struct Line {
    std::string_view text;
    size_t begin;
    size_t end;  // past the newline
};

std::vector<Line> split_lines(std::string_view text) {
    std::vector<Line> lines;
    size_t pos = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        const size_t stop = nl == std::string_view::npos ? text.size() : nl;
        lines.push_back({text.substr(pos, stop - pos), pos, nl == std::string_view::npos ? stop : stop + 1});
        pos = lines.back().end;
    }
    return lines;
}

std::string_view ltrim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    return s;
}

bool is_fence(std::string_view line) { return ltrim(line).substr(0, 3) == "```"; }

bool is_sql_tag(std::string_view language) { return language == "sql" || language == "sqlite"; }

std::optional<FencedBlock> trailing_query_region(std::string_view text) {
    const auto lines = split_lines(text);
    size_t last = lines.size();
    while (last > 0 && trim(lines[last - 1].text).empty()) --last;
    if (last == 0) return std::nullopt;
    size_t first = last;
    while (first > 0 && !trim(lines[first - 1].text).empty()) --first;
    for (size_t i = first; i < last; ++i) {
        if (!starts_with_query_keyword(ltrim(lines[i].text))) continue;
        FencedBlock block;
        block.begin = lines[i].begin;
        block.end = lines[last - 1].end;
        block.body = trim(text.substr(block.begin, block.end - block.begin));
        return block;
    }
    return std::nullopt;
}

}  // namespace

std::vector<FencedBlock> find_fenced_blocks(std::string_view text) {
    std::vector<FencedBlock> blocks;
    const auto lines = split_lines(text);
    for (size_t i = 0; i < lines.size(); ++i) {
        if (!is_fence(lines[i].text)) continue;
        FencedBlock block;
        block.begin = lines[i].begin;
        block.language = to_lower(trim(ltrim(lines[i].text).substr(3)));
        size_t j = i + 1;
        while (j < lines.size() && !is_fence(lines[j].text)) ++j;
        const size_t body_begin = lines[i].end;
        const size_t body_end = j < lines.size() ? lines[j].begin : text.size();
        block.body = trim(text.substr(body_begin, body_end - body_begin));
        block.end = j < lines.size() ? lines[j].end : text.size();
        blocks.push_back(std::move(block));
        i = j;
    }
    return blocks;
}

bool starts_with_query_keyword(std::string_view sql) {
    sql = ltrim(sql);
    for (std::string_view kw : {"select", "with"}) {
        if (sql.size() >= kw.size() && iequals(sql.substr(0, kw.size()), kw) &&
            (sql.size() == kw.size() || !(std::isalnum(static_cast<unsigned char>(sql[kw.size()])) ||
                                          sql[kw.size()] == '_'))) {
            return true;
        }
    }
    return false;
}

std::vector<FencedBlock> find_sql_blocks(std::string_view text) {
    const auto blocks = find_fenced_blocks(text);
    std::vector<FencedBlock> tagged;
    std::vector<FencedBlock> untagged;
    for (const auto& b : blocks) {
        if (b.body.empty()) continue;
        if (is_sql_tag(b.language)) {
            tagged.push_back(b);
        } else if (b.language.empty() && starts_with_query_keyword(b.body)) {
            untagged.push_back(b);
        }
    }
    if (!tagged.empty()) return tagged;
    if (!untagged.empty()) return untagged;
    if (blocks.empty()) {
        if (auto region = trailing_query_region(text)) return {std::move(*region)};
    }
    return {};
}

std::optional<std::string> extract_final_sql(std::string_view text) {
    auto blocks = find_sql_blocks(text);
    if (blocks.empty()) return std::nullopt;
    return std::move(blocks.back().body);
}

namespace {

std::optional<std::string> first_object_in(std::string_view text) {
    for (size_t start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        size_t i = start;
        for (; i < text.size(); ++i) {
            const char c = text[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}' && --depth == 0) {
                break;
            }
        }
        if (i >= text.size()) continue;
        const std::string candidate(text.substr(start, i - start + 1));
        const auto parsed = nlohmann::json::parse(candidate, nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object()) return candidate;
    }
    return std::nullopt;
}

}  // namespace

std::optional<std::string> extract_json_object(std::string_view text) {
    for (const auto& block : find_fenced_blocks(text)) {
        if (block.language != "json") continue;
        if (auto found = first_object_in(block.body)) return found;
    }
    return first_object_in(text);
}

}  // namespace macsql
