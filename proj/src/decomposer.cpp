#include "macsql/decomposer.hpp"

#include <regex>

#include "macsql/errors.hpp"
#include "macsql/prompts.hpp"
#include "macsql/sql_blocks.hpp"
#include "macsql/text_util.hpp"

namespace macsql {

ChatRequest build_decomposer_prompt(std::string_view schema_text, std::string_view fk_text, std::string_view question,
                                    std::string_view evidence, int shots) {
    if (shots < 0 || shots > 2) throw InvalidRequest("shots must be 0, 1 or 2");
    ChatRequest request;
    request.user_text = fill_template(prompts::decomposer_template(shots), {
                                                                               {"desc_str", std::string(schema_text)},
                                                                               {"fk_str", std::string(fk_text)},
                                                                               {"query", std::string(question)},
                                                                               {"evidence", std::string(evidence)},
                                                                           });
    return request;
}

namespace {

struct Header {
    size_t offset;
    std::string text;
};

std::vector<Header> find_headers(std::string_view text) {
    static const std::regex kHeader(R"((^|\n)[ \t*#]*Sub[ -]?question\s*\d+\s*[:.]\s*([^\n]*))", std::regex::icase);
    std::vector<Header> out;
    const std::string s(text);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), kHeader); it != std::sregex_iterator(); ++it) {
        std::string title = (*it)[2].str();
        // Markdown emphasis around the header label leaves stray asterisks.
        const auto first = title.find_first_not_of("* \t");
        const auto last = title.find_last_not_of("* \t\r");
        title = first == std::string::npos ? std::string() : title.substr(first, last - first + 1);
        out.push_back({static_cast<size_t>(it->position(0)), std::move(title)});
    }
    return out;
}

}  // namespace

DecompositionResult parse_decomposition(std::string_view response) {
    DecompositionResult result;
    result.raw_response = std::string(response);
    const auto blocks = find_sql_blocks(response);
    if (blocks.empty()) throw NoSqlFound("decomposer response contains no SQL");

    const auto headers = find_headers(response);
    size_t next_header = 0;
    size_t previous_end = 0;
    for (const auto& block : blocks) {
        DecompositionStep step;
        step.sub_sql = block.body;
        const Header* chosen = nullptr;
        while (next_header < headers.size() && headers[next_header].offset < block.begin) {
            if (headers[next_header].offset >= previous_end) chosen = &headers[next_header];
            ++next_header;
        }
        if (chosen) step.sub_question = chosen->text;
        previous_end = block.end;
        result.steps.push_back(std::move(step));
    }
    if (result.steps.size() > kMaxExpectedSteps) {
        result.warnings.push_back("decomposition has " + std::to_string(result.steps.size()) + " steps");
    }
    return result;
}

}  // namespace macsql
