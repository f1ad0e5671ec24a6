#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "macsql/llm_backend.hpp"

namespace macsql {

struct DecompositionStep {
    std::string sub_question;  // empty when the response carries no "Sub question N:" header
    std::string sub_sql;

    bool operator==(const DecompositionStep&) const = default;
};

struct DecompositionResult {
    std::vector<DecompositionStep> steps;  // at least one
    std::string raw_response;
    std::vector<std::string> warnings;

    const std::string& final_sql() const { return steps.back().sub_sql; }
};

inline constexpr size_t kMaxExpectedSteps = 5;

/// shots must be 0, 1 or 2 (InvalidRequest otherwise).
ChatRequest build_decomposer_prompt(std::string_view schema_text, std::string_view fk_text, std::string_view question,
                                    std::string_view evidence, int shots = 2);

/// Each SQL block becomes one step, paired with the closest unused "Sub question N:" header before
/// it. SQL text is the block interior, trimmed and otherwise untouched. Throws NoSqlFound.
DecompositionResult parse_decomposition(std::string_view response);

}  // namespace macsql
