#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "macsql/llm_backend.hpp"
#include "macsql/schema_catalog.hpp"
#include "macsql/sql_exec.hpp"

namespace macsql {

struct RefineAttempt {
    int round = 1;  // 1-based
    std::string input_sql;
    ExecutionOutcome outcome;
    std::optional<std::string> corrected_sql;
};

/// True for every status except Ok.
bool diagnose(const ExecutionOutcome& outcome);

/// Text placed in the prompt's error and exception slots for an outcome.
std::string error_text_for(const ExecutionOutcome& outcome);
std::string exception_class_for(const ExecutionOutcome& outcome);

ChatRequest build_refiner_prompt(std::string_view question, std::string_view evidence, std::string_view schema_text,
                                 std::string_view fk_text, std::string_view old_sql, const ExecutionOutcome& outcome);

inline constexpr int kDefaultMaxRounds = 3;

struct RefineOptions {
    int max_rounds = kDefaultMaxRounds;  // corrections requested at most this many times
    std::chrono::milliseconds timeout = kDefaultQueryTimeout;
};

struct RefineResult {
    std::string final_sql;
    std::vector<RefineAttempt> attempts;  // at most max_rounds + 1
    std::vector<AgentCall> calls;
    std::vector<std::string> warnings;
};

/// Execute, and while the outcome needs a fix and rounds remain, ask for a correction and retry.
/// Returns the last candidate whether or not it succeeded. A correction without SQL ends the loop
/// and keeps the previous candidate. BackendUnavailable propagates.
RefineResult refine_loop(LlmBackend& backend, const std::filesystem::path& db_path, std::string_view question,
                         std::string_view evidence, const RenderedSchema& schema, std::string_view initial_sql,
                         const RefineOptions& options = {}, const ChatRequest& request_defaults = {});

}  // namespace macsql
