#include "macsql/refiner.hpp"

#include "macsql/errors.hpp"
#include "macsql/prompts.hpp"
#include "macsql/sql_blocks.hpp"
#include "macsql/text_util.hpp"

namespace macsql {

bool diagnose(const ExecutionOutcome& outcome) { return outcome.status != ExecStatus::Ok; }

std::string error_text_for(const ExecutionOutcome& outcome) {
    if (outcome.status == ExecStatus::EmptyResult) return "empty result set";
    return outcome.error_message;
}

std::string exception_class_for(const ExecutionOutcome& outcome) {
    if (outcome.status == ExecStatus::EmptyResult) return "EmptyResult";
    if (outcome.status == ExecStatus::Timeout) return "Timeout";
    return outcome.exception_class;
}

ChatRequest build_refiner_prompt(std::string_view question, std::string_view evidence, std::string_view schema_text,
                                 std::string_view fk_text, std::string_view old_sql, const ExecutionOutcome& outcome) {
    ChatRequest request;
    request.user_text = fill_template(prompts::kRefiner, {
                                                             {"query", std::string(question)},
                                                             {"evidence", std::string(evidence)},
                                                             {"desc_str", std::string(schema_text)},
                                                             {"fk_str", std::string(fk_text)},
                                                             {"sql", std::string(old_sql)},
                                                             {"sqlite_error", error_text_for(outcome)},
                                                             {"exception_class", exception_class_for(outcome)},
                                                         });
    return request;
}

RefineResult refine_loop(LlmBackend& backend, const std::filesystem::path& db_path, std::string_view question,
                         std::string_view evidence, const RenderedSchema& schema, std::string_view initial_sql,
                         const RefineOptions& options, const ChatRequest& request_defaults) {
    if (options.max_rounds < 1) throw InvalidRequest("max_rounds must be at least 1");
    RefineResult result;
    std::string candidate(initial_sql);
    for (int round = 1;; ++round) {
        RefineAttempt attempt;
        attempt.round = round;
        attempt.input_sql = candidate;
        attempt.outcome = execute_sql(db_path, candidate, options.timeout);
        if (!diagnose(attempt.outcome) || round > options.max_rounds) {
            result.attempts.push_back(std::move(attempt));
            break;
        }
        ChatRequest request = build_refiner_prompt(question, evidence, schema.schema_text, schema.fk_text, candidate,
                                                   attempt.outcome);
        request.temperature = request_defaults.temperature;
        request.max_output_tokens = request_defaults.max_output_tokens;
        request.model_name = request_defaults.model_name;
        AgentCall call = call_agent(backend, "refiner", request);
        auto corrected = extract_final_sql(call.response);
        result.calls.push_back(std::move(call));
        if (!corrected) {
            result.warnings.push_back("refiner round " + std::to_string(round) + " returned no SQL");
            result.attempts.push_back(std::move(attempt));
            break;
        }
        attempt.corrected_sql = *corrected;
        candidate = std::move(*corrected);
        result.attempts.push_back(std::move(attempt));
    }
    result.final_sql = candidate;
    return result;
}

}  // namespace macsql
