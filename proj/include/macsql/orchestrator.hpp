#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "macsql/datasets.hpp"
#include "macsql/decomposer.hpp"
#include "macsql/llm_backend.hpp"
#include "macsql/refiner.hpp"
#include "macsql/selector.hpp"

namespace macsql {

struct PipelineConfig {
    double pruning_fraction = kDefaultPruningFraction;
    size_t context_window = 0;  // 0: ask the backend
    int shots = 2;
    int max_rounds = kDefaultMaxRounds;
    std::chrono::milliseconds query_timeout = kDefaultQueryTimeout;
    bool deterministic = false;  // zero every timing so traces are byte-stable
    std::string model_name;
    double temperature = 0.0;
    size_t max_output_tokens = 2048;
};

struct PruningTrace {
    PruningDecision decision;
    PrunedSchema pruned;
};

/// Full trace of one question.
struct PipelineState {
    Task task;
    size_t schema_tokens = 0;
    bool pruning_triggered = false;
    std::optional<PruningTrace> pruning;  // present when the selector ran and its answer was usable
    std::optional<DecompositionResult> decomposition;
    std::vector<RefineAttempt> refine_attempts;
    std::vector<AgentCall> calls;  // in call order
    std::string final_sql;
    std::vector<std::string> warnings;
    std::string error;  // "<ErrorType>: message" when a stage failed hard
    std::chrono::milliseconds elapsed{0};
};

nlohmann::json state_to_json(const PipelineState& state);
PipelineState state_from_json(const nlohmann::json& j);  // throws nlohmann::json::exception

/// Selector (only above the size threshold), then decomposer, then refine loop. Never throws for
/// per-question failures; they land in `error` with the best candidate SQL so far.
PipelineState run_question(const Task& task, DatabaseRegistry& registry, LlmBackend& backend,
                           const PipelineConfig& config);

struct BatchProgress {
    size_t done = 0;
    size_t total = 0;
    const PipelineState* state = nullptr;
    bool resumed = false;
};

struct BatchOptions {
    size_t parallelism = 1;
    std::filesystem::path journal;  // optional; one JSON state per line
    const std::atomic<bool>* cancel = nullptr;
    std::function<void(const BatchProgress&)> on_progress;
};

struct BatchResult {
    std::vector<PipelineState> states;  // input order; unfinished tasks are omitted when cancelled
    size_t resumed = 0;
    size_t executed = 0;
    bool cancelled = false;
    std::vector<std::string> warnings;
};

/// Tasks already present in the journal are not re-run.
BatchResult run_batch(const std::vector<Task>& tasks, DatabaseRegistry& registry, LlmBackend& backend,
                      const PipelineConfig& config, const BatchOptions& options);

/// States keyed by task_id; unparseable lines are skipped with a warning.
std::map<std::string, PipelineState> load_journal(const std::filesystem::path& path,
                                                  std::vector<std::string>* warnings = nullptr);

/// Journal states in file order.
std::vector<PipelineState> read_journal(const std::filesystem::path& path,
                                        std::vector<std::string>* warnings = nullptr);

struct InstructionRecord {
    std::string task_id;
    std::string agent_task;  // selector, decomposer or refiner
    std::string prompt;
    std::string target_response;
    std::string db_id;
    std::string difficulty;  // "unlabeled" when the benchmark has none
    bool passed = true;
    std::string note;
};

nlohmann::json record_to_json(const InstructionRecord& record);

/// One record per agent call of every state whose final SQL matches gold by execution.
/// Gold comes from `gold_by_task`, falling back to the state's task. Refiner records target the
/// corrected SQL when one was extracted. Throws MissingGold.
std::vector<InstructionRecord> export_instruction_data(const std::vector<PipelineState>& states,
                                                       const std::map<std::string, std::string>& gold_by_task,
                                                       DatabaseRegistry& registry,
                                                       std::chrono::milliseconds timeout = kDefaultQueryTimeout);

}  // namespace macsql
