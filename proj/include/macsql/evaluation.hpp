#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "macsql/datasets.hpp"
#include "macsql/sql_exec.hpp"

namespace macsql {

enum class ErrorClass { None, GoldError, SchemaLinkingError, ExecutionError, EmptyResult, WrongResult };

std::string_view to_string(ErrorClass error_class);

struct ExecComparison {
    bool match = false;
    ExecutionOutcome pred;
    ExecutionOutcome gold;
};

/// Runs both queries; matches when both run to completion and their normalized rows agree
/// (order-sensitive when gold has a top-level ORDER BY).
ExecComparison compare_execution(std::string_view pred_sql, std::string_view gold_sql,
                                 const std::filesystem::path& db_path,
                                 std::chrono::milliseconds timeout = kDefaultQueryTimeout, bool distinct = false);

bool exec_match(std::string_view pred_sql, std::string_view gold_sql, const std::filesystem::path& db_path,
                std::chrono::milliseconds timeout = kDefaultQueryTimeout);

/// Wall time of one execution of `sql`. Injected in tests for deterministic VES.
using QueryTimer = std::function<std::chrono::nanoseconds(std::string_view sql)>;

/// Default timer: execute_sql on `db_path` and measure wall time.
QueryTimer wall_clock_timer(const std::filesystem::path& db_path, std::chrono::milliseconds timeout);

/// sqrt(median(gold times) / median(pred times)) over `repeats` runs after one warm-up run each.
double ves_ratio(std::string_view pred_sql, std::string_view gold_sql, const QueryTimer& timer, int repeats = 5);

/// Score for one item: ves_ratio when the item matches, otherwise 0.
double ves_score(std::string_view pred_sql, std::string_view gold_sql, const std::filesystem::path& db_path,
                 int repeats = 5, const QueryTimer& timer = {});

/// Clause-set equality; absent when either side falls outside the supported grammar.
std::optional<bool> exact_match(std::string_view pred_sql, std::string_view gold_sql,
                                const DatabaseSchema* schema = nullptr);

ErrorClass classify_error(const ExecutionOutcome& pred, const ExecutionOutcome& gold, bool ex,
                          std::optional<bool> em = std::nullopt);

struct OutcomeSummary {
    ExecStatus status = ExecStatus::OtherError;
    size_t row_count = 0;
    std::string error_message;

    static OutcomeSummary of(const ExecutionOutcome& outcome);
};

struct ItemScore {
    std::string task_id;
    std::string difficulty;  // "unlabeled" when absent
    std::string pred_sql;
    bool ex = false;
    std::optional<bool> em;
    std::optional<double> ves_ratio;  // present iff ex and timing was requested
    bool ves_measured = false;
    ErrorClass error_class = ErrorClass::None;
    bool review_semantic_correct = false;  // WrongResult items flagged for manual review
    OutcomeSummary pred_outcome;
    OutcomeSummary gold_outcome;
};

struct ScoreOptions {
    std::chrono::milliseconds timeout = kDefaultQueryTimeout;
    bool compute_ves = true;
    int ves_repeats = 5;
    QueryTimer timer;  // defaults to wall_clock_timer
    bool distinct = false;
};

/// Throws MissingGold when the task has no gold SQL.
ItemScore score_item(const Task& task, std::string_view pred_sql, const std::filesystem::path& db_path,
                     const DatabaseSchema* schema = nullptr, const ScoreOptions& options = {});

struct Aggregate {
    size_t count = 0;
    std::optional<double> ex;   // percent; absent for zero items
    std::optional<double> ves;  // percent; absent unless every item was timed
    std::optional<double> em;   // percent over items with EM defined
    size_t em_defined = 0;
};

struct EvalReport {
    Aggregate overall;
    std::map<std::string, Aggregate> by_difficulty;
    std::map<std::string, size_t> error_histogram;
    size_t review_candidates = 0;
    std::vector<ItemScore> items;
};

EvalReport build_report(std::vector<ItemScore> items);

nlohmann::json report_to_json(const EvalReport& report);
std::string render_report_text(const EvalReport& report);

/// task_id -> predicted SQL. Accepts a JSON object (values may carry the "\t----- bird -----\t<db_id>"
/// suffix), a JSON array of {task_id, sql} records, or a trace journal (.jsonl). Throws ConfigError.
std::map<std::string, std::string> load_predictions(const std::filesystem::path& path);

}  // namespace macsql
