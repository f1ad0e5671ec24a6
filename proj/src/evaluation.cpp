#include "macsql/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "macsql/errors.hpp"
#include "macsql/schema_catalog.hpp"
#include "macsql/sql_parse.hpp"
#include "macsql/text_util.hpp"

namespace macsql {

using json = nlohmann::json;

std::string_view to_string(ErrorClass error_class) {
    switch (error_class) {
        case ErrorClass::None: return "NONE";
        case ErrorClass::GoldError: return "GOLD_ERROR";
        case ErrorClass::SchemaLinkingError: return "SCHEMA_LINKING_ERROR";
        case ErrorClass::ExecutionError: return "EXECUTION_ERROR";
        case ErrorClass::EmptyResult: return "EMPTY_RESULT";
        case ErrorClass::WrongResult: return "WRONG_RESULT";
    }
    return "NONE";
}

ExecComparison compare_execution(std::string_view pred_sql, std::string_view gold_sql,
                                 const std::filesystem::path& db_path, std::chrono::milliseconds timeout,
                                 bool distinct) {
    ExecComparison out;
    out.gold = execute_sql(db_path, gold_sql, timeout);
    out.pred = execute_sql(db_path, pred_sql, timeout);
    if (!out.gold.succeeded() || !out.pred.succeeded()) return out;
    NormalizeOptions options;
    options.order_sensitive = has_top_level_order_by(gold_sql);
    options.distinct = distinct;
    out.match = normalize_rows(out.pred.rows, options) == normalize_rows(out.gold.rows, options);
    return out;
}

bool exec_match(std::string_view pred_sql, std::string_view gold_sql, const std::filesystem::path& db_path,
                std::chrono::milliseconds timeout) {
    return compare_execution(pred_sql, gold_sql, db_path, timeout).match;
}

QueryTimer wall_clock_timer(const std::filesystem::path& db_path, std::chrono::milliseconds timeout) {
    return [db_path, timeout](std::string_view sql) {
        const auto started = std::chrono::steady_clock::now();
        execute_sql(db_path, sql, timeout);
        return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - started);
    };
}

namespace {

double median_time(std::string_view sql, const QueryTimer& timer, int repeats) {
    timer(sql);  // warm-up
    std::vector<double> times;
    for (int i = 0; i < repeats; ++i) times.push_back(static_cast<double>(timer(sql).count()));
    std::sort(times.begin(), times.end());
    const size_t n = times.size();
    return n % 2 ? times[n / 2] : (times[n / 2 - 1] + times[n / 2]) / 2.0;
}

}  // namespace

double ves_ratio(std::string_view pred_sql, std::string_view gold_sql, const QueryTimer& timer, int repeats) {
    repeats = std::max(1, repeats);
    const double gold = median_time(gold_sql, timer, repeats);
    const double pred = median_time(pred_sql, timer, repeats);
    // Floor at 1 ns so a zero reading cannot divide by zero.
    return std::sqrt(std::max(gold, 1.0) / std::max(pred, 1.0));
}

double ves_score(std::string_view pred_sql, std::string_view gold_sql, const std::filesystem::path& db_path,
                 int repeats, const QueryTimer& timer) {
    if (!exec_match(pred_sql, gold_sql, db_path)) return 0.0;
    return ves_ratio(pred_sql, gold_sql, timer ? timer : wall_clock_timer(db_path, kDefaultQueryTimeout), repeats);
}

std::optional<bool> exact_match(std::string_view pred_sql, std::string_view gold_sql, const DatabaseSchema* schema) {
    try {
        return parse_to_clause_set(pred_sql, schema) == parse_to_clause_set(gold_sql, schema);
    } catch (const UnsupportedSyntax&) {
        return std::nullopt;
    }
}

ErrorClass classify_error(const ExecutionOutcome& pred, const ExecutionOutcome& gold, bool ex, std::optional<bool>) {
    if (ex) return ErrorClass::None;
    if (!gold.succeeded()) return ErrorClass::GoldError;
    switch (pred.status) {
        case ExecStatus::SchemaError: return ErrorClass::SchemaLinkingError;
        case ExecStatus::SyntaxError:
        case ExecStatus::OtherError:
        case ExecStatus::Timeout: return ErrorClass::ExecutionError;
        case ExecStatus::EmptyResult: return ErrorClass::EmptyResult;
        case ExecStatus::Ok: break;
    }
    return ErrorClass::WrongResult;
}

OutcomeSummary OutcomeSummary::of(const ExecutionOutcome& outcome) {
    return {outcome.status, outcome.rows.size(), outcome.error_message};
}

ItemScore score_item(const Task& task, std::string_view pred_sql, const std::filesystem::path& db_path,
                     const DatabaseSchema* schema, const ScoreOptions& options) {
    if (!task.gold_sql) throw MissingGold("task " + task.task_id + " has no gold SQL");
    ItemScore score;
    score.task_id = task.task_id;
    score.difficulty = task.difficulty.value_or("unlabeled");
    score.pred_sql = std::string(pred_sql);
    const auto cmp = compare_execution(pred_sql, *task.gold_sql, db_path, options.timeout, options.distinct);
    score.ex = cmp.match;
    score.em = exact_match(pred_sql, *task.gold_sql, schema);
    score.pred_outcome = OutcomeSummary::of(cmp.pred);
    score.gold_outcome = OutcomeSummary::of(cmp.gold);
    score.error_class = classify_error(cmp.pred, cmp.gold, score.ex, score.em);
    score.review_semantic_correct = score.error_class == ErrorClass::WrongResult;
    if (options.compute_ves) {
        score.ves_measured = true;
        if (score.ex) {
            const QueryTimer timer = options.timer ? options.timer : wall_clock_timer(db_path, options.timeout);
            score.ves_ratio = ves_ratio(pred_sql, *task.gold_sql, timer, options.ves_repeats);
        }
    }
    return score;
}

namespace {

Aggregate aggregate(const std::vector<const ItemScore*>& items) {
    Aggregate a;
    a.count = items.size();
    if (items.empty()) return a;
    size_t ex = 0;
    size_t em = 0;
    double ves_sum = 0.0;
    bool all_timed = true;
    for (const ItemScore* item : items) {
        if (item->ex) ++ex;
        if (item->em) {
            ++a.em_defined;
            if (*item->em) ++em;
        }
        all_timed = all_timed && item->ves_measured;
        if (item->ex && item->ves_ratio) ves_sum += *item->ves_ratio;
    }
    const double n = static_cast<double>(items.size());
    a.ex = 100.0 * static_cast<double>(ex) / n;
    if (all_timed) a.ves = 100.0 * ves_sum / n;
    if (a.em_defined) a.em = 100.0 * static_cast<double>(em) / static_cast<double>(a.em_defined);
    return a;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json aggregate_json(const Aggregate& a) {
    return {{"count", a.count},   {"ex", optional_number(a.ex)}, {"ves", optional_number(a.ves)},
            {"em", optional_number(a.em)}, {"em_defined", a.em_defined}};
}

std::string percent(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", *v);
    return buf;
}

}  // namespace

EvalReport build_report(std::vector<ItemScore> items) {
    EvalReport report;
    report.items = std::move(items);
    std::vector<const ItemScore*> all;
    std::map<std::string, std::vector<const ItemScore*>> groups;
    for (const auto& item : report.items) {
        all.push_back(&item);
        groups[item.difficulty].push_back(&item);
        ++report.error_histogram[std::string(to_string(item.error_class))];
        if (item.review_semantic_correct) ++report.review_candidates;
    }
    report.overall = aggregate(all);
    for (const auto& [difficulty, members] : groups) report.by_difficulty[difficulty] = aggregate(members);
    return report;
}

json report_to_json(const EvalReport& report) {
    json out;
    out["overall"] = aggregate_json(report.overall);
    out["by_difficulty"] = json::object();
    for (const auto& [difficulty, a] : report.by_difficulty) out["by_difficulty"][difficulty] = aggregate_json(a);
    out["error_histogram"] = report.error_histogram;
    out["review_semantic_correct"] = report.review_candidates;
    out["items"] = json::array();
    for (const auto& item : report.items) {
        out["items"].push_back({
            {"task_id", item.task_id},
            {"difficulty", item.difficulty},
            {"pred_sql", item.pred_sql},
            {"ex", item.ex},
            {"em", item.em ? json(*item.em) : json(nullptr)},
            {"ves_ratio", optional_number(item.ves_ratio)},
            {"error_class", to_string(item.error_class)},
            {"review_semantic_correct", item.review_semantic_correct},
            {"pred_status", to_string(item.pred_outcome.status)},
            {"pred_rows", item.pred_outcome.row_count},
            {"pred_error", item.pred_outcome.error_message},
            {"gold_status", to_string(item.gold_outcome.status)},
            {"gold_rows", item.gold_outcome.row_count},
            {"gold_error", item.gold_outcome.error_message},
        });
    }
    return out;
}

std::string render_report_text(const EvalReport& report) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof(line), "%-14s %6s %8s %8s %8s %10s\n", "difficulty", "count", "EX", "VES", "EM",
                  "EM parsed");
    out << line;
    auto row = [&](const std::string& name, const Aggregate& a) {
        std::snprintf(line, sizeof(line), "%-14s %6zu %8s %8s %8s %10zu\n", name.c_str(), a.count,
                      percent(a.ex).c_str(), percent(a.ves).c_str(), percent(a.em).c_str(), a.em_defined);
        out << line;
    };
    for (const auto& [difficulty, a] : report.by_difficulty) row(difficulty, a);
    row("overall", report.overall);
    out << "\nerror classes:\n";
    for (const auto& [label, count] : report.error_histogram) out << "  " << label << ": " << count << "\n";
    out << "review (possibly semantically correct): " << report.review_candidates << "\n";
    if (report.overall.count) {
        std::snprintf(line, sizeof(line), "EM grammar coverage: %zu/%zu (%.1f%%)\n", report.overall.em_defined,
                      report.overall.count,
                      100.0 * static_cast<double>(report.overall.em_defined) /
                          static_cast<double>(report.overall.count));
        out << line;
    }
    return out.str();
}

namespace {

std::string strip_bird_suffix(const std::string& sql) {
    const auto pos = sql.find("\t----- bird -----\t");
    return trim(pos == std::string::npos ? sql : sql.substr(0, pos));
}

std::string id_string(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

std::map<std::string, std::string> load_predictions(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const std::runtime_error& e) {
        throw ConfigError(e.what());
    }
    if (trim(text).empty()) throw ConfigError(path.string() + ": predictions file is empty");
    std::map<std::string, std::string> out;

    const json whole = json::parse(text, nullptr, false);
    if (!whole.is_discarded()) {
        if (whole.is_object()) {
            for (const auto& [key, value] : whole.items()) {
                if (!value.is_string()) throw ConfigError(path.string() + ": prediction for '" + key + "' is not text");
                out[key] = strip_bird_suffix(value.get<std::string>());
            }
        } else if (whole.is_array()) {
            for (const auto& record : whole) {
                if (!record.is_object() || !record.contains("task_id") || !record.contains("sql") ||
                    !record["sql"].is_string()) {
                    throw ConfigError(path.string() + ": expected records with task_id and sql");
                }
                out[id_string(record["task_id"])] = strip_bird_suffix(record["sql"].get<std::string>());
            }
        } else {
            throw ConfigError(path.string() + ": unsupported predictions layout");
        }
    } else {
        // Trace journal: one pipeline state per line.
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            if (trim(line).empty()) continue;
            const json state = json::parse(line, nullptr, false);
            if (state.is_discarded() || !state.is_object()) continue;
            if (!state.contains("task") || !state.contains("final_sql")) continue;
            out[id_string(state["task"].value("task_id", json(""))) ] = state["final_sql"].get<std::string>();
        }
    }
    if (out.empty()) throw ConfigError(path.string() + ": no predictions found");
    return out;
}

}  // namespace macsql
