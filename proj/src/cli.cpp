#include "macsql/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <sstream>

#include "macsql/datasets.hpp"
#include "macsql/errors.hpp"
#include "macsql/evaluation.hpp"
#include "macsql/orchestrator.hpp"
#include "macsql/sql_exec.hpp"
#include "macsql/text_util.hpp"

namespace macsql {

using json = nlohmann::json;

namespace {

/// Failures that map to the usage/config exit code.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonFlags {
    std::string config;
    std::map<std::string, std::string> values;
    bool json = false;
    bool seedless = false;
};

void add_setting_flag(CLI::App* app, CommonFlags& common, const std::string& flag, const std::string& key,
                      const std::string& help) {
    app->add_option_function<std::string>(
        flag, [&common, key](const std::string& v) { common.values[key] = v; }, help);
}

void add_common_flags(CLI::App* app, CommonFlags& common) {
    app->add_option("--config", common.config, "JSON settings file");
    add_setting_flag(app, common, "--backend", "backend", "http or script");
    add_setting_flag(app, common, "--model", "model", "model name sent to the endpoint");
    add_setting_flag(app, common, "--endpoint", "endpoint", "chat-completion URL");
    add_setting_flag(app, common, "--api-key-env", "api_key_env", "environment variable holding the API key");
    add_setting_flag(app, common, "--script", "script", "scripted backend fixture file");
    add_setting_flag(app, common, "--context-window", "context_window", "context window in tokens");
    add_setting_flag(app, common, "--pruning-fraction", "pruning_fraction", "selector trigger fraction");
    add_setting_flag(app, common, "--shots", "shots", "decomposer demonstrations (0, 1 or 2)");
    add_setting_flag(app, common, "--max-rounds", "max_rounds", "refiner correction rounds");
    add_setting_flag(app, common, "--timeout-ms", "timeout_ms", "per-query execution budget");
    add_setting_flag(app, common, "--parallelism", "parallelism", "worker count");
    app->add_flag("--json", common.json, "machine-readable output");
    app->add_flag("--seedless", common.seedless, "zero all timings so output is reproducible");
}

Settings resolve(const CommonFlags& common, const EnvLookup& env) {
    auto flags = common.values;
    if (common.seedless) flags["deterministic"] = "true";
    std::optional<std::filesystem::path> file;
    if (!common.config.empty()) file = common.config;
    return resolve_settings(file, env, flags);
}

std::string render_rows(const std::vector<Row>& rows) {
    std::string out;
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out += " | ";
            out += render_literal(row[i]);
        }
        out += "\n";
    }
    return out;
}

json rows_to_json(const std::vector<Row>& rows) {
    json out = json::array();
    for (const auto& row : rows) {
        json r = json::array();
        for (const auto& v : row) r.push_back(render_literal(v));
        out.push_back(std::move(r));
    }
    return out;
}

std::string percent(std::optional<double> v) {
    if (!v) return "n/a";
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << *v;
    return s.str();
}

void write_output(const std::filesystem::path& path, std::string_view text) {
    try {
        write_text_file(path, text);
    } catch (const std::runtime_error& e) {
        throw UsageError(e.what());
    }
}

struct BenchArgs {
    std::string benchmark = "bird";
    std::string items;
    std::string db_root;
};

void add_bench_args(CLI::App* app, BenchArgs& args, bool items_required) {
    app->add_option("--benchmark", args.benchmark, "bird or spider")->check(CLI::IsMember({"bird", "spider"}));
    auto* items = app->add_option("--items", args.items, "benchmark item file (JSON array)");
    if (items_required) items->required();
    app->add_option("--db-root", args.db_root, "directory holding <db_id>/<db_id>.sqlite")->required();
}

int cmd_ask(const CommonFlags& common, const std::string& db, const std::string& question,
            const std::string& evidence, bool execute, const std::string& trace, const EnvLookup& env,
            std::ostream& out, std::ostream& err) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(db, ec)) throw UsageError("database file not found: " + db);
    if (trim(question).empty()) throw UsageError("--question must not be empty");
    const Settings settings = resolve(common, env);
    auto backend = make_backend(settings, env);

    DatabaseRegistry registry;
    const std::filesystem::path db_path(db);
    const std::string db_id = db_path.stem().string();
    registry.add(db_id, db_path);

    Task task;
    task.task_id = "ask";
    task.db_id = db_id;
    task.question = question;
    task.evidence = evidence;
    const PipelineState state = run_question(task, registry, *backend, pipeline_config(settings));
    if (!trace.empty()) write_output(trace, state_to_json(state).dump(2) + "\n");

    std::optional<ExecutionOutcome> executed;
    if (execute && !state.final_sql.empty()) executed = execute_sql(db_path, state.final_sql, settings.timeout);

    if (common.json) {
        json j = {{"final_sql", state.final_sql}, {"error", state.error}, {"warnings", state.warnings}};
        if (executed) {
            j["execution"] = {{"status", to_string(executed->status)},
                              {"rows", rows_to_json(executed->rows)},
                              {"error_message", executed->error_message}};
        }
        out << j.dump(2) << "\n";
    } else {
        if (!state.final_sql.empty()) out << state.final_sql << "\n";
        if (executed) {
            if (executed->succeeded()) {
                out << render_rows(executed->rows);
            } else {
                err << "execution failed: " << executed->error_message << "\n";
            }
        }
    }
    for (const auto& w : state.warnings) err << "warning: " << w << "\n";
    if (!state.error.empty()) err << "error: " << state.error << "\n";
    return state.final_sql.empty() ? kExitRuntime : kExitOk;
}

Benchmark load_bench(const BenchArgs& args) {
    try {
        return load_benchmark(benchmark_kind_from_string(args.benchmark), args.items, args.db_root);
    } catch (const MalformedItem& e) {
        throw UsageError(e.what());
    } catch (const MissingDatabase& e) {
        throw UsageError(e.what());
    }
}

int cmd_bench(const CommonFlags& common, const BenchArgs& args, const std::string& journal, const EnvLookup& env,
              const std::atomic<bool>* cancel, std::ostream& out, std::ostream& err) {
    const Settings settings = resolve(common, env);
    const Benchmark bench = load_bench(args);
    auto backend = make_backend(settings, env);
    DatabaseRegistry registry(bench.db_root);

    BatchOptions options;
    options.parallelism = settings.parallelism;
    options.journal = journal;
    options.cancel = cancel;
    options.on_progress = [&err](const BatchProgress& p) {
        err << "[" << p.done << "/" << p.total << "] " << p.state->task.task_id
            << (p.resumed ? " (resumed)" : p.state->error.empty() ? "" : " error: " + p.state->error) << "\n";
    };
    const BatchResult result = run_batch(bench.tasks, registry, *backend, pipeline_config(settings), options);
    for (const auto& w : result.warnings) err << "warning: " << w << "\n";

    size_t errors = 0;
    std::vector<ItemScore> scores;
    ScoreOptions score_options;
    score_options.compute_ves = false;
    score_options.timeout = settings.timeout;
    for (const auto& state : result.states) {
        if (!state.error.empty()) ++errors;
        if (!state.task.gold_sql) continue;
        const auto path = registry.path_of(state.task.db_id);
        scores.push_back(score_item(state.task, state.final_sql, path, registry.schema(state.task.db_id).get(),
                                    score_options));
    }
    std::optional<double> ex;
    if (!scores.empty()) ex = build_report(scores).overall.ex;

    if (common.json) {
        out << json{{"tasks", bench.tasks.size()},
                    {"executed", result.executed},
                    {"resumed", result.resumed},
                    {"errors", errors},
                    {"cancelled", result.cancelled},
                    {"scored", scores.size()},
                    {"ex", ex ? json(*ex) : json(nullptr)}}
                   .dump()
            << "\n";
    } else {
        out << "tasks=" << bench.tasks.size() << " executed=" << result.executed << " resumed=" << result.resumed
            << " errors=" << errors << " EX=" << percent(ex) << (result.cancelled ? " (cancelled)" : "") << "\n";
    }
    return result.cancelled ? kExitRuntime : kExitOk;
}

int cmd_eval(const CommonFlags& common, const BenchArgs& args, const std::string& predictions_path,
             const std::string& out_path, int ves_repeats, bool no_ves, const EnvLookup& env, std::ostream& out) {
    const Settings settings = resolve(common, env);
    const Benchmark bench = load_bench(args);
    std::map<std::string, std::string> predictions;
    try {
        predictions = load_predictions(predictions_path);
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
    DatabaseRegistry registry(bench.db_root);
    ScoreOptions options;
    options.timeout = settings.timeout;
    options.compute_ves = !no_ves;
    options.ves_repeats = ves_repeats;
    std::vector<ItemScore> scores;
    for (const auto& task : bench.tasks) {
        if (!task.gold_sql) throw UsageError("task " + task.task_id + " has no gold SQL");
        const auto it = predictions.find(task.task_id);
        const std::string pred = it == predictions.end() ? std::string() : it->second;
        scores.push_back(score_item(task, pred, registry.path_of(task.db_id), registry.schema(task.db_id).get(),
                                    options));
    }
    const EvalReport report = build_report(std::move(scores));
    const json j = report_to_json(report);
    if (!out_path.empty()) write_output(out_path, j.dump(2) + "\n");
    if (common.json) {
        out << j.dump(2) << "\n";
    } else {
        out << render_report_text(report);
    }
    return kExitOk;
}

int cmd_export(const CommonFlags& common, const BenchArgs& args, const std::string& journal,
               const std::string& out_path, const EnvLookup& env, std::ostream& out, std::ostream& err) {
    const Settings settings = resolve(common, env);
    std::error_code ec;
    if (!std::filesystem::is_regular_file(journal, ec)) throw UsageError("journal not found: " + journal);
    std::vector<std::string> warnings;
    const auto states = read_journal(journal, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << "\n";

    std::map<std::string, std::string> gold;
    if (!args.items.empty()) {
        for (const auto& task : load_bench(args).tasks) {
            if (task.gold_sql) gold[task.task_id] = *task.gold_sql;
        }
    }
    DatabaseRegistry registry(args.db_root);
    std::vector<InstructionRecord> records;
    try {
        records = export_instruction_data(states, gold, registry, settings.timeout);
    } catch (const MissingGold& e) {
        throw UsageError(e.what());
    }

    std::string lines;
    std::map<std::string, size_t> by_difficulty;
    std::map<std::string, size_t> by_agent;
    for (const auto& r : records) {
        lines += record_to_json(r).dump() + "\n";
        ++by_difficulty[r.difficulty];
        ++by_agent[r.agent_task];
    }
    write_output(out_path, lines);

    if (common.json) {
        out << json{{"records", records.size()}, {"by_difficulty", by_difficulty}, {"by_agent", by_agent}}.dump()
            << "\n";
    } else {
        out << "records=" << records.size() << "\n";
        for (const auto& [d, n] : by_difficulty) out << "  " << d << ": " << n << "\n";
    }
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const EnvLookup& env,
            const std::atomic<bool>* cancel) {
    CLI::App app{"Multi-agent text-to-SQL pipeline"};
    app.require_subcommand(1);

    CommonFlags common;

    std::string db, question, evidence, trace;
    bool execute = false;
    auto* ask = app.add_subcommand("ask", "answer one question against a database file");
    add_common_flags(ask, common);
    ask->add_option("--db", db, "SQLite database file")->required();
    ask->add_option("--question", question, "natural-language question")->required();
    ask->add_option("--evidence", evidence, "external knowledge hint");
    ask->add_flag("--execute", execute, "also print the rows of the final SQL");
    ask->add_option("--trace", trace, "write the full pipeline state as JSON");

    BenchArgs bench_args;
    std::string journal;
    auto* bench = app.add_subcommand("bench", "run a benchmark split with a resumable journal");
    add_common_flags(bench, common);
    add_bench_args(bench, bench_args, true);
    bench->add_option("--journal", journal, "JSONL journal of pipeline states")->required();

    BenchArgs eval_args;
    std::string predictions, report_out;
    int ves_repeats = 5;
    bool no_ves = false;
    auto* eval = app.add_subcommand("eval", "score predictions against gold");
    add_common_flags(eval, common);
    add_bench_args(eval, eval_args, true);
    eval->add_option("--predictions", predictions, "prediction file (JSON object, JSON array or journal)")
        ->required();
    eval->add_option("--out", report_out, "write the JSON report here");
    eval->add_option("--ves-repeats", ves_repeats, "timed runs per query")->check(CLI::PositiveNumber);
    eval->add_flag("--no-ves", no_ves, "skip timing");

    BenchArgs export_args;
    std::string export_journal, export_out;
    auto* exp = app.add_subcommand("export-sft", "write instruction records from passing journal states");
    add_common_flags(exp, common);
    add_bench_args(exp, export_args, false);
    exp->add_option("--journal", export_journal, "JSONL journal of pipeline states")->required();
    exp->add_option("--out", export_out, "JSONL output file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (ask->parsed()) return cmd_ask(common, db, question, evidence, execute, trace, env, out, err);
        if (bench->parsed()) return cmd_bench(common, bench_args, journal, env, cancel, out, err);
        if (eval->parsed()) return cmd_eval(common, eval_args, predictions, report_out, ves_repeats, no_ves, env, out);
        if (exp->parsed()) return cmd_export(common, export_args, export_journal, export_out, env, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace macsql
