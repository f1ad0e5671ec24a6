// Acceptance runner: one PASS/FAIL/SKIP line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <random>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "macsql/cli.hpp"
#include "macsql/config.hpp"
#include "macsql/errors.hpp"
#include "macsql/evaluation.hpp"
#include "macsql/orchestrator.hpp"
#include "macsql/prompts.hpp"
#include "macsql/sql_parse.hpp"
#include "macsql/text_util.hpp"

using namespace macsql;
using namespace macsql::testing;
using json = nlohmann::json;

namespace {

const char* const kQuestion =
    "What is the gender of the youngest client who opened account in the lowest average salary branch?";
const char* const kEvidence = "Later birthdate refers to younger age; A11 refers to average salary";
const char* const kTargetSql =
    "SELECT T1.`gender`\n    FROM client AS T1\n    INNER JOIN district AS T2\n"
    "    ON T1.`district_id` = T2.`district_id`\n    ORDER BY T2.`A11` ASC, T1.`birth_date` DESC\n    LIMIT 1";
const char* const kSelectorAnswer = R"(```json
{
    "account": "keep_all",
    "client": "keep_all",
    "loan": "drop_all",
    "district": ["district_id", "A11", "A2", "A4", "A6", "A7"]
}
```
Question Solved.)";
const char* const kBrokenSql =
    "SELECT T1.`genderx`\n    FROM client AS T1\n    INNER JOIN district AS T2\n"
    "    ON T1.`district_id` = T2.`district_id`\n    ORDER BY T2.`A11` ASC, T1.`birth_date` DESC\n    LIMIT 1";

struct Verdict {
    enum class Kind { Pass, Fail, Skip } kind = Kind::Pass;
    std::string detail;
};

Verdict pass(std::string detail) { return {Verdict::Kind::Pass, std::move(detail)}; }
Verdict fail(std::string detail) { return {Verdict::Kind::Fail, std::move(detail)}; }
Verdict skip(std::string detail) { return {Verdict::Kind::Skip, std::move(detail)}; }

/// Collects failed expectations; the first few end up in the criterion line.
class Checker {
public:
    void expect(bool ok, const std::string& what) {
        ++checks_;
        if (!ok) failures_.push_back(what);
    }
    Verdict verdict(const std::string& summary) const {
        if (failures_.empty()) return pass(summary + " (" + std::to_string(checks_) + " checks)");
        std::string d = std::to_string(failures_.size()) + "/" + std::to_string(checks_) + " checks failed:";
        for (size_t i = 0; i < failures_.size() && i < 3; ++i) d += " [" + failures_[i] + "]";
        return fail(d);
    }

private:
    size_t checks_ = 0;
    std::vector<std::string> failures_;
};

std::string seconds(std::chrono::steady_clock::duration d) {
    std::ostringstream s;
    s.precision(2);
    s << std::fixed << std::chrono::duration<double>(d).count() << "s";
    return s.str();
}

DatabaseRegistry& registry() {
    static DatabaseRegistry r(fixture_db_root());
    return r;
}

// ---------------------------------------------------------------------------------------------

Verdict worked_example() {
    const auto started = std::chrono::steady_clock::now();
    TempDir dir;
    const std::string db = banking_db().string();
    const std::string script = (fixture_dir() / "worked_example.script").string();
    const std::string trace = (dir / "trace.json").string();
    const char* argv[] = {"macsql",   "ask",      "--db",          db.c_str(), "--question", kQuestion,
                          "--evidence", kEvidence, "--backend",    "script",   "--script",   script.c_str(),
                          "--context-window", "256", "--trace",    trace.c_str(), "--seedless"};
    std::ostringstream out;
    std::ostringstream err;
    const auto no_env = [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
    const int code = run_cli(static_cast<int>(std::size(argv)), argv, out, err, no_env);
    const auto elapsed = std::chrono::steady_clock::now() - started;

    Checker c;
    c.expect(code == kExitOk, "exit code " + std::to_string(code) + ": " + err.str());
    c.expect(out.str() == std::string(kTargetSql) + "\n", "final SQL differs");
    const auto state = json::parse(read_file(trace), nullptr, false);
    c.expect(!state.is_discarded(), "trace is not JSON");
    if (!state.is_discarded()) {
        const auto& verdicts = state["pruning"]["verdicts"];
        const json want = {{"account", "keep_all"},
                           {"client", "keep_all"},
                           {"loan", "drop_all"},
                           {"district", {"district_id", "A11", "A2", "A4", "A6", "A7"}}};
        json got = json::object();
        for (const auto& v : verdicts) got[v["table"].get<std::string>()] = v["verdict"];
        c.expect(got == want, "pruning decision " + got.dump());
        c.expect(state["final_sql"] == kTargetSql, "trace final_sql differs");
    }
    c.expect(elapsed < std::chrono::seconds(5), "runtime " + seconds(elapsed));
    return c.verdict("ask replayed worked example in " + seconds(elapsed));
}

// ---------------------------------------------------------------------------------------------

Verdict prompt_snapshots() {
    Checker c;
    const auto db = registry().schema("banking_system");
    c.expect(std::string(prompts::kSelector) == read_file(golden_dir() / "template_selector.txt"), "selector template");
    c.expect(prompts::decomposer_template(2) == read_file(golden_dir() / "template_decomposer.txt"),
             "decomposer template");
    c.expect(std::string(prompts::kRefiner) == read_file(golden_dir() / "template_refiner.txt"), "refiner template");
    c.expect(build_selector_prompt(*db, kQuestion, kEvidence).user_text ==
                 read_file(golden_dir() / "selector_banking.txt"),
             "selector prompt");
    const auto pruned = apply_pruning(*db, parse_pruning_decision(kSelectorAnswer, *db));
    const auto schema = render_schema(*db, &pruned.selection);
    for (int shots = 0; shots <= 2; ++shots) {
        c.expect(build_decomposer_prompt(schema.schema_text, schema.fk_text, kQuestion, kEvidence, shots).user_text ==
                     read_file(golden_dir() / ("decomposer_banking_shots" + std::to_string(shots) + ".txt")),
                 "decomposer prompt, shots=" + std::to_string(shots));
    }
    const auto outcome = execute_sql(banking_db(), kBrokenSql);
    c.expect(build_refiner_prompt(kQuestion, kEvidence, schema.schema_text, schema.fk_text, kBrokenSql, outcome)
                     .user_text == read_file(golden_dir() / "refiner_banking.txt"),
             "refiner prompt");
    return c.verdict("3 templates and 5 filled prompts byte-match goldens");
}

// ---------------------------------------------------------------------------------------------

/// Answers by prompt kind: a fixed selector verdict, a canned decomposition, then queued corrections.
class ScenarioBackend : public LlmBackend {
public:
    std::string selector_reply;
    std::string decomposer_reply;
    std::vector<std::string> refiner_replies;
    size_t refiner_calls = 0;

protected:
    ChatResponse dispatch(const ChatRequest& request) override {
        ChatResponse r;
        const std::string& t = request.user_text;
        if (t.find("When executing SQL below") != std::string::npos) {
            r.text = refiner_calls < refiner_replies.size() ? refiner_replies[refiner_calls] : "";
            ++refiner_calls;
        } else if (t.find("decompose the question into sub") != std::string::npos) {
            r.text = decomposer_reply;
        } else {
            r.text = selector_reply;
        }
        return r;
    }
};

Verdict algorithm_invariants() {
    const auto started = std::chrono::steady_clock::now();
    const std::vector<std::string> good = {
        "SELECT gender FROM client WHERE client_id = 4",
        "SELECT COUNT(*) FROM account",
        kTargetSql,
        "SELECT A2, A11 FROM district ORDER BY A11 LIMIT 2",
    };
    const std::vector<std::string> bad = {
        "SELECT genderx FROM client",                    // schema error
        "SELEC gender FROM client",                      // syntax error
        "SELECT client_id FROM client WHERE gender = 'X'",  // empty result
        "SELECT * FROM loans",                           // unknown table
    };
    const auto db = registry().schema("banking_system");
    const std::string full = render_schema(*db).combined();

    std::mt19937 rng(20240607);
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    auto random_sql = [&](int good_weight) {
        return pick(0, 9) < good_weight ? good[static_cast<size_t>(pick(0, 3))] : bad[static_cast<size_t>(pick(0, 3))];
    };
    auto fenced = [](const std::string& sql) { return "```sql\n" + sql + "\n```"; };

    Checker c;
    const int scenarios = 240;
    size_t bypassed = 0;
    size_t refined = 0;
    for (int s = 0; s < scenarios; ++s) {
        ScenarioBackend backend;
        backend.selector_reply = kSelectorAnswer;
        const int steps = pick(1, 4);
        std::vector<std::string> subs;
        for (int i = 0; i < steps; ++i) {
            subs.push_back(random_sql(5));
            backend.decomposer_reply +=
                "Sub question " + std::to_string(i + 1) + ": part " + std::to_string(i + 1) + "?\nSQL\n" +
                fenced(subs.back()) + "\n\n";
        }
        backend.decomposer_reply += "Question Solved.";
        for (int i = 0; i < 6; ++i) {
            backend.refiner_replies.push_back(pick(0, 9) == 0 ? "I cannot fix this." : fenced(random_sql(4)));
        }

        PipelineConfig config;
        config.context_window = static_cast<size_t>(pick(150, 2500));
        config.max_rounds = pick(1, 4);
        config.deterministic = true;
        Task task;
        task.task_id = std::to_string(s);
        task.db_id = "banking_system";
        task.question = "scenario " + std::to_string(s) + "?";
        const auto state = run_question(task, registry(), backend, config);
        const std::string tag = "scenario " + std::to_string(s) + ": ";

        c.expect(state.error.empty(), tag + state.error);
        const bool trigger = needs_pruning(full, config.context_window, config.pruning_fraction);
        const bool selector_ran = !state.calls.empty() && state.calls.front().agent == "selector";
        c.expect(trigger == state.pruning_triggered && trigger == selector_ran, tag + "selector bypass");
        if (!trigger) ++bypassed;

        const auto& attempts = state.refine_attempts;
        c.expect(!attempts.empty(), tag + "no execution");
        if (attempts.empty()) continue;
        c.expect(attempts.size() <= static_cast<size_t>(config.max_rounds) + 1, tag + "too many rounds");
        c.expect(state.decomposition && state.decomposition->final_sql() == subs.back(), tag + "decomposition");
        c.expect(attempts.front().input_sql == subs.back(), tag + "first candidate is not the last sub-SQL");
        for (size_t i = 0; i + 1 < attempts.size(); ++i) {
            c.expect(diagnose(attempts[i].outcome), tag + "continued after success");
        }
        const bool solved = !diagnose(attempts.back().outcome);
        if (solved) c.expect(backend.refiner_calls == attempts.size() - 1, tag + "refined after success");
        c.expect(backend.refiner_calls == attempts.size() - 1 || backend.refiner_calls == attempts.size(),
                 tag + "refiner call count");
        c.expect(state.final_sql == attempts.back().input_sql, tag + "final SQL is not the last candidate");
        if (attempts.size() == 1) c.expect(state.final_sql == subs.back(), tag + "final SQL != last sub-SQL");
        if (backend.refiner_calls) ++refined;
    }
    const auto elapsed = std::chrono::steady_clock::now() - started;
    c.expect(bypassed > 0 && bypassed < static_cast<size_t>(scenarios), "both selector branches exercised");
    c.expect(refined > 0, "refiner exercised");
    c.expect(elapsed < std::chrono::seconds(30), "runtime " + seconds(elapsed));
    return c.verdict(std::to_string(scenarios) + " scenarios, " + std::to_string(bypassed) + " bypassed the selector, " +
                     std::to_string(refined) + " refined, " + seconds(elapsed));
}

// ---------------------------------------------------------------------------------------------

Verdict pruning_properties() {
    const auto started = std::chrono::steady_clock::now();
    std::mt19937 rng(77);
    auto pick = [&](size_t lo, size_t hi) { return std::uniform_int_distribution<size_t>(lo, hi)(rng); };
    Checker c;
    const int schemas = 400;
    size_t restorations = 0;
    for (int s = 0; s < schemas; ++s) {
        const auto db = random_schema(rng, 12, 20);
        const std::string tag = "schema " + std::to_string(s) + ": ";
        json answer = json::object();
        for (const auto& table : db.tables) {
            switch (pick(0, 4)) {
                case 0: answer[table.name] = "keep_all"; break;
                case 1:
                case 2: answer[table.name] = "drop_all"; break;
                case 3: break;  // unmentioned
                default: {
                    json cols = json::array();
                    const size_t n = pick(1, table.columns.size() + 1);
                    for (size_t i = 0; i < n; ++i) {
                        cols.push_back(pick(0, 5) == 0 ? "ghost" : table.columns[pick(0, table.columns.size() - 1)].name);
                    }
                    answer[table.name] = cols;
                }
            }
        }
        PruningDecision decision;
        try {
            decision = parse_pruning_decision("```json\n" + answer.dump(2) + "\n```", db);
        } catch (const AllTablesDropped&) {
            c.expect(db.tables.size() < kMinRetainedTables, tag + "all tables dropped despite restoration");
            continue;
        }
        if (!decision.restored_tables.empty()) ++restorations;
        const auto pruned = apply_pruning(db, decision);
        const auto& sel = pruned.selection;

        // Containment: every retained table and column exists in the source schema.
        for (const auto& [table, columns] : sel.tables) {
            const auto* t = db.find_table(table);
            c.expect(t != nullptr, tag + "unknown table " + table);
            if (!t) continue;
            for (const auto& col : columns) c.expect(t->find_column(col) != nullptr, tag + "unknown column " + col);
            // Column floor and primary keys.
            c.expect(columns.size() >= std::min(kMinRetainedColumns, t->columns.size()), tag + "column floor " + table);
            for (const auto& col : t->columns) {
                if (col.is_primary_key) {
                    c.expect(std::find(columns.begin(), columns.end(), col.name) != columns.end(),
                             tag + "primary key dropped from " + table);
                }
            }
        }
        // Table floor: restoration applies once the database has at least three tables.
        if (db.tables.size() >= kMinRetainedTables) {
            c.expect(sel.tables.size() >= kMinRetainedTables, tag + "table floor");
        }
        // Foreign-key closure: exactly the keys whose both endpoints survive.
        std::vector<ForeignKey> expected;
        for (const auto& fk : db.foreign_keys) {
            if (sel.contains(fk.from_table, fk.from_column) && sel.contains(fk.to_table, fk.to_column)) {
                expected.push_back(fk);
            }
        }
        c.expect(pruned.foreign_keys == expected, tag + "foreign-key closure");
    }
    const auto elapsed = std::chrono::steady_clock::now() - started;
    c.expect(restorations > 0, "restoration exercised");
    c.expect(elapsed < std::chrono::seconds(30), "runtime " + seconds(elapsed));
    return c.verdict(std::to_string(schemas) + " random schemas, " + std::to_string(restorations) +
                     " table restorations, " + seconds(elapsed));
}

// ---------------------------------------------------------------------------------------------

struct BenchScores {
    std::vector<ItemScore> items;
    json expected;
};

BenchScores score_bench20() {
    const auto bench = load_benchmark(BenchmarkKind::Bird, fixture_dir() / "bench20.json", fixture_db_root());
    const auto predictions = load_predictions(fixture_dir() / "bench20_predictions.json");
    ScoreOptions options;
    options.timer = [](std::string_view) { return std::chrono::nanoseconds(1); };
    BenchScores out;
    out.expected = json::parse(read_file(golden_dir() / "bench20_expected.json"));
    for (const auto& task : bench.tasks) {
        const auto schema = registry().schema(task.db_id);
        out.items.push_back(score_item(task, predictions.at(task.task_id),
                                       resolve_database_file(bench.db_root, task.db_id), schema.get(), options));
    }
    return out;
}

Verdict metric_oracles() {
    const auto started = std::chrono::steady_clock::now();
    Checker c;
    const auto scores = score_bench20();
    size_t agree = 0;
    for (const auto& item : scores.items) {
        const bool want = scores.expected.at(item.task_id)["ex"].get<bool>();
        c.expect(item.ex == want, "EX disagrees on item " + item.task_id);
        if (item.ex == want) ++agree;
    }
    const auto report = build_report(scores.items);
    c.expect(report.overall.ex && report.overall.ves && *report.overall.ves == *report.overall.ex,
             "VES under identity clock != EX x 100");

    // Each pair differs only in aliases, literal values, casing or term order.
    const std::pair<const char*, const char*> pairs[] = {
        {"SELECT T1.gender FROM client AS T1 WHERE T1.client_id = 4", "SELECT client.gender FROM client WHERE client.client_id = 9"},
        {"SELECT COUNT(*) FROM client WHERE gender = 'F'", "select count(*) from CLIENT where GENDER = 'M'"},
        {"SELECT a.account_id FROM account AS a JOIN district AS d ON a.district_id = d.district_id WHERE d.A11 > 9000",
         "SELECT T1.account_id FROM account T1 INNER JOIN district T2 ON T2.district_id = T1.district_id WHERE T2.A11 > 1"},
        {"SELECT gender, birth_date FROM client", "SELECT birth_date, gender FROM client"},
        {"SELECT client_id FROM client WHERE gender = 'F' AND district_id = 3",
         "SELECT client_id FROM client WHERE district_id = 1 AND gender = 'M'"},
        {"SELECT district_id, COUNT(*) FROM client GROUP BY district_id HAVING COUNT(*) > 2",
         "SELECT T.district_id, COUNT(*) FROM client AS T GROUP BY T.district_id HAVING COUNT(*) > 5"},
        {"SELECT A2 FROM district ORDER BY A11 DESC LIMIT 1", "SELECT d.A2 FROM district d ORDER BY d.A11 DESC LIMIT 3"},
        {"SELECT DISTINCT status FROM loan WHERE amount BETWEEN 100 AND 200",
         "SELECT DISTINCT L.status FROM loan AS L WHERE L.amount BETWEEN 5 AND 6"},
        {"SELECT client_id FROM client WHERE district_id IN (SELECT district_id FROM district WHERE A11 < 9000)",
         "SELECT c.client_id FROM client AS c WHERE c.district_id IN (SELECT d.district_id FROM district AS d WHERE d.A11 < 1)"},
        {"SELECT account_id FROM account UNION SELECT account_id FROM loan WHERE amount > 10",
         "SELECT A.account_id FROM account A UNION SELECT L.account_id FROM loan L WHERE L.amount > 99"},
    };
    const auto db = registry().schema("banking_system");
    for (const auto& [x, y] : pairs) {
        c.expect(exact_match(x, y, db.get()) == true, std::string("EM pair: ") + x);
        for (const char* sql : {x, y}) {
            try {
                const auto once = parse_to_clause_set(sql, db.get());
                c.expect(parse_to_clause_set(once.to_sql(), db.get()) == once, std::string("EM idempotence: ") + sql);
            } catch (const UnsupportedSyntax& e) {
                c.expect(false, std::string("EM parse: ") + sql + ": " + e.what());
            }
        }
    }
    const auto elapsed = std::chrono::steady_clock::now() - started;
    c.expect(elapsed < std::chrono::seconds(60), "runtime " + seconds(elapsed));
    char ex[32];
    std::snprintf(ex, sizeof(ex), "%.2f", report.overall.ex.value_or(-1));
    return c.verdict("EX agrees on " + std::to_string(agree) + "/20 (EX=" + ex + "), VES==EX, 10 EM pairs, " +
                     seconds(elapsed));
}

// ---------------------------------------------------------------------------------------------

Verdict error_taxonomy() {
    Checker c;
    const auto scores = score_bench20();
    std::set<std::string> produced;
    for (const auto& item : scores.items) {
        const std::string got(to_string(item.error_class));
        const std::string want = scores.expected.at(item.task_id)["error_class"];
        c.expect(got == want, "item " + item.task_id + ": " + got + " != " + want);
        produced.insert(got);
    }
    for (const char* label :
         {"GOLD_ERROR", "EXECUTION_ERROR", "SCHEMA_LINKING_ERROR", "EMPTY_RESULT", "WRONG_RESULT", "NONE"}) {
        c.expect(produced.count(label) == 1, std::string("no item produced ") + label);
    }
    return c.verdict("all 6 classes produced, 20/20 labels exact");
}

// ---------------------------------------------------------------------------------------------

Verdict instruction_export() {
    Checker c;
    const std::string gold_count = "SELECT COUNT(*) FROM client WHERE gender = 'F'";
    std::vector<PipelineState> states;

    {  // Passing: selector + decomposer.
        ScriptedBackend backend(Script::load(fixture_dir() / "worked_example.script"), 256);
        Task t;
        t.task_id = "pass-pruned";
        t.db_id = "banking_system";
        t.question = kQuestion;
        t.gold_sql = kTargetSql;
        t.difficulty = "moderate";
        states.push_back(run_question(t, registry(), backend, {}));
    }
    {  // Passing: decomposer + one correction.
        ScriptedBackend backend(Script::parse("@@ match: When executing SQL below\n```sql\n" + gold_count +
                                              "\n```\n@@ end\n@@ match: Decompose the question\n```sql\n"
                                              "SELECT COUNT(*) FROM client WHERE genderx = 'F'\n```\n@@ end\n"));
        Task t;
        t.task_id = "pass-refined";
        t.db_id = "banking_system";
        t.question = "How many female clients are there?";
        t.gold_sql = gold_count;
        t.difficulty = "simple";
        states.push_back(run_question(t, registry(), backend, {}));
    }
    {  // Failing: runs cleanly but answers the wrong count.
        ScriptedBackend backend(Script::parse(
            "@@ match: Decompose the question\n```sql\nSELECT COUNT(*) FROM client WHERE gender = 'M'\n```\n@@ end\n"));
        Task t;
        t.task_id = "fail";
        t.db_id = "banking_system";
        t.question = "How many female clients are there?";
        t.gold_sql = gold_count;
        states.push_back(run_question(t, registry(), backend, {}));
    }
    c.expect(states[0].calls.size() == 2, "pruned state should make 2 calls");
    c.expect(states[1].calls.size() == 2, "refined state should make 2 calls");
    c.expect(states[2].calls.size() == 1, "failing state should make 1 call");

    TempDir dir;
    {
        std::ofstream journal(dir / "journal.jsonl");
        for (const auto& s : states) journal << state_to_json(s).dump() << "\n";
    }
    const auto replayed = read_journal(dir / "journal.jsonl");
    const auto records = export_instruction_data(replayed, {}, registry());
    std::map<std::string, size_t> per_task;
    for (const auto& r : records) ++per_task[r.task_id];
    c.expect(records.size() == 4, "expected 4 records, got " + std::to_string(records.size()));
    c.expect(per_task["pass-pruned"] == 2 && per_task["pass-refined"] == 2 && per_task.count("fail") == 0,
             "records per state");
    if (records.size() == 4) {
        c.expect(records[0].agent_task == "selector" && records[1].agent_task == "decomposer" &&
                     records[2].agent_task == "decomposer" && records[3].agent_task == "refiner",
                 "record agents in call order");
        c.expect(records[3].target_response == gold_count, "refiner record targets the corrected SQL");
    }
    return c.verdict("2 passing + 1 failing state -> " + std::to_string(records.size()) + " records");
}

// ---------------------------------------------------------------------------------------------

Verdict live_smoke() {
    const auto env = process_environment();
    if (!env("MACSQL_ENDPOINT")) return skip("MACSQL_ENDPOINT not set");
    const auto started = std::chrono::steady_clock::now();
    Settings settings;
    try {
        settings = resolve_settings(std::nullopt, env, {{"backend", "http"}});
    } catch (const ConfigError& e) {
        return fail(std::string("configuration: ") + e.what());
    }
    const auto items = env("MACSQL_SMOKE_ITEMS");
    const auto db_root = env("MACSQL_SMOKE_DB_ROOT");
    const std::filesystem::path items_path = items ? std::filesystem::path(*items) : fixture_dir() / "bench20.json";
    const std::filesystem::path root = db_root ? std::filesystem::path(*db_root) : fixture_db_root();
    auto bench = load_benchmark(BenchmarkKind::Bird, items_path, root);
    if (bench.tasks.size() > 10) bench.tasks.resize(10);

    auto backend = make_backend(settings, env);
    DatabaseRegistry live_registry(root);
    BatchOptions options;
    options.parallelism = settings.parallelism;
    const auto result = run_batch(bench.tasks, live_registry, *backend, pipeline_config(settings), options);

    size_t refiner_activations = 0;
    size_t ex = 0;
    size_t errors = 0;
    for (const auto& state : result.states) {
        if (!state.error.empty()) ++errors;
        for (const auto& call : state.calls) refiner_activations += call.agent == "refiner";
        if (state.task.gold_sql && !state.final_sql.empty() &&
            exec_match(state.final_sql, *state.task.gold_sql, resolve_database_file(root, state.task.db_id))) {
            ++ex;
        }
    }
    const auto elapsed = std::chrono::steady_clock::now() - started;
    const std::string detail = std::to_string(result.states.size()) + " items, " + std::to_string(errors) +
                               " errors, " + std::to_string(refiner_activations) + " refiner calls, EX " +
                               std::to_string(ex) + "/" + std::to_string(result.states.size()) + ", " + seconds(elapsed);
    const bool ok = result.states.size() == bench.tasks.size() && refiner_activations > 0 && ex > 0 &&
                    elapsed < std::chrono::minutes(10);
    return ok ? pass(detail) : fail(detail);
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
        {"worked-example replay", worked_example},
        {"prompt snapshots", prompt_snapshots},
        {"pipeline invariants", algorithm_invariants},
        {"pruning rules", pruning_properties},
        {"metric oracles", metric_oracles},
        {"error taxonomy", error_taxonomy},
        {"instruction export", instruction_export},
        {"live smoke", live_smoke},
    };
    int failures = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = fail(std::string("threw: ") + e.what());
        }
        const char* label = v.kind == Verdict::Kind::Pass ? "PASS" : v.kind == Verdict::Kind::Fail ? "FAIL" : "SKIP";
        std::cout << "criterion " << (i + 1) << " " << label << " " << criteria[i].first << ": " << v.detail << "\n";
        if (v.kind == Verdict::Kind::Fail) ++failures;
    }
    return failures ? EXIT_FAILURE : EXIT_SUCCESS;
}
