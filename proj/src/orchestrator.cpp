#include "macsql/orchestrator.hpp"

#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "macsql/errors.hpp"
#include "macsql/evaluation.hpp"
#include "macsql/text_util.hpp"

namespace macsql {

using json = nlohmann::json;

namespace {

constexpr size_t kMaxStoredRows = 50;

json value_to_json(const SqlValue& v) {
    struct Visitor {
        json operator()(std::monostate) const { return nullptr; }
        json operator()(std::int64_t x) const { return x; }
        json operator()(double x) const { return x; }
        json operator()(const std::string& x) const { return x; }
        json operator()(const Blob& b) const { return {{"blob", render_literal(b)}}; }
    };
    return std::visit(Visitor{}, v);
}

SqlValue value_from_json(const json& j) {
    if (j.is_null()) return std::monostate{};
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    // Blobs are kept as their literal text; byte-level fidelity is not needed after the fact.
    return j.value("blob", std::string());
}

json outcome_to_json(const ExecutionOutcome& o, bool deterministic) {
    json rows = json::array();
    for (size_t i = 0; i < o.rows.size() && i < kMaxStoredRows; ++i) {
        json row = json::array();
        for (const auto& v : o.rows[i]) row.push_back(value_to_json(v));
        rows.push_back(std::move(row));
    }
    return {
        {"status", to_string(o.status)},
        {"row_count", o.rows.size()},
        {"rows", std::move(rows)},
        {"error_message", o.error_message},
        {"exception_class", o.exception_class},
        {"elapsed_us", deterministic ? 0 : o.elapsed.count()},
    };
}

ExecutionOutcome outcome_from_json(const json& j) {
    ExecutionOutcome o;
    o.status = exec_status_from_string(j.at("status").get<std::string>());
    for (const auto& row : j.at("rows")) {
        Row r;
        for (const auto& v : row) r.push_back(value_from_json(v));
        o.rows.push_back(std::move(r));
    }
    o.error_message = j.value("error_message", std::string());
    o.exception_class = j.value("exception_class", std::string());
    o.elapsed = std::chrono::microseconds(j.value("elapsed_us", std::int64_t{0}));
    return o;
}

json optional_text(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

std::optional<std::string> optional_text_from(const json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
}

json task_to_json(const Task& t) {
    return {{"task_id", t.task_id},   {"db_id", t.db_id},
            {"question", t.question}, {"evidence", t.evidence},
            {"gold_sql", optional_text(t.gold_sql)}, {"difficulty", optional_text(t.difficulty)}};
}

Task task_from_json(const json& j) {
    Task t;
    t.task_id = j.at("task_id").get<std::string>();
    t.db_id = j.at("db_id").get<std::string>();
    t.question = j.at("question").get<std::string>();
    t.evidence = j.value("evidence", std::string());
    t.gold_sql = optional_text_from(j, "gold_sql");
    t.difficulty = optional_text_from(j, "difficulty");
    return t;
}

json verdict_to_json(const TableVerdict& v) {
    if (v.kind == TableVerdict::Kind::Columns) return v.columns;
    return std::string(to_string(v.kind));
}

TableVerdict verdict_from_json(const json& j) {
    TableVerdict v;
    if (j.is_array()) {
        v.kind = TableVerdict::Kind::Columns;
        v.columns = j.get<std::vector<std::string>>();
    } else {
        v.kind = j.get<std::string>() == "drop_all" ? TableVerdict::Kind::DropAll : TableVerdict::Kind::KeepAll;
    }
    return v;
}

json pruning_to_json(const PruningTrace& p) {
    json verdicts = json::array();
    for (const auto& [table, v] : p.decision.verdicts) verdicts.push_back({{"table", table}, {"verdict", verdict_to_json(v)}});
    json selection = json::array();
    for (const auto& [table, columns] : p.pruned.selection.tables) {
        selection.push_back({{"table", table}, {"columns", columns}});
    }
    json keys = json::array();
    for (const auto& fk : p.pruned.foreign_keys) {
        keys.push_back({fk.from_table, fk.from_column, fk.to_table, fk.to_column});
    }
    return {{"verdicts", verdicts},
            {"restored_tables", p.decision.restored_tables},
            {"warnings", p.decision.warnings},
            {"selection", selection},
            {"foreign_keys", keys}};
}

PruningTrace pruning_from_json(const json& j) {
    PruningTrace p;
    for (const auto& v : j.at("verdicts")) {
        p.decision.verdicts.emplace_back(v.at("table").get<std::string>(), verdict_from_json(v.at("verdict")));
    }
    p.decision.restored_tables = j.value("restored_tables", std::vector<std::string>{});
    p.decision.warnings = j.value("warnings", std::vector<std::string>{});
    for (const auto& s : j.at("selection")) {
        p.pruned.selection.tables.emplace_back(s.at("table").get<std::string>(),
                                               s.at("columns").get<std::vector<std::string>>());
    }
    for (const auto& k : j.at("foreign_keys")) {
        p.pruned.foreign_keys.push_back(
            {k.at(0).get<std::string>(), k.at(1).get<std::string>(), k.at(2).get<std::string>(),
             k.at(3).get<std::string>()});
    }
    return p;
}

}  // namespace

json state_to_json(const PipelineState& s) {
    json j;
    j["task"] = task_to_json(s.task);
    j["schema_tokens"] = s.schema_tokens;
    j["pruning_triggered"] = s.pruning_triggered;
    j["pruning"] = s.pruning ? pruning_to_json(*s.pruning) : json(nullptr);
    if (s.decomposition) {
        json steps = json::array();
        for (const auto& step : s.decomposition->steps) {
            steps.push_back({{"sub_question", step.sub_question}, {"sub_sql", step.sub_sql}});
        }
        j["decomposition"] = {{"steps", steps},
                              {"raw_response", s.decomposition->raw_response},
                              {"warnings", s.decomposition->warnings}};
    } else {
        j["decomposition"] = nullptr;
    }
    json attempts = json::array();
    for (const auto& a : s.refine_attempts) {
        attempts.push_back({{"round", a.round},
                            {"input_sql", a.input_sql},
                            {"outcome", outcome_to_json(a.outcome, false)},
                            {"corrected_sql", optional_text(a.corrected_sql)}});
    }
    j["refine_attempts"] = attempts;
    json calls = json::array();
    for (const auto& c : s.calls) {
        calls.push_back({{"agent", c.agent},
                         {"prompt", c.prompt},
                         {"response", c.response},
                         {"prompt_tokens", c.prompt_tokens},
                         {"completion_tokens", c.completion_tokens},
                         {"latency_ms", c.latency.count()},
                         {"attempts", c.attempts}});
    }
    j["calls"] = calls;
    j["final_sql"] = s.final_sql;
    j["warnings"] = s.warnings;
    j["error"] = s.error;
    j["elapsed_ms"] = s.elapsed.count();
    return j;
}

PipelineState state_from_json(const json& j) {
    PipelineState s;
    s.task = task_from_json(j.at("task"));
    s.schema_tokens = j.value("schema_tokens", size_t{0});
    s.pruning_triggered = j.value("pruning_triggered", false);
    if (j.contains("pruning") && !j["pruning"].is_null()) s.pruning = pruning_from_json(j["pruning"]);
    if (j.contains("decomposition") && !j["decomposition"].is_null()) {
        const auto& d = j["decomposition"];
        DecompositionResult r;
        for (const auto& step : d.at("steps")) {
            r.steps.push_back({step.at("sub_question").get<std::string>(), step.at("sub_sql").get<std::string>()});
        }
        r.raw_response = d.value("raw_response", std::string());
        r.warnings = d.value("warnings", std::vector<std::string>{});
        s.decomposition = std::move(r);
    }
    for (const auto& a : j.at("refine_attempts")) {
        RefineAttempt attempt;
        attempt.round = a.at("round").get<int>();
        attempt.input_sql = a.at("input_sql").get<std::string>();
        attempt.outcome = outcome_from_json(a.at("outcome"));
        attempt.corrected_sql = optional_text_from(a, "corrected_sql");
        s.refine_attempts.push_back(std::move(attempt));
    }
    for (const auto& c : j.at("calls")) {
        AgentCall call;
        call.agent = c.at("agent").get<std::string>();
        call.prompt = c.at("prompt").get<std::string>();
        call.response = c.at("response").get<std::string>();
        call.prompt_tokens = c.value("prompt_tokens", size_t{0});
        call.completion_tokens = c.value("completion_tokens", size_t{0});
        call.latency = std::chrono::milliseconds(c.value("latency_ms", std::int64_t{0}));
        call.attempts = c.value("attempts", 1);
        s.calls.push_back(std::move(call));
    }
    s.final_sql = j.at("final_sql").get<std::string>();
    s.warnings = j.value("warnings", std::vector<std::string>{});
    s.error = j.value("error", std::string());
    s.elapsed = std::chrono::milliseconds(j.value("elapsed_ms", std::int64_t{0}));
    return s;
}

namespace {

template <typename T>
std::string describe(const T& e, const char* type) {
    return std::string(type) + ": " + e.what();
}

ChatRequest with_defaults(ChatRequest request, const PipelineConfig& config) {
    request.temperature = config.temperature;
    request.max_output_tokens = config.max_output_tokens;
    request.model_name = config.model_name;
    return request;
}

void scrub_timings(PipelineState& state) {
    state.elapsed = std::chrono::milliseconds(0);
    for (auto& call : state.calls) call.latency = std::chrono::milliseconds(0);
    for (auto& attempt : state.refine_attempts) attempt.outcome.elapsed = std::chrono::microseconds(0);
}

void run_stages(PipelineState& state, DatabaseRegistry& registry, LlmBackend& backend, const PipelineConfig& config) {
    const Task& task = state.task;
    const auto schema = registry.schema(task.db_id);
    const auto db_path = registry.path_of(task.db_id);

    RenderedSchema rendered = render_schema(*schema);
    state.schema_tokens = estimate_tokens(rendered.combined());
    const size_t window = config.context_window ? config.context_window : backend.context_window();
    state.pruning_triggered = needs_pruning(rendered.combined(), window, config.pruning_fraction);

    if (state.pruning_triggered) {
        AgentCall call = call_agent(backend, "selector",
                                    with_defaults(build_selector_prompt(*schema, task.question, task.evidence), config));
        const std::string response = call.response;
        state.calls.push_back(std::move(call));
        try {
            PruningTrace trace;
            trace.decision = parse_pruning_decision(response, *schema);
            trace.pruned = apply_pruning(*schema, trace.decision);
            rendered = render_schema(*schema, &trace.pruned.selection);
            state.pruning = std::move(trace);
        } catch (const NoJsonFound& e) {
            state.warnings.push_back(describe(e, "NoJsonFound") + "; using the full schema");
        } catch (const AllTablesDropped& e) {
            state.warnings.push_back(describe(e, "AllTablesDropped") + "; using the full schema");
        }
    }

    AgentCall call = call_agent(
        backend, "decomposer",
        with_defaults(build_decomposer_prompt(rendered.schema_text, rendered.fk_text, task.question, task.evidence,
                                              config.shots),
                      config));
    const std::string response = call.response;
    state.calls.push_back(std::move(call));
    state.decomposition = parse_decomposition(response);
    for (const auto& w : state.decomposition->warnings) state.warnings.push_back(w);
    state.final_sql = state.decomposition->final_sql();

    RefineOptions options;
    options.max_rounds = config.max_rounds;
    options.timeout = config.query_timeout;
    RefineResult refined = refine_loop(backend, db_path, task.question, task.evidence, rendered, state.final_sql,
                                       options, with_defaults({}, config));
    state.refine_attempts = std::move(refined.attempts);
    for (auto& c : refined.calls) state.calls.push_back(std::move(c));
    for (auto& w : refined.warnings) state.warnings.push_back(std::move(w));
    state.final_sql = std::move(refined.final_sql);
}

}  // namespace

PipelineState run_question(const Task& task, DatabaseRegistry& registry, LlmBackend& backend,
                           const PipelineConfig& config) {
    PipelineState state;
    state.task = task;
    const auto started = std::chrono::steady_clock::now();
    try {
        run_stages(state, registry, backend, config);
    } catch (const MissingDatabase& e) {
        state.error = describe(e, "MissingDatabase");
    } catch (const UnreadableDatabase& e) {
        state.error = describe(e, "UnreadableDatabase");
    } catch (const BackendUnavailable& e) {
        state.error = describe(e, "BackendUnavailable");
    } catch (const ScriptMiss& e) {
        state.error = describe(e, "ScriptMiss");
    } catch (const NoSqlFound& e) {
        state.error = describe(e, "NoSqlFound");
    } catch (const InvalidRequest& e) {
        state.error = describe(e, "InvalidRequest");
    } catch (const std::exception& e) {
        state.error = describe(e, "Error");
    }
    state.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
    if (config.deterministic) scrub_timings(state);
    return state;
}

std::vector<PipelineState> read_journal(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    std::vector<PipelineState> out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            out.push_back(state_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            if (warnings) {
                warnings->push_back(path.string() + ":" + std::to_string(line_no) + ": skipped unreadable entry");
            }
        }
    }
    return out;
}

std::map<std::string, PipelineState> load_journal(const std::filesystem::path& path,
                                                  std::vector<std::string>* warnings) {
    std::map<std::string, PipelineState> out;
    for (auto& state : read_journal(path, warnings)) {
        const std::string id = state.task.task_id;
        out.insert_or_assign(id, std::move(state));
    }
    return out;
}

BatchResult run_batch(const std::vector<Task>& tasks, DatabaseRegistry& registry, LlmBackend& backend,
                      const PipelineConfig& config, const BatchOptions& options) {
    if (options.parallelism < 1) throw InvalidRequest("parallelism must be at least 1");
    BatchResult result;
    std::map<std::string, PipelineState> done;
    if (!options.journal.empty()) done = load_journal(options.journal, &result.warnings);

    std::vector<std::optional<PipelineState>> slots(tasks.size());
    std::vector<size_t> pending;
    size_t finished = 0;
    for (size_t i = 0; i < tasks.size(); ++i) {
        const auto it = done.find(tasks[i].task_id);
        if (it != done.end()) {
            slots[i] = it->second;
            ++result.resumed;
            ++finished;
            if (options.on_progress) options.on_progress({finished, tasks.size(), &*slots[i], true});
        } else {
            pending.push_back(i);
        }
    }

    std::ofstream journal;
    if (!options.journal.empty()) {
        // A crash can leave a partial last line; start on a fresh one.
        std::error_code ec;
        const bool needs_newline = std::filesystem::exists(options.journal, ec) &&
                                   std::filesystem::file_size(options.journal, ec) > 0 && [&] {
                                       std::ifstream tail(options.journal, std::ios::binary);
                                       tail.seekg(-1, std::ios::end);
                                       return tail.get() != '\n';
                                   }();
        journal.open(options.journal, std::ios::binary | std::ios::app);
        if (!journal) throw ConfigError("cannot open journal " + options.journal.string());
        if (needs_newline) journal << '\n';
    }

    std::mutex mutex;
    std::atomic<size_t> next{0};
    auto worker = [&] {
        while (true) {
            if (options.cancel && options.cancel->load()) return;
            const size_t k = next.fetch_add(1);
            if (k >= pending.size()) return;
            const size_t index = pending[k];
            PipelineState state = run_question(tasks[index], registry, backend, config);
            std::lock_guard lock(mutex);
            if (journal.is_open()) {
                journal << state_to_json(state).dump() << '\n';
                journal.flush();
            }
            slots[index] = std::move(state);
            ++result.executed;
            ++finished;
            if (options.on_progress) options.on_progress({finished, tasks.size(), &*slots[index], false});
        }
    };

    const size_t workers = std::min(options.parallelism, std::max<size_t>(pending.size(), 1));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    for (auto& slot : slots) {
        if (slot) {
            result.states.push_back(std::move(*slot));
        } else {
            result.cancelled = true;
        }
    }
    return result;
}

json record_to_json(const InstructionRecord& r) {
    return {{"task_id", r.task_id},       {"agent_task", r.agent_task}, {"prompt", r.prompt},
            {"target_response", r.target_response}, {"db_id", r.db_id}, {"difficulty", r.difficulty},
            {"passed", r.passed},         {"note", r.note}};
}

std::vector<InstructionRecord> export_instruction_data(const std::vector<PipelineState>& states,
                                                       const std::map<std::string, std::string>& gold_by_task,
                                                       DatabaseRegistry& registry, std::chrono::milliseconds timeout) {
    std::vector<InstructionRecord> out;
    for (const auto& state : states) {
        std::string gold;
        if (const auto it = gold_by_task.find(state.task.task_id); it != gold_by_task.end()) {
            gold = it->second;
        } else if (state.task.gold_sql) {
            gold = *state.task.gold_sql;
        } else {
            throw MissingGold("no gold SQL for task " + state.task.task_id);
        }
        if (state.final_sql.empty()) continue;
        if (!exec_match(state.final_sql, gold, registry.path_of(state.task.db_id), timeout)) continue;

        std::vector<const RefineAttempt*> corrections;
        for (const auto& a : state.refine_attempts) {
            if (diagnose(a.outcome)) corrections.push_back(&a);
        }
        size_t refiner_index = 0;
        for (const auto& call : state.calls) {
            InstructionRecord r;
            r.task_id = state.task.task_id;
            r.agent_task = call.agent;
            r.prompt = call.prompt;
            r.target_response = call.response;
            r.db_id = state.task.db_id;
            r.difficulty = state.task.difficulty.value_or("unlabeled");
            if (call.agent == "refiner") {
                const RefineAttempt* a = refiner_index < corrections.size() ? corrections[refiner_index] : nullptr;
                ++refiner_index;
                if (a && a->corrected_sql) {
                    r.target_response = *a->corrected_sql;
                    r.note = "target is the corrected SQL extracted from the response";
                } else {
                    r.note = "target is the full correction response; no SQL was extracted";
                }
            }
            out.push_back(std::move(r));
        }
    }
    return out;
}

}  // namespace macsql
