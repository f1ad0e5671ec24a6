#include "macsql/selector.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "macsql/errors.hpp"
#include "macsql/prompts.hpp"
#include "macsql/sql_blocks.hpp"
#include "macsql/text_util.hpp"

namespace macsql {

using json = nlohmann::json;

std::string_view to_string(TableVerdict::Kind kind) {
    switch (kind) {
        case TableVerdict::Kind::KeepAll: return "keep_all";
        case TableVerdict::Kind::DropAll: return "drop_all";
        case TableVerdict::Kind::Columns: return "columns";
    }
    return "keep_all";
}

const TableVerdict* PruningDecision::find(std::string_view table) const {
    for (const auto& [name, verdict] : verdicts) {
        if (iequals(name, table)) return &verdict;
    }
    return nullptr;
}

bool needs_pruning(std::string_view rendered_schema, size_t context_window, double fraction,
                   const TokenEstimator& estimator) {
    const size_t tokens = estimator ? estimator(rendered_schema) : estimate_tokens(rendered_schema);
    return static_cast<double>(tokens) > fraction * static_cast<double>(context_window);
}

bool exceeds_column_budget(const DatabaseSchema& db, const ColumnCountRule& rule) {
    const size_t total = db.column_count();
    if (total > rule.max_total_columns) return true;
    if (db.tables.empty()) return false;
    return static_cast<double>(total) / static_cast<double>(db.tables.size()) > rule.max_average_columns;
}

ChatRequest build_selector_prompt(const DatabaseSchema& db, std::string_view question, std::string_view evidence) {
    const RenderedSchema schema = render_schema(db);
    ChatRequest request;
    request.user_text = fill_template(prompts::kSelector, {
                                                              {"db_id", db.db_id},
                                                              {"desc_str", schema.schema_text},
                                                              {"fk_str", schema.fk_text},
                                                              {"query", std::string(question)},
                                                              {"evidence", std::string(evidence)},
                                                          });
    return request;
}

namespace {

// Primary keys first, then declaration order, until `target` columns are chosen.
void pad_columns(const TableSchema& table, std::vector<std::string>& columns, size_t target) {
    auto has = [&](const std::string& name) {
        return std::any_of(columns.begin(), columns.end(), [&](const std::string& c) { return iequals(c, name); });
    };
    for (const auto& c : table.columns) {
        if (c.is_primary_key && !has(c.name)) columns.push_back(c.name);
    }
    for (const auto& c : table.columns) {
        if (columns.size() >= target) break;
        if (!has(c.name)) columns.push_back(c.name);
    }
}

}  // namespace

PruningDecision parse_pruning_decision(std::string_view response, const DatabaseSchema& db) {
    const auto object_text = extract_json_object(response);
    if (!object_text) throw NoJsonFound("selector response contains no JSON object");
    const json object = json::parse(*object_text);

    PruningDecision decision;
    for (const auto& [key, value] : object.items()) {
        if (!db.find_table(key)) decision.warnings.push_back("unknown table '" + key + "' ignored");
    }

    for (const auto& table : db.tables) {
        const json* value = nullptr;
        for (const auto& [key, v] : object.items()) {
            if (iequals(key, table.name)) {
                value = &v;
                break;
            }
        }
        TableVerdict verdict;
        if (!value) {
            verdict.kind = TableVerdict::Kind::DropAll;
            decision.warnings.push_back("table '" + table.name + "' not mentioned; dropped");
        } else if (value->is_string()) {
            const std::string s = to_lower(trim(value->get<std::string>()));
            if (s == "drop_all") {
                verdict.kind = TableVerdict::Kind::DropAll;
            } else {
                if (s != "keep_all") {
                    decision.warnings.push_back("table '" + table.name + "': unknown verdict '" + s +
                                                "' treated as keep_all");
                }
                verdict.kind = TableVerdict::Kind::KeepAll;
            }
        } else if (value->is_array()) {
            verdict.kind = TableVerdict::Kind::Columns;
            for (const auto& item : *value) {
                if (!item.is_string()) {
                    decision.warnings.push_back("table '" + table.name + "': non-string column entry ignored");
                    continue;
                }
                const std::string name = item.get<std::string>();
                const ColumnSchema* column = table.find_column(name);
                if (!column) {
                    decision.warnings.push_back("unknown column '" + table.name + "." + name + "' dropped");
                    continue;
                }
                if (std::find(verdict.columns.begin(), verdict.columns.end(), column->name) == verdict.columns.end()) {
                    verdict.columns.push_back(column->name);
                }
            }
            if (verdict.columns.empty()) {
                decision.warnings.push_back("table '" + table.name + "': no valid columns listed; kept whole");
                verdict.kind = TableVerdict::Kind::KeepAll;
            }
        } else {
            decision.warnings.push_back("table '" + table.name + "': malformed verdict treated as keep_all");
            verdict.kind = TableVerdict::Kind::KeepAll;
        }
        decision.verdicts.emplace_back(table.name, std::move(verdict));
    }

    auto surviving = [&] {
        return static_cast<size_t>(std::count_if(decision.verdicts.begin(), decision.verdicts.end(), [](const auto& v) {
            return v.second.kind != TableVerdict::Kind::DropAll;
        }));
    };
    if (db.tables.size() >= kMinRetainedTables) {
        for (size_t i = 0; i < decision.verdicts.size() && surviving() < kMinRetainedTables; ++i) {
            auto& [name, verdict] = decision.verdicts[i];
            if (verdict.kind != TableVerdict::Kind::DropAll) continue;
            const TableSchema& table = db.tables[i];
            verdict.kind = TableVerdict::Kind::Columns;
            verdict.columns.clear();
            pad_columns(table, verdict.columns, std::min(kMinRetainedColumns, table.columns.size()));
            if (verdict.columns.empty()) verdict.kind = TableVerdict::Kind::KeepAll;
            decision.restored_tables.push_back(name);
        }
    }
    if (surviving() == 0) throw AllTablesDropped("selector decision drops every table");
    return decision;
}

PrunedSchema apply_pruning(const DatabaseSchema& db, const PruningDecision& decision) {
    PrunedSchema out;
    for (const auto& table : db.tables) {
        const TableVerdict* verdict = decision.find(table.name);
        if (!verdict || verdict->kind == TableVerdict::Kind::DropAll) continue;
        std::vector<std::string> kept;
        if (verdict->kind == TableVerdict::Kind::KeepAll) {
            for (const auto& c : table.columns) kept.push_back(c.name);
        } else {
            std::vector<std::string> chosen;
            for (const auto& name : verdict->columns) {
                if (const ColumnSchema* c = table.find_column(name)) chosen.push_back(c->name);
            }
            pad_columns(table, chosen, std::min(kMinRetainedColumns, table.columns.size()));
            for (const auto& c : table.columns) {
                if (std::find(chosen.begin(), chosen.end(), c.name) != chosen.end()) kept.push_back(c.name);
            }
        }
        out.selection.tables.emplace_back(table.name, std::move(kept));
    }
    if (out.selection.tables.empty()) throw AllTablesDropped("pruning leaves no table");
    out.foreign_keys = surviving_foreign_keys(db, out.selection);
    return out;
}

}  // namespace macsql
