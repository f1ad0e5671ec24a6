#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "macsql/llm_backend.hpp"
#include "macsql/schema_catalog.hpp"

namespace macsql {

struct TableVerdict {
    enum class Kind { KeepAll, DropAll, Columns };
    Kind kind = Kind::KeepAll;
    std::vector<std::string> columns;  // Kind::Columns only, never empty

    bool operator==(const TableVerdict&) const = default;
};

std::string_view to_string(TableVerdict::Kind kind);

/// One verdict per source table, in declaration order.
struct PruningDecision {
    std::vector<std::pair<std::string, TableVerdict>> verdicts;
    std::vector<std::string> restored_tables;  // brought back to honour the three-table floor
    std::vector<std::string> warnings;

    const TableVerdict* find(std::string_view table) const;
};

struct PrunedSchema {
    SchemaSelection selection;
    std::vector<ForeignKey> foreign_keys;  // both endpoints retained
};

inline constexpr double kDefaultPruningFraction = 0.8;
inline constexpr size_t kMinRetainedColumns = 6;
inline constexpr size_t kMinRetainedTables = 3;

/// estimate(rendered_schema) > fraction * context_window. Uses estimate_tokens when no estimator is given.
bool needs_pruning(std::string_view rendered_schema, size_t context_window,
                   double fraction = kDefaultPruningFraction, const TokenEstimator& estimator = {});

/// Alternative trigger based on schema shape. No defaults are calibrated; both limits must be chosen.
struct ColumnCountRule {
    size_t max_total_columns;
    double max_average_columns;
};
bool exceeds_column_budget(const DatabaseSchema& db, const ColumnCountRule& rule);

ChatRequest build_selector_prompt(const DatabaseSchema& db, std::string_view question, std::string_view evidence);

/// Reads the JSON verdict object from a selector response. Unknown tables and columns are dropped
/// with a warning, unmentioned tables are dropped, and when fewer than three tables survive in a
/// database that has at least three, dropped tables are restored in declaration order.
/// Throws NoJsonFound or AllTablesDropped.
PruningDecision parse_pruning_decision(std::string_view response, const DatabaseSchema& db);

/// Applies verdicts: explicit column lists always keep primary keys and are padded (primary keys
/// first, then declaration order) to min(6, all) columns. Throws AllTablesDropped.
PrunedSchema apply_pruning(const DatabaseSchema& db, const PruningDecision& decision);

}  // namespace macsql
