#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace macsql {

struct ColumnSchema {
    std::string name;
    std::string declared_type;
    std::string description;        // friendly name / description; empty when the benchmark has none
    std::string value_description;  // free-text hint about the values, rendered as "And ..."
    std::vector<std::string> value_examples;  // rendered literals, at most 6
    bool is_primary_key = false;
};

struct TableSchema {
    std::string name;
    std::vector<ColumnSchema> columns;

    const ColumnSchema* find_column(std::string_view column) const;  // case-insensitive
};

struct ForeignKey {
    std::string from_table;
    std::string from_column;
    std::string to_table;
    std::string to_column;

    bool operator==(const ForeignKey&) const = default;
};

/// Introspected catalog of one benchmark database. Immutable once built.
struct DatabaseSchema {
    std::string db_id;
    std::vector<TableSchema> tables;
    std::vector<ForeignKey> foreign_keys;
    std::filesystem::path db_path;
    std::vector<std::string> warnings;

    const TableSchema* find_table(std::string_view table) const;  // case-insensitive
    size_t column_count() const;
};

/// One row of a benchmark column-description file.
struct ColumnDescription {
    std::string table;
    std::string column;
    std::string friendly_name;
    std::string description;
    std::string value_description;
};

/// Loads every `<table>.csv` in a description directory
/// (header: original_column_name, column_name, column_description, data_format, value_description).
std::vector<ColumnDescription> load_column_descriptions(const std::filesystem::path& dir);

struct IntrospectOptions {
    std::string db_id;  // defaults to the file stem
    bool sample_values = true;
    size_t value_examples = 5;
};

/// Reads tables, columns, primary and foreign keys. Throws UnreadableDatabase.
DatabaseSchema introspect(const std::filesystem::path& db_path,
                          const std::vector<ColumnDescription>* descriptions = nullptr,
                          const IntrospectOptions& options = {});

/// Up to `k` distinct non-null values, most frequent first (ties ascending), rendered as literals.
/// Returns {} when the column is ignored for value examples. Throws UnknownColumn.
std::vector<std::string> sample_column_values(const DatabaseSchema& db, std::string_view table,
                                              std::string_view column, size_t k = 5);

// Predicates behind the value-example ignore rule.
bool is_numeric_affine(std::string_view declared_type);
bool looks_like_url_or_email(std::string_view value);
inline constexpr size_t kMaxLiteralLength = 50;

/// Retained tables (declaration order) and, per table, retained columns (declaration order).
struct SchemaSelection {
    std::vector<std::pair<std::string, std::vector<std::string>>> tables;

    const std::vector<std::string>* columns_of(std::string_view table) const;
    bool contains(std::string_view table, std::string_view column) const;
    bool operator==(const SchemaSelection&) const = default;
};

/// Selection retaining every table and column of `db`.
SchemaSelection full_selection(const DatabaseSchema& db);

/// Foreign keys of `db` whose both endpoints survive `selection`.
std::vector<ForeignKey> surviving_foreign_keys(const DatabaseSchema& db, const SchemaSelection& selection);

struct RenderedSchema {
    std::string schema_text;  // the `# Table:` blocks
    std::string fk_text;      // one `a.`x` = b.`y`` line per key

    std::string combined() const;
};

RenderedSchema render_schema(const DatabaseSchema& db, const SchemaSelection* selection = nullptr);

/// `# Table:` blocks followed by the `[Foreign keys]` section.
std::string render_schema_description(const DatabaseSchema& db, const SchemaSelection* selection = nullptr);

using TokenEstimator = std::function<size_t(std::string_view)>;

/// ceil(bytes / 4).
size_t estimate_tokens(std::string_view text);

}  // namespace macsql
