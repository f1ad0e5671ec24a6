#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "macsql/sqlite_db.hpp"

namespace macsql {

enum class ExecStatus { Ok, SyntaxError, SchemaError, EmptyResult, Timeout, OtherError };

std::string_view to_string(ExecStatus status);
ExecStatus exec_status_from_string(std::string_view name);

using Row = std::vector<SqlValue>;

/// Result of running one query. `rows` is populated only for Ok (non-empty) and EmptyResult.
struct ExecutionOutcome {
    ExecStatus status = ExecStatus::OtherError;
    std::vector<Row> rows;
    std::string error_message;
    std::string exception_class;
    std::chrono::microseconds elapsed{0};

    bool ok() const { return status == ExecStatus::Ok; }
    /// Ran to completion (with or without rows).
    bool succeeded() const { return status == ExecStatus::Ok || status == ExecStatus::EmptyResult; }
};

inline constexpr std::chrono::milliseconds kDefaultQueryTimeout{30000};

/// Read-only execution of a single statement with a wall-clock budget. Never throws on query
/// failure: every failure is encoded in the outcome.
ExecutionOutcome execute_sql(const std::filesystem::path& db_path, std::string_view sql,
                             std::chrono::milliseconds timeout = kDefaultQueryTimeout);

/// Maps an engine error message to SyntaxError, SchemaError or OtherError.
ExecStatus classify_engine_error(std::string_view message);

/// Canonical form of a result set used for execution comparison.
struct CanonicalRows {
    std::vector<std::string> rows;  // one key per row; sorted unless ordered
    bool ordered = false;

    bool operator==(const CanonicalRows&) const = default;
};

struct NormalizeOptions {
    bool order_sensitive = false;
    bool distinct = false;  // set semantics instead of multiset
};

/// Value key: numbers quantized to 7 significant digits (relative tolerance ~1e-6, int and real
/// compare equal), text trimmed, NULL distinct from ''.
std::string canonical_value(const SqlValue& value);

CanonicalRows normalize_rows(const std::vector<Row>& rows, const NormalizeOptions& options = {});

/// True when the outermost query (outside parentheses) carries an ORDER BY clause.
bool has_top_level_order_by(std::string_view sql);

}  // namespace macsql
