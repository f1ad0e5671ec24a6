#include "macsql/sql_exec.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <optional>
#include <stdexcept>

#include "macsql/errors.hpp"
#include "macsql/sql_parse.hpp"
#include "macsql/text_util.hpp"

namespace macsql {

std::string_view to_string(ExecStatus status) {
    switch (status) {
        case ExecStatus::Ok: return "OK";
        case ExecStatus::SyntaxError: return "SYNTAX_ERROR";
        case ExecStatus::SchemaError: return "SCHEMA_ERROR";
        case ExecStatus::EmptyResult: return "EMPTY_RESULT";
        case ExecStatus::Timeout: return "TIMEOUT";
        case ExecStatus::OtherError: return "OTHER_ERROR";
    }
    return "OTHER_ERROR";
}

ExecStatus exec_status_from_string(std::string_view name) {
    for (auto s : {ExecStatus::Ok, ExecStatus::SyntaxError, ExecStatus::SchemaError, ExecStatus::EmptyResult,
                   ExecStatus::Timeout, ExecStatus::OtherError}) {
        if (to_string(s) == name) return s;
    }
    throw std::invalid_argument("unknown execution status: " + std::string(name));
}

ExecStatus classify_engine_error(std::string_view message) {
    const std::string m = to_lower(message);
    auto has = [&](std::string_view needle) { return m.find(needle) != std::string::npos; };
    if (has("no such table") || has("no such column") || has("ambiguous column name")) {
        return ExecStatus::SchemaError;
    }
    if (has("syntax error") || has("incomplete input") || has("unrecognized token")) {
        return ExecStatus::SyntaxError;
    }
    return ExecStatus::OtherError;
}

namespace {

// Python's sqlite3 module names, which is what the correction prompt has always shown.
std::string exception_class_for(int code) {
    switch (code & 0xFF) {
        case SQLITE_CONSTRAINT: return "IntegrityError";
        case SQLITE_TOOBIG:
        case SQLITE_MISMATCH:
        case SQLITE_RANGE: return "DataError";
        case SQLITE_MISUSE: return "ProgrammingError";
        case SQLITE_CORRUPT:
        case SQLITE_NOTADB:
        case SQLITE_INTERNAL: return "DatabaseError";
        default: return "OperationalError";
    }
}

struct Deadline {
    std::chrono::steady_clock::time_point at;
};

int progress_callback(void* arg) {
    const auto* deadline = static_cast<const Deadline*>(arg);
    return std::chrono::steady_clock::now() >= deadline->at ? 1 : 0;
}

bool only_trivia(std::string_view rest) {
    try {
        return tokenize_sql(rest).empty();
    } catch (const UnsupportedSyntax&) {
        return false;
    }
}

}  // namespace

ExecutionOutcome execute_sql(const std::filesystem::path& db_path, std::string_view sql,
                             std::chrono::milliseconds timeout) {
    ExecutionOutcome out;
    const auto started = std::chrono::steady_clock::now();
    auto stamp = [&] {
        out.elapsed =
            std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - started);
    };
    auto fail = [&](ExecStatus status, std::string message, std::string exception_class) {
        out.status = status;
        out.rows.clear();
        out.error_message = std::move(message);
        out.exception_class = std::move(exception_class);
        stamp();
        return out;
    };

    if (trim(sql).empty()) return fail(ExecStatus::OtherError, "empty SQL statement", "ProgrammingError");

    std::optional<SqliteDb> conn;
    try {
        conn.emplace(SqliteDb::open_read_only(db_path));
    } catch (const UnreadableDatabase& e) {
        return fail(ExecStatus::OtherError, e.what(), "OperationalError");
    }
    sqlite3* db = conn->get();

    Deadline deadline{started + timeout};
    sqlite3_progress_handler(db, 1000, progress_callback, &deadline);

    sqlite3_stmt* raw = nullptr;
    const char* tail = nullptr;
    int rc = sqlite3_prepare_v2(db, sql.data(), static_cast<int>(sql.size()), &raw, &tail);
    std::unique_ptr<sqlite3_stmt, int (*)(sqlite3_stmt*)> stmt(raw, sqlite3_finalize);
    if (rc != SQLITE_OK) {
        if ((rc & 0xFF) == SQLITE_INTERRUPT) {
            return fail(ExecStatus::Timeout, "query timed out", "Timeout");
        }
        const std::string message = sqlite3_errmsg(db);
        return fail(classify_engine_error(message), message, exception_class_for(rc));
    }
    if (!stmt) return fail(ExecStatus::OtherError, "empty SQL statement", "ProgrammingError");
    if (tail && !only_trivia(std::string_view(tail, static_cast<size_t>(sql.data() + sql.size() - tail)))) {
        return fail(ExecStatus::OtherError, "You can only execute one statement at a time.", "Warning");
    }
    if (!sqlite3_stmt_readonly(stmt.get())) {
        return fail(ExecStatus::OtherError, "attempt to write a readonly database", "OperationalError");
    }

    const int ncols = sqlite3_column_count(stmt.get());
    while ((rc = sqlite3_step(stmt.get())) == SQLITE_ROW) {
        Row row;
        row.reserve(static_cast<size_t>(ncols));
        for (int i = 0; i < ncols; ++i) {
            switch (sqlite3_column_type(stmt.get(), i)) {
                case SQLITE_INTEGER:
                    row.emplace_back(static_cast<std::int64_t>(sqlite3_column_int64(stmt.get(), i)));
                    break;
                case SQLITE_FLOAT:
                    row.emplace_back(sqlite3_column_double(stmt.get(), i));
                    break;
                case SQLITE_TEXT: {
                    const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt.get(), i));
                    row.emplace_back(std::string(p, static_cast<size_t>(sqlite3_column_bytes(stmt.get(), i))));
                    break;
                }
                case SQLITE_BLOB: {
                    const auto* p = static_cast<const std::uint8_t*>(sqlite3_column_blob(stmt.get(), i));
                    const auto n = static_cast<size_t>(sqlite3_column_bytes(stmt.get(), i));
                    row.emplace_back(Blob{std::vector<std::uint8_t>(p, p + n)});
                    break;
                }
                default:
                    row.emplace_back(std::monostate{});
            }
        }
        out.rows.push_back(std::move(row));
    }
    if (rc != SQLITE_DONE) {
        if ((rc & 0xFF) == SQLITE_INTERRUPT) {
            return fail(ExecStatus::Timeout,
                        "query timed out after " + std::to_string(timeout.count()) + " ms", "Timeout");
        }
        const std::string message = sqlite3_errmsg(db);
        return fail(classify_engine_error(message), message, exception_class_for(rc));
    }
    out.status = out.rows.empty() ? ExecStatus::EmptyResult : ExecStatus::Ok;
    stamp();
    return out;
}

std::string canonical_value(const SqlValue& value) {
    struct Visitor {
        std::string operator()(std::monostate) const { return "n:"; }
        std::string operator()(std::int64_t v) const { return "i:" + std::to_string(v); }
        std::string operator()(double v) const {
            if (std::isnan(v)) return "f:nan";
            if (v == 0.0) return "i:0";
            if (std::isfinite(v) && std::trunc(v) == v && std::fabs(v) < 9.0e15) {
                return "i:" + std::to_string(static_cast<std::int64_t>(v));
            }
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.6e", v);
            const double quantized = std::strtod(buf, nullptr);
            if (std::trunc(quantized) == quantized && std::fabs(quantized) < 9.0e15) {
                return "i:" + std::to_string(static_cast<std::int64_t>(quantized));
            }
            return std::string("f:") + buf;
        }
        std::string operator()(const std::string& v) const { return "s:" + trim(v); }
        std::string operator()(const Blob& v) const {
            return "b:" + std::string(v.bytes.begin(), v.bytes.end());
        }
    };
    return std::visit(Visitor{}, value);
}

CanonicalRows normalize_rows(const std::vector<Row>& rows, const NormalizeOptions& options) {
    CanonicalRows out;
    out.ordered = options.order_sensitive;
    out.rows.reserve(rows.size());
    for (const auto& row : rows) {
        std::string key;
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) key.push_back('\x1f');
            key += canonical_value(row[i]);
        }
        out.rows.push_back(std::move(key));
    }
    if (options.distinct) {
        if (options.order_sensitive) {
            std::vector<std::string> seen;
            std::vector<std::string> unique;
            for (auto& r : out.rows) {
                if (std::find(seen.begin(), seen.end(), r) == seen.end()) {
                    seen.push_back(r);
                    unique.push_back(std::move(r));
                }
            }
            out.rows = std::move(unique);
        } else {
            std::sort(out.rows.begin(), out.rows.end());
            out.rows.erase(std::unique(out.rows.begin(), out.rows.end()), out.rows.end());
        }
    } else if (!options.order_sensitive) {
        std::sort(out.rows.begin(), out.rows.end());
    }
    return out;
}

bool has_top_level_order_by(std::string_view sql) {
    std::vector<SqlToken> tokens;
    try {
        tokens = tokenize_sql(sql);
    } catch (const UnsupportedSyntax&) {
        return false;
    }
    int depth = 0;
    for (size_t i = 0; i + 1 < tokens.size(); ++i) {
        const auto& t = tokens[i];
        if (t.kind == SqlToken::Kind::Punct && t.text == "(") ++depth;
        if (t.kind == SqlToken::Kind::Punct && t.text == ")") --depth;
        if (depth == 0 && t.is_keyword("order") && tokens[i + 1].is_keyword("by")) return true;
    }
    return false;
}

}  // namespace macsql
