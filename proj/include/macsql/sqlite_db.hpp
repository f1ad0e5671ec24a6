#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

struct sqlite3;
struct sqlite3_stmt;

namespace macsql {

struct Blob {
    std::vector<std::uint8_t> bytes;
    bool operator==(const Blob&) const = default;
};

/// One cell of a result set.
using SqlValue = std::variant<std::monostate, std::int64_t, double, std::string, Blob>;

inline bool is_null(const SqlValue& v) { return std::holds_alternative<std::monostate>(v); }

/// Owning handle over a read-only SQLite connection.
class SqliteDb {
public:
    /// Opens `path` read-only; throws UnreadableDatabase if missing or not a database.
    static SqliteDb open_read_only(const std::filesystem::path& path);

    sqlite3* get() const { return db_.get(); }
    const std::filesystem::path& path() const { return path_; }

private:
    struct Closer {
        void operator()(sqlite3* db) const;
    };
    SqliteDb(sqlite3* db, std::filesystem::path path) : db_(db), path_(std::move(path)) {}

    std::unique_ptr<sqlite3, Closer> db_;
    std::filesystem::path path_;
};

/// Prepared statement. Construction throws std::runtime_error with the engine message on failure.
class Statement {
public:
    Statement(const SqliteDb& db, std::string_view sql);

    /// Returns true when a row is available.
    bool step();
    int column_count() const;
    SqlValue column(int index) const;
    std::string column_text(int index) const;
    void bind_text(int index, std::string_view text);

    sqlite3_stmt* get() const { return stmt_.get(); }

private:
    struct Finalizer {
        void operator()(sqlite3_stmt* stmt) const;
    };
    std::unique_ptr<sqlite3_stmt, Finalizer> stmt_;
    sqlite3* db_;
};

/// Literal form used in prompts and text tables: None, 42, 4.5, 'text', X'00ff'.
std::string render_literal(const SqlValue& value);

/// Double-quotes an identifier for safe interpolation into SQL.
std::string quote_identifier(std::string_view name);

}  // namespace macsql
