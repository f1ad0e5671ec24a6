#include "macsql/sqlite_db.hpp"

#include <sqlite3.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <system_error>

#include "macsql/errors.hpp"

namespace macsql {

void SqliteDb::Closer::operator()(sqlite3* db) const { sqlite3_close_v2(db); }

SqliteDb SqliteDb::open_read_only(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw UnreadableDatabase("database file not found: " + path.string());
    }
    sqlite3* raw = nullptr;
    const int rc = sqlite3_open_v2(path.c_str(), &raw, SQLITE_OPEN_READONLY | SQLITE_OPEN_NOMUTEX, nullptr);
    SqliteDb db(raw, path);
    if (rc != SQLITE_OK) {
        const std::string msg = raw ? sqlite3_errmsg(raw) : "out of memory";
        throw UnreadableDatabase("cannot open database " + path.string() + ": " + msg);
    }
    sqlite3_exec(raw, "PRAGMA query_only = 1", nullptr, nullptr, nullptr);
    // Touch the header so corrupt files fail here rather than at first query.
    char* err = nullptr;
    if (sqlite3_exec(raw, "SELECT count(*) FROM sqlite_master", nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "unknown error";
        sqlite3_free(err);
        throw UnreadableDatabase("cannot read database " + path.string() + ": " + msg);
    }
    return db;
}

void Statement::Finalizer::operator()(sqlite3_stmt* stmt) const { sqlite3_finalize(stmt); }

Statement::Statement(const SqliteDb& db, std::string_view sql) : db_(db.get()) {
    sqlite3_stmt* raw = nullptr;
    const int rc = sqlite3_prepare_v2(db_, sql.data(), static_cast<int>(sql.size()), &raw, nullptr);
    stmt_.reset(raw);
    if (rc != SQLITE_OK) throw std::runtime_error(sqlite3_errmsg(db_));
}

bool Statement::step() {
    const int rc = sqlite3_step(stmt_.get());
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw std::runtime_error(sqlite3_errmsg(db_));
}

int Statement::column_count() const { return sqlite3_column_count(stmt_.get()); }

SqlValue Statement::column(int index) const {
    sqlite3_stmt* s = stmt_.get();
    switch (sqlite3_column_type(s, index)) {
        case SQLITE_INTEGER:
            return static_cast<std::int64_t>(sqlite3_column_int64(s, index));
        case SQLITE_FLOAT:
            return sqlite3_column_double(s, index);
        case SQLITE_TEXT: {
            const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(s, index));
            return std::string(p, static_cast<size_t>(sqlite3_column_bytes(s, index)));
        }
        case SQLITE_BLOB: {
            const auto* p = static_cast<const std::uint8_t*>(sqlite3_column_blob(s, index));
            const auto n = static_cast<size_t>(sqlite3_column_bytes(s, index));
            return Blob{std::vector<std::uint8_t>(p, p + n)};
        }
        default:
            return std::monostate{};
    }
}

std::string Statement::column_text(int index) const {
    const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_.get(), index));
    return p ? std::string(p) : std::string();
}

void Statement::bind_text(int index, std::string_view text) {
    sqlite3_bind_text(stmt_.get(), index, text.data(), static_cast<int>(text.size()), SQLITE_TRANSIENT);
}

std::string render_literal(const SqlValue& value) {
    struct Visitor {
        std::string operator()(std::monostate) const { return "None"; }
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
        std::string operator()(double v) const {
            if (std::isnan(v)) return "nan";
            if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
            char buf[64];
            for (int precision = 1; precision <= 17; ++precision) {
                std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
                if (std::strtod(buf, nullptr) == v) break;
            }
            std::string out = buf;
            if (out.find_first_of(".eEn") == std::string::npos) out += ".0";
            return out;
        }
        std::string operator()(const std::string& v) const { return "'" + v + "'"; }
        std::string operator()(const Blob& v) const {
            static constexpr char kHex[] = "0123456789abcdef";
            std::string out = "X'";
            for (auto b : v.bytes) {
                out.push_back(kHex[b >> 4]);
                out.push_back(kHex[b & 0xF]);
            }
            return out + "'";
        }
    };
    return std::visit(Visitor{}, value);
}

std::string quote_identifier(std::string_view name) {
    std::string out = "\"";
    for (char c : name) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace macsql
