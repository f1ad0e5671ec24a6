#include "fixtures.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace macsql::testing {

namespace fs = std::filesystem;

fs::path fixture_dir() { return MACSQL_FIXTURE_DIR; }
fs::path golden_dir() { return MACSQL_GOLDEN_DIR; }

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

TempDir::TempDir() {
    std::string pattern = (fs::temp_directory_path() / "macsql-test-XXXXXX").string();
    if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

void create_database(const fs::path& db_path, std::string_view script) {
    fs::create_directories(db_path.parent_path());
    sqlite3* db = nullptr;
    if (sqlite3_open(db_path.c_str(), &db) != SQLITE_OK) {
        sqlite3_close(db);
        throw std::runtime_error("cannot create " + db_path.string());
    }
    char* error = nullptr;
    const int rc = sqlite3_exec(db, std::string(script).c_str(), nullptr, nullptr, &error);
    const std::string message = error ? error : "";
    sqlite3_free(error);
    sqlite3_close(db);
    if (rc != SQLITE_OK) throw std::runtime_error("fixture script failed: " + message);
}

namespace {

void install(const fs::path& root, const std::string& db_id) {
    const fs::path source = fixture_dir() / db_id;
    create_database(root / db_id / (db_id + ".sqlite"), read_file(source / (db_id + ".sql")));
    fs::copy(source / "database_description", root / db_id / "database_description",
             fs::copy_options::recursive);
}

struct SharedRoot {
    TempDir dir;
    SharedRoot() {
        install(dir.path(), "banking_system");
        install(dir.path(), "california_schools");
    }
};

}  // namespace

const fs::path& fixture_db_root() {
    static SharedRoot root;
    return root.dir.path();
}

fs::path banking_db() { return fixture_db_root() / "banking_system" / "banking_system.sqlite"; }
fs::path schools_db() { return fixture_db_root() / "california_schools" / "california_schools.sqlite"; }

DatabaseSchema random_schema(std::mt19937& rng, size_t max_tables, size_t max_columns) {
    auto pick = [&](size_t lo, size_t hi) { return std::uniform_int_distribution<size_t>(lo, hi)(rng); };
    DatabaseSchema db;
    db.db_id = "random";
    const size_t tables = pick(1, max_tables);
    for (size_t t = 0; t < tables; ++t) {
        TableSchema table;
        table.name = "t" + std::to_string(t);
        const size_t columns = pick(1, max_columns);
        const size_t pk = pick(0, columns);  // == columns: no primary key
        for (size_t c = 0; c < columns; ++c) {
            ColumnSchema col;
            col.name = "c" + std::to_string(c);
            col.declared_type = pick(0, 1) ? "TEXT" : "INTEGER";
            col.is_primary_key = c == pk;
            table.columns.push_back(std::move(col));
        }
        db.tables.push_back(std::move(table));
    }
    for (size_t t = 1; t < tables; ++t) {
        const size_t keys = pick(0, 2);
        for (size_t k = 0; k < keys; ++k) {
            const auto& target = db.tables[pick(0, t - 1)];
            const auto& from = db.tables[t];
            ForeignKey fk{from.name, from.columns[pick(0, from.columns.size() - 1)].name, target.name,
                          target.columns[pick(0, target.columns.size() - 1)].name};
            if (std::find(db.foreign_keys.begin(), db.foreign_keys.end(), fk) == db.foreign_keys.end()) {
                db.foreign_keys.push_back(fk);
            }
        }
    }
    return db;
}

}  // namespace macsql::testing
