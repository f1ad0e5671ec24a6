#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "macsql/schema_catalog.hpp"

namespace macsql::testing {

std::filesystem::path fixture_dir();
std::filesystem::path golden_dir();

std::string read_file(const std::filesystem::path& path);

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(std::string_view name) const { return path_ / std::string(name); }

private:
    std::filesystem::path path_;
};

/// Runs a SQL script against a new database file.
void create_database(const std::filesystem::path& db_path, std::string_view script);

/// Benchmark-style root holding banking_system and california_schools, built once per process.
const std::filesystem::path& fixture_db_root();
std::filesystem::path banking_db();
std::filesystem::path schools_db();

/// Random schema: 1..max_tables tables, 1..max_columns columns each, random primary keys, and
/// foreign keys that always point at an earlier table's primary key.
DatabaseSchema random_schema(std::mt19937& rng, size_t max_tables = 12, size_t max_columns = 20);

}  // namespace macsql::testing
