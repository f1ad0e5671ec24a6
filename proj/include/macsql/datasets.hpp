#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "macsql/schema_catalog.hpp"

namespace macsql {

/// One benchmark question.
struct Task {
    std::string task_id;
    std::string db_id;
    std::string question;
    std::string evidence;
    std::optional<std::string> gold_sql;
    std::optional<std::string> difficulty;  // simple / moderate / challenging (BIRD only)

    bool operator==(const Task&) const = default;
};

enum class BenchmarkKind { Bird, Spider };

BenchmarkKind benchmark_kind_from_string(std::string_view name);  // throws ConfigError
std::string_view to_string(BenchmarkKind kind);

struct Benchmark {
    BenchmarkKind kind = BenchmarkKind::Bird;
    std::vector<Task> tasks;
    std::filesystem::path db_root;
};

/// `<db_root>/<db_id>/<db_id>.sqlite`, falling back to the extension-less file. Empty when neither exists.
std::filesystem::path resolve_database_file(const std::filesystem::path& db_root, std::string_view db_id);

/// Loads an item file (JSON array). BIRD items: question_id, db_id, question, evidence, SQL,
/// difficulty. Spider items: db_id, question, query. task_id is question_id when present, else the
/// item index. Throws MalformedItem or MissingDatabase.
Benchmark load_benchmark(BenchmarkKind kind, const std::filesystem::path& items_path,
                         const std::filesystem::path& db_root);

/// db_id -> database file, with lazily introspected and cached schemas. Thread-safe.
class DatabaseRegistry {
public:
    DatabaseRegistry() = default;
    explicit DatabaseRegistry(std::filesystem::path db_root) : db_root_(std::move(db_root)) {}

    /// Registers an explicit file; descriptions are read from `<dir of file>/database_description`.
    void add(const std::string& db_id, const std::filesystem::path& db_path);

    bool contains(const std::string& db_id) const;
    /// Throws MissingDatabase.
    std::filesystem::path path_of(const std::string& db_id) const;
    /// Introspects on first use (with column descriptions when present).
    std::shared_ptr<const DatabaseSchema> schema(const std::string& db_id);

    IntrospectOptions options;

private:
    std::filesystem::path lookup(const std::string& db_id) const;

    std::filesystem::path db_root_;
    std::map<std::string, std::filesystem::path> explicit_;
    std::map<std::string, std::shared_ptr<const DatabaseSchema>> cache_;
    mutable std::mutex mutex_;
};

}  // namespace macsql
