#include "macsql/datasets.hpp"

#include <json.hpp>

#include "macsql/errors.hpp"
#include "macsql/text_util.hpp"

namespace macsql {

using json = nlohmann::json;

BenchmarkKind benchmark_kind_from_string(std::string_view name) {
    const std::string n = to_lower(trim(name));
    if (n == "bird") return BenchmarkKind::Bird;
    if (n == "spider") return BenchmarkKind::Spider;
    throw ConfigError("unknown benchmark '" + std::string(name) + "' (expected bird or spider)");
}

std::string_view to_string(BenchmarkKind kind) { return kind == BenchmarkKind::Bird ? "bird" : "spider"; }

std::filesystem::path resolve_database_file(const std::filesystem::path& db_root, std::string_view db_id) {
    const std::filesystem::path dir = db_root / std::string(db_id);
    std::error_code ec;
    for (const auto& candidate : {dir / (std::string(db_id) + ".sqlite"), dir / std::string(db_id)}) {
        if (std::filesystem::is_regular_file(candidate, ec)) return candidate;
    }
    return {};
}

namespace {

std::string required_string(const json& item, const char* key, size_t index) {
    const auto it = item.find(key);
    if (it == item.end() || !it->is_string()) {
        throw MalformedItem("item " + std::to_string(index) + ": missing string field '" + key + "'");
    }
    return it->get<std::string>();
}

std::string optional_string(const json& item, const char* key) {
    const auto it = item.find(key);
    return it != item.end() && it->is_string() ? it->get<std::string>() : std::string();
}

}  // namespace

Benchmark load_benchmark(BenchmarkKind kind, const std::filesystem::path& items_path,
                         const std::filesystem::path& db_root) {
    std::string text;
    try {
        text = read_text_file(items_path);
    } catch (const std::runtime_error& e) {
        throw MalformedItem(e.what());
    }
    const json items = json::parse(text, nullptr, false);
    if (items.is_discarded() || !items.is_array()) {
        throw MalformedItem(items_path.string() + ": expected a JSON array of items");
    }

    Benchmark bench;
    bench.kind = kind;
    bench.db_root = db_root;
    for (size_t i = 0; i < items.size(); ++i) {
        const json& item = items[i];
        if (!item.is_object()) throw MalformedItem("item " + std::to_string(i) + " is not an object");
        Task task;
        task.db_id = required_string(item, "db_id", i);
        task.question = required_string(item, "question", i);
        if (trim(task.question).empty()) throw MalformedItem("item " + std::to_string(i) + ": empty question");
        if (const auto qid = item.find("question_id"); qid != item.end() && (qid->is_number() || qid->is_string())) {
            task.task_id = qid->is_string() ? qid->get<std::string>() : qid->dump();
        } else {
            task.task_id = std::to_string(i);
        }
        if (kind == BenchmarkKind::Bird) {
            task.evidence = optional_string(item, "evidence");
            if (item.contains("SQL")) task.gold_sql = required_string(item, "SQL", i);
            const std::string difficulty = optional_string(item, "difficulty");
            if (!difficulty.empty()) task.difficulty = difficulty;
        } else {
            if (item.contains("query")) task.gold_sql = required_string(item, "query", i);
        }
        if (resolve_database_file(db_root, task.db_id).empty()) {
            throw MissingDatabase("item " + std::to_string(i) + ": no database file for '" + task.db_id + "' under " +
                                  db_root.string());
        }
        bench.tasks.push_back(std::move(task));
    }
    return bench;
}

void DatabaseRegistry::add(const std::string& db_id, const std::filesystem::path& db_path) {
    std::lock_guard lock(mutex_);
    explicit_[db_id] = db_path;
    cache_.erase(db_id);
}

std::filesystem::path DatabaseRegistry::lookup(const std::string& db_id) const {
    if (const auto it = explicit_.find(db_id); it != explicit_.end()) return it->second;
    if (!db_root_.empty()) return resolve_database_file(db_root_, db_id);
    return {};
}

bool DatabaseRegistry::contains(const std::string& db_id) const {
    std::lock_guard lock(mutex_);
    return !lookup(db_id).empty();
}

std::filesystem::path DatabaseRegistry::path_of(const std::string& db_id) const {
    std::lock_guard lock(mutex_);
    auto path = lookup(db_id);
    if (path.empty()) throw MissingDatabase("database '" + db_id + "' is not registered");
    return path;
}

std::shared_ptr<const DatabaseSchema> DatabaseRegistry::schema(const std::string& db_id) {
    const auto path = path_of(db_id);
    {
        std::lock_guard lock(mutex_);
        if (const auto it = cache_.find(db_id); it != cache_.end()) return it->second;
    }
    const auto descriptions = load_column_descriptions(path.parent_path() / "database_description");
    IntrospectOptions opts = options;
    opts.db_id = db_id;
    auto built = std::make_shared<const DatabaseSchema>(introspect(path, &descriptions, opts));
    std::lock_guard lock(mutex_);
    return cache_.emplace(db_id, std::move(built)).first->second;
}

}  // namespace macsql
