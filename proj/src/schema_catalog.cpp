#include "macsql/schema_catalog.hpp"

#include <algorithm>
#include <map>

#include "macsql/errors.hpp"
#include "macsql/sqlite_db.hpp"
#include "macsql/text_util.hpp"

namespace macsql {

const ColumnSchema* TableSchema::find_column(std::string_view column) const {
    for (const auto& c : columns) {
        if (iequals(c.name, column)) return &c;
    }
    return nullptr;
}

const TableSchema* DatabaseSchema::find_table(std::string_view table) const {
    for (const auto& t : tables) {
        if (iequals(t.name, table)) return &t;
    }
    return nullptr;
}

size_t DatabaseSchema::column_count() const {
    size_t n = 0;
    for (const auto& t : tables) n += t.columns.size();
    return n;
}

namespace {

// Newlines in benchmark descriptions become sentence breaks so each column stays on one line.
std::string flatten_description(std::string_view text) {
    std::string out;
    for (char c : trim(text)) {
        if (c == '\r') continue;
        if (c == '\n') {
            out += ". ";
        } else {
            out.push_back(c);
        }
    }
    return out;
}

long find_header(const std::vector<std::string>& header, std::string_view name, long fallback) {
    for (size_t i = 0; i < header.size(); ++i) {
        if (iequals(trim(header[i]), name)) return static_cast<long>(i);
    }
    return fallback;
}

std::string field_at(const std::vector<std::string>& row, long index) {
    if (index < 0 || static_cast<size_t>(index) >= row.size()) return {};
    return row[static_cast<size_t>(index)];
}

}  // namespace

std::vector<ColumnDescription> load_column_descriptions(const std::filesystem::path& dir) {
    std::vector<ColumnDescription> out;
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) return out;

    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && iequals(entry.path().extension().string(), ".csv")) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    for (const auto& file : files) {
        const auto rows = parse_csv(read_text_file(file));
        if (rows.empty()) continue;
        const auto& header = rows.front();
        const long original = find_header(header, "original_column_name", 0);
        const long friendly = find_header(header, "column_name", 1);
        const long description = find_header(header, "column_description", 2);
        const long values = find_header(header, "value_description", 4);
        for (size_t r = 1; r < rows.size(); ++r) {
            ColumnDescription d;
            d.table = file.stem().string();
            d.column = trim(field_at(rows[r], original));
            if (d.column.empty()) continue;
            d.friendly_name = flatten_description(field_at(rows[r], friendly));
            d.description = flatten_description(field_at(rows[r], description));
            d.value_description = flatten_description(field_at(rows[r], values));
            out.push_back(std::move(d));
        }
    }
    return out;
}

bool is_numeric_affine(std::string_view declared_type) {
    const std::string t = to_lower(declared_type);
    auto has = [&](std::string_view needle) { return t.find(needle) != std::string::npos; };
    if (has("int")) return true;
    if (has("char") || has("clob") || has("text") || has("blob") || t.empty()) return false;
    if (has("real") || has("floa") || has("doub")) return true;
    // NUMERIC affinity; calendar types carry readable literals and stay sampled.
    return !(has("date") || has("time"));
}

bool looks_like_url_or_email(std::string_view value) {
    if (value.find("://") != std::string_view::npos) return true;
    const auto at = value.find('@');
    return at != std::string_view::npos && value.find('.', at + 1) != std::string_view::npos;
}

namespace {

std::string truncate_literal(std::string literal) {
    if (literal.size() <= kMaxLiteralLength) return literal;
    const bool quoted = literal.size() >= 2 && literal.front() == '\'' && literal.back() == '\'';
    if (!quoted) return literal.substr(0, kMaxLiteralLength);
    std::string body = literal.substr(1, kMaxLiteralLength - 2);
    // Do not cut a UTF-8 sequence in half.
    while (!body.empty() && (static_cast<unsigned char>(body.back()) & 0xC0) == 0x80) body.pop_back();
    if (!body.empty() && (static_cast<unsigned char>(body.back()) & 0x80) != 0) body.pop_back();
    return "'" + body + "'";
}

std::vector<std::string> sample_values(const SqliteDb& conn, const TableSchema& table, const ColumnSchema& column,
                                       size_t k) {
    if (k == 0 || is_numeric_affine(column.declared_type)) return {};
    const std::string col = quote_identifier(column.name);
    const std::string tab = quote_identifier(table.name);

    Statement max_len(conn, "SELECT MAX(LENGTH(" + col + ")) FROM " + tab + " WHERE " + col + " IS NOT NULL");
    if (max_len.step()) {
        const auto v = max_len.column(0);
        if (const auto* n = std::get_if<std::int64_t>(&v); n && *n > static_cast<std::int64_t>(kMaxLiteralLength)) {
            return {};
        }
    }

    Statement top(conn, "SELECT " + col + ", COUNT(*) AS n FROM " + tab + " WHERE " + col +
                            " IS NOT NULL GROUP BY " + col + " ORDER BY n DESC, " + col + " ASC LIMIT " +
                            std::to_string(k));
    std::vector<SqlValue> values;
    while (top.step()) {
        auto v = top.column(0);
        if (std::holds_alternative<Blob>(v)) continue;
        values.push_back(std::move(v));
    }
    if (values.empty()) return {};

    size_t unconventional = 0;
    for (const auto& v : values) {
        if (const auto* s = std::get_if<std::string>(&v); s && looks_like_url_or_email(*s)) ++unconventional;
    }
    if (unconventional * 2 > values.size()) return {};

    std::vector<std::string> out;
    for (const auto& v : values) {
        auto literal = truncate_literal(render_literal(v));
        if (std::find(out.begin(), out.end(), literal) == out.end()) out.push_back(std::move(literal));
    }
    return out;
}

std::vector<std::string> primary_key_columns(const TableSchema& t) {
    std::vector<std::string> out;
    for (const auto& c : t.columns) {
        if (c.is_primary_key) out.push_back(c.name);
    }
    return out;
}

}  // namespace

DatabaseSchema introspect(const std::filesystem::path& db_path, const std::vector<ColumnDescription>* descriptions,
                          const IntrospectOptions& options) {
    const SqliteDb conn = SqliteDb::open_read_only(db_path);
    DatabaseSchema schema;
    schema.db_id = options.db_id.empty() ? db_path.stem().string() : options.db_id;
    schema.db_path = db_path;

    struct RawKey {
        std::string from_table, from_column, to_table, to_column;
    };
    std::vector<RawKey> raw_keys;

    try {
        Statement tables(conn,
                         "SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' "
                         "ORDER BY rowid");
        while (tables.step()) {
            TableSchema t;
            t.name = tables.column_text(0);
            schema.tables.push_back(std::move(t));
        }
        for (auto& t : schema.tables) {
            Statement info(conn, "PRAGMA table_info(" + quote_identifier(t.name) + ")");
            while (info.step()) {
                ColumnSchema c;
                c.name = info.column_text(1);
                c.declared_type = info.column_text(2);
                const auto pk = info.column(5);
                c.is_primary_key = std::holds_alternative<std::int64_t>(pk) && std::get<std::int64_t>(pk) > 0;
                t.columns.push_back(std::move(c));
            }
            Statement fks(conn, "PRAGMA foreign_key_list(" + quote_identifier(t.name) + ")");
            while (fks.step()) {
                raw_keys.push_back({t.name, fks.column_text(3), fks.column_text(2), fks.column_text(4)});
            }
        }
    } catch (const std::runtime_error& e) {
        throw UnreadableDatabase("cannot introspect " + db_path.string() + ": " + e.what());
    }

    for (const auto& raw : raw_keys) {
        const TableSchema* from = schema.find_table(raw.from_table);
        const TableSchema* to = schema.find_table(raw.to_table);
        const ColumnSchema* from_col = from ? from->find_column(raw.from_column) : nullptr;
        std::string to_column = raw.to_column;
        if (to && to_column.empty()) {
            // REFERENCES without a column list points at the target's primary key.
            const auto pks = primary_key_columns(*to);
            if (pks.size() == 1) to_column = pks.front();
        }
        const ColumnSchema* to_col = to ? to->find_column(to_column) : nullptr;
        if (!from_col || !to_col) {
            schema.warnings.push_back("dropped unresolvable foreign key " + raw.from_table + "." + raw.from_column +
                                      " -> " + raw.to_table + "." + raw.to_column);
            continue;
        }
        ForeignKey fk{from->name, from_col->name, to->name, to_col->name};
        if (std::find(schema.foreign_keys.begin(), schema.foreign_keys.end(), fk) == schema.foreign_keys.end()) {
            schema.foreign_keys.push_back(std::move(fk));
        }
    }

    if (descriptions) {
        for (const auto& d : *descriptions) {
            auto table = std::find_if(schema.tables.begin(), schema.tables.end(),
                                      [&](const TableSchema& t) { return iequals(t.name, d.table); });
            ColumnSchema* column = nullptr;
            if (table != schema.tables.end()) {
                for (auto& c : table->columns) {
                    if (iequals(c.name, d.column)) column = &c;
                }
            }
            if (!column) {
                schema.warnings.push_back("unmatched column description " + d.table + "." + d.column);
                continue;
            }
            column->description = !d.friendly_name.empty() ? d.friendly_name : d.description;
            column->value_description = d.value_description;
        }
    }

    if (options.sample_values) {
        try {
            const size_t k = std::min<size_t>(options.value_examples, 6);
            for (auto& t : schema.tables) {
                for (auto& c : t.columns) c.value_examples = sample_values(conn, t, c, k);
            }
        } catch (const std::runtime_error& e) {
            throw UnreadableDatabase("cannot sample values in " + db_path.string() + ": " + e.what());
        }
    }
    return schema;
}

std::vector<std::string> sample_column_values(const DatabaseSchema& db, std::string_view table,
                                              std::string_view column, size_t k) {
    const TableSchema* t = db.find_table(table);
    const ColumnSchema* c = t ? t->find_column(column) : nullptr;
    if (!c) throw UnknownColumn("unknown column " + std::string(table) + "." + std::string(column));
    const SqliteDb conn = SqliteDb::open_read_only(db.db_path);
    try {
        return sample_values(conn, *t, *c, k);
    } catch (const std::runtime_error& e) {
        throw UnreadableDatabase(std::string("cannot sample values: ") + e.what());
    }
}

const std::vector<std::string>* SchemaSelection::columns_of(std::string_view table) const {
    for (const auto& [name, cols] : tables) {
        if (iequals(name, table)) return &cols;
    }
    return nullptr;
}

bool SchemaSelection::contains(std::string_view table, std::string_view column) const {
    const auto* cols = columns_of(table);
    if (!cols) return false;
    return std::any_of(cols->begin(), cols->end(), [&](const std::string& c) { return iequals(c, column); });
}

SchemaSelection full_selection(const DatabaseSchema& db) {
    SchemaSelection sel;
    for (const auto& t : db.tables) {
        std::vector<std::string> cols;
        for (const auto& c : t.columns) cols.push_back(c.name);
        sel.tables.emplace_back(t.name, std::move(cols));
    }
    return sel;
}

std::vector<ForeignKey> surviving_foreign_keys(const DatabaseSchema& db, const SchemaSelection& selection) {
    std::vector<ForeignKey> out;
    for (const auto& fk : db.foreign_keys) {
        if (selection.contains(fk.from_table, fk.from_column) && selection.contains(fk.to_table, fk.to_column)) {
            out.push_back(fk);
        }
    }
    return out;
}

namespace {

std::string render_column(const ColumnSchema& c) {
    std::string line = "    (" + c.name + ", ";
    std::string desc = c.description.empty() ? c.name : c.description;
    line += desc;
    if (desc.empty() || desc.back() != '.') line += ".";
    if (!c.value_examples.empty()) {
        line += " Value examples: [";
        for (size_t i = 0; i < c.value_examples.size(); ++i) {
            if (i) line += ", ";
            line += c.value_examples[i];
        }
        line += "].";
    }
    if (!c.value_description.empty()) line += " And " + c.value_description;
    line += ")";
    return line;
}

}  // namespace

RenderedSchema render_schema(const DatabaseSchema& db, const SchemaSelection* selection) {
    RenderedSchema out;
    std::string& text = out.schema_text;
    for (const auto& t : db.tables) {
        const std::vector<std::string>* kept = nullptr;
        if (selection) {
            kept = selection->columns_of(t.name);
            if (!kept) continue;
        }
        if (!text.empty()) text += "\n";
        text += "# Table: " + t.name + "\n[\n";
        bool first = true;
        for (const auto& c : t.columns) {
            if (kept && !selection->contains(t.name, c.name)) continue;
            if (!first) text += ",\n";
            text += render_column(c);
            first = false;
        }
        text += first ? "]" : "\n]";
    }
    const auto keys = selection ? surviving_foreign_keys(db, *selection) : db.foreign_keys;
    for (size_t i = 0; i < keys.size(); ++i) {
        if (i) out.fk_text += "\n";
        const auto& fk = keys[i];
        out.fk_text += fk.from_table + ".`" + fk.from_column + "` = " + fk.to_table + ".`" + fk.to_column + "`";
    }
    return out;
}

std::string RenderedSchema::combined() const { return schema_text + "\n[Foreign keys]\n" + fk_text; }

std::string render_schema_description(const DatabaseSchema& db, const SchemaSelection* selection) {
    return render_schema(db, selection).combined();
}

size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

}  // namespace macsql
