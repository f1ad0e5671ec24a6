#include <doctest.h>

#include "fixtures.hpp"
#include "macsql/sql_blocks.hpp"
#include "macsql/sql_exec.hpp"

using namespace macsql;
using namespace macsql::testing;
using namespace std::chrono_literals;

TEST_SUITE("sql_exec") {
    TEST_CASE("statuses for ok, empty, schema, syntax and other failures") {
        const auto db = banking_db();
        auto ok = execute_sql(db, "SELECT gender FROM client WHERE client_id = 4");
        CHECK(ok.status == ExecStatus::Ok);
        REQUIRE(ok.rows.size() == 1);
        CHECK(std::get<std::string>(ok.rows[0][0]) == "F");

        CHECK(execute_sql(db, "SELECT * FROM client WHERE gender = 'X'").status == ExecStatus::EmptyResult);

        auto schema = execute_sql(db, "SELECT genderx FROM client");
        CHECK(schema.status == ExecStatus::SchemaError);
        CHECK(schema.error_message == "no such column: genderx");
        CHECK(schema.exception_class == "OperationalError");
        CHECK(execute_sql(db, "SELECT * FROM clients").status == ExecStatus::SchemaError);

        auto syntax = execute_sql(db, "SELEC gender FROM client");
        CHECK(syntax.status == ExecStatus::SyntaxError);
        CHECK(syntax.error_message.find("syntax error") != std::string::npos);

        CHECK(execute_sql(db, "SELECT abs('a', 'b')").status == ExecStatus::OtherError);
        CHECK(execute_sql(db, "   ").status == ExecStatus::OtherError);
    }

    TEST_CASE("connections are read-only and single-statement") {
        const auto db = banking_db();
        auto write = execute_sql(db, "DELETE FROM client");
        CHECK(write.status == ExecStatus::OtherError);
        CHECK(execute_sql(db, "SELECT COUNT(*) FROM client").rows[0][0] == SqlValue{std::int64_t{11}});
        CHECK(execute_sql(db, "SELECT 1; SELECT 2").status == ExecStatus::OtherError);
        CHECK(execute_sql(db, "SELECT 1; -- trailing comment").status == ExecStatus::Ok);
    }

    TEST_CASE("runaway queries time out") {
        const auto out = execute_sql(banking_db(),
                                     "WITH RECURSIVE r(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM r) "
                                     "SELECT COUNT(*) FROM r",
                                     100ms);
        CHECK(out.status == ExecStatus::Timeout);
        CHECK(out.elapsed < 5s);
    }

    TEST_CASE("missing database file is an execution failure") {
        TempDir dir;
        const auto out = execute_sql(dir / "nope.sqlite", "SELECT 1");
        CHECK(out.status == ExecStatus::OtherError);
    }

    TEST_CASE("value canonicalization") {
        CHECK(canonical_value(std::int64_t{3}) == canonical_value(3.0));
        CHECK(canonical_value(1.0) == canonical_value(1.0000001));
        CHECK(canonical_value(0.3333333) == canonical_value(1.0 / 3.0));
        CHECK(canonical_value(0.334) != canonical_value(1.0 / 3.0));
        CHECK(canonical_value(std::string(" x ")) == canonical_value(std::string("x")));
        CHECK(canonical_value(std::monostate{}) != canonical_value(std::string("")));
        CHECK(canonical_value(std::string("1")) != canonical_value(std::int64_t{1}));
    }

    TEST_CASE("row normalization: multiset by default, order and set semantics on request") {
        const std::vector<Row> a = {{std::int64_t{1}}, {std::int64_t{2}}, {std::int64_t{2}}};
        const std::vector<Row> b = {{std::int64_t{2}}, {std::int64_t{1}}, {std::int64_t{2}}};
        const std::vector<Row> c = {{std::int64_t{1}}, {std::int64_t{2}}};
        CHECK(normalize_rows(a) == normalize_rows(b));
        CHECK(normalize_rows(a) != normalize_rows(c));
        CHECK(normalize_rows(a, {.order_sensitive = true}) != normalize_rows(b, {.order_sensitive = true}));
        CHECK(normalize_rows(a, {.distinct = true}) == normalize_rows(c, {.distinct = true}));
    }

    TEST_CASE("top-level ORDER BY detection ignores subqueries, strings and comments") {
        CHECK(has_top_level_order_by("SELECT a FROM t ORDER BY a"));
        CHECK(has_top_level_order_by("select a from t order\nby a desc limit 1"));
        CHECK_FALSE(has_top_level_order_by("SELECT a FROM (SELECT a FROM t ORDER BY a)"));
        CHECK_FALSE(has_top_level_order_by("SELECT 'order by' FROM t"));
        CHECK_FALSE(has_top_level_order_by("SELECT a FROM t -- order by a"));
    }
}

TEST_SUITE("sql_blocks") {
    TEST_CASE("sql-tagged blocks win over untagged ones") {
        const std::string text = "```\nSELECT 1\n```\ntext\n```sql\nSELECT 2\n```\n```SQLite\n  SELECT 3  \n```";
        const auto blocks = find_sql_blocks(text);
        REQUIRE(blocks.size() == 2);
        CHECK(blocks[0].body == "SELECT 2");
        CHECK(blocks[1].body == "SELECT 3");
        CHECK(extract_final_sql(text) == "SELECT 3");
    }

    TEST_CASE("untagged query blocks and trailing unfenced queries") {
        CHECK(extract_final_sql("Answer:\n```\nselect a from t\n```\n") == "select a from t");
        CHECK(extract_final_sql("```\nnot sql\n```") == std::nullopt);
        CHECK(extract_final_sql("The fix is below.\n\nSELECT a\nFROM t\nWHERE b = 1\n") == "SELECT a\nFROM t\nWHERE b = 1");
        CHECK(extract_final_sql("no query here") == std::nullopt);
        CHECK(extract_final_sql("selection of words") == std::nullopt);
    }

    TEST_CASE("unterminated final block runs to the end") {
        const auto blocks = find_fenced_blocks("x\n```sql\nSELECT 1\nFROM t");
        REQUIRE(blocks.size() == 1);
        CHECK(blocks[0].language == "sql");
        CHECK(blocks[0].body == "SELECT 1\nFROM t");
    }

    TEST_CASE("json extraction prefers fenced json and skips non-objects") {
        CHECK(extract_json_object("noise {not json} ```json\n{\"a\": 1}\n```") == "{\"a\": 1}");
        CHECK(extract_json_object("text {\"a\": {\"b\": \"}\"}} tail") == "{\"a\": {\"b\": \"}\"}}");
        CHECK(extract_json_object("{broken") == std::nullopt);
        CHECK(extract_json_object("[1, 2]") == std::nullopt);
    }
}
