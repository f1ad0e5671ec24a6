#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace macsql {

struct DatabaseSchema;

struct SqlToken {
    enum class Kind { Word, QuotedIdent, String, Number, Param, Operator, Punct };
    Kind kind;
    std::string text;  // identifier/string contents are unquoted

    bool is_keyword(std::string_view keyword) const;
    bool is_punct(std::string_view p) const { return kind == Kind::Punct && text == p; }
    bool is_operator(std::string_view op) const { return kind == Kind::Operator && text == op; }
};

/// SQLite lexical analysis; comments are dropped. Throws UnsupportedSyntax on malformed input
/// (unterminated strings, stray characters).
std::vector<SqlToken> tokenize_sql(std::string_view sql);

/// Placeholder substituted for every literal value in canonical terms.
inline constexpr std::string_view kValuePlaceholder = "<value>";

struct SetOperation;

/// Canonical clause-by-clause view of one query: every clause is a set of normalized terms,
/// identifiers are case-folded, table aliases are resolved to table names, and literals are
/// replaced by kValuePlaceholder. ORDER BY keeps its key order.
struct ClauseSet {
    bool distinct = false;
    std::set<std::string> select;
    std::set<std::string> from;
    std::set<std::string> joins;  // ON predicates
    std::set<std::string> where;  // top-level conjuncts
    std::set<std::string> group_by;
    std::set<std::string> having;
    std::vector<std::string> order_by;  // "<expr> asc|desc"
    bool limit = false;
    std::vector<SetOperation> set_ops;  // UNION / INTERSECT / EXCEPT continuations

    bool operator==(const ClauseSet& other) const;

    /// Canonical SQL rendering; parse_to_clause_set(to_sql()) reproduces this ClauseSet.
    std::string to_sql() const;
};

struct SetOperation {
    std::string op;  // "union", "union all", "intersect", "except"
    ClauseSet query;

    bool operator==(const SetOperation& other) const { return op == other.op && query == other.query; }
};

/// Parses a SELECT statement into its ClauseSet. When `schema` is given, unqualified columns are
/// attributed to the unique table in scope that owns them. Throws UnsupportedSyntax outside the
/// supported grammar (CTEs, window functions, USING/NATURAL joins, non-SELECT statements).
ClauseSet parse_to_clause_set(std::string_view sql, const DatabaseSchema* schema = nullptr);

}  // namespace macsql
