#include "macsql/sql_parse.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <memory>
#include <optional>
#include <utility>

#include "macsql/errors.hpp"
#include "macsql/schema_catalog.hpp"
#include "macsql/text_util.hpp"

namespace macsql {

namespace {

const std::set<std::string, std::less<>>& reserved_words() {
    static const std::set<std::string, std::less<>> words{
        "all",     "and",     "as",     "asc",    "between", "by",        "case",    "cast",    "collate",
        "cross",   "desc",    "distinct", "else", "end",     "escape",    "except",  "exists",  "filter",
        "from",    "full",    "glob",   "group",  "having",  "in",        "indexed", "inner",   "intersect",
        "is",      "isnull",  "join",   "left",   "like",    "limit",     "match",   "natural", "not",
        "notnull", "null",    "offset", "on",     "or",      "order",     "outer",   "over",    "regexp",
        "right",   "select",  "then",   "union",  "using",   "when",      "where",   "with",
    };
    return words;
}

bool is_reserved(std::string_view word) { return reserved_words().count(to_lower(word)) > 0; }

bool is_ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool is_ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c == '$' || c >= 0x80; }

}  // namespace

bool SqlToken::is_keyword(std::string_view keyword) const { return kind == Kind::Word && iequals(text, keyword); }

std::vector<SqlToken> tokenize_sql(std::string_view sql) {
    std::vector<SqlToken> out;
    size_t i = 0;
    const size_t n = sql.size();
    auto quoted = [&](char close, SqlToken::Kind kind) {
        std::string text;
        ++i;
        while (true) {
            if (i >= n) throw UnsupportedSyntax("unterminated quoted token");
            if (sql[i] == close) {
                if (close != ']' && i + 1 < n && sql[i + 1] == close) {
                    text.push_back(close);
                    i += 2;
                    continue;
                }
                ++i;
                break;
            }
            text.push_back(sql[i++]);
        }
        out.push_back({kind, std::move(text)});
    };

    while (i < n) {
        const auto c = static_cast<unsigned char>(sql[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (sql.substr(i, 2) == "--") {
            while (i < n && sql[i] != '\n') ++i;
        } else if (sql.substr(i, 2) == "/*") {
            const auto end = sql.find("*/", i + 2);
            i = end == std::string_view::npos ? n : end + 2;
        } else if (c == '\'') {
            quoted('\'', SqlToken::Kind::String);
        } else if (c == '"') {
            quoted('"', SqlToken::Kind::QuotedIdent);
        } else if (c == '`') {
            quoted('`', SqlToken::Kind::QuotedIdent);
        } else if (c == '[') {
            quoted(']', SqlToken::Kind::QuotedIdent);
        } else if (std::isdigit(c) || (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
            const size_t start = i;
            if (sql.substr(i, 2) == "0x" || sql.substr(i, 2) == "0X") {
                i += 2;
                while (i < n && std::isxdigit(static_cast<unsigned char>(sql[i]))) ++i;
            } else {
                while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
                if (i < n && sql[i] == '.') {
                    ++i;
                    while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
                }
                if (i < n && (sql[i] == 'e' || sql[i] == 'E')) {
                    size_t j = i + 1;
                    if (j < n && (sql[j] == '+' || sql[j] == '-')) ++j;
                    if (j < n && std::isdigit(static_cast<unsigned char>(sql[j]))) {
                        i = j;
                        while (i < n && std::isdigit(static_cast<unsigned char>(sql[i]))) ++i;
                    }
                }
            }
            out.push_back({SqlToken::Kind::Number, std::string(sql.substr(start, i - start))});
        } else if (is_ident_start(c)) {
            const size_t start = i;
            while (i < n && is_ident_char(static_cast<unsigned char>(sql[i]))) ++i;
            out.push_back({SqlToken::Kind::Word, std::string(sql.substr(start, i - start))});
        } else if (sql.substr(i, kValuePlaceholder.size()) == kValuePlaceholder) {
            out.push_back({SqlToken::Kind::Param, std::string(kValuePlaceholder)});
            i += kValuePlaceholder.size();
        } else if (c == '?' || c == ':' || c == '@' || c == '$') {
            const size_t start = i++;
            while (i < n && is_ident_char(static_cast<unsigned char>(sql[i]))) ++i;
            out.push_back({SqlToken::Kind::Param, std::string(sql.substr(start, i - start))});
        } else if (c == '(' || c == ')' || c == ',' || c == '.' || c == ';') {
            out.push_back({SqlToken::Kind::Punct, std::string(1, static_cast<char>(c))});
            ++i;
        } else {
            static constexpr std::string_view kTwo[] = {"||", "<=", ">=", "<>", "!=", "==", "<<", ">>"};
            bool matched = false;
            for (auto op : kTwo) {
                if (sql.substr(i, 2) == op) {
                    out.push_back({SqlToken::Kind::Operator, std::string(op)});
                    i += 2;
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
            if (std::string_view("=<>+-*/%&|~").find(static_cast<char>(c)) != std::string_view::npos) {
                out.push_back({SqlToken::Kind::Operator, std::string(1, static_cast<char>(c))});
                ++i;
                continue;
            }
            throw UnsupportedSyntax(std::string("unexpected character '") + static_cast<char>(c) + "'");
        }
    }
    return out;
}

bool ClauseSet::operator==(const ClauseSet& other) const {
    return distinct == other.distinct && select == other.select && from == other.from && joins == other.joins &&
           where == other.where && group_by == other.group_by && having == other.having &&
           order_by == other.order_by && limit == other.limit && set_ops == other.set_ops;
}

namespace {

std::string join(const std::set<std::string>& items, std::string_view sep) {
    std::string out;
    for (const auto& item : items) {
        if (!out.empty()) out += sep;
        out += item;
    }
    return out;
}

std::string to_upper(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

std::string ClauseSet::to_sql() const {
    std::string sql = distinct ? "SELECT DISTINCT " : "SELECT ";
    sql += join(select, ", ");
    if (!from.empty()) {
        sql += " FROM ";
        if (joins.empty()) {
            sql += join(from, ", ");
        } else {
            bool first = true;
            for (const auto& table : from) {
                if (!first) sql += " JOIN ";
                sql += table;
                first = false;
            }
            // A self join collapses to one table name after alias resolution.
            if (from.size() == 1) sql += " JOIN " + *from.begin();
            sql += " ON " + join(joins, " AND ");
        }
    }
    if (!where.empty()) sql += " WHERE " + join(where, " AND ");
    if (!group_by.empty()) sql += " GROUP BY " + join(group_by, ", ");
    if (!having.empty()) sql += " HAVING " + join(having, " AND ");
    for (const auto& op : set_ops) sql += " " + to_upper(op.op) + " " + op.query.to_sql();
    if (!order_by.empty()) {
        sql += " ORDER BY ";
        for (size_t i = 0; i < order_by.size(); ++i) {
            if (i) sql += ", ";
            sql += order_by[i];
        }
    }
    if (limit) sql += " LIMIT " + std::string(kValuePlaceholder);
    return sql;
}

namespace {

struct Query;

struct Node {
    enum class Kind {
        Column, Value, Null, Star, Unary, Binary, Logical, Function, Cast, Case,
        Subquery, Exists, InList, InQuery, Between, IsNull, Collate
    };
    Kind kind = Kind::Value;
    std::string op;         // operator, function name, cast type, collation
    std::string qualifier;  // Column / Star
    std::string name;       // Column
    bool negated = false;
    bool distinct = false;
    bool has_base = false;  // CASE <operand> WHEN ...
    bool has_else = false;
    std::vector<Node> children;
    std::shared_ptr<Query> query;
};

struct TableRef {
    std::string name;
    std::shared_ptr<Query> derived;
    std::string alias;
};

struct SelectCore {
    bool distinct = false;
    std::vector<std::pair<Node, std::string>> items;
    std::vector<TableRef> from;
    std::vector<Node> join_conditions;
    std::optional<Node> where;
    std::vector<Node> group_by;
    std::optional<Node> having;
};

struct Query {
    SelectCore first;
    std::vector<std::pair<std::string, SelectCore>> rest;
    std::vector<std::pair<Node, bool>> order_by;  // (key, descending)
    bool limit = false;
};

Node make(Node::Kind kind, std::string op = {}) {
    Node n;
    n.kind = kind;
    n.op = std::move(op);
    return n;
}

Node binary(std::string op, Node lhs, Node rhs) {
    Node n = make(Node::Kind::Binary, std::move(op));
    n.children.push_back(std::move(lhs));
    n.children.push_back(std::move(rhs));
    return n;
}

class Parser {
public:
    explicit Parser(std::vector<SqlToken> tokens) : toks_(std::move(tokens)) {}

    Query parse_statement() {
        if (at_end()) fail("empty statement");
        Query q = parse_query();
        while (accept_punct(";")) {
        }
        if (!at_end()) fail("unexpected token '" + cur().text + "'");
        return q;
    }

private:
    std::vector<SqlToken> toks_;
    size_t pos_ = 0;

    bool at_end() const { return pos_ >= toks_.size(); }
    const SqlToken& cur() const {
        static const SqlToken kEnd{SqlToken::Kind::Punct, "<end>"};
        return at_end() ? kEnd : toks_[pos_];
    }
    const SqlToken& ahead(size_t k) const {
        static const SqlToken kEnd{SqlToken::Kind::Punct, "<end>"};
        return pos_ + k < toks_.size() ? toks_[pos_ + k] : kEnd;
    }
    [[noreturn]] void fail(const std::string& message) const { throw UnsupportedSyntax(message); }

    bool peek_kw(std::string_view kw) const { return cur().is_keyword(kw); }
    bool accept_kw(std::string_view kw) {
        if (!peek_kw(kw)) return false;
        ++pos_;
        return true;
    }
    void expect_kw(std::string_view kw) {
        if (!accept_kw(kw)) fail("expected " + to_upper(std::string(kw)) + " near '" + cur().text + "'");
    }
    bool accept_punct(std::string_view p) {
        if (!cur().is_punct(p)) return false;
        ++pos_;
        return true;
    }
    void expect_punct(std::string_view p) {
        if (!accept_punct(p)) fail("expected '" + std::string(p) + "' near '" + cur().text + "'");
    }
    bool accept_operator(std::string_view op) {
        if (!cur().is_operator(op)) return false;
        ++pos_;
        return true;
    }

    bool alias_candidate() const {
        const auto& t = cur();
        return t.kind == SqlToken::Kind::QuotedIdent || (t.kind == SqlToken::Kind::Word && !is_reserved(t.text));
    }

    std::string parse_identifier() {
        const auto& t = cur();
        if (t.kind == SqlToken::Kind::QuotedIdent || (t.kind == SqlToken::Kind::Word && !is_reserved(t.text))) {
            ++pos_;
            return t.text;
        }
        fail("expected identifier near '" + t.text + "'");
    }

    Query parse_query() {
        if (peek_kw("with")) fail("common table expressions are not supported");
        Query q;
        q.first = parse_core();
        while (true) {
            std::string op;
            if (accept_kw("union")) {
                op = accept_kw("all") ? "union all" : "union";
            } else if (accept_kw("intersect")) {
                op = "intersect";
            } else if (accept_kw("except")) {
                op = "except";
            } else {
                break;
            }
            q.rest.emplace_back(op, parse_core());
        }
        if (accept_kw("order")) {
            expect_kw("by");
            do {
                Node key = parse_expr();
                bool desc = false;
                if (accept_kw("desc")) {
                    desc = true;
                } else {
                    accept_kw("asc");
                }
                if (peek_kw("nulls")) fail("NULLS FIRST/LAST is not supported");
                q.order_by.emplace_back(std::move(key), desc);
            } while (accept_punct(","));
        }
        if (accept_kw("limit")) {
            parse_expr();
            q.limit = true;
            if (accept_kw("offset") || accept_punct(",")) parse_expr();
        }
        return q;
    }

    SelectCore parse_core() {
        if (peek_kw("values")) fail("VALUES clauses are not supported");
        expect_kw("select");
        SelectCore core;
        core.distinct = accept_kw("distinct");
        if (!core.distinct) accept_kw("all");
        do {
            Node item;
            if (accept_operator("*")) {
                item = make(Node::Kind::Star);
            } else {
                item = parse_expr();
            }
            std::string alias;
            if (accept_kw("as")) {
                if (cur().kind == SqlToken::Kind::String) {
                    alias = cur().text;
                    ++pos_;
                } else {
                    alias = parse_identifier();
                }
            } else if (alias_candidate()) {
                alias = parse_identifier();
            }
            core.items.emplace_back(std::move(item), std::move(alias));
        } while (accept_punct(","));

        if (accept_kw("from")) parse_from(core);
        if (accept_kw("where")) core.where = parse_expr();
        if (accept_kw("group")) {
            expect_kw("by");
            do {
                core.group_by.push_back(parse_expr());
            } while (accept_punct(","));
        }
        if (accept_kw("having")) core.having = parse_expr();
        if (peek_kw("window")) fail("window clauses are not supported");
        return core;
    }

    void parse_from(SelectCore& core) {
        core.from.push_back(parse_table_ref());
        while (true) {
            if (accept_punct(",")) {
                core.from.push_back(parse_table_ref());
                continue;
            }
            if (peek_kw("natural")) fail("NATURAL joins are not supported");
            bool join = false;
            if (accept_kw("inner") || accept_kw("cross")) {
                expect_kw("join");
                join = true;
            } else if (accept_kw("left") || accept_kw("right") || accept_kw("full")) {
                accept_kw("outer");
                expect_kw("join");
                join = true;
            } else if (accept_kw("join")) {
                join = true;
            }
            if (!join) break;
            core.from.push_back(parse_table_ref());
            if (accept_kw("on")) {
                core.join_conditions.push_back(parse_expr());
            } else if (peek_kw("using")) {
                fail("JOIN ... USING is not supported");
            }
        }
    }

    TableRef parse_table_ref() {
        TableRef ref;
        if (accept_punct("(")) {
            if (!peek_kw("select")) fail("parenthesized joins are not supported");
            ref.derived = std::make_shared<Query>(parse_query());
            expect_punct(")");
        } else {
            ref.name = parse_identifier();
            if (accept_punct(".")) ref.name = parse_identifier();
            if (cur().is_punct("(")) fail("table-valued functions are not supported");
        }
        if (accept_kw("as")) {
            ref.alias = parse_identifier();
        } else if (alias_candidate()) {
            ref.alias = parse_identifier();
        }
        if (peek_kw("indexed") || (peek_kw("not") && ahead(1).is_keyword("indexed"))) {
            fail("INDEXED BY is not supported");
        }
        return ref;
    }

    Node parse_expr() { return parse_or(); }

    Node parse_or() {
        Node lhs = parse_and();
        while (accept_kw("or")) {
            Node n = make(Node::Kind::Logical, "or");
            n.children.push_back(std::move(lhs));
            n.children.push_back(parse_and());
            lhs = std::move(n);
        }
        return lhs;
    }

    Node parse_and() {
        Node lhs = parse_not();
        while (accept_kw("and")) {
            Node n = make(Node::Kind::Logical, "and");
            n.children.push_back(std::move(lhs));
            n.children.push_back(parse_not());
            lhs = std::move(n);
        }
        return lhs;
    }

    Node parse_not() {
        if (accept_kw("not")) {
            Node n = make(Node::Kind::Unary, "not");
            n.children.push_back(parse_not());
            return n;
        }
        return parse_equality();
    }

    Node parse_equality() {
        Node lhs = parse_relational();
        while (true) {
            const auto& t = cur();
            if (t.is_operator("=") || t.is_operator("==") || t.is_operator("!=") || t.is_operator("<>")) {
                const std::string op = (t.text == "=" || t.text == "==") ? "=" : "!=";
                ++pos_;
                lhs = binary(op, std::move(lhs), parse_relational());
                continue;
            }
            if (accept_kw("is")) {
                const bool neg = accept_kw("not");
                if (accept_kw("null")) {
                    Node n = make(Node::Kind::IsNull);
                    n.negated = neg;
                    n.children.push_back(std::move(lhs));
                    lhs = std::move(n);
                } else {
                    if (peek_kw("distinct")) fail("IS DISTINCT FROM is not supported");
                    lhs = binary(neg ? "is not" : "is", std::move(lhs), parse_relational());
                }
                continue;
            }
            if (accept_kw("isnull") || accept_kw("notnull")) {
                Node n = make(Node::Kind::IsNull);
                n.negated = toks_[pos_ - 1].is_keyword("notnull");
                n.children.push_back(std::move(lhs));
                lhs = std::move(n);
                continue;
            }
            const size_t save = pos_;
            const bool neg = accept_kw("not");
            if (accept_kw("in")) {
                expect_punct("(");
                if (peek_kw("select")) {
                    Node n = make(Node::Kind::InQuery);
                    n.negated = neg;
                    n.children.push_back(std::move(lhs));
                    n.query = std::make_shared<Query>(parse_query());
                    expect_punct(")");
                    lhs = std::move(n);
                } else {
                    Node n = make(Node::Kind::InList);
                    n.negated = neg;
                    n.children.push_back(std::move(lhs));
                    if (!cur().is_punct(")")) {
                        do {
                            n.children.push_back(parse_expr());
                        } while (accept_punct(","));
                    }
                    expect_punct(")");
                    lhs = std::move(n);
                }
                continue;
            }
            bool matched_like = false;
            for (std::string_view op : {"like", "glob", "regexp", "match"}) {
                if (accept_kw(op)) {
                    Node n = binary(neg ? "not " + std::string(op) : std::string(op), std::move(lhs), parse_relational());
                    if (accept_kw("escape")) n.children.push_back(parse_relational());
                    lhs = std::move(n);
                    matched_like = true;
                    break;
                }
            }
            if (matched_like) continue;
            if (accept_kw("between")) {
                Node n = make(Node::Kind::Between);
                n.negated = neg;
                n.children.push_back(std::move(lhs));
                n.children.push_back(parse_relational());
                expect_kw("and");
                n.children.push_back(parse_relational());
                lhs = std::move(n);
                continue;
            }
            pos_ = save;
            break;
        }
        return lhs;
    }

    Node parse_relational() {
        Node lhs = parse_additive();
        while (true) {
            const auto& t = cur();
            if (t.is_operator("<") || t.is_operator("<=") || t.is_operator(">") || t.is_operator(">=")) {
                const std::string op = t.text;
                ++pos_;
                lhs = binary(op, std::move(lhs), parse_additive());
            } else {
                break;
            }
        }
        return lhs;
    }

    Node parse_additive() {
        Node lhs = parse_multiplicative();
        while (cur().is_operator("+") || cur().is_operator("-")) {
            const std::string op = cur().text;
            ++pos_;
            lhs = binary(op, std::move(lhs), parse_multiplicative());
        }
        return lhs;
    }

    Node parse_multiplicative() {
        Node lhs = parse_concat();
        while (cur().is_operator("*") || cur().is_operator("/") || cur().is_operator("%")) {
            const std::string op = cur().text;
            ++pos_;
            lhs = binary(op, std::move(lhs), parse_concat());
        }
        return lhs;
    }

    Node parse_concat() {
        Node lhs = parse_unary();
        while (cur().is_operator("||")) {
            ++pos_;
            lhs = binary("||", std::move(lhs), parse_unary());
        }
        return lhs;
    }

    Node parse_unary() {
        for (std::string_view op : {"-", "+", "~"}) {
            if (accept_operator(op)) {
                Node operand = parse_unary();
                if (operand.kind == Node::Kind::Value && op != "~") return operand;
                Node n = make(Node::Kind::Unary, std::string(op));
                n.children.push_back(std::move(operand));
                return n;
            }
        }
        Node base = parse_primary();
        while (accept_kw("collate")) {
            Node n = make(Node::Kind::Collate, to_lower(parse_identifier()));
            n.children.push_back(std::move(base));
            base = std::move(n);
        }
        return base;
    }

    Node parse_primary() {
        const SqlToken t = cur();
        switch (t.kind) {
            case SqlToken::Kind::Number:
            case SqlToken::Kind::String:
            case SqlToken::Kind::Param:
                ++pos_;
                return make(Node::Kind::Value);
            case SqlToken::Kind::Punct:
                if (accept_punct("(")) {
                    if (peek_kw("select")) {
                        Node n = make(Node::Kind::Subquery);
                        n.query = std::make_shared<Query>(parse_query());
                        expect_punct(")");
                        return n;
                    }
                    Node inner = parse_expr();
                    if (cur().is_punct(",")) fail("row values are not supported");
                    expect_punct(")");
                    return inner;
                }
                fail("unexpected '" + t.text + "'");
            case SqlToken::Kind::Operator:
                fail("unexpected operator '" + t.text + "'");
            case SqlToken::Kind::Word:
            case SqlToken::Kind::QuotedIdent:
                break;
        }

        if (t.kind == SqlToken::Kind::Word) {
            if (accept_kw("null")) return make(Node::Kind::Null);
            if (t.is_keyword("true") || t.is_keyword("false")) {
                ++pos_;
                return make(Node::Kind::Value);
            }
            if (accept_kw("exists")) {
                expect_punct("(");
                Node n = make(Node::Kind::Exists);
                n.query = std::make_shared<Query>(parse_query());
                expect_punct(")");
                return n;
            }
            if (accept_kw("case")) return parse_case();
            if (accept_kw("cast")) {
                expect_punct("(");
                Node inner = parse_expr();
                expect_kw("as");
                std::string type;
                while (!cur().is_punct(")") && !at_end()) {
                    if (accept_punct("(")) {
                        type += "(";
                        while (!cur().is_punct(")") && !at_end()) {
                            type += cur().text;
                            ++pos_;
                        }
                        expect_punct(")");
                        type += ")";
                        continue;
                    }
                    if (!type.empty()) type += " ";
                    type += to_lower(cur().text);
                    ++pos_;
                }
                expect_punct(")");
                Node n = make(Node::Kind::Cast, type);
                n.children.push_back(std::move(inner));
                return n;
            }
            if (ahead(1).is_punct("(") && !is_reserved(t.text)) {
                pos_ += 2;
                Node n = make(Node::Kind::Function, to_lower(t.text));
                if (accept_operator("*")) {
                    n.children.push_back(make(Node::Kind::Star));
                } else if (!cur().is_punct(")")) {
                    n.distinct = accept_kw("distinct");
                    do {
                        n.children.push_back(parse_expr());
                    } while (accept_punct(","));
                }
                expect_punct(")");
                if (peek_kw("over") || peek_kw("filter")) fail("window functions are not supported");
                return n;
            }
            if (is_reserved(t.text)) fail("unexpected keyword '" + t.text + "'");
        }

        std::string first = parse_identifier();
        if (accept_punct(".")) {
            if (accept_operator("*")) {
                Node n = make(Node::Kind::Star);
                n.qualifier = first;
                return n;
            }
            std::string second = parse_identifier();
            if (accept_punct(".")) {
                first = second;
                second = parse_identifier();
            }
            Node n = make(Node::Kind::Column);
            n.qualifier = std::move(first);
            n.name = std::move(second);
            return n;
        }
        Node n = make(Node::Kind::Column);
        n.name = std::move(first);
        return n;
    }

    Node parse_case() {
        Node n = make(Node::Kind::Case);
        if (!peek_kw("when")) {
            n.has_base = true;
            n.children.push_back(parse_expr());
        }
        if (!peek_kw("when")) fail("CASE without WHEN");
        while (accept_kw("when")) {
            n.children.push_back(parse_expr());
            expect_kw("then");
            n.children.push_back(parse_expr());
        }
        if (accept_kw("else")) {
            n.has_else = true;
            n.children.push_back(parse_expr());
        }
        expect_kw("end");
        return n;
    }
};

// ----- canonicalization -----

std::string render_identifier(std::string_view raw) {
    const std::string id = to_lower(raw);
    bool simple = !id.empty() && (std::isalpha(static_cast<unsigned char>(id[0])) || id[0] == '_');
    for (char c : id) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) simple = false;
    }
    if (simple && !is_reserved(id)) return id;
    std::string out = "`";
    for (char c : id) {
        if (c == '`') out.push_back('`');
        out.push_back(c);
    }
    return out + "`";
}

struct Scope {
    const Scope* parent = nullptr;
    std::vector<std::pair<std::string, std::string>> aliases;  // lower alias -> table name ("" = derived)
    std::vector<std::string> tables;                           // lower base table names
    bool has_derived = false;
    const std::map<std::string, std::string>* output_aliases = nullptr;
};

struct Rendered {
    std::string text;
    int prec;
};

constexpr int kPrecOr = 1;
constexpr int kPrecAnd = 2;
constexpr int kPrecNot = 3;
constexpr int kPrecEquality = 4;
constexpr int kPrecRelational = 5;
constexpr int kPrecAdditive = 6;
constexpr int kPrecMultiplicative = 7;
constexpr int kPrecConcat = 8;
constexpr int kPrecUnary = 9;
constexpr int kPrecPrimary = 10;

int binary_precedence(std::string_view op) {
    if (op == "<" || op == "<=" || op == ">" || op == ">=") return kPrecRelational;
    if (op == "+" || op == "-") return kPrecAdditive;
    if (op == "*" || op == "/" || op == "%") return kPrecMultiplicative;
    if (op == "||") return kPrecConcat;
    return kPrecEquality;
}

std::string wrap(const Rendered& r, bool needs) { return needs ? "(" + r.text + ")" : r.text; }

class Canonicalizer {
public:
    explicit Canonicalizer(const DatabaseSchema* schema) : schema_(schema) {}

    ClauseSet query(const Query& q, const Scope* parent) {
        Scope scope;
        std::map<std::string, std::string> output_aliases;
        ClauseSet out = core(q.first, parent, scope, output_aliases);
        for (const auto& [op, c] : q.rest) {
            Scope child_scope;
            std::map<std::string, std::string> child_aliases;
            out.set_ops.push_back({op, core(c, parent, child_scope, child_aliases)});
        }
        scope.output_aliases = &output_aliases;
        for (const auto& [key, desc] : q.order_by) {
            out.order_by.push_back(render(key, scope).text + (desc ? " desc" : " asc"));
        }
        out.limit = q.limit;
        return out;
    }

private:
    const DatabaseSchema* schema_;

    ClauseSet core(const SelectCore& c, const Scope* parent, Scope& scope,
                   std::map<std::string, std::string>& output_aliases) {
        ClauseSet out;
        out.distinct = c.distinct;
        scope.parent = parent;
        for (const auto& ref : c.from) {
            if (ref.derived) {
                scope.has_derived = true;
                if (!ref.alias.empty()) scope.aliases.emplace_back(to_lower(ref.alias), std::string());
            } else {
                const std::string table = to_lower(ref.name);
                scope.tables.push_back(table);
                if (!ref.alias.empty()) scope.aliases.emplace_back(to_lower(ref.alias), table);
            }
        }
        for (const auto& ref : c.from) {
            if (ref.derived) {
                out.from.insert("(" + query(*ref.derived, &scope).to_sql() + ")");
            } else {
                out.from.insert(render_identifier(ref.name));
            }
        }
        for (const auto& [item, alias] : c.items) {
            const std::string text = render(item, scope).text;
            out.select.insert(text);
            if (!alias.empty()) output_aliases.emplace(to_lower(alias), text);
        }
        for (const auto& cond : c.join_conditions) add_conjuncts(cond, scope, out.joins);
        if (c.where) add_conjuncts(*c.where, scope, out.where);
        for (const auto& g : c.group_by) out.group_by.insert(render(g, scope).text);
        if (c.having) {
            Scope having_scope = scope;
            having_scope.output_aliases = &output_aliases;
            add_conjuncts(*c.having, having_scope, out.having);
        }
        return out;
    }

    void add_conjuncts(const Node& node, const Scope& scope, std::set<std::string>& into) {
        if (node.kind == Node::Kind::Logical && node.op == "and") {
            for (const auto& child : node.children) add_conjuncts(child, scope, into);
            return;
        }
        const Rendered r = render(node, scope);
        into.insert(wrap(r, r.prec < kPrecAnd));
    }

    bool table_has_column(const std::string& table, const std::string& column) const {
        const TableSchema* t = schema_->find_table(table);
        return t && t->find_column(column);
    }

    std::string resolve_table(const std::string& qualifier, const Scope& scope, bool& derived) const {
        const std::string q = to_lower(qualifier);
        for (const Scope* s = &scope; s; s = s->parent) {
            for (const auto& [alias, table] : s->aliases) {
                if (alias == q) {
                    derived = table.empty();
                    return table;
                }
            }
            for (const auto& table : s->tables) {
                if (table == q) {
                    derived = false;
                    return table;
                }
            }
        }
        derived = false;
        return q;
    }

    std::string resolve_column(const Node& n, const Scope& scope) const {
        if (!n.qualifier.empty()) {
            bool derived = false;
            const std::string table = resolve_table(n.qualifier, scope, derived);
            if (derived) return render_identifier(n.name);
            return render_identifier(table) + "." + render_identifier(n.name);
        }
        const std::string column = to_lower(n.name);
        if (scope.output_aliases) {
            const auto it = scope.output_aliases->find(column);
            if (it != scope.output_aliases->end()) return it->second;
        }
        if (schema_) {
            for (const Scope* s = &scope; s; s = s->parent) {
                std::vector<std::string> owners;
                for (const auto& table : s->tables) {
                    if (table_has_column(table, column) &&
                        std::find(owners.begin(), owners.end(), table) == owners.end()) {
                        owners.push_back(table);
                    }
                }
                if (owners.size() == 1) return render_identifier(owners.front()) + "." + render_identifier(column);
                if (owners.size() > 1 || s->has_derived) break;
            }
            return render_identifier(column);
        }
        if (scope.tables.size() == 1 && !scope.has_derived) {
            return render_identifier(scope.tables.front()) + "." + render_identifier(column);
        }
        return render_identifier(column);
    }

    Rendered render(const Node& n, const Scope& scope) {
        using K = Node::Kind;
        switch (n.kind) {
            case K::Column:
                return {resolve_column(n, scope), kPrecPrimary};
            case K::Value:
                return {std::string(kValuePlaceholder), kPrecPrimary};
            case K::Null:
                return {"null", kPrecPrimary};
            case K::Star: {
                if (n.qualifier.empty()) return {"*", kPrecPrimary};
                bool derived = false;
                const std::string table = resolve_table(n.qualifier, scope, derived);
                return {derived ? "*" : render_identifier(table) + ".*", kPrecPrimary};
            }
            case K::Unary: {
                const Rendered operand = render(n.children[0], scope);
                if (n.op == "not") return {"not " + wrap(operand, operand.prec < kPrecNot), kPrecNot};
                return {n.op + wrap(operand, operand.prec < kPrecUnary), kPrecUnary};
            }
            case K::Binary: {
                const int p = binary_precedence(n.op);
                const bool comparison = p <= kPrecRelational;
                const Rendered lhs = render(n.children[0], scope);
                const Rendered rhs = render(n.children[1], scope);
                std::string left = wrap(lhs, comparison ? lhs.prec <= p : lhs.prec < p);
                std::string right = wrap(rhs, rhs.prec <= p);
                if (n.op == "=" || n.op == "!=") {
                    const bool left_value = left == kValuePlaceholder;
                    const bool right_value = right == kValuePlaceholder;
                    if ((left_value && !right_value) || (left_value == right_value && right < left)) {
                        std::swap(left, right);
                    }
                }
                std::string text = left + " " + n.op + " " + right;
                if (n.children.size() > 2) {
                    const Rendered esc = render(n.children[2], scope);
                    text += " escape " + wrap(esc, esc.prec <= p);
                }
                return {text, p};
            }
            case K::Logical: {
                const int p = n.op == "and" ? kPrecAnd : kPrecOr;
                std::vector<std::string> parts;
                flatten_logical(n, n.op, scope, p, parts);
                std::sort(parts.begin(), parts.end());
                std::string text;
                for (const auto& part : parts) {
                    if (!text.empty()) text += " " + n.op + " ";
                    text += part;
                }
                return {text, p};
            }
            case K::Function: {
                std::string text = render_identifier(n.op) + "(";
                if (n.distinct) text += "distinct ";
                for (size_t i = 0; i < n.children.size(); ++i) {
                    if (i) text += ", ";
                    text += render(n.children[i], scope).text;
                }
                return {text + ")", kPrecPrimary};
            }
            case K::Cast:
                return {"cast(" + render(n.children[0], scope).text + " as " + n.op + ")", kPrecPrimary};
            case K::Case: {
                std::string text = "case";
                size_t i = 0;
                if (n.has_base) text += " " + render(n.children[i++], scope).text;
                const size_t pairs_end = n.has_else ? n.children.size() - 1 : n.children.size();
                for (; i + 1 < pairs_end + 1 && i < pairs_end; i += 2) {
                    text += " when " + render(n.children[i], scope).text;
                    text += " then " + render(n.children[i + 1], scope).text;
                }
                if (n.has_else) text += " else " + render(n.children.back(), scope).text;
                return {text + " end", kPrecPrimary};
            }
            case K::Subquery:
                return {"(" + query(*n.query, &scope).to_sql() + ")", kPrecPrimary};
            case K::Exists:
                return {"exists (" + query(*n.query, &scope).to_sql() + ")", kPrecPrimary};
            case K::InList: {
                const Rendered lhs = render(n.children[0], scope);
                std::vector<std::string> items;
                for (size_t i = 1; i < n.children.size(); ++i) items.push_back(render(n.children[i], scope).text);
                std::sort(items.begin(), items.end());
                std::string text = wrap(lhs, lhs.prec <= kPrecEquality) + (n.negated ? " not in (" : " in (");
                for (size_t i = 0; i < items.size(); ++i) {
                    if (i) text += ", ";
                    text += items[i];
                }
                return {text + ")", kPrecEquality};
            }
            case K::InQuery: {
                const Rendered lhs = render(n.children[0], scope);
                return {wrap(lhs, lhs.prec <= kPrecEquality) + (n.negated ? " not in (" : " in (") +
                            query(*n.query, &scope).to_sql() + ")",
                        kPrecEquality};
            }
            case K::Between: {
                const Rendered x = render(n.children[0], scope);
                const Rendered lo = render(n.children[1], scope);
                const Rendered hi = render(n.children[2], scope);
                return {wrap(x, x.prec <= kPrecEquality) + (n.negated ? " not between " : " between ") +
                            wrap(lo, lo.prec <= kPrecEquality) + " and " + wrap(hi, hi.prec <= kPrecEquality),
                        kPrecEquality};
            }
            case K::IsNull: {
                const Rendered x = render(n.children[0], scope);
                return {wrap(x, x.prec <= kPrecEquality) + (n.negated ? " is not null" : " is null"), kPrecEquality};
            }
            case K::Collate: {
                const Rendered x = render(n.children[0], scope);
                return {wrap(x, x.prec < kPrecUnary) + " collate " + render_identifier(n.op), kPrecUnary};
            }
        }
        return {"", kPrecPrimary};
    }

    void flatten_logical(const Node& n, const std::string& op, const Scope& scope, int p,
                         std::vector<std::string>& parts) {
        if (n.kind == Node::Kind::Logical && n.op == op) {
            for (const auto& child : n.children) flatten_logical(child, op, scope, p, parts);
            return;
        }
        const Rendered r = render(n, scope);
        parts.push_back(wrap(r, r.prec <= p));
    }
};

}  // namespace

ClauseSet parse_to_clause_set(std::string_view sql, const DatabaseSchema* schema) {
    Parser parser(tokenize_sql(sql));
    const Query q = parser.parse_statement();
    Canonicalizer canon(schema);
    return canon.query(q, nullptr);
}

}  // namespace macsql
