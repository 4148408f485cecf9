#include "cinest/query.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>

#include "cinest/error.hpp"

namespace cinest {

PredicateRange PredicateRange::full(std::size_t domain_size) {
  PredicateRange r;
  r.mask_.assign(domain_size, 1);
  return r;
}

PredicateRange PredicateRange::none(std::size_t domain_size) {
  PredicateRange r;
  r.mask_.assign(domain_size, 0);
  return r;
}

std::size_t PredicateRange::count() const {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

void PredicateRange::intersect(const PredicateRange& other) {
  for (std::size_t i = 0; i < mask_.size(); ++i) mask_[i] = mask_[i] && other.contains(static_cast<Code>(i));
}

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::eq: return "=";
    case CompareOp::ne: return "!=";
    case CompareOp::lt: return "<";
    case CompareOp::le: return "<=";
    case CompareOp::gt: return ">";
    case CompareOp::ge: return ">=";
    case CompareOp::between: return "BETWEEN";
    case CompareOp::in: return "IN";
  }
  return "?";
}

CompareOp compare_op_from_string(std::string_view s) {
  std::string up(s);
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (up == "=" || up == "==") return CompareOp::eq;
  if (up == "!=" || up == "<>") return CompareOp::ne;
  if (up == "<") return CompareOp::lt;
  if (up == "<=") return CompareOp::le;
  if (up == ">") return CompareOp::gt;
  if (up == ">=") return CompareOp::ge;
  if (up == "BETWEEN") return CompareOp::between;
  if (up == "IN") return CompareOp::in;
  throw ParseError("unknown operator '" + std::string(s) + "'");
}

const PredicateRange* Query::range(ColumnRef c) const {
  auto it = predicates.find(c);
  return it == predicates.end() ? nullptr : &it->second;
}

namespace {

std::string literal_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  throw ParseError("unsupported predicate literal " + v.dump());
}

nlohmann::json literal_json(const std::string& s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && ptr == s.data() + s.size() && !s.empty() && std::to_string(v) == s) return v;
  return s;
}

// Codes [first, last] (1-based, inclusive) set in a fresh NULL-free range.
PredicateRange code_interval(std::size_t domain_size, std::size_t first, std::size_t last) {
  auto r = PredicateRange::none(domain_size);
  for (std::size_t c = std::max<std::size_t>(first, 1); c <= last && c < domain_size; ++c) r.set(static_cast<Code>(c), true);
  return r;
}

}  // namespace

PredicateRange normalize_predicate(const Column& column, CompareOp op, const std::vector<std::string>& values) {
  const std::size_t dom = column.domain_size();
  const std::size_t n = column.distinct_values();
  auto need = [&](std::size_t k) {
    if (values.size() != k)
      throw ParseError("operator " + std::string(to_string(op)) + " on '" + column.name() + "' expects " + std::to_string(k) +
                       " value(s)");
  };
  switch (op) {
    case CompareOp::eq: {
      need(1);
      auto r = PredicateRange::none(dom);
      if (auto c = column.encode(values[0])) r.set(*c, true);
      return r;
    }
    case CompareOp::ne: {
      need(1);
      auto r = code_interval(dom, 1, n);
      if (auto c = column.encode(values[0])) r.set(*c, false);
      return r;
    }
    case CompareOp::lt: need(1); return code_interval(dom, 1, column.count_less(values[0]));
    case CompareOp::le: need(1); return code_interval(dom, 1, column.count_less_equal(values[0]));
    case CompareOp::gt: need(1); return code_interval(dom, column.count_less_equal(values[0]) + 1, n);
    case CompareOp::ge: need(1); return code_interval(dom, column.count_less(values[0]) + 1, n);
    case CompareOp::between:
      need(2);
      return code_interval(dom, column.count_less(values[0]) + 1, column.count_less_equal(values[1]));
    case CompareOp::in: {
      if (values.empty()) throw ParseError("IN on '" + column.name() + "' needs at least one value");
      auto r = PredicateRange::none(dom);
      for (const auto& v : values)
        if (auto c = column.encode(v)) r.set(*c, true);
      return r;
    }
  }
  throw ParseError("unknown operator");
}

nlohmann::json to_json(const QuerySpec& spec) {
  nlohmann::json j;
  j["joins"] = nlohmann::json::array();
  for (const auto& e : spec.joins) j["joins"].push_back({{"one", e.one}, {"many", e.many}});
  if (!spec.tables.empty()) j["tables"] = spec.tables;
  j["predicates"] = nlohmann::json::array();
  for (const auto& p : spec.predicates) {
    nlohmann::json vals = nlohmann::json::array();
    for (const auto& v : p.values) vals.push_back(literal_json(v));
    j["predicates"].push_back({{"column", p.column}, {"op", to_string(p.op)}, {"values", vals}});
  }
  if (spec.true_cardinality) j["true_cardinality"] = *spec.true_cardinality;
  return j;
}

QuerySpec query_spec_from_json(const nlohmann::json& j) {
  try {
    QuerySpec spec;
    if (j.contains("joins"))
      for (const auto& je : j.at("joins")) spec.joins.push_back({je.at("one").get<std::string>(), je.at("many").get<std::string>()});
    if (j.contains("tables"))
      for (const auto& jt : j.at("tables")) spec.tables.push_back(jt.get<std::string>());
    if (j.contains("predicates"))
      for (const auto& jp : j.at("predicates")) {
        PredicateSpec p;
        p.column = jp.at("column").get<std::string>();
        p.op = compare_op_from_string(jp.at("op").get<std::string>());
        const auto& vals = jp.at("values");
        if (vals.is_array())
          for (const auto& v : vals) p.values.push_back(literal_text(v));
        else
          p.values.push_back(literal_text(vals));
        spec.predicates.push_back(std::move(p));
      }
    if (j.contains("true_cardinality") && !j.at("true_cardinality").is_null())
      spec.true_cardinality = j.at("true_cardinality").get<std::uint64_t>();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed query: ") + e.what());
  }
}

Query make_query(const Database& db, const QuerySpec& spec, std::string id) {
  const auto& schema = db.schema;
  std::vector<TableId> vertices;
  std::vector<EdgeId> edges;
  for (const auto& j : spec.joins) {
    auto e = schema.find_edge(j);
    if (!e) throw ParseError("join " + j.one + " = " + j.many + " is not a schema edge");
    edges.push_back(*e);
    vertices.push_back(schema.edge(*e).one);
    vertices.push_back(schema.edge(*e).many);
  }
  for (const auto& t : spec.tables) {
    auto tid = schema.find_table(t);
    if (!tid) throw ParseError("unknown table '" + t + "'");
    vertices.push_back(*tid);
  }
  std::vector<std::pair<ColumnRef, const PredicateSpec*>> resolved;
  for (const auto& p : spec.predicates) {
    auto [tname, cname] = split_qualified(p.column);
    auto tid = schema.find_table(tname);
    if (!tid) throw ParseError("predicate on unknown table '" + tname + "'");
    auto cid = schema.table(*tid).column_index(cname);
    if (!cid) throw ParseError("predicate on unknown column '" + p.column + "'");
    resolved.push_back({{*tid, *cid}, &p});
    if (spec.joins.empty()) vertices.push_back(*tid);
  }

  Query q;
  q.id = std::move(id);
  q.graph = QueryGraph(schema, vertices, edges);
  for (const auto& [ref, p] : resolved) {
    if (!q.graph.contains(ref.table)) throw ParseError("predicate on " + p->column + " references a table outside the join graph");
    auto range = normalize_predicate(db.column(ref.table, ref.column), p->op, p->values);
    auto [it, inserted] = q.predicates.emplace(ref, range);
    if (!inserted) it->second.intersect(range);
  }
  q.true_cardinality = spec.true_cardinality;
  return q;
}

Query subquery(const Query& q, const SchemaGraph& schema, const std::vector<TableId>& tables) {
  std::vector<EdgeId> edges;
  auto inside = [&](TableId t) { return std::find(tables.begin(), tables.end(), t) != tables.end(); };
  for (EdgeId e : q.graph.edges())
    if (inside(schema.edge(e).one) && inside(schema.edge(e).many)) edges.push_back(e);
  Query sub;
  sub.id = q.id;
  sub.graph = QueryGraph(schema, tables, edges);
  for (const auto& [ref, range] : q.predicates)
    if (inside(ref.table)) sub.predicates.emplace(ref, range);
  return sub;
}

bool row_satisfies(const Query& q, const Database& db, TableId t, std::size_t row) {
  for (auto it = q.predicates.lower_bound(ColumnRef{t, 0}); it != q.predicates.end() && it->first.table == t; ++it)
    if (!it->second.contains(db.column(t, it->first.column).code(row))) return false;
  return true;
}

Workload workload_from_json(const nlohmann::json& j, const Database& db) {
  Workload w;
  if (!j.contains("queries") || !j.at("queries").is_array()) throw ParseError("workload: missing 'queries' array");
  std::size_t i = 0;
  for (const auto& jq : j.at("queries")) {
    auto spec = query_spec_from_json(jq);
    try {
      w.queries.push_back(make_query(db, spec, "q" + std::to_string(i)));
    } catch (const ParseError& e) {
      throw ParseError("query " + std::to_string(i) + ": " + e.what());
    }
    w.specs.push_back(std::move(spec));
    ++i;
  }
  return w;
}

Workload parse_workload(const std::filesystem::path& path, const Database& db) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open workload " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("workload " + path.string() + ": " + e.what());
  }
  return workload_from_json(j, db);
}

nlohmann::json workload_to_json(const std::vector<QuerySpec>& specs) {
  nlohmann::json j;
  j["queries"] = nlohmann::json::array();
  for (const auto& s : specs) j["queries"].push_back(to_json(s));
  return j;
}

}  // namespace cinest
