#include "fixtures.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>

#include <unistd.h>

#include <boost/math/special_functions/gamma.hpp>

namespace fixtures {

using namespace cinest;

Database make_db(const SchemaGraph& schema, const std::map<std::string, Rows>& rows) {
  Database db;
  db.schema = schema;
  for (const auto& decl : schema.tables()) {
    const auto it = rows.find(decl.name);
    std::vector<Column> cols;
    for (std::size_t c = 0; c < decl.columns.size(); ++c) {
      std::vector<Cell> cells;
      if (it != rows.end())
        for (const auto& r : it->second) cells.push_back(r.at(c));
      cols.emplace_back(decl.columns[c].name, decl.columns[c].kind, cells);
    }
    db.tables.emplace_back(decl.name, std::move(cols));
  }
  return db;
}

SchemaGraph snowflake_schema() {
  using K = ColumnKind;
  return SchemaGraph({{"S", {{"t_id", K::integer}, {"x", K::integer}}},
                      {"T", {{"id", K::integer}, {"y", K::integer}}},
                      {"U", {{"t_id", K::integer}, {"v_id", K::integer}, {"z", K::categorical}}},
                      {"V", {{"id", K::integer}}},
                      {"W", {{"t_id", K::integer}}}},
                     {{"T.id", "S.t_id"}, {"T.id", "U.t_id"}, {"T.id", "W.t_id"}, {"V.id", "U.v_id"}});
}

SchemaGraph parallel_edge_schema() {
  using K = ColumnKind;
  return SchemaGraph({{"posts", {{"id", K::integer}, {"score", K::integer}}},
                      {"postlinks", {{"post_id", K::integer}, {"related_post_id", K::integer}, {"type", K::categorical}}}},
                     {{"posts.id", "postlinks.post_id"}, {"posts.id", "postlinks.related_post_id"}});
}

SchemaGraph random_dag_schema(std::uint64_t seed, std::size_t max_tables, bool connected) {
  std::mt19937_64 rng(seed);
  const std::size_t n = 2 + rng() % (max_tables - 1);
  // Edges always run from lower to higher rank, which keeps the graph acyclic.
  std::vector<std::size_t> rank(n);
  std::iota(rank.begin(), rank.end(), 0);
  std::shuffle(rank.begin(), rank.end(), rng);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (one, many)
  auto add = [&](std::size_t a, std::size_t b) {
    if (rank[a] < rank[b]) pairs.emplace_back(a, b);
    else pairs.emplace_back(b, a);
  };
  if (connected)
    for (std::size_t i = 1; i < n; ++i) add(i, rng() % i);
  const std::size_t extra = rng() % (n + 1);
  for (std::size_t k = 0; k < extra; ++k) {
    const std::size_t a = rng() % n, b = rng() % n;
    if (a != b) add(a, b);
  }

  std::vector<TableDecl> tables(n);
  for (std::size_t i = 0; i < n; ++i) {
    tables[i].name = "t" + std::to_string(i);
    tables[i].columns = {{"id", ColumnKind::integer}, {"x", ColumnKind::integer}};
  }
  std::vector<EdgeSpec> edges;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    auto [one, many] = pairs[k];
    const std::string fk = "fk" + std::to_string(k);
    tables[many].columns.push_back({fk, ColumnKind::integer});
    edges.push_back({tables[one].name + ".id", tables[many].name + "." + fk});
  }
  return SchemaGraph(std::move(tables), edges);
}

bool union_find_connected(std::size_t vertices, const std::vector<std::vector<std::size_t>>& groups) {
  std::vector<std::size_t> parent(vertices);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& g : groups)
    for (std::size_t i = 1; i < g.size(); ++i) parent[find(g[i])] = find(g[0]);
  for (std::size_t v = 1; v < vertices; ++v)
    if (find(v) != find(0)) return false;
  return true;
}

bool schema_connected(const SchemaGraph& schema) {
  std::vector<std::vector<std::size_t>> groups;
  for (const auto& e : schema.edges()) groups.push_back({e.one, e.many});
  return union_find_connected(schema.table_count(), groups);
}

bool hypergraph_connected(const SubschemaHypergraph& h) {
  std::vector<std::vector<std::size_t>> groups;
  for (const auto& s : h.hyperedges) groups.emplace_back(s.vertices.begin(), s.vertices.end());
  return union_find_connected(h.vertex_count, groups);
}

namespace {

int compare(ColumnKind kind, const std::string& a, const std::string& b) {
  if (kind == ColumnKind::integer) {
    const long long x = std::stoll(a), y = std::stoll(b);
    return x < y ? -1 : (x > y ? 1 : 0);
  }
  return a < b ? -1 : (a > b ? 1 : 0);
}

}  // namespace

bool raw_satisfies(ColumnKind kind, const Cell& value, const PredicateSpec& p) {
  if (!value) return false;
  const std::string& v = *value;
  switch (p.op) {
    case CompareOp::eq: return compare(kind, v, p.values.at(0)) == 0;
    case CompareOp::ne: return compare(kind, v, p.values.at(0)) != 0;
    case CompareOp::lt: return compare(kind, v, p.values.at(0)) < 0;
    case CompareOp::le: return compare(kind, v, p.values.at(0)) <= 0;
    case CompareOp::gt: return compare(kind, v, p.values.at(0)) > 0;
    case CompareOp::ge: return compare(kind, v, p.values.at(0)) >= 0;
    case CompareOp::between:
      return compare(kind, v, p.values.at(0)) >= 0 && compare(kind, v, p.values.at(1)) <= 0;
    case CompareOp::in:
      return std::any_of(p.values.begin(), p.values.end(), [&](const std::string& x) { return compare(kind, v, x) == 0; });
  }
  return false;
}

Cell raw_value(const Database& db, TableId t, std::size_t column, std::size_t row) {
  const Column& c = db.column(t, column);
  return c.decode(c.code(row));
}

std::uint64_t nested_loop_count(const Database& db, const QuerySpec& q) {
  const auto& schema = db.schema;
  struct Join {
    TableId a, b;
    std::size_t ca, cb;
  };
  std::vector<Join> joins;
  std::vector<TableId> order;
  auto note = [&](TableId t) {
    if (std::find(order.begin(), order.end(), t) == order.end()) order.push_back(t);
  };
  for (const auto& name : q.tables) note(schema.table_id(name));
  for (const auto& j : q.joins) {
    auto [ta, ca] = split_qualified(j.one);
    auto [tb, cb] = split_qualified(j.many);
    const TableId a = schema.table_id(ta), b = schema.table_id(tb);
    joins.push_back({a, b, *schema.table(a).column_index(ca), *schema.table(b).column_index(cb)});
  }
  // Order tables so each one joins something placed before it.
  if (order.empty() && !joins.empty()) order.push_back(joins.front().a);
  for (bool grew = true; grew;) {
    grew = false;
    for (const auto& j : joins) {
      const bool ha = std::find(order.begin(), order.end(), j.a) != order.end();
      const bool hb = std::find(order.begin(), order.end(), j.b) != order.end();
      if (ha != hb) {
        order.push_back(ha ? j.b : j.a);
        grew = true;
      }
    }
  }

  std::vector<std::vector<std::pair<std::size_t, const PredicateSpec*>>> preds(schema.table_count());
  for (const auto& p : q.predicates) {
    auto [tn, cn] = split_qualified(p.column);
    const TableId t = schema.table_id(tn);
    preds[t].emplace_back(*schema.table(t).column_index(cn), &p);
  }

  std::vector<std::size_t> row(schema.table_count());
  std::vector<bool> placed(schema.table_count(), false);
  std::uint64_t count = 0;
  auto recurse = [&](auto& self, std::size_t depth) -> void {
    if (depth == order.size()) {
      ++count;
      return;
    }
    const TableId t = order[depth];
    for (std::size_t r = 0; r < db.table(t).row_count(); ++r) {
      bool ok = true;
      for (auto [c, p] : preds[t])
        ok = ok && raw_satisfies(schema.table(t).columns[c].kind, raw_value(db, t, c, r), *p);
      for (const auto& j : joins) {
        if (!ok) break;
        if (j.a == t && placed[j.b]) {
          const Cell x = raw_value(db, t, j.ca, r), y = raw_value(db, j.b, j.cb, row[j.b]);
          ok = x && y && std::stoll(*x) == std::stoll(*y);
        } else if (j.b == t && placed[j.a]) {
          const Cell x = raw_value(db, t, j.cb, r), y = raw_value(db, j.a, j.ca, row[j.a]);
          ok = x && y && std::stoll(*x) == std::stoll(*y);
        }
      }
      if (!ok) continue;
      row[t] = r;
      placed[t] = true;
      self(self, depth + 1);
      placed[t] = false;
    }
  };
  recurse(recurse, 0);
  return count;
}

namespace {

bool keys_equal(const Cell& a, const Cell& b) { return a && b && std::stoll(*a) == std::stoll(*b); }

}  // namespace

std::vector<std::vector<std::uint32_t>> nested_loop_star_join(const Database& db, const Subschema& s) {
  const auto& schema = db.schema;
  auto slot = [&](TableId t) { return static_cast<std::size_t>(std::find(s.vertices.begin(), s.vertices.end(), t) - s.vertices.begin()); };
  const TableId center = s.center;
  std::vector<std::vector<std::uint32_t>> out;

  for (std::size_t r = 0; r < db.table(center).row_count(); ++r) {
    std::vector<std::vector<std::uint32_t>> partial{std::vector<std::uint32_t>(s.vertices.size(), kNoRow)};
    for (auto& p : partial) p[slot(center)] = static_cast<std::uint32_t>(r);
    for (EdgeId e : s.edge_choice) {
      const auto& se = schema.edge(e);
      std::vector<std::uint32_t> matches;
      for (std::size_t d = 0; d < db.table(se.one).row_count(); ++d)
        if (keys_equal(raw_value(db, se.one, se.one_column, d), raw_value(db, center, se.many_column, r)))
          matches.push_back(static_cast<std::uint32_t>(d));
      if (matches.empty()) continue;
      std::vector<std::vector<std::uint32_t>> next;
      for (const auto& p : partial)
        for (auto d : matches) {
          auto q = p;
          q[slot(se.one)] = d;
          next.push_back(std::move(q));
        }
      partial = std::move(next);
    }
    out.insert(out.end(), partial.begin(), partial.end());
  }
  for (EdgeId e : s.edge_choice) {
    const auto& se = schema.edge(e);
    for (std::size_t d = 0; d < db.table(se.one).row_count(); ++d) {
      bool referenced = false;
      for (std::size_t r = 0; r < db.table(center).row_count() && !referenced; ++r)
        referenced = keys_equal(raw_value(db, se.one, se.one_column, d), raw_value(db, center, se.many_column, r));
      if (referenced) continue;
      std::vector<std::uint32_t> t(s.vertices.size(), kNoRow);
      t[slot(se.one)] = static_cast<std::uint32_t>(d);
      out.push_back(std::move(t));
    }
  }
  return out;
}

std::uint32_t raw_fanout(const Database& db, EdgeId e, std::uint32_t one_row) {
  const auto& se = db.schema.edge(e);
  const Cell key = raw_value(db, se.one, se.one_column, one_row);
  std::uint32_t n = 0;
  for (std::size_t r = 0; r < db.table(se.many).row_count(); ++r)
    if (keys_equal(key, raw_value(db, se.many, se.many_column, r))) ++n;
  return n;
}

ChiSquare chi_square(const std::vector<double>& observed, const std::vector<double>& expected) {
  ChiSquare c;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (expected[i] <= 0) continue;
    const double d = observed[i] - expected[i];
    c.statistic += d * d / expected[i];
    ++c.dof;
  }
  c.dof = c.dof > 0 ? c.dof - 1 : 0;
  c.p_value = c.dof == 0 ? 1.0 : boost::math::gamma_q(c.dof / 2.0, c.statistic / 2.0);
  return c;
}

SynthSpec small_spec(std::uint64_t seed) {
  SynthSpec s;
  s.rows_s = 300;
  s.rows_t = 60;
  s.rows_u = 300;
  s.rows_v = 30;
  s.rows_w = 200;
  s.queries = 20;
  s.seed = seed;
  return s;
}

std::string temp_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("cinest_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace fixtures
