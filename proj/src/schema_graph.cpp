#include "cinest/schema_graph.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "cinest/error.hpp"
#include "cinest/random.hpp"

namespace cinest {

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

 private:
  std::vector<std::size_t> parent_;
};

bool sorted_contains(const std::vector<std::size_t>& v, std::size_t x) {
  return std::binary_search(v.begin(), v.end(), x);
}

}  // namespace

std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::integer ? "integer" : "categorical";
}

ColumnKind column_kind_from_string(std::string_view s) {
  if (s == "integer") return ColumnKind::integer;
  if (s == "categorical") return ColumnKind::categorical;
  throw ParseError("unknown column kind '" + std::string(s) + "'");
}

std::optional<std::size_t> TableDecl::column_index(std::string_view column) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i].name == column) return i;
  return std::nullopt;
}

std::pair<std::string, std::string> split_qualified(std::string_view qualified) {
  const auto dot = qualified.find('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == qualified.size())
    throw ParseError("expected qualified column 'table.column', got '" + std::string(qualified) + "'");
  return {std::string(qualified.substr(0, dot)), std::string(qualified.substr(dot + 1))};
}

SchemaGraph::SchemaGraph(std::vector<TableDecl> tables, const std::vector<EdgeSpec>& edges)
    : tables_(std::move(tables)) {
  std::set<std::string> names;
  for (const auto& t : tables_) {
    if (t.name.empty()) throw SchemaError("table with empty name");
    if (!names.insert(t.name).second) throw SchemaError("duplicate table '" + t.name + "'");
    std::set<std::string> cols;
    for (const auto& c : t.columns)
      if (!cols.insert(c.name).second)
        throw SchemaError("duplicate column '" + c.name + "' in table '" + t.name + "'");
  }

  for (const auto& spec : edges) {
    const std::string label = spec.one + "->" + spec.many;
    auto resolve = [&](const std::string& qualified, TableId& table, std::size_t& column) {
      auto [tname, cname] = split_qualified(qualified);
      auto tid = find_table(tname);
      if (!tid) throw SchemaError("edge " + label + ": unknown table '" + tname + "'");
      auto cid = tables_[*tid].column_index(cname);
      if (!cid) throw SchemaError("edge " + label + ": table '" + tname + "' has no column '" + cname + "'");
      table = *tid;
      column = *cid;
    };
    SchemaEdge e;
    resolve(spec.one, e.one, e.one_column);
    resolve(spec.many, e.many, e.many_column);
    if (e.one == e.many) throw SchemaError("edge " + label + " is a self-loop");
    edges_.push_back(e);
  }

  // Kahn's algorithm over the collapsed graph; leftovers lie on or behind a cycle.
  const std::size_t n = tables_.size();
  std::vector<std::set<TableId>> succ(n);
  std::vector<std::size_t> indeg(n, 0);
  for (const auto& e : edges_)
    if (succ[e.one].insert(e.many).second) ++indeg[e.many];
  std::queue<TableId> ready;
  for (TableId v = 0; v < n; ++v)
    if (indeg[v] == 0) ready.push(v);
  std::size_t seen = 0;
  while (!ready.empty()) {
    TableId v = ready.front();
    ready.pop();
    ++seen;
    for (TableId w : succ[v])
      if (--indeg[w] == 0) ready.push(w);
  }
  if (seen != n) {
    // Walk predecessors among the remaining vertices until one repeats.
    TableId start = 0;
    while (indeg[start] == 0) ++start;
    std::vector<TableId> path;
    std::vector<int> pos(n, -1);
    TableId cur = start;
    while (pos[cur] < 0) {
      pos[cur] = static_cast<int>(path.size());
      path.push_back(cur);
      for (TableId w : succ[cur])
        if (indeg[w] > 0) {
          cur = w;
          break;
        }
    }
    std::ostringstream msg;
    msg << "schema graph is cyclic: ";
    for (std::size_t i = static_cast<std::size_t>(pos[cur]); i < path.size(); ++i)
      msg << tables_[path[i]].name << " -> ";
    msg << tables_[cur].name;
    throw SchemaError(msg.str());
  }
}

SchemaGraph SchemaGraph::from_json(const nlohmann::json& j) {
  try {
    std::vector<TableDecl> tables;
    for (const auto& jt : j.at("tables")) {
      TableDecl t;
      t.name = jt.at("name").get<std::string>();
      for (const auto& jc : jt.at("columns"))
        t.columns.push_back({jc.at("name").get<std::string>(),
                             column_kind_from_string(jc.at("kind").get<std::string>())});
      tables.push_back(std::move(t));
    }
    std::vector<EdgeSpec> edges;
    if (j.contains("edges"))
      for (const auto& je : j.at("edges"))
        edges.push_back({je.at("one").get<std::string>(), je.at("many").get<std::string>()});
    return SchemaGraph(std::move(tables), edges);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  } catch (const ParseError& e) {
    throw SchemaError(e.what());
  }
}

SchemaGraph SchemaGraph::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("schema file " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json SchemaGraph::to_json() const {
  nlohmann::json j;
  j["tables"] = nlohmann::json::array();
  for (const auto& t : tables_) {
    nlohmann::json jt;
    jt["name"] = t.name;
    jt["columns"] = nlohmann::json::array();
    for (const auto& c : t.columns) jt["columns"].push_back({{"name", c.name}, {"kind", to_string(c.kind)}});
    j["tables"].push_back(jt);
  }
  j["edges"] = nlohmann::json::array();
  for (const auto& e : edges_)
    j["edges"].push_back({{"one", column_name(e.one, e.one_column)}, {"many", column_name(e.many, e.many_column)}});
  return j;
}

std::optional<TableId> SchemaGraph::find_table(std::string_view name) const {
  for (TableId i = 0; i < tables_.size(); ++i)
    if (tables_[i].name == name) return i;
  return std::nullopt;
}

TableId SchemaGraph::table_id(std::string_view name) const {
  if (auto id = find_table(name)) return *id;
  throw SchemaError("unknown table '" + std::string(name) + "'");
}

std::optional<EdgeId> SchemaGraph::find_edge(const EdgeSpec& spec) const {
  for (EdgeId i = 0; i < edges_.size(); ++i)
    if (column_name(edges_[i].one, edges_[i].one_column) == spec.one &&
        column_name(edges_[i].many, edges_[i].many_column) == spec.many)
      return i;
  return std::nullopt;
}

std::vector<EdgeId> SchemaGraph::in_edges(TableId v) const {
  std::vector<EdgeId> out;
  for (EdgeId i = 0; i < edges_.size(); ++i)
    if (edges_[i].many == v) out.push_back(i);
  return out;
}

std::vector<EdgeId> SchemaGraph::out_edges(TableId u) const {
  std::vector<EdgeId> out;
  for (EdgeId i = 0; i < edges_.size(); ++i)
    if (edges_[i].one == u) out.push_back(i);
  return out;
}

std::string SchemaGraph::column_name(TableId t, std::size_t column) const {
  return tables_.at(t).name + "." + tables_.at(t).columns.at(column).name;
}

std::string SchemaGraph::edge_name(EdgeId id) const {
  const auto& e = edges_.at(id);
  return column_name(e.one, e.one_column) + "->" + column_name(e.many, e.many_column);
}

bool SchemaGraph::is_join_key(TableId t, std::size_t column) const {
  return std::any_of(edges_.begin(), edges_.end(), [&](const SchemaEdge& e) {
    return (e.one == t && e.one_column == column) || (e.many == t && e.many_column == column);
  });
}

bool SchemaGraph::connected_undirected() const {
  if (tables_.empty()) return true;
  UnionFind uf(tables_.size());
  for (const auto& e : edges_) uf.unite(e.one, e.many);
  const auto root = uf.find(0);
  for (TableId v = 1; v < tables_.size(); ++v)
    if (uf.find(v) != root) return false;
  return true;
}

QueryGraph::QueryGraph(const SchemaGraph& schema, std::vector<TableId> vertices, std::vector<EdgeId> edges)
    : vertices_(std::move(vertices)), edges_(std::move(edges)) {
  std::sort(vertices_.begin(), vertices_.end());
  vertices_.erase(std::unique(vertices_.begin(), vertices_.end()), vertices_.end());
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  if (vertices_.empty()) throw ParseError("query references no tables");
  for (TableId v : vertices_)
    if (v >= schema.table_count()) throw ParseError("query references unknown table id");
  std::set<std::pair<TableId, TableId>> pairs;
  for (EdgeId e : edges_) {
    if (e >= schema.edges().size()) throw ParseError("query references unknown edge id");
    const auto& se = schema.edge(e);
    if (!contains(se.one) || !contains(se.many))
      throw ParseError("query edge " + schema.edge_name(e) + " leaves the query's table set");
    auto key = std::minmax(se.one, se.many);
    if (!pairs.insert(key).second)
      throw ParseError("unsupported cyclic query: parallel joins between " + schema.table(se.one).name +
                       " and " + schema.table(se.many).name);
  }
  if (edges_.size() + 1 != vertices_.size()) {
    if (edges_.size() + 1 > vertices_.size()) throw ParseError("unsupported cyclic query");
    throw ParseError("query join graph is not connected");
  }
  UnionFind uf(schema.table_count());
  for (EdgeId e : edges_) {
    const auto& se = schema.edge(e);
    if (uf.find(se.one) == uf.find(se.many)) throw ParseError("unsupported cyclic query");
    uf.unite(se.one, se.many);
  }
}

bool QueryGraph::contains(TableId t) const { return sorted_contains(vertices_, t); }
bool QueryGraph::contains_edge(EdgeId e) const { return sorted_contains(edges_, e); }

bool Subschema::contains(TableId t) const { return sorted_contains(vertices, t); }

bool Subschema::covers_edge(EdgeId e) const {
  return std::find(edge_choice.begin(), edge_choice.end(), e) != edge_choice.end();
}

std::optional<std::size_t> SubschemaHypergraph::find(std::string_view name) const {
  for (std::size_t i = 0; i < hyperedges.size(); ++i)
    if (hyperedges[i].name == name) return i;
  return std::nullopt;
}

SubschemaHypergraph partition(const SchemaGraph& schema) {
  SubschemaHypergraph h;
  h.vertex_count = schema.table_count();
  std::vector<bool> covered(schema.table_count(), false);

  for (TableId v = 0; v < schema.table_count(); ++v) {
    // Parallel in-edges grouped per in-neighbor.
    std::map<TableId, std::vector<EdgeId>> by_neighbor;
    for (EdgeId e : schema.in_edges(v)) by_neighbor[schema.edge(e).one].push_back(e);
    if (by_neighbor.empty()) continue;

    std::vector<TableId> vertices{v};
    std::vector<std::vector<EdgeId>> edges_list;
    for (const auto& [u, es] : by_neighbor) {
      vertices.push_back(u);
      edges_list.push_back(es);
    }
    std::sort(vertices.begin(), vertices.end());
    for (TableId t : vertices) covered[t] = true;

    // Cartesian product over the per-neighbor edge sets (odometer order).
    std::size_t combos = 1;
    for (const auto& es : edges_list) combos *= es.size();
    std::vector<std::size_t> digit(edges_list.size(), 0);
    for (std::size_t k = 0; k < combos; ++k) {
      Subschema s;
      s.center = v;
      s.vertices = vertices;
      for (std::size_t i = 0; i < edges_list.size(); ++i) s.edge_choice.push_back(edges_list[i][digit[i]]);
      s.name = schema.table(v).name;
      if (combos > 1) s.name += "#" + std::to_string(k);
      h.hyperedges.push_back(std::move(s));
      for (std::size_t i = edges_list.size(); i-- > 0;) {
        if (++digit[i] < edges_list[i].size()) break;
        digit[i] = 0;
      }
    }
  }

  for (TableId v = 0; v < schema.table_count(); ++v) {
    if (covered[v]) continue;
    Subschema s;
    s.center = v;
    s.vertices = {v};
    s.name = schema.table(v).name;
    h.hyperedges.push_back(std::move(s));
  }

  for (auto& s : h.hyperedges) {
    for (TableId u : s.vertices)
      for (EdgeId e : schema.out_edges(u)) {
        const TableId w = schema.edge(e).many;
        if (!s.contains(w)) s.external_fanout_edges.push_back(e);
      }
    std::sort(s.external_fanout_edges.begin(), s.external_fanout_edges.end());
  }

  std::stable_sort(h.hyperedges.begin(), h.hyperedges.end(), [&](const Subschema& a, const Subschema& b) {
    const auto& na = schema.table(a.center).name;
    const auto& nb = schema.table(b.center).name;
    if (na != nb) return na < nb;
    return a.edge_choice < b.edge_choice;
  });
  return h;
}

bool check_connected(const SubschemaHypergraph& h, const SchemaGraph& schema) {
  const std::size_t n = schema.table_count();
  if (n == 0) return true;
  UnionFind uf(n);
  for (const auto& s : h.hyperedges)
    for (TableId t : s.vertices) uf.unite(s.vertices.front(), t);
  const auto root = uf.find(0);
  for (TableId v = 1; v < n; ++v)
    if (uf.find(v) != root) return false;
  return true;
}

std::vector<std::size_t> select_subschemas(const SubschemaHypergraph& h,
                                           const SchemaGraph& schema,
                                           const QueryGraph& q) {
  std::vector<std::size_t> selected;

  if (q.edges().empty()) {
    const TableId t = q.vertices().front();
    std::optional<std::size_t> best;
    auto rank = [&](std::size_t i) {
      const auto& s = h.hyperedges[i];
      return std::make_tuple(s.center == t ? 0 : 1, s.vertices.size(), i);
    };
    for (std::size_t i = 0; i < h.hyperedges.size(); ++i)
      if (h.hyperedges[i].contains(t) && (!best || rank(i) < rank(*best))) best = i;
    if (!best) throw EstimationError("uncoverable query: no subschema contains table " + schema.table(t).name);
    return {*best};
  }

  std::set<EdgeId> uncovered(q.edges().begin(), q.edges().end());
  for (EdgeId e : q.edges()) {
    bool any = false;
    for (const auto& s : h.hyperedges) any = any || s.covers_edge(e);
    if (!any) throw EstimationError("uncoverable query: no subschema covers edge " + schema.edge_name(e));
  }

  // Greedy cover; ties go to smaller vertex sets, then hypergraph order.
  while (!uncovered.empty()) {
    std::optional<std::size_t> best;
    std::size_t best_gain = 0;
    for (std::size_t i = 0; i < h.hyperedges.size(); ++i) {
      const auto& s = h.hyperedges[i];
      std::size_t gain = 0;
      for (EdgeId e : s.edge_choice) gain += uncovered.count(e);
      if (gain == 0) continue;
      if (!best || gain > best_gain ||
          (gain == best_gain && s.vertices.size() < h.hyperedges[*best].vertices.size())) {
        best = i;
        best_gain = gain;
      }
    }
    for (EdgeId e : h.hyperedges[*best].edge_choice) uncovered.erase(e);
    selected.push_back(*best);
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

TraversalPlan build_traversal_plan(const SubschemaHypergraph& h,
                                   const SchemaGraph& schema,
                                   const std::vector<std::size_t>& selected,
                                   const QueryGraph& q,
                                   RootChoice root_choice) {
  if (selected.empty()) throw EstimationError("no subschemas selected");
  TraversalPlan plan;
  std::size_t root_pos = 0;
  if (root_choice.seed) {
    Rng rng(mix_seed(*root_choice.seed));
    root_pos = uniform_index(rng, selected.size());
  }
  plan.root = selected[root_pos];

  auto shared_query_tables = [&](std::size_t a, std::size_t b) {
    std::vector<TableId> out;
    for (TableId t : h.hyperedges[a].vertices)
      if (q.contains(t) && h.hyperedges[b].contains(t)) out.push_back(t);
    return out;
  };

  std::vector<bool> visited(h.hyperedges.size(), false);
  std::vector<std::size_t> order{plan.root};
  visited[plan.root] = true;
  for (std::size_t head = 0; head < order.size(); ++head) {
    const std::size_t e = order[head];
    TraversalStep step;
    step.hyperedge = e;
    std::set<TableId> common;
    std::set<EdgeId> fanouts;
    for (std::size_t f : selected) {
      if (visited[f]) continue;
      auto shared = shared_query_tables(e, f);
      if (shared.empty()) continue;
      visited[f] = true;
      order.push_back(f);
      step.successors.push_back(f);
      common.insert(shared.begin(), shared.end());
      const auto& fs = h.hyperedges[f];
      for (EdgeId qe : q.edges()) {
        const auto& se = schema.edge(qe);
        if (fs.contains(se.one) && fs.contains(se.many) && h.hyperedges[e].contains(se.one) &&
            !h.hyperedges[e].contains(se.many))
          fanouts.insert(qe);
      }
    }
    step.common_tables.assign(common.begin(), common.end());
    step.fanout_edges.assign(fanouts.begin(), fanouts.end());
    plan.steps.push_back(std::move(step));
  }
  if (order.size() != selected.size())
    throw EstimationError("internal error: selected subschemas do not form a connected tree over the query");
  return plan;
}

}  // namespace cinest
