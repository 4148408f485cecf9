#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cinest {

using TableId = std::size_t;
using EdgeId = std::size_t;

enum class ColumnKind { categorical, integer };

std::string_view to_string(ColumnKind kind);
ColumnKind column_kind_from_string(std::string_view s);

struct ColumnDecl {
  std::string name;
  ColumnKind kind = ColumnKind::integer;
};

struct TableDecl {
  std::string name;
  std::vector<ColumnDecl> columns;

  std::optional<std::size_t> column_index(std::string_view column) const;
};

// Foreign-key edge: one.one_column = many.many_column, `one` is the "one" side
// of a one-to-many relationship. Edges point from the one side to the many side.
struct SchemaEdge {
  TableId one = 0;
  TableId many = 0;
  std::size_t one_column = 0;
  std::size_t many_column = 0;
};

// Edge written as qualified column names, e.g. {"T.id", "U.t_id"}.
struct EdgeSpec {
  std::string one;
  std::string many;
};

// "T.a" -> ("T", "a"). Throws ParseError when there is no dot.
std::pair<std::string, std::string> split_qualified(std::string_view qualified);

// Labeled directed acyclic multigraph of tables and foreign keys.
// Immutable after construction; the constructor enforces the invariants
// (no self-loops, acyclic, every label names existing columns).
class SchemaGraph {
 public:
  SchemaGraph() = default;
  SchemaGraph(std::vector<TableDecl> tables, const std::vector<EdgeSpec>& edges);

  static SchemaGraph from_json(const nlohmann::json& j);
  static SchemaGraph load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  std::size_t table_count() const { return tables_.size(); }
  const std::vector<TableDecl>& tables() const { return tables_; }
  const TableDecl& table(TableId id) const { return tables_.at(id); }
  std::optional<TableId> find_table(std::string_view name) const;
  TableId table_id(std::string_view name) const;

  const std::vector<SchemaEdge>& edges() const { return edges_; }
  const SchemaEdge& edge(EdgeId id) const { return edges_.at(id); }
  std::optional<EdgeId> find_edge(const EdgeSpec& spec) const;
  std::vector<EdgeId> in_edges(TableId v) const;
  std::vector<EdgeId> out_edges(TableId u) const;

  // "T.id->U.t_id"
  std::string edge_name(EdgeId id) const;
  std::string column_name(TableId t, std::size_t column) const;

  // True when the column takes part in any foreign-key edge.
  bool is_join_key(TableId t, std::size_t column) const;

  bool connected_undirected() const;

 private:
  std::vector<TableDecl> tables_;
  std::vector<SchemaEdge> edges_;
};

// Tree-shaped, simple subgraph of the schema graph targeted by a query.
class QueryGraph {
 public:
  QueryGraph() = default;
  // Validates: edges exist, endpoints inside `vertices`, undirected tree,
  // no parallel edges. Throws ParseError("unsupported cyclic query") etc.
  QueryGraph(const SchemaGraph& schema, std::vector<TableId> vertices, std::vector<EdgeId> edges);

  const std::vector<TableId>& vertices() const { return vertices_; }
  const std::vector<EdgeId>& edges() const { return edges_; }
  bool contains(TableId t) const;
  bool contains_edge(EdgeId e) const;

 private:
  std::vector<TableId> vertices_;  // sorted
  std::vector<EdgeId> edges_;      // sorted
};

// Closed in-neighborhood of `center` with one chosen edge per in-neighbor.
struct Subschema {
  std::string name;
  TableId center = 0;
  std::vector<TableId> vertices;               // sorted, includes center
  std::vector<EdgeId> edge_choice;             // every edge targets center
  std::vector<EdgeId> external_fanout_edges;   // (u, w): u inside, w outside

  bool contains(TableId t) const;
  bool covers_edge(EdgeId e) const;
};

struct SubschemaHypergraph {
  std::size_t vertex_count = 0;
  std::vector<Subschema> hyperedges;  // sorted by (center name, edge_choice)

  std::optional<std::size_t> find(std::string_view name) const;
};

SubschemaHypergraph partition(const SchemaGraph& schema);

bool check_connected(const SubschemaHypergraph& h, const SchemaGraph& schema);

// Indices into h.hyperedges forming a minimal cover of the query edges.
std::vector<std::size_t> select_subschemas(const SubschemaHypergraph& h,
                                           const SchemaGraph& schema,
                                           const QueryGraph& q);

struct TraversalStep {
  std::size_t hyperedge = 0;
  std::vector<std::size_t> successors;
  // Tables shared with at least one successor; their attributes are
  // sampled into the bank for the successors.
  std::vector<TableId> common_tables;
  // Query edges (u, w) leaving this hyperedge into a successor, u shared.
  std::vector<EdgeId> fanout_edges;
};

struct TraversalPlan {
  std::size_t root = 0;
  std::vector<TraversalStep> steps;  // breadth-first from root
};

// Root selection: without a seed the first selected hyperedge in
// (center name, edge_choice) order; with a seed a uniform pick.
struct RootChoice {
  std::optional<std::uint64_t> seed;
};

TraversalPlan build_traversal_plan(const SubschemaHypergraph& h,
                                   const SchemaGraph& schema,
                                   const std::vector<std::size_t>& selected,
                                   const QueryGraph& q,
                                   RootChoice root_choice = {});

}  // namespace cinest
