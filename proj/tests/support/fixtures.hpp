#pragma once

// Shared test data and brute-force reference implementations. Nothing here
// calls into the library code under test except for construction and raw
// value lookup.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cinest/joiner.hpp"
#include "cinest/query.hpp"
#include "cinest/schema_graph.hpp"
#include "cinest/synth.hpp"
#include "cinest/table.hpp"

namespace fixtures {

using Cell = std::optional<std::string>;
using Rows = std::vector<std::vector<Cell>>;

// Row-major cells in declared column order, per table name.
cinest::Database make_db(const cinest::SchemaGraph& schema, const std::map<std::string, Rows>& rows);

// S, T, U, V, W with T->S, T->U, T->W, V->U.
cinest::SchemaGraph snowflake_schema();
// posts.id feeds postlinks twice (post_id, related_post_id).
cinest::SchemaGraph parallel_edge_schema();

// Random DAG over 2..max_tables tables. Connected unless `connected` is
// false, in which case the tree step is skipped and edges are sparse.
cinest::SchemaGraph random_dag_schema(std::uint64_t seed, std::size_t max_tables, bool connected = true);

bool union_find_connected(std::size_t vertices, const std::vector<std::vector<std::size_t>>& groups);
bool schema_connected(const cinest::SchemaGraph& schema);
bool hypergraph_connected(const cinest::SubschemaHypergraph& h);

// Raw-value predicate semantics: integers compare numerically, categorical
// values bytewise, NULL never qualifies.
bool raw_satisfies(cinest::ColumnKind kind, const Cell& value, const cinest::PredicateSpec& p);
Cell raw_value(const cinest::Database& db, cinest::TableId t, std::size_t column, std::size_t row);

// Inner join row count by nested loops over raw values.
std::uint64_t nested_loop_count(const cinest::Database& db, const cinest::QuerySpec& q);

// Full outer join of a star subschema by definition: every center row with
// all combinations of matching dimension rows (NULL when none match), plus
// each dimension row no center row references. One entry per table of
// s.vertices, kNoRow for NULL padding.
std::vector<std::vector<std::uint32_t>> nested_loop_star_join(const cinest::Database& db, const cinest::Subschema& s);

// Count of many-side rows whose key equals the given one-side row's key.
std::uint32_t raw_fanout(const cinest::Database& db, cinest::EdgeId e, std::uint32_t one_row);

// Pearson chi-square statistic and its upper-tail p-value.
struct ChiSquare {
  double statistic = 0;
  std::size_t dof = 0;
  double p_value = 0;
};
ChiSquare chi_square(const std::vector<double>& observed, const std::vector<double>& expected);

// Smaller copy of the default synthetic database.
cinest::SynthSpec small_spec(std::uint64_t seed = 3);

std::string temp_dir(const std::string& tag);

}  // namespace fixtures
