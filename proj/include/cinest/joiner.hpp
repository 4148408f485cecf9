#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "cinest/attributes.hpp"
#include "cinest/query.hpp"
#include "cinest/schema_graph.hpp"
#include "cinest/table.hpp"

namespace cinest {

inline constexpr std::uint32_t kNoRow = std::numeric_limits<std::uint32_t>::max();
inline constexpr std::uint64_t kDefaultMaterializeLimit = 5'000'000;

// Tables and foreign-key edges forming an undirected tree.
struct JoinTree {
  std::vector<TableId> tables;  // tables.front() is the traversal root
  std::vector<EdgeId> edges;
};

JoinTree subschema_tree(const Subschema& s);
// Whole schema; throws EstimationError unless the schema is a tree.
JoinTree universal_tree(const SchemaGraph& schema);

// Full outer join with TableFlag and Fanout attributes, stored row-major as
// codes over `layout`. `tuples` keeps the base-row index of each member
// table per joined row (kNoRow where the table is NULL-padded).
struct JoinedRelation {
  AttributeLayout layout;
  std::vector<TableId> tables;
  std::size_t row_count = 0;
  std::vector<Code> codes;                  // row_count * layout.size()
  std::vector<std::uint32_t> tuples;        // row_count * tables.size()

  Code code(std::size_t row, std::size_t pos) const { return codes[row * layout.size() + pos]; }
  std::uint32_t base_row(std::size_t row, std::size_t table_slot) const { return tuples[row * tables.size() + table_slot]; }
};

// Encodes one joined tuple (row index per slot of `tables`) over `layout`.
void encode_tuple(const Database& db, const AttributeCatalog& catalog, const AttributeLayout& layout,
                  const std::vector<TableId>& tables, std::span<const std::uint32_t> tuple, std::span<Code> out);

// Exact size of the full outer join, without materializing it.
std::uint64_t full_outer_join_size(const Database& db, const AttributeCatalog& catalog, const JoinTree& tree);

// Throws EstimationError when the join is larger than `limit` rows.
JoinedRelation materialize(const Database& db, const AttributeCatalog& catalog, const JoinTree& tree,
                           const AttributeLayout& layout, std::uint64_t limit = kDefaultMaterializeLimit);
JoinedRelation materialize(const Database& db, const AttributeCatalog& catalog, const Subschema& s,
                           std::uint64_t limit = kDefaultMaterializeLimit);

struct JoinSample {
  AttributeLayout layout;
  std::vector<TableId> tables;
  std::size_t sample_count = 0;
  std::uint64_t seed = 0;
  std::uint64_t join_size = 0;          // |J_e| of the sampled relation
  std::vector<Code> codes;              // sample_count * layout.size(), row-major
  std::vector<std::uint32_t> tuples;    // in-memory only; empty after load

  Code code(std::size_t row, std::size_t pos) const { return codes[row * layout.size() + pos]; }
};

// i.i.d. uniform rows of a subschema's full outer join by exact weights:
// center rows weighted by their dimension match products, plus one stratum
// of anti-joined rows per dimension. Identical output for identical inputs.
JoinSample sample_join(const Database& db, const AttributeCatalog& catalog, const Subschema& s, std::size_t n,
                       std::uint64_t seed);

// Uniform rows (with replacement) of an already materialized relation.
JoinSample sample_rows(const JoinedRelation& rel, std::size_t n, std::uint64_t seed);

// Inner-join result size of a tree query with pushed-down predicates.
std::uint64_t true_cardinality(const Query& q, const Database& db, const AttributeCatalog& catalog);

// CINJ1 columnar file: magic, layout descriptor, then one little-endian
// u32 code array per column.
void save_join_sample(const JoinSample& sample, const std::filesystem::path& path);
JoinSample load_join_sample(const std::filesystem::path& path, const AttributeCatalog& catalog);

}  // namespace cinest
