#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cinest/schema_graph.hpp"
#include "cinest/table.hpp"

namespace cinest {

struct ColumnRef {
  TableId table = 0;
  std::size_t column = 0;
  auto operator<=>(const ColumnRef&) const = default;
};

// R_Q(A) as a membership mask over the codes of dom(A).
// An unconstrained attribute uses `full`, which also admits NULL; every
// range produced from a predicate excludes NULL.
class PredicateRange {
 public:
  PredicateRange() = default;
  static PredicateRange full(std::size_t domain_size);
  static PredicateRange none(std::size_t domain_size);

  std::size_t domain_size() const { return mask_.size(); }
  std::size_t count() const;
  bool contains(Code c) const { return c < mask_.size() && mask_[c] != 0; }
  void set(Code c, bool value) { mask_.at(c) = value ? 1 : 0; }
  void intersect(const PredicateRange& other);
  const std::vector<std::uint8_t>& mask() const { return mask_; }

 private:
  std::vector<std::uint8_t> mask_;
};

enum class CompareOp { eq, ne, lt, le, gt, ge, between, in };

std::string_view to_string(CompareOp op);
CompareOp compare_op_from_string(std::string_view s);

// Raw predicate as written in a workload file.
struct PredicateSpec {
  std::string column;  // "T.a"
  CompareOp op = CompareOp::eq;
  std::vector<std::string> values;
};

struct QuerySpec {
  std::vector<EdgeSpec> joins;
  std::vector<std::string> tables;  // optional; needed only for predicate-free single-table queries
  std::vector<PredicateSpec> predicates;
  std::optional<std::uint64_t> true_cardinality;
};

nlohmann::json to_json(const QuerySpec& spec);
QuerySpec query_spec_from_json(const nlohmann::json& j);

struct Query {
  std::string id;
  QueryGraph graph;
  // Only constrained columns appear; every other attribute has R_Q(A) = dom(A).
  std::map<ColumnRef, PredicateRange> predicates;
  std::optional<std::uint64_t> true_cardinality;

  const PredicateRange* range(ColumnRef c) const;
};

// Normalizes a raw predicate onto the column's code domain. Literals missing
// from the dictionary yield an empty equality set; range endpoints fall
// between neighbouring codes.
PredicateRange normalize_predicate(const Column& column, CompareOp op, const std::vector<std::string>& values);

// Resolves and validates a query spec against a loaded database.
Query make_query(const Database& db, const QuerySpec& spec, std::string id = {});

// Restriction of `q` to a connected subset of its tables: induced join edges
// and the predicates on those tables.
Query subquery(const Query& q, const SchemaGraph& schema, const std::vector<TableId>& tables);

// True iff `row` of table t satisfies every predicate the query has on t.
bool row_satisfies(const Query& q, const Database& db, TableId t, std::size_t row);

struct Workload {
  std::vector<QuerySpec> specs;
  std::vector<Query> queries;
};

Workload parse_workload(const std::filesystem::path& path, const Database& db);
Workload workload_from_json(const nlohmann::json& j, const Database& db);
nlohmann::json workload_to_json(const std::vector<QuerySpec>& specs);

}  // namespace cinest
