#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cinest/query.hpp"
#include "cinest/schema_graph.hpp"

namespace cinest {

// Bit i stands for the i-th table of q.graph.vertices().
using TableMask = std::uint32_t;
using CardinalityMap = std::map<TableMask, double>;

std::vector<TableMask> connected_subsets(const Query& q, const SchemaGraph& schema);
std::vector<TableId> tables_of(const Query& q, TableMask mask);

// Asks `source` for every connected subquery; failures are rethrown with
// the subquery's tables named.
CardinalityMap collect_cardinalities(const Query& q, const SchemaGraph& schema,
                                     const std::function<double(const Query&)>& source);

struct PlanNode {
  TableMask tables = 0;
  int left = -1;  // -1 for leaves
  int right = -1;
  double cardinality = 0;
};

struct Plan {
  std::vector<PlanNode> nodes;
  int root = -1;
};

// Bushy DP over connected subsets minimizing C_out (sum of join node
// cardinalities). Ties go to the numerically smaller left subset.
Plan plan_query(const Query& q, const SchemaGraph& schema, const CardinalityMap& cards);

// C_out of a fixed plan under the given cardinalities.
double plan_cost(const Plan& plan, const CardinalityMap& cards);

// cost_true(plan under estimates) / cost_true(plan under truth); >= 1.
double p_error(const Query& q, const SchemaGraph& schema, const CardinalityMap& estimated, const CardinalityMap& truth);

std::string describe(const Plan& plan, const Query& q, const SchemaGraph& schema);

}  // namespace cinest
