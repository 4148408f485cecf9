#include "cinest/planner.hpp"

#include <bit>
#include <limits>

#include "cinest/error.hpp"

namespace cinest {

namespace {

bool is_connected(const Query& q, const SchemaGraph& schema, TableMask mask) {
  const auto& vs = q.graph.vertices();
  auto index = [&](TableId t) {
    for (std::size_t i = 0; i < vs.size(); ++i)
      if (vs[i] == t) return static_cast<int>(i);
    return -1;
  };
  const TableMask start = mask & (~mask + 1);
  TableMask reached = start;
  bool grew = true;
  while (grew) {
    grew = false;
    for (EdgeId e : q.graph.edges()) {
      const int a = index(schema.edge(e).one), b = index(schema.edge(e).many);
      const TableMask ma = TableMask{1} << a, mb = TableMask{1} << b;
      if (!(mask & ma) || !(mask & mb)) continue;
      if ((reached & ma) && !(reached & mb)) reached |= mb, grew = true;
      if ((reached & mb) && !(reached & ma)) reached |= ma, grew = true;
    }
  }
  return reached == mask;
}

}  // namespace

std::vector<TableMask> connected_subsets(const Query& q, const SchemaGraph& schema) {
  const std::size_t k = q.graph.vertices().size();
  if (k > 20) throw EstimationError("planner supports at most 20 tables");
  std::vector<TableMask> out;
  for (TableMask m = 1; m < (TableMask{1} << k); ++m)
    if (is_connected(q, schema, m)) out.push_back(m);
  return out;
}

std::vector<TableId> tables_of(const Query& q, TableMask mask) {
  std::vector<TableId> out;
  const auto& vs = q.graph.vertices();
  for (std::size_t i = 0; i < vs.size(); ++i)
    if (mask & (TableMask{1} << i)) out.push_back(vs[i]);
  return out;
}

CardinalityMap collect_cardinalities(const Query& q, const SchemaGraph& schema,
                                     const std::function<double(const Query&)>& source) {
  CardinalityMap cards;
  for (TableMask m : connected_subsets(q, schema)) {
    const auto tables = tables_of(q, m);
    try {
      cards[m] = source(subquery(q, schema, tables));
    } catch (const std::exception& e) {
      std::string names;
      for (TableId t : tables) names += (names.empty() ? "" : ",") + schema.table(t).name;
      throw EstimationError("subquery {" + names + "}: " + e.what());
    }
  }
  return cards;
}

Plan plan_query(const Query& q, const SchemaGraph& schema, const CardinalityMap& cards) {
  const std::size_t k = q.graph.vertices().size();
  if (k == 0) throw EstimationError("cannot plan an empty query");
  auto card = [&](TableMask m) {
    auto it = cards.find(m);
    if (it == cards.end()) throw EstimationError("missing cardinality for a connected subquery");
    return it->second;
  };
  struct Best {
    double cost;
    TableMask left;
  };
  std::map<TableMask, Best> best;
  for (TableMask m : connected_subsets(q, schema)) {
    if (std::popcount(m) == 1) {
      best[m] = {0.0, 0};
      continue;
    }
    Best b{0, 0};
    bool found = false;
    for (TableMask l = 1; l < m; ++l) {
      if ((l & m) != l) continue;
      const TableMask r = m ^ l;
      auto il = best.find(l), ir = best.find(r);
      if (il == best.end() || ir == best.end()) continue;
      const double c = card(m) + il->second.cost + ir->second.cost;
      if (!found || c < b.cost) b = {c, l}, found = true;
    }
    best[m] = b;
  }

  Plan plan;
  auto build = [&](auto&& self, TableMask m) -> int {
    PlanNode node;
    node.tables = m;
    node.cardinality = card(m);
    if (std::popcount(m) > 1) {
      const TableMask l = best.at(m).left;
      node.left = self(self, l);
      node.right = self(self, m ^ l);
    }
    plan.nodes.push_back(node);
    return static_cast<int>(plan.nodes.size()) - 1;
  };
  plan.root = build(build, (TableMask{1} << k) - 1);
  return plan;
}

double plan_cost(const Plan& plan, const CardinalityMap& cards) {
  double cost = 0;
  auto visit = [&](auto&& self, int i) -> double {
    const PlanNode& n = plan.nodes[static_cast<std::size_t>(i)];
    if (n.left < 0) return 0.0;
    auto it = cards.find(n.tables);
    if (it == cards.end()) throw EstimationError("missing cardinality for a plan node");
    return it->second + self(self, n.left) + self(self, n.right);
  };
  cost = visit(visit, plan.root);
  return cost;
}

double p_error(const Query& q, const SchemaGraph& schema, const CardinalityMap& estimated, const CardinalityMap& truth) {
  const double chosen = plan_cost(plan_query(q, schema, estimated), truth);
  const double optimal = plan_cost(plan_query(q, schema, truth), truth);
  if (optimal == 0) return chosen == 0 ? 1.0 : std::numeric_limits<double>::infinity();
  return chosen / optimal;
}

std::string describe(const Plan& plan, const Query& q, const SchemaGraph& schema) {
  auto visit = [&](auto&& self, int i) -> std::string {
    const PlanNode& n = plan.nodes[static_cast<std::size_t>(i)];
    if (n.left < 0) return schema.table(tables_of(q, n.tables).front()).name;
    return "(" + self(self, n.left) + " JOIN " + self(self, n.right) + ")";
  };
  return visit(visit, plan.root);
}

}  // namespace cinest
