#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "cinest/query.hpp"
#include "cinest/table.hpp"

namespace cinest {

// Five-table snowflake: T.id -> S.t_id, T.id -> U.t_id, T.id -> W.t_id,
// V.id -> U.v_id.
//   T(id, a int, b cat)  V(id, c int, d cat)  S(t_id, e int, f cat)
//   U(t_id, v_id, g int, h cat)  W(t_id, k int)
SchemaGraph synthetic_schema();

struct SynthSpec {
  std::size_t rows_s = 1000;
  std::size_t rows_t = 200;
  std::size_t rows_u = 1000;
  std::size_t rows_v = 100;
  std::size_t rows_w = 600;
  // Probability that a dependent attribute copies a function of its driver
  // inside the same table.
  double within_correlation = 0.7;
  // Strength of parent attributes on child attributes and on how many
  // children a parent row receives.
  double cross_correlation = 0.7;
  // Share of child rows whose foreign key matches no parent.
  double dangling = 0.05;

  std::size_t queries = 50;
  std::size_t min_tables = 1;
  std::size_t max_tables = 5;
  double predicate_probability = 0.6;  // per query table
  double weight_eq = 1;
  double weight_range = 1;
  double weight_in = 1;
  // Keep only queries whose cover uses exactly this many subschemas.
  std::optional<std::size_t> subschema_count;

  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  static SynthSpec from_json(const nlohmann::json& j);
};

Database generate_database(const SynthSpec& spec);

// Random connected query trees with stored true cardinalities; queries with
// an empty result are redrawn. Single-table queries target tables that
// center a subschema.
std::vector<QuerySpec> generate_workload(const Database& db, const SynthSpec& spec);

// schema.json, one CSV per table, workload.json.
void write_dataset(const std::filesystem::path& dir, const Database& db, const std::vector<QuerySpec>& workload);

}  // namespace cinest
