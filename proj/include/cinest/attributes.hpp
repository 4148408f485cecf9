#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cinest/schema_graph.hpp"
#include "cinest/table.hpp"

namespace cinest {

using AttrId = std::size_t;

enum class AttributeKind { base, table_flag, fanout };

// One modelled attribute of a joined relation. Identity is global: the same
// AttrId denotes the same values in every subschema, which is what lets
// samples drawn from one estimator condition another.
struct Attribute {
  std::string name;  // "T.a", "N:T", "F:T.id->U.t_id"
  AttributeKind kind = AttributeKind::base;
  TableId table = 0;        // base/flag: owner; fanout: the one side
  std::size_t column = 0;   // base only
  EdgeId edge = 0;          // fanout only
  std::size_t domain_size = 0;
  std::vector<std::uint32_t> fanout_values;  // fanout only: code -> count
};

// Precomputed hash-join structure for one foreign-key edge.
struct EdgeIndex {
  // many-side key code -> one-side key code (0 when the value has no parent)
  std::vector<Code> many_to_one_code;
  // one-side key code -> rows of the one-side table holding that key
  std::vector<std::vector<std::uint32_t>> one_rows;
  // one-side key code -> rows of the many-side table referencing it
  std::vector<std::vector<std::uint32_t>> many_rows;
  // per one-side row: number of matching many-side rows
  std::vector<std::uint32_t> child_count;

  std::span<const std::uint32_t> children_of_one_row(const Column& one_key, std::size_t row) const;
  std::span<const std::uint32_t> parents_of_many_row(const Column& many_key, std::size_t row) const;
};

// Join key columns are never modelled. Base attributes are the remaining
// columns; every table has a flag; every edge has a fanout attribute.
class AttributeCatalog {
 public:
  AttributeCatalog() = default;
  explicit AttributeCatalog(const Database& db);

  std::size_t size() const { return attrs_.size(); }
  const Attribute& at(AttrId id) const { return attrs_.at(id); }
  const std::vector<Attribute>& attributes() const { return attrs_; }

  std::optional<AttrId> base(TableId t, std::size_t column) const;
  AttrId flag(TableId t) const { return flag_of_table_.at(t); }
  AttrId fanout(EdgeId e) const { return fanout_of_edge_.at(e); }
  std::optional<AttrId> find(std::string_view name) const;

  // Base attributes followed by the table flag.
  std::vector<AttrId> attributes_of(TableId t) const;

  const EdgeIndex& edge_index(EdgeId e) const { return edge_index_.at(e); }
  Code fanout_code(EdgeId e, std::uint32_t count) const;

 private:
  std::vector<Attribute> attrs_;
  std::vector<std::vector<std::optional<AttrId>>> base_of_column_;
  std::vector<AttrId> flag_of_table_;
  std::vector<AttrId> fanout_of_edge_;
  std::vector<EdgeIndex> edge_index_;
};

// Ordered attribute set of one joined relation.
class AttributeLayout {
 public:
  AttributeLayout() = default;
  AttributeLayout(const AttributeCatalog& catalog, std::vector<AttrId> attrs);

  std::size_t size() const { return attrs_.size(); }
  AttrId attr(std::size_t pos) const { return attrs_[pos]; }
  const std::vector<AttrId>& attrs() const { return attrs_; }
  std::size_t domain_size(std::size_t pos) const { return domains_[pos]; }
  const std::vector<std::size_t>& domain_sizes() const { return domains_; }
  const std::string& name(std::size_t pos) const { return names_[pos]; }
  std::optional<std::size_t> position(AttrId id) const;

  // FNV-1a over names and domain sizes.
  std::uint64_t hash() const { return hash_; }
  nlohmann::json describe() const;

 private:
  std::vector<AttrId> attrs_;
  std::vector<std::size_t> domains_;
  std::vector<std::string> names_;
  std::vector<AttributeKind> kinds_;
  std::uint64_t hash_ = 0;
};

// Base attributes of member tables, then their flags, then fanouts of the
// subschema's external edges.
AttributeLayout subschema_layout(const AttributeCatalog& catalog, const SchemaGraph& schema, const Subschema& s);

// Same shape over all tables and all edges (universal relation).
AttributeLayout universal_layout(const AttributeCatalog& catalog, const SchemaGraph& schema);

}  // namespace cinest
