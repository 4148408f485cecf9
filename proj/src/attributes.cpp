#include "cinest/attributes.hpp"

#include <algorithm>
#include <set>

#include "cinest/error.hpp"
#include "cinest/random.hpp"

namespace cinest {

std::span<const std::uint32_t> EdgeIndex::children_of_one_row(const Column& one_key, std::size_t row) const {
  const Code c = one_key.code(row);
  if (c == kNullCode) return {};
  return many_rows[c];
}

std::span<const std::uint32_t> EdgeIndex::parents_of_many_row(const Column& many_key, std::size_t row) const {
  const Code c = many_to_one_code[many_key.code(row)];
  if (c == kNullCode) return {};
  return one_rows[c];
}

AttributeCatalog::AttributeCatalog(const Database& db) {
  const auto& schema = db.schema;
  base_of_column_.resize(schema.table_count());
  for (TableId t = 0; t < schema.table_count(); ++t) {
    const auto& decl = schema.table(t);
    base_of_column_[t].resize(decl.columns.size());
    for (std::size_t c = 0; c < decl.columns.size(); ++c) {
      if (schema.is_join_key(t, c)) continue;
      Attribute a;
      a.name = schema.column_name(t, c);
      a.kind = AttributeKind::base;
      a.table = t;
      a.column = c;
      a.domain_size = db.column(t, c).domain_size();
      base_of_column_[t][c] = attrs_.size();
      attrs_.push_back(std::move(a));
    }
  }
  for (TableId t = 0; t < schema.table_count(); ++t) {
    Attribute a;
    a.name = "N:" + schema.table(t).name;
    a.kind = AttributeKind::table_flag;
    a.table = t;
    a.domain_size = 2;
    flag_of_table_.push_back(attrs_.size());
    attrs_.push_back(std::move(a));
  }

  for (EdgeId e = 0; e < schema.edges().size(); ++e) {
    const auto& se = schema.edge(e);
    const Column& one_key = db.column(se.one, se.one_column);
    const Column& many_key = db.column(se.many, se.many_column);
    EdgeIndex idx;
    idx.many_to_one_code.assign(many_key.domain_size(), kNullCode);
    for (Code c = 1; c < many_key.domain_size(); ++c)
      if (auto oc = one_key.encode(*many_key.decode(c))) idx.many_to_one_code[c] = *oc;
    idx.one_rows.resize(one_key.domain_size());
    idx.many_rows.resize(one_key.domain_size());
    for (std::size_t r = 0; r < one_key.row_count(); ++r)
      if (one_key.code(r) != kNullCode) idx.one_rows[one_key.code(r)].push_back(static_cast<std::uint32_t>(r));
    for (std::size_t r = 0; r < many_key.row_count(); ++r) {
      const Code oc = idx.many_to_one_code[many_key.code(r)];
      if (oc != kNullCode) idx.many_rows[oc].push_back(static_cast<std::uint32_t>(r));
    }
    idx.child_count.resize(one_key.row_count(), 0);
    std::set<std::uint32_t> values{0};
    for (std::size_t r = 0; r < one_key.row_count(); ++r) {
      idx.child_count[r] = static_cast<std::uint32_t>(idx.children_of_one_row(one_key, r).size());
      values.insert(idx.child_count[r]);
    }

    Attribute a;
    a.name = "F:" + schema.edge_name(e);
    a.kind = AttributeKind::fanout;
    a.table = se.one;
    a.edge = e;
    a.fanout_values.assign(values.begin(), values.end());
    a.domain_size = a.fanout_values.size();
    fanout_of_edge_.push_back(attrs_.size());
    attrs_.push_back(std::move(a));
    edge_index_.push_back(std::move(idx));
  }
}

std::optional<AttrId> AttributeCatalog::base(TableId t, std::size_t column) const {
  return base_of_column_.at(t).at(column);
}

std::optional<AttrId> AttributeCatalog::find(std::string_view name) const {
  for (AttrId i = 0; i < attrs_.size(); ++i)
    if (attrs_[i].name == name) return i;
  return std::nullopt;
}

std::vector<AttrId> AttributeCatalog::attributes_of(TableId t) const {
  std::vector<AttrId> out;
  for (const auto& b : base_of_column_.at(t))
    if (b) out.push_back(*b);
  out.push_back(flag(t));
  return out;
}

Code AttributeCatalog::fanout_code(EdgeId e, std::uint32_t count) const {
  const auto& vals = attrs_.at(fanout(e)).fanout_values;
  auto it = std::lower_bound(vals.begin(), vals.end(), count);
  if (it == vals.end() || *it != count) throw Error("fanout value " + std::to_string(count) + " outside dictionary");
  return static_cast<Code>(it - vals.begin());
}

AttributeLayout::AttributeLayout(const AttributeCatalog& catalog, std::vector<AttrId> attrs) : attrs_(std::move(attrs)) {
  std::uint64_t h = fnv1a("cinest-layout");
  for (AttrId id : attrs_) {
    const auto& a = catalog.at(id);
    domains_.push_back(a.domain_size);
    names_.push_back(a.name);
    kinds_.push_back(a.kind);
    h = fnv1a(a.name, h);
    h = fnv1a(std::to_string(a.domain_size) + ";", h);
  }
  hash_ = h;
}

std::optional<std::size_t> AttributeLayout::position(AttrId id) const {
  for (std::size_t i = 0; i < attrs_.size(); ++i)
    if (attrs_[i] == id) return i;
  return std::nullopt;
}

nlohmann::json AttributeLayout::describe() const {
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t i = 0; i < attrs_.size(); ++i) {
    const char* kind = kinds_[i] == AttributeKind::base ? "base" : (kinds_[i] == AttributeKind::table_flag ? "flag" : "fanout");
    j.push_back({{"name", names_[i]}, {"kind", kind}, {"domain", domains_[i]}});
  }
  return j;
}

AttributeLayout subschema_layout(const AttributeCatalog& catalog, const SchemaGraph& schema, const Subschema& s) {
  std::vector<AttrId> attrs;
  for (TableId t : s.vertices)
    for (std::size_t c = 0; c < schema.table(t).columns.size(); ++c)
      if (auto b = catalog.base(t, c)) attrs.push_back(*b);
  for (TableId t : s.vertices) attrs.push_back(catalog.flag(t));
  for (EdgeId e : s.external_fanout_edges) attrs.push_back(catalog.fanout(e));
  return AttributeLayout(catalog, std::move(attrs));
}

AttributeLayout universal_layout(const AttributeCatalog& catalog, const SchemaGraph& schema) {
  std::vector<AttrId> attrs;
  for (TableId t = 0; t < schema.table_count(); ++t)
    for (std::size_t c = 0; c < schema.table(t).columns.size(); ++c)
      if (auto b = catalog.base(t, c)) attrs.push_back(*b);
  for (TableId t = 0; t < schema.table_count(); ++t) attrs.push_back(catalog.flag(t));
  for (EdgeId e = 0; e < schema.edges().size(); ++e) attrs.push_back(catalog.fanout(e));
  return AttributeLayout(catalog, std::move(attrs));
}

}  // namespace cinest
