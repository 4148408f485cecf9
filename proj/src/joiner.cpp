#include "cinest/joiner.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <optional>

#include "cinest/error.hpp"
#include "cinest/random.hpp"

namespace cinest {

namespace {

constexpr char kSampleMagic[5] = {'C', 'I', 'N', 'J', '1'};

struct Neighbor {
  EdgeId edge;
  std::size_t slot;
};

// Shared machinery for tree-shaped joins: adjacency by slot and the key of
// a table row toward a neighbor, expressed in the one-side key code space.
class TreeWalker {
 public:
  TreeWalker(const Database& db, const AttributeCatalog& catalog, const JoinTree& tree)
      : db_(db), catalog_(catalog), tree_(tree), adj_(tree.tables.size()) {
    for (EdgeId e : tree.edges) {
      const auto& se = db.schema.edge(e);
      const auto a = slot_of(se.one), b = slot_of(se.many);
      adj_[a].push_back({e, b});
      adj_[b].push_back({e, a});
    }
  }

  std::size_t slot_of(TableId t) const {
    auto it = std::find(tree_.tables.begin(), tree_.tables.end(), t);
    if (it == tree_.tables.end()) throw Error("table outside join tree");
    return static_cast<std::size_t>(it - tree_.tables.begin());
  }

  std::vector<Neighbor> children(std::size_t slot, std::optional<EdgeId> from) const {
    std::vector<Neighbor> out;
    for (const auto& n : adj_[slot])
      if (!from || n.edge != *from) out.push_back(n);
    return out;
  }

  // One-side key code of `row` of the table in `slot`, along edge e.
  Code key(std::size_t slot, std::uint32_t row, EdgeId e) const {
    if (row == kNoRow) return kNullCode;
    const auto& se = db_.schema.edge(e);
    const TableId t = tree_.tables[slot];
    if (t == se.one) return db_.column(se.one, se.one_column).code(row);
    return catalog_.edge_index(e).many_to_one_code[db_.column(se.many, se.many_column).code(row)];
  }

  std::size_t key_space(EdgeId e) const {
    const auto& se = db_.schema.edge(e);
    return db_.column(se.one, se.one_column).domain_size();
  }

  std::size_t rows(std::size_t slot) const { return db_.table(tree_.tables[slot]).row_count(); }
  std::size_t width() const { return tree_.tables.size(); }

  struct Counted {
    std::uint64_t total = 0;
    std::vector<std::uint64_t> by_key;  // tuples per one-side key code toward the parent
  };

  Counted count(std::size_t slot, std::optional<EdgeId> from) const {
    const auto kids = children(slot, from);
    std::vector<Counted> sub;
    for (const auto& k : kids) sub.push_back(count(k.slot, k.edge));
    std::vector<std::vector<bool>> used(kids.size());
    for (std::size_t j = 0; j < kids.size(); ++j) used[j].assign(sub[j].by_key.size(), false);

    Counted out;
    if (from) out.by_key.assign(key_space(*from), 0);
    for (std::uint32_t r = 0; r < rows(slot); ++r) {
      std::uint64_t w = 1;
      for (std::size_t j = 0; j < kids.size(); ++j) {
        const Code k = key(slot, r, kids[j].edge);
        if (k == kNullCode) continue;
        w *= std::max<std::uint64_t>(1, sub[j].by_key[k]);
        used[j][k] = true;
      }
      out.total += w;
      if (from) {
        const Code pk = key(slot, r, *from);
        if (pk != kNullCode) out.by_key[pk] += w;
      }
    }
    for (std::size_t j = 0; j < kids.size(); ++j) {
      std::uint64_t matched = 0;
      for (std::size_t k = 1; k < sub[j].by_key.size(); ++k)
        if (used[j][k]) matched += sub[j].by_key[k];
      out.total += sub[j].total - matched;
    }
    return out;
  }

  // Flattened tuples (stride width()) of the subtree rooted at `slot`.
  std::vector<std::uint32_t> build(std::size_t slot, std::optional<EdgeId> from) const {
    const std::size_t W = width();
    const auto kids = children(slot, from);
    std::vector<std::vector<std::uint32_t>> sub;
    std::vector<std::vector<std::vector<std::size_t>>> groups(kids.size());
    for (std::size_t j = 0; j < kids.size(); ++j) {
      sub.push_back(build(kids[j].slot, kids[j].edge));
      groups[j].resize(key_space(kids[j].edge));
      const std::size_t n = sub[j].size() / W;
      for (std::size_t i = 0; i < n; ++i) {
        const Code k = key(kids[j].slot, sub[j][i * W + kids[j].slot], kids[j].edge);
        if (k != kNullCode) groups[j][k].push_back(i);
      }
    }
    std::vector<std::vector<bool>> used(kids.size());
    for (std::size_t j = 0; j < kids.size(); ++j) used[j].assign(groups[j].size(), false);

    std::vector<std::uint32_t> out;
    std::vector<std::uint32_t> combos, next;
    for (std::uint32_t r = 0; r < rows(slot); ++r) {
      combos.assign(W, kNoRow);
      combos[slot] = r;
      for (std::size_t j = 0; j < kids.size(); ++j) {
        const Code k = key(slot, r, kids[j].edge);
        if (k == kNullCode || groups[j][k].empty()) continue;
        used[j][k] = true;
        next.clear();
        const std::size_t nc = combos.size() / W;
        for (std::size_t c = 0; c < nc; ++c)
          for (std::size_t i : groups[j][k]) {
            const std::size_t base = next.size();
            next.insert(next.end(), combos.begin() + static_cast<std::ptrdiff_t>(c * W),
                        combos.begin() + static_cast<std::ptrdiff_t>((c + 1) * W));
            for (std::size_t s = 0; s < W; ++s)
              if (sub[j][i * W + s] != kNoRow) next[base + s] = sub[j][i * W + s];
          }
        combos.swap(next);
      }
      out.insert(out.end(), combos.begin(), combos.end());
    }
    // Child-subtree tuples that no row here joins with, NULL-padded.
    for (std::size_t j = 0; j < kids.size(); ++j) {
      const std::size_t n = sub[j].size() / W;
      for (std::size_t i = 0; i < n; ++i) {
        const Code k = key(kids[j].slot, sub[j][i * W + kids[j].slot], kids[j].edge);
        if (k != kNullCode && used[j][k]) continue;
        out.insert(out.end(), sub[j].begin() + static_cast<std::ptrdiff_t>(i * W),
                   sub[j].begin() + static_cast<std::ptrdiff_t>((i + 1) * W));
      }
    }
    return out;
  }

 private:
  const Database& db_;
  const AttributeCatalog& catalog_;
  const JoinTree& tree_;
  std::vector<std::vector<Neighbor>> adj_;
};

// Slot lookups for encode_tuple, resolved once per relation.
class TupleEncoder {
 public:
  TupleEncoder(const Database& db, const AttributeCatalog& catalog, const AttributeLayout& layout,
               const std::vector<TableId>& tables)
      : db_(db), catalog_(catalog), layout_(layout) {
    for (std::size_t p = 0; p < layout.size(); ++p) {
      const auto& a = catalog.at(layout.attr(p));
      auto it = std::find(tables.begin(), tables.end(), a.table);
      if (it == tables.end()) throw Error("attribute " + a.name + " does not belong to the joined tables");
      slot_.push_back(static_cast<std::size_t>(it - tables.begin()));
    }
  }

  void encode(std::span<const std::uint32_t> tuple, std::span<Code> out) const {
    for (std::size_t p = 0; p < layout_.size(); ++p) {
      const auto& a = catalog_.at(layout_.attr(p));
      const std::uint32_t row = tuple[slot_[p]];
      switch (a.kind) {
        case AttributeKind::base:
          out[p] = row == kNoRow ? kNullCode : db_.column(a.table, a.column).code(row);
          break;
        case AttributeKind::table_flag:
          out[p] = row == kNoRow ? 0 : 1;
          break;
        case AttributeKind::fanout:
          out[p] = catalog_.fanout_code(a.edge, row == kNoRow ? 0 : catalog_.edge_index(a.edge).child_count[row]);
          break;
      }
    }
  }

 private:
  const Database& db_;
  const AttributeCatalog& catalog_;
  const AttributeLayout& layout_;
  std::vector<std::size_t> slot_;
};

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw LoadError("join sample file truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

JoinTree subschema_tree(const Subschema& s) {
  JoinTree t;
  t.tables.push_back(s.center);
  for (TableId v : s.vertices)
    if (v != s.center) t.tables.push_back(v);
  t.edges = s.edge_choice;
  return t;
}

JoinTree universal_tree(const SchemaGraph& schema) {
  if (schema.edges().size() + 1 != schema.table_count() || !schema.connected_undirected())
    throw EstimationError("universal relation requires a schema that is a tree (no parallel edges, connected)");
  JoinTree t;
  for (TableId v = 0; v < schema.table_count(); ++v) t.tables.push_back(v);
  for (EdgeId e = 0; e < schema.edges().size(); ++e) t.edges.push_back(e);
  return t;
}

void encode_tuple(const Database& db, const AttributeCatalog& catalog, const AttributeLayout& layout,
                  const std::vector<TableId>& tables, std::span<const std::uint32_t> tuple, std::span<Code> out) {
  TupleEncoder(db, catalog, layout, tables).encode(tuple, out);
}

std::uint64_t full_outer_join_size(const Database& db, const AttributeCatalog& catalog, const JoinTree& tree) {
  return TreeWalker(db, catalog, tree).count(0, std::nullopt).total;
}

JoinedRelation materialize(const Database& db, const AttributeCatalog& catalog, const JoinTree& tree,
                           const AttributeLayout& layout, std::uint64_t limit) {
  TreeWalker walker(db, catalog, tree);
  const auto size = walker.count(0, std::nullopt).total;
  if (size > limit)
    throw EstimationError("full outer join has " + std::to_string(size) + " rows, above the materialization limit of " +
                          std::to_string(limit) + "; use sampling instead");
  JoinedRelation rel;
  rel.layout = layout;
  rel.tables = tree.tables;
  rel.tuples = walker.build(0, std::nullopt);
  rel.row_count = rel.tuples.size() / tree.tables.size();
  rel.codes.resize(rel.row_count * layout.size());
  TupleEncoder enc(db, catalog, rel.layout, rel.tables);
  const std::size_t W = tree.tables.size();
  for (std::size_t r = 0; r < rel.row_count; ++r)
    enc.encode(std::span<const std::uint32_t>(rel.tuples).subspan(r * W, W),
               std::span<Code>(rel.codes).subspan(r * layout.size(), layout.size()));
  return rel;
}

JoinedRelation materialize(const Database& db, const AttributeCatalog& catalog, const Subschema& s,
                           std::uint64_t limit) {
  return materialize(db, catalog, subschema_tree(s), subschema_layout(catalog, db.schema, s), limit);
}

JoinSample sample_join(const Database& db, const AttributeCatalog& catalog, const Subschema& s, std::size_t n,
                       std::uint64_t seed) {
  if (n < 1) throw Error("sample_join needs n >= 1");
  const JoinTree tree = subschema_tree(s);
  const std::size_t W = tree.tables.size();
  const TableId center = s.center;
  const auto& center_table = db.table(center);

  // Dimension j sits in slot j + 1 and joins through s.edge_choice[j].
  struct Dim {
    EdgeId edge;
    const EdgeIndex* index;
    const Column* center_key;
    std::vector<std::uint32_t> anti_rows;
  };
  std::vector<Dim> dims;
  for (std::size_t j = 0; j < s.edge_choice.size(); ++j) {
    const EdgeId e = s.edge_choice[j];
    const auto& se = db.schema.edge(e);
    if (tree.tables[j + 1] != se.one) throw Error("subschema edge order does not match its join tree");
    Dim d{e, &catalog.edge_index(e), &db.column(se.many, se.many_column), {}};
    const Column& dim_key = db.column(se.one, se.one_column);
    for (std::uint32_t r = 0; r < dim_key.row_count(); ++r) {
      const Code k = dim_key.code(r);
      if (k == kNullCode || d.index->many_rows[k].empty()) d.anti_rows.push_back(r);
    }
    dims.push_back(std::move(d));
  }

  std::vector<std::uint64_t> cumulative(center_table.row_count());
  std::uint64_t total = 0;
  for (std::size_t r = 0; r < center_table.row_count(); ++r) {
    std::uint64_t w = 1;
    for (const auto& d : dims) w *= std::max<std::size_t>(1, d.index->parents_of_many_row(*d.center_key, r).size());
    total += w;
    cumulative[r] = total;
  }
  const std::uint64_t center_weight = total;
  for (const auto& d : dims) total += d.anti_rows.size();
  if (total == 0) throw Error("empty relation: subschema " + s.name + " has no rows to sample");

  JoinSample out;
  out.layout = subschema_layout(catalog, db.schema, s);
  out.tables = tree.tables;
  out.sample_count = n;
  out.seed = seed;
  out.join_size = total;
  out.codes.resize(n * out.layout.size());
  out.tuples.assign(n * W, kNoRow);
  TupleEncoder enc(db, catalog, out.layout, out.tables);

  Rng rng(mix_seed(seed));
  for (std::size_t i = 0; i < n; ++i) {
    std::span<std::uint32_t> tuple(out.tuples.data() + i * W, W);
    std::uint64_t u = uniform_index(rng, total);
    if (u < center_weight) {
      const auto r = static_cast<std::uint32_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
      tuple[0] = r;
      for (std::size_t j = 0; j < dims.size(); ++j) {
        auto parents = dims[j].index->parents_of_many_row(*dims[j].center_key, r);
        if (!parents.empty()) tuple[j + 1] = parents[uniform_index(rng, parents.size())];
      }
    } else {
      u -= center_weight;
      for (std::size_t j = 0; j < dims.size(); ++j) {
        if (u < dims[j].anti_rows.size()) {
          tuple[j + 1] = dims[j].anti_rows[u];
          break;
        }
        u -= dims[j].anti_rows.size();
      }
    }
    enc.encode(tuple, std::span<Code>(out.codes).subspan(i * out.layout.size(), out.layout.size()));
  }
  return out;
}

JoinSample sample_rows(const JoinedRelation& rel, std::size_t n, std::uint64_t seed) {
  if (rel.row_count == 0) throw Error("empty relation");
  JoinSample out;
  out.layout = rel.layout;
  out.tables = rel.tables;
  out.sample_count = n;
  out.seed = seed;
  out.join_size = rel.row_count;
  const std::size_t A = rel.layout.size(), W = rel.tables.size();
  out.codes.resize(n * A);
  out.tuples.resize(n * W);
  Rng rng(mix_seed(seed));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = uniform_index(rng, rel.row_count);
    std::copy_n(rel.codes.begin() + static_cast<std::ptrdiff_t>(r * A), A, out.codes.begin() + static_cast<std::ptrdiff_t>(i * A));
    std::copy_n(rel.tuples.begin() + static_cast<std::ptrdiff_t>(r * W), W, out.tuples.begin() + static_cast<std::ptrdiff_t>(i * W));
  }
  return out;
}

std::uint64_t true_cardinality(const Query& q, const Database& db, const AttributeCatalog& catalog) {
  JoinTree tree;
  tree.tables = q.graph.vertices();
  tree.edges = q.graph.edges();
  TreeWalker walker(db, catalog, tree);

  // Per-row count of joined results in the subtree below `slot`.
  auto solve = [&](auto&& self, std::size_t slot, std::optional<EdgeId> from) -> std::vector<std::uint64_t> {
    const TableId t = tree.tables[slot];
    std::vector<std::uint64_t> w(walker.rows(slot));
    for (std::size_t r = 0; r < w.size(); ++r) w[r] = row_satisfies(q, db, t, r) ? 1 : 0;
    for (const auto& kid : walker.children(slot, from)) {
      const auto child = self(self, kid.slot, kid.edge);
      std::vector<std::uint64_t> agg(walker.key_space(kid.edge), 0);
      for (std::uint32_t r = 0; r < child.size(); ++r) {
        const Code k = walker.key(kid.slot, r, kid.edge);
        if (k != kNullCode) agg[k] += child[r];
      }
      for (std::uint32_t r = 0; r < w.size(); ++r) {
        if (w[r] == 0) continue;
        const Code k = walker.key(slot, r, kid.edge);
        w[r] = k == kNullCode ? 0 : w[r] * agg[k];
      }
    }
    return w;
  };
  std::uint64_t total = 0;
  for (auto v : solve(solve, 0, std::nullopt)) total += v;
  return total;
}

void save_join_sample(const JoinSample& sample, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  nlohmann::json header;
  header["layout"] = sample.layout.describe();
  header["layout_hash"] = sample.layout.hash();
  header["tables"] = sample.tables;
  header["sample_count"] = sample.sample_count;
  header["seed"] = sample.seed;
  header["join_size"] = sample.join_size;
  const std::string text = header.dump();
  out.write(kSampleMagic, sizeof kSampleMagic);
  write_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const std::size_t A = sample.layout.size();
  for (std::size_t p = 0; p < A; ++p)
    for (std::size_t i = 0; i < sample.sample_count; ++i) write_u32(out, sample.codes[i * A + p]);
  if (!out) throw Error("write failed: " + path.string());
}

JoinSample load_join_sample(const std::filesystem::path& path, const AttributeCatalog& catalog) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  char magic[sizeof kSampleMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kSampleMagic, sizeof magic) != 0)
    throw LoadError(path.string() + ": not a CINJ1 join sample file");
  const std::uint32_t len = read_u32(in);
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw LoadError(path.string() + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": corrupt header: " + e.what());
  }

  std::vector<AttrId> attrs;
  for (const auto& ja : header.at("layout")) {
    const auto name = ja.at("name").get<std::string>();
    auto id = catalog.find(name);
    if (!id || catalog.at(*id).domain_size != ja.at("domain").get<std::size_t>())
      throw LoadError(path.string() + ": attribute " + name + " does not match the loaded data");
    attrs.push_back(*id);
  }
  JoinSample s;
  s.layout = AttributeLayout(catalog, std::move(attrs));
  s.tables = header.at("tables").get<std::vector<TableId>>();
  s.sample_count = header.at("sample_count").get<std::size_t>();
  s.seed = header.at("seed").get<std::uint64_t>();
  s.join_size = header.at("join_size").get<std::uint64_t>();
  const std::size_t A = s.layout.size();
  s.codes.resize(s.sample_count * A);
  for (std::size_t p = 0; p < A; ++p)
    for (std::size_t i = 0; i < s.sample_count; ++i) {
      const Code c = read_u32(in);
      if (c >= s.layout.domain_size(p)) throw LoadError(path.string() + ": code out of range for " + s.layout.name(p));
      s.codes[i * A + p] = c;
    }
  return s;
}

}  // namespace cinest
