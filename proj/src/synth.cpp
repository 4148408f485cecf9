#include "cinest/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cinest/attributes.hpp"
#include "cinest/error.hpp"
#include "cinest/joiner.hpp"
#include "cinest/random.hpp"

namespace cinest {

SchemaGraph synthetic_schema() {
  using K = ColumnKind;
  std::vector<TableDecl> tables = {
      {"S", {{"t_id", K::integer}, {"e", K::integer}, {"f", K::categorical}}},
      {"T", {{"id", K::integer}, {"a", K::integer}, {"b", K::categorical}}},
      {"U", {{"t_id", K::integer}, {"v_id", K::integer}, {"g", K::integer}, {"h", K::categorical}}},
      {"V", {{"id", K::integer}, {"c", K::integer}, {"d", K::categorical}}},
      {"W", {{"t_id", K::integer}, {"k", K::integer}}},
  };
  return SchemaGraph(std::move(tables), {{"T.id", "S.t_id"}, {"T.id", "U.t_id"}, {"T.id", "W.t_id"}, {"V.id", "U.v_id"}});
}

nlohmann::json SynthSpec::to_json() const {
  nlohmann::json j = {{"rows", {{"S", rows_s}, {"T", rows_t}, {"U", rows_u}, {"V", rows_v}, {"W", rows_w}}},
                      {"within_correlation", within_correlation},
                      {"cross_correlation", cross_correlation},
                      {"dangling", dangling},
                      {"queries", queries},
                      {"min_tables", min_tables},
                      {"max_tables", max_tables},
                      {"predicate_probability", predicate_probability},
                      {"mix", {{"eq", weight_eq}, {"range", weight_range}, {"in", weight_in}}},
                      {"seed", seed}};
  if (subschema_count) j["subschema_count"] = *subschema_count;
  return j;
}

SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  SynthSpec s;
  try {
    if (j.contains("rows")) {
      const auto& r = j.at("rows");
      s.rows_s = r.value("S", s.rows_s);
      s.rows_t = r.value("T", s.rows_t);
      s.rows_u = r.value("U", s.rows_u);
      s.rows_v = r.value("V", s.rows_v);
      s.rows_w = r.value("W", s.rows_w);
    }
    s.within_correlation = j.value("within_correlation", s.within_correlation);
    s.cross_correlation = j.value("cross_correlation", s.cross_correlation);
    s.dangling = j.value("dangling", s.dangling);
    s.queries = j.value("queries", s.queries);
    s.min_tables = j.value("min_tables", s.min_tables);
    s.max_tables = j.value("max_tables", s.max_tables);
    s.predicate_probability = j.value("predicate_probability", s.predicate_probability);
    if (j.contains("mix")) {
      const auto& m = j.at("mix");
      s.weight_eq = m.value("eq", s.weight_eq);
      s.weight_range = m.value("range", s.weight_range);
      s.weight_in = m.value("in", s.weight_in);
    }
    if (j.contains("subschema_count") && !j.at("subschema_count").is_null())
      s.subschema_count = j.at("subschema_count").get<std::size_t>();
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("synth spec: ") + e.what());
  }
  for (std::size_t rows : {s.rows_s, s.rows_t, s.rows_u, s.rows_v, s.rows_w})
    if (rows > 10000) throw ParseError("synth spec: at most 10000 rows per table");
  if (s.rows_t == 0 || s.rows_v == 0) throw ParseError("synth spec: T and V need at least one row");
  return s;
}

namespace {

class Picker {
 public:
  explicit Picker(const std::vector<double>& weights) {
    double acc = 0;
    for (double w : weights) cumulative_.push_back(acc += w);
  }
  std::size_t operator()(Rng& rng) const {
    const double u = uniform01(rng) * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

// Mildly skewed distribution over 1..n.
Picker skewed(std::size_t n) {
  std::vector<double> w;
  for (std::size_t i = 1; i <= n; ++i) w.push_back(1.0 / std::pow(static_cast<double>(i), 0.7));
  return Picker(w);
}

bool chance(Rng& rng, double p) { return uniform01(rng) < p; }

using Cells = std::vector<std::optional<std::string>>;

Table make_table(const TableDecl& decl, std::vector<Cells> columns) {
  std::vector<Column> cols;
  for (std::size_t c = 0; c < decl.columns.size(); ++c)
    cols.emplace_back(decl.columns[c].name, decl.columns[c].kind, columns[c]);
  return Table(decl.name, std::move(cols));
}

}  // namespace

Database generate_database(const SynthSpec& spec) {
  Database db;
  db.schema = synthetic_schema();
  Rng rng(derive_seed(spec.seed, "data"));
  const double rho = spec.within_correlation, kappa = spec.cross_correlation;
  const std::size_t nt = spec.rows_t, nv = spec.rows_v;
  auto str = [](auto v) { return std::optional<std::string>(std::to_string(v)); };
  auto cat = [](const char* p, std::size_t v) { return std::optional<std::string>(p + std::to_string(v)); };

  // Parents: T(a in 1..20, b in 8 values), V(c in 1..10, d in 5 values).
  std::vector<int> ta(nt), vc(nv);
  std::vector<Cells> t_cols(3), v_cols(3);
  const Picker pick20 = skewed(20), pick10 = skewed(10);
  for (std::size_t i = 0; i < nt; ++i) {
    ta[i] = static_cast<int>(pick20(rng)) + 1;
    const std::size_t b = chance(rng, rho) ? static_cast<std::size_t>(ta[i] - 1) % 8 : uniform_index(rng, 8);
    t_cols[0].push_back(str(i + 1));
    t_cols[1].push_back(str(ta[i]));
    t_cols[2].push_back(cat("b", b));
  }
  for (std::size_t i = 0; i < nv; ++i) {
    vc[i] = static_cast<int>(pick10(rng)) + 1;
    const std::size_t d = chance(rng, rho) ? static_cast<std::size_t>(vc[i] - 1) % 5 : uniform_index(rng, 5);
    v_cols[0].push_back(str(i + 1));
    v_cols[1].push_back(str(vc[i]));
    v_cols[2].push_back(cat("d", d));
  }

  // Child rows prefer parents with large a (resp. c) as kappa grows.
  std::vector<double> tw, vw;
  for (int a : ta) tw.push_back(std::exp(kappa * 1.5 * (a - 10.5) / 9.5));
  for (int c : vc) vw.push_back(std::exp(kappa * 1.5 * (c - 5.5) / 4.5));
  const Picker pick_t(tw), pick_v(vw);
  // Returns the parent row, or -1 for a dangling key.
  auto parent = [&](const Picker& p) -> long { return chance(rng, spec.dangling) ? -1 : static_cast<long>(p(rng)); };
  auto key = [&](long row, std::size_t n) { return row < 0 ? n + 1 + uniform_index(rng, 1000) : static_cast<std::size_t>(row) + 1; };

  const Picker pick15 = skewed(15), pick25 = skewed(25), pick12 = skewed(12);
  std::vector<Cells> s_cols(3), u_cols(4), w_cols(2);
  for (std::size_t i = 0; i < spec.rows_s; ++i) {
    const long p = parent(pick_t);
    const std::size_t e = p >= 0 && chance(rng, kappa) ? 1 + static_cast<std::size_t>(ta[p] * 2) % 15 : pick15(rng) + 1;
    const std::size_t f = chance(rng, rho) ? (e - 1) % 6 : uniform_index(rng, 6);
    s_cols[0].push_back(str(key(p, nt)));
    s_cols[1].push_back(str(e));
    s_cols[2].push_back(cat("f", f));
  }
  for (std::size_t i = 0; i < spec.rows_u; ++i) {
    const long pt = parent(pick_t);
    const long pv = parent(pick_v);
    std::size_t g = pick25(rng) + 1;
    if (chance(rng, kappa) && (pt >= 0 || pv >= 0))
      g = 1 + static_cast<std::size_t>((pt >= 0 ? ta[pt] : 0) + 2 * (pv >= 0 ? vc[pv] : 0)) % 25;
    const std::size_t h = chance(rng, rho) ? (g - 1) % 6 : uniform_index(rng, 6);
    u_cols[0].push_back(str(key(pt, nt)));
    u_cols[1].push_back(str(key(pv, nv)));
    u_cols[2].push_back(str(g));
    u_cols[3].push_back(cat("h", h));
  }
  for (std::size_t i = 0; i < spec.rows_w; ++i) {
    const long p = parent(pick_t);
    const std::size_t k = p >= 0 && chance(rng, kappa) ? 1 + static_cast<std::size_t>(ta[p]) % 12 : pick12(rng) + 1;
    w_cols[0].push_back(str(key(p, nt)));
    w_cols[1].push_back(str(k));
  }

  const auto& schema = db.schema;
  db.tables.resize(schema.table_count());
  db.tables[schema.table_id("S")] = make_table(schema.table(schema.table_id("S")), std::move(s_cols));
  db.tables[schema.table_id("T")] = make_table(schema.table(schema.table_id("T")), std::move(t_cols));
  db.tables[schema.table_id("U")] = make_table(schema.table(schema.table_id("U")), std::move(u_cols));
  db.tables[schema.table_id("V")] = make_table(schema.table(schema.table_id("V")), std::move(v_cols));
  db.tables[schema.table_id("W")] = make_table(schema.table(schema.table_id("W")), std::move(w_cols));
  return db;
}

std::vector<QuerySpec> generate_workload(const Database& db, const SynthSpec& spec) {
  const auto& schema = db.schema;
  const std::size_t n = schema.table_count();
  if (spec.min_tables < 1 || spec.min_tables > spec.max_tables || spec.max_tables > n)
    throw ParseError("synth spec: table range [" + std::to_string(spec.min_tables) + ", " +
                     std::to_string(spec.max_tables) + "] does not fit a " + std::to_string(n) + "-table schema");
  const auto h = partition(schema);
  const AttributeCatalog catalog(db);

  // Candidate join graphs: connected table subsets with their induced edges.
  struct Shape {
    std::vector<TableId> tables;
    std::vector<EdgeId> edges;
  };
  std::vector<std::vector<Shape>> by_size(n + 1);
  for (std::uint32_t m = 1; m < (1u << n); ++m) {
    Shape s;
    for (TableId t = 0; t < n; ++t)
      if (m & (1u << t)) s.tables.push_back(t);
    for (EdgeId e = 0; e < schema.edges().size(); ++e)
      if ((m & (1u << schema.edge(e).one)) && (m & (1u << schema.edge(e).many))) s.edges.push_back(e);
    if (s.edges.size() + 1 != s.tables.size()) continue;
    if (s.tables.size() == 1 && schema.in_edges(s.tables[0]).empty()) continue;
    try {
      QueryGraph g(schema, s.tables, s.edges);
      if (spec.subschema_count && select_subschemas(h, schema, g).size() != *spec.subschema_count) continue;
    } catch (const Error&) {
      continue;
    }
    by_size[s.tables.size()].push_back(std::move(s));
  }
  std::vector<std::size_t> sizes;
  for (std::size_t k = spec.min_tables; k <= spec.max_tables; ++k)
    if (!by_size[k].empty()) sizes.push_back(k);
  if (sizes.empty()) throw ParseError("synth spec: no join graph satisfies the requested shape constraints");

  const double total_weight = spec.weight_eq + spec.weight_range + spec.weight_in;
  if (!(total_weight > 0)) throw ParseError("synth spec: predicate mix weights must not all be zero");

  Rng rng(derive_seed(spec.seed, "workload"));
  std::vector<QuerySpec> out;
  std::size_t attempts = 0;
  while (out.size() < spec.queries) {
    if (++attempts > 1000 * (spec.queries + 1)) throw Error("synth: could not draw enough non-empty queries");
    const auto& shapes = by_size[sizes[uniform_index(rng, sizes.size())]];
    const Shape& shape = shapes[uniform_index(rng, shapes.size())];
    QuerySpec q;
    for (EdgeId e : shape.edges) {
      const auto& se = schema.edge(e);
      q.joins.push_back({schema.column_name(se.one, se.one_column), schema.column_name(se.many, se.many_column)});
    }
    if (shape.edges.empty()) q.tables.push_back(schema.table(shape.tables[0]).name);
    for (TableId t : shape.tables) {
      if (!chance(rng, spec.predicate_probability)) continue;
      std::vector<std::size_t> candidates;
      for (std::size_t c = 0; c < schema.table(t).columns.size(); ++c)
        if (catalog.base(t, c)) candidates.push_back(c);
      if (candidates.empty() || db.table(t).row_count() == 0) continue;
      const std::size_t c = candidates[uniform_index(rng, candidates.size())];
      const Column& col = db.column(t, c);
      auto literal = [&]() -> std::string {
        for (int tries = 0; tries < 100; ++tries) {
          auto v = col.decode(col.code(uniform_index(rng, col.row_count())));
          if (v) return *v;
        }
        return col.values().front();
      };
      PredicateSpec p;
      p.column = schema.column_name(t, c);
      const double u = uniform01(rng) * total_weight;
      if (u < spec.weight_eq) {
        p.op = CompareOp::eq;
        p.values = {literal()};
      } else if (u < spec.weight_eq + spec.weight_range) {
        if (col.kind() == ColumnKind::integer) {
          auto lo = literal(), hi = literal();
          if (std::stoll(lo) > std::stoll(hi)) std::swap(lo, hi);
          p.op = CompareOp::between;
          p.values = {lo, hi};
        } else {
          p.op = chance(rng, 0.5) ? CompareOp::le : CompareOp::ge;
          p.values = {literal()};
        }
      } else {
        p.op = CompareOp::in;
        const std::size_t k = 2 + uniform_index(rng, 2);
        for (std::size_t i = 0; i < k; ++i) {
          auto v = literal();
          if (std::find(p.values.begin(), p.values.end(), v) == p.values.end()) p.values.push_back(v);
        }
      }
      q.predicates.push_back(std::move(p));
    }
    const Query query = make_query(db, q);
    const auto card = true_cardinality(query, db, catalog);
    if (card == 0) continue;
    q.true_cardinality = card;
    out.push_back(std::move(q));
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const Database& db, const std::vector<QuerySpec>& workload) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("schema.json");
    out << db.schema.to_json().dump(2) << "\n";
  }
  for (TableId t = 0; t < db.schema.table_count(); ++t) {
    const Table& table = db.table(t);
    auto out = open(table.name() + ".csv");
    for (std::size_t c = 0; c < table.columns().size(); ++c) out << (c ? "," : "") << table.column(c).name();
    out << "\n";
    for (std::size_t r = 0; r < table.row_count(); ++r) {
      for (std::size_t c = 0; c < table.columns().size(); ++c) {
        const auto v = table.column(c).decode(table.column(c).code(r));
        std::string cell = v.value_or("");
        if (cell.find_first_of(",\"") != std::string::npos) {
          std::string quoted = "\"";
          for (char ch : cell) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
          cell = quoted + "\"";
        }
        out << (c ? "," : "") << cell;
      }
      out << "\n";
    }
  }
  auto out = open("workload.json");
  out << workload_to_json(workload).dump(2) << "\n";
}

}  // namespace cinest
