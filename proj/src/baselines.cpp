#include "cinest/baselines.hpp"

#include <algorithm>

#include "cinest/error.hpp"
#include "cinest/inference.hpp"

namespace cinest {

Histogram::Histogram(const Column& column, std::size_t bins) {
  if (bins == 0) throw Error("histogram needs at least one bin");
  std::vector<Code> codes;
  for (Code c : column.codes())
    if (c != kNullCode) codes.push_back(c);
  const std::size_t rows = column.row_count();
  null_fraction_ = rows == 0 ? 0.0 : static_cast<double>(rows - codes.size()) / static_cast<double>(rows);
  if (codes.empty()) return;
  std::sort(codes.begin(), codes.end());
  const std::size_t n = codes.size();
  const std::size_t b = std::min(bins, column.distinct_values());
  std::size_t begin = 0;
  for (std::size_t k = 1; k <= b && begin < n; ++k) {
    const std::size_t end_index = (k * n + b - 1) / b - 1;
    Code bound = codes[std::max(end_index, begin)];
    if (k == b) bound = codes.back();
    if (!upper_.empty() && bound <= upper_.back()) continue;
    const std::size_t end = static_cast<std::size_t>(std::upper_bound(codes.begin(), codes.end(), bound) - codes.begin());
    upper_.push_back(bound);
    mass_.push_back(static_cast<double>(end - begin) / static_cast<double>(n));
    begin = end;
  }
}

double Histogram::selectivity(const PredicateRange& range) const {
  double sel = 0;
  for (std::size_t b = 0; b < upper_.size(); ++b) {
    std::size_t hit = 0;
    for (Code c = lower(b); c <= upper(b); ++c) hit += range.contains(c) ? 1 : 0;
    sel += mass_[b] * static_cast<double>(hit) / static_cast<double>(upper(b) - lower(b) + 1);
  }
  return (1.0 - null_fraction_) * sel;
}

HistogramSet::HistogramSet(const Database& db, std::size_t bins) {
  const auto& schema = db.schema;
  for (TableId t = 0; t < schema.table_count(); ++t) {
    rows_.push_back(db.table(t).row_count());
    for (std::size_t c = 0; c < schema.table(t).columns.size(); ++c) hist_.emplace(ColumnRef{t, c}, Histogram(db.column(t, c), bins));
  }
  for (EdgeId e = 0; e < schema.edges().size(); ++e) {
    const auto& se = schema.edge(e);
    key_domain_.push_back(db.column(se.one, se.one_column).distinct_values());
  }
}

const Histogram& HistogramSet::histogram(ColumnRef c) const {
  auto it = hist_.find(c);
  if (it == hist_.end()) throw EstimationError("no histogram for column");
  return it->second;
}

double estimate_independent(const Query& q, const HistogramSet& hs) {
  double est = 1;
  for (TableId t : q.graph.vertices()) est *= static_cast<double>(hs.row_count(t));
  for (const auto& [ref, range] : q.predicates) est *= hs.histogram(ref).selectivity(range);
  for (EdgeId e : q.graph.edges()) {
    const std::size_t dom = hs.key_domain(e);
    est = dom == 0 ? 0.0 : est / static_cast<double>(dom);
  }
  return est;
}

std::vector<EdgeId> downscale_edges(const Query& q, const SchemaGraph& schema) {
  std::vector<EdgeId> out;
  const auto& qe = q.graph.edges();
  for (EdgeId e = 0; e < schema.edges().size(); ++e) {
    if (std::find(qe.begin(), qe.end(), e) != qe.end()) continue;
    // Reachability from the query without crossing e.
    std::vector<bool> seen(schema.table_count(), false);
    std::vector<TableId> stack{q.graph.vertices().front()};
    seen[stack.back()] = true;
    while (!stack.empty()) {
      const TableId t = stack.back();
      stack.pop_back();
      for (EdgeId f = 0; f < schema.edges().size(); ++f) {
        if (f == e) continue;
        const auto& sf = schema.edge(f);
        TableId other;
        if (sf.one == t) other = sf.many;
        else if (sf.many == t) other = sf.one;
        else continue;
        if (!seen[other]) {
          seen[other] = true;
          stack.push_back(other);
        }
      }
    }
    if (seen[schema.edge(e).one]) out.push_back(e);
  }
  return out;
}

double estimate_universal(const Query& q, const SchemaGraph& schema, const DensityEstimator& ur,
                          const AttributeCatalog& catalog, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw EstimationError("inference sample count N must be >= 1");
  EstimateNRequest req;
  for (const auto& [ref, range] : q.predicates) {
    auto attr = catalog.base(ref.table, ref.column);
    if (!attr)
      throw EstimationError("predicate on join key column " + schema.column_name(ref.table, ref.column) + " is not supported");
    req.predicates.push_back({*attr, range});
  }
  for (TableId t : q.graph.vertices()) req.required_flags.push_back(catalog.flag(t));
  for (EdgeId e : downscale_edges(q, schema)) req.fanouts.push_back(catalog.fanout(e));
  SampleBank bank(n);
  const auto r = estimate_n(ur, catalog, req, bank, seed);
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double v = r.prob[i];
    for (const auto& f : r.fanouts) v /= std::max<std::uint32_t>(f[i], 1);
    sum += v;
  }
  return static_cast<double>(ur.join_size()) * sum / static_cast<double>(n);
}

}  // namespace cinest
