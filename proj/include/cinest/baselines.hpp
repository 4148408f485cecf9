#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "cinest/attributes.hpp"
#include "cinest/estimator.hpp"
#include "cinest/query.hpp"
#include "cinest/table.hpp"

namespace cinest {

inline constexpr std::size_t kDefaultHistogramBins = 100;

// Equi-depth histogram over the non-NULL codes of one column. Codes inside
// a bin are assumed equally likely.
class Histogram {
 public:
  Histogram() = default;
  Histogram(const Column& column, std::size_t bins);

  std::size_t bin_count() const { return upper_.size(); }
  Code lower(std::size_t b) const { return b == 0 ? 1 : upper_[b - 1] + 1; }
  Code upper(std::size_t b) const { return upper_[b]; }
  double mass(std::size_t b) const { return mass_[b]; }  // share of non-NULL rows
  double null_fraction() const { return null_fraction_; }

  // Estimated P(A in R) over all rows; NULL never qualifies.
  double selectivity(const PredicateRange& range) const;

 private:
  std::vector<Code> upper_;
  std::vector<double> mass_;
  double null_fraction_ = 0;
};

class HistogramSet {
 public:
  HistogramSet() = default;
  HistogramSet(const Database& db, std::size_t bins = kDefaultHistogramBins);

  const Histogram& histogram(ColumnRef c) const;
  std::size_t row_count(TableId t) const { return rows_.at(t); }
  // Distinct non-NULL values of the one-side key of edge e (dom(T1.A1)).
  std::size_t key_domain(EdgeId e) const { return key_domain_.at(e); }

 private:
  std::map<ColumnRef, Histogram> hist_;
  std::vector<std::size_t> rows_;
  std::vector<std::size_t> key_domain_;
};

// Product of table sizes, per-predicate histogram selectivities and
// 1/|dom| per join edge.
double estimate_independent(const Query& q, const HistogramSet& hs);

// Out-of-query edges whose one side lies toward the query: each query
// tuple is repeated max(F, 1) times across such an edge in the universal
// relation.
std::vector<EdgeId> downscale_edges(const Query& q, const SchemaGraph& schema);

// |J_T| * mean(I / prod max(F, 1)) with I the predicate and table-flag
// indicator, by progressive sampling on a universal-relation estimator.
double estimate_universal(const Query& q, const SchemaGraph& schema, const DensityEstimator& ur,
                          const AttributeCatalog& catalog, std::size_t n, std::uint64_t seed);

}  // namespace cinest
