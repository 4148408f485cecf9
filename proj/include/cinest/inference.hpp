#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cinest/attributes.hpp"
#include "cinest/estimator.hpp"
#include "cinest/query.hpp"
#include "cinest/schema_graph.hpp"

namespace cinest {

inline constexpr std::size_t kDefaultInferenceSamples = 2000;

// mask[a] = 1 iff code a is in the range; the NULL code is always 0.
std::vector<std::uint8_t> evaluate_predicate_range(const PredicateRange& range, std::size_t domain_size);

// Per progressive sample, values drawn so far for attributes of shared
// tables, keyed by global attribute id.
class SampleBank {
 public:
  explicit SampleBank(std::size_t n = 0) : n_(n) {}

  std::size_t size() const { return n_; }
  bool has(AttrId a) const;
  Code get(std::size_t i, AttrId a) const;
  void set(std::size_t i, AttrId a, Code v);
  const std::vector<AttrId>& attributes() const { return attrs_; }

 private:
  std::size_t column(AttrId a);
  std::size_t n_;
  std::vector<AttrId> attrs_;
  std::vector<std::vector<Code>> values_;  // per attribute, n_ entries
};

struct RangedAttr {
  AttrId attr = 0;
  PredicateRange range;
};

struct EstimateNRequest {
  std::vector<RangedAttr> predicates;  // user predicates on this hyperedge's tables
  std::vector<AttrId> required_flags;  // conditioned to true after the predicates
  std::vector<AttrId> fanouts;         // sampled and reported per sample
  std::vector<AttrId> common;          // sampled into the bank
  bool condition_on_bank = true;
};

struct EstimateNResult {
  std::vector<double> prob;                         // per sample
  std::vector<std::vector<std::uint32_t>> fanouts;  // per fanout attribute, per sample: the fanout count
  double selectivity = 0;                           // mean of prob
};

// Progressive sampling over one estimator. Predicated attributes with
// |R| < dom are visited in ascending |R| order; attributes already set in
// the bank are scored by membership instead of being forwarded.
EstimateNResult estimate_n(const DensityEstimator& est, const AttributeCatalog& catalog, const EstimateNRequest& request,
                           SampleBank& bank, std::uint64_t seed);

struct InferenceOptions {
  std::size_t samples = kDefaultInferenceSamples;
  std::uint64_t seed = 0;
  bool conditioning = true;  // pass bank values between hyperedges
  // Multiply mean(prob * prod F) per step (true) or mean(prob) * prod mean(F).
  bool joint_expectation = true;
  RootChoice root;
};

struct StepDiagnostics {
  std::string subschema;
  std::uint64_t join_size = 0;
  double selectivity = 0;
  std::vector<std::string> fanout_attributes;
  std::vector<double> mean_fanouts;
  double factor = 0;  // multiplier applied to the running estimate
  std::size_t samples = 0;
};

struct EstimateResult {
  double cardinality = 0;
  std::vector<StepDiagnostics> steps;
};

// One estimator per hyperedge of the hypergraph; entries may be null for
// subschemas that are never selected.
using EstimatorSet = std::vector<std::shared_ptr<const DensityEstimator>>;

EstimateResult estimate_cardinality(const Query& q, const SchemaGraph& schema, const SubschemaHypergraph& h,
                                    const EstimatorSet& estimators, const AttributeCatalog& catalog,
                                    const InferenceOptions& options = {});

}  // namespace cinest
