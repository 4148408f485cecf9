#include "cinest/inference.hpp"

#include <algorithm>
#include <set>

#include "cinest/error.hpp"
#include "cinest/random.hpp"

namespace cinest {

std::vector<std::uint8_t> evaluate_predicate_range(const PredicateRange& range, std::size_t domain_size) {
  std::vector<std::uint8_t> mask(domain_size, 0);
  for (std::size_t c = 1; c < domain_size; ++c) mask[c] = range.contains(static_cast<Code>(c)) ? 1 : 0;
  return mask;
}

bool SampleBank::has(AttrId a) const { return std::find(attrs_.begin(), attrs_.end(), a) != attrs_.end(); }

Code SampleBank::get(std::size_t i, AttrId a) const {
  auto it = std::find(attrs_.begin(), attrs_.end(), a);
  if (it == attrs_.end()) throw EstimationError("sample bank has no value for attribute " + std::to_string(a));
  return values_[static_cast<std::size_t>(it - attrs_.begin())][i];
}

std::size_t SampleBank::column(AttrId a) {
  auto it = std::find(attrs_.begin(), attrs_.end(), a);
  if (it != attrs_.end()) return static_cast<std::size_t>(it - attrs_.begin());
  attrs_.push_back(a);
  values_.emplace_back(n_, kNullCode);
  return attrs_.size() - 1;
}

void SampleBank::set(std::size_t i, AttrId a, Code v) { values_[column(a)][i] = v; }

namespace {

// Draws a code from p (restricted to mask when given); `total` is the
// restricted mass.
Code draw(Rng& rng, const double* p, std::size_t dom, const std::uint8_t* mask, double total) {
  const double u = uniform01(rng) * total;
  double acc = 0;
  Code last = 0;
  for (std::size_t v = 0; v < dom; ++v) {
    const double w = mask && !mask[v] ? 0.0 : p[v];
    if (w <= 0) continue;
    acc += w;
    last = static_cast<Code>(v);
    if (u < acc) return last;
  }
  return last;
}

}  // namespace

EstimateNResult estimate_n(const DensityEstimator& est, const AttributeCatalog& catalog, const EstimateNRequest& request,
                           SampleBank& bank, std::uint64_t seed) {
  const std::size_t n = bank.size();
  if (n < 1) throw EstimationError("progressive sampling needs N >= 1");
  const AttributeLayout& layout = est.layout();
  auto pos_of = [&](AttrId a) {
    auto p = layout.position(a);
    if (!p) throw EstimationError("attribute " + catalog.at(a).name + " is not modelled by this estimator");
    return *p;
  };

  Assignments inputs(n, layout.size());
  if (request.condition_on_bank)
    for (AttrId a : bank.attributes())
      if (auto p = layout.position(a))
        for (std::size_t i = 0; i < n; ++i) inputs.set(i, *p, static_cast<std::int32_t>(bank.get(i, a)));

  EstimateNResult res;
  res.prob.assign(n, 1.0);
  Rng rng(mix_seed(seed));
  std::vector<double> dist;

  // Predicated attributes that actually restrict, smallest range first,
  // then the required table flags.
  struct Scored {
    std::size_t pos;
    std::vector<std::uint8_t> mask;
    std::size_t size;
  };
  std::vector<Scored> scored;
  for (const auto& ra : request.predicates) {
    const std::size_t pos = pos_of(ra.attr);
    const std::size_t dom = layout.domain_size(pos);
    const std::size_t size = ra.range.count();
    if (size >= dom) continue;
    scored.push_back({pos, evaluate_predicate_range(ra.range, dom), size});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) { return a.size < b.size; });
  for (AttrId f : request.required_flags) scored.push_back({pos_of(f), {0, 1}, 1});

  auto any_unassigned = [&](std::size_t pos) {
    for (std::size_t i = 0; i < n; ++i)
      if (!inputs.assigned(i, pos)) return true;
    return false;
  };

  for (const auto& s : scored) {
    const std::size_t dom = layout.domain_size(s.pos);
    if (any_unassigned(s.pos)) est.conditional(inputs, s.pos, dist);
    for (std::size_t i = 0; i < n; ++i) {
      if (inputs.assigned(i, s.pos)) {
        if (!s.mask[static_cast<std::size_t>(inputs.get(i, s.pos))]) res.prob[i] = 0;
        continue;
      }
      const double* p = dist.data() + i * dom;
      double mass = 0;
      for (std::size_t v = 0; v < dom; ++v)
        if (s.mask[v]) mass += p[v];
      res.prob[i] *= mass;
      // A sample with no mass left still draws from the unfiltered
      // distribution so later hyperedges keep N live samples.
      const Code v = mass > 0 ? draw(rng, p, dom, s.mask.data(), mass) : draw(rng, p, dom, nullptr, 1.0);
      inputs.set(i, s.pos, static_cast<std::int32_t>(v));
    }
  }

  for (AttrId f : request.fanouts) {
    const std::size_t pos = pos_of(f);
    const auto& values = catalog.at(f).fanout_values;
    const std::size_t dom = layout.domain_size(pos);
    if (any_unassigned(pos)) est.conditional(inputs, pos, dist);
    std::vector<std::uint32_t> counts(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!inputs.assigned(i, pos))
        inputs.set(i, pos, static_cast<std::int32_t>(draw(rng, dist.data() + i * dom, dom, nullptr, 1.0)));
      counts[i] = values[static_cast<std::size_t>(inputs.get(i, pos))];
    }
    res.fanouts.push_back(std::move(counts));
  }

  for (AttrId a : request.common) {
    const std::size_t pos = pos_of(a);
    const std::size_t dom = layout.domain_size(pos);
    if (any_unassigned(pos)) est.conditional(inputs, pos, dist);
    for (std::size_t i = 0; i < n; ++i) {
      if (!inputs.assigned(i, pos))
        inputs.set(i, pos, static_cast<std::int32_t>(draw(rng, dist.data() + i * dom, dom, nullptr, 1.0)));
      bank.set(i, a, static_cast<Code>(inputs.get(i, pos)));
    }
  }

  double total = 0;
  for (double p : res.prob) total += p;
  res.selectivity = total / static_cast<double>(n);
  return res;
}

EstimateResult estimate_cardinality(const Query& q, const SchemaGraph& schema, const SubschemaHypergraph& h,
                                    const EstimatorSet& estimators, const AttributeCatalog& catalog,
                                    const InferenceOptions& options) {
  if (options.samples < 1) throw EstimationError("inference sample count N must be >= 1");
  const auto selected = select_subschemas(h, schema, q.graph);
  const TraversalPlan plan = build_traversal_plan(h, schema, selected, q.graph, options.root);

  auto estimator_of = [&](std::size_t e) -> const DensityEstimator& {
    if (e >= estimators.size() || !estimators[e])
      throw EstimationError("no estimator for subschema " + h.hyperedges[e].name);
    return *estimators[e];
  };

  EstimateResult result;
  result.cardinality = static_cast<double>(estimator_of(plan.root).join_size());
  SampleBank bank(options.samples);
  std::set<TableId> covered;

  for (std::size_t k = 0; k < plan.steps.size(); ++k) {
    const TraversalStep& step = plan.steps[k];
    const Subschema& s = h.hyperedges[step.hyperedge];
    const DensityEstimator& est = estimator_of(step.hyperedge);

    // Predicates and flags of query tables are scored once, in the first
    // hyperedge that contains the table.
    EstimateNRequest req;
    req.condition_on_bank = options.conditioning;
    for (TableId t : s.vertices) {
      if (!q.graph.contains(t) || covered.contains(t)) continue;
      for (const auto& [ref, range] : q.predicates) {
        if (ref.table != t) continue;
        auto attr = catalog.base(ref.table, ref.column);
        if (!attr)
          throw EstimationError("predicate on join key column " + schema.column_name(ref.table, ref.column) +
                                " is not supported");
        req.predicates.push_back({*attr, range});
      }
      req.required_flags.push_back(catalog.flag(t));
    }
    for (EdgeId e : step.fanout_edges) req.fanouts.push_back(catalog.fanout(e));
    for (TableId t : step.common_tables)
      for (AttrId a : catalog.attributes_of(t)) req.common.push_back(a);

    const auto r = estimate_n(est, catalog, req, bank, derive_seed(options.seed, "step:" + std::to_string(k)));

    const std::size_t n = options.samples;
    StepDiagnostics d;
    d.subschema = s.name;
    d.join_size = est.join_size();
    d.selectivity = r.selectivity;
    d.samples = n;
    for (std::size_t j = 0; j < r.fanouts.size(); ++j) {
      d.fanout_attributes.push_back(catalog.at(req.fanouts[j]).name);
      double sum = 0;
      for (auto v : r.fanouts[j]) sum += v;
      d.mean_fanouts.push_back(sum / static_cast<double>(n));
    }
    if (options.joint_expectation) {
      double sum = 0;
      for (std::size_t i = 0; i < n; ++i) {
        double v = r.prob[i];
        for (const auto& f : r.fanouts) v *= f[i];
        sum += v;
      }
      d.factor = sum / static_cast<double>(n);
    } else {
      d.factor = r.selectivity;
      for (double m : d.mean_fanouts) d.factor *= m;
    }
    result.cardinality *= d.factor;
    result.steps.push_back(std::move(d));
    for (TableId t : s.vertices)
      if (q.graph.contains(t)) covered.insert(t);
  }
  return result;
}

}  // namespace cinest
