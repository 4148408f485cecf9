#include "cinest/estimator.hpp"

#include <cstring>
#include <map>
#include <string>
#include <unordered_map>

#include "cinest/error.hpp"

namespace cinest {

ExactEmpiricalEstimator::ExactEmpiricalEstimator(const JoinedRelation& rel)
    : layout_(rel.layout), join_size_(rel.row_count), row_count_(rel.row_count), codes_(rel.codes) {
  if (row_count_ == 0) throw EstimationError("empty relation");
}

ExactEmpiricalEstimator::ExactEmpiricalEstimator(const JoinSample& sample)
    : layout_(sample.layout), join_size_(sample.join_size), row_count_(sample.sample_count), codes_(sample.codes) {
  if (row_count_ == 0) throw EstimationError("empty relation");
}

void ExactEmpiricalEstimator::conditional(const Assignments& inputs, std::size_t target, std::vector<double>& out) const {
  const std::size_t A = layout_.size();
  if (inputs.width() != A) throw EstimationError("assignment width does not match the estimator layout");
  if (target >= A) throw EstimationError("unknown target attribute position " + std::to_string(target));
  const std::size_t dom = layout_.domain_size(target);
  out.assign(inputs.rows() * dom, 0.0);

  std::vector<double> marginal(dom, 0.0);
  for (std::size_t r = 0; r < row_count_; ++r) marginal[codes_[r * A + target]] += 1.0;
  for (auto& m : marginal) m /= static_cast<double>(row_count_);

  // Rows are grouped by which positions they assign; each group needs one
  // pass over the relation.
  std::map<std::vector<std::size_t>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    std::vector<std::size_t> pattern;
    for (std::size_t p = 0; p < A; ++p)
      if (p != target && inputs.assigned(i, p)) pattern.push_back(p);
    groups[pattern].push_back(i);
  }

  std::string key;
  for (const auto& [pattern, rows] : groups) {
    if (pattern.empty()) {
      for (std::size_t i : rows) std::copy(marginal.begin(), marginal.end(), out.begin() + static_cast<std::ptrdiff_t>(i * dom));
      continue;
    }
    auto make_key = [&](auto value_of) {
      key.resize(pattern.size() * sizeof(Code));
      for (std::size_t k = 0; k < pattern.size(); ++k) {
        const Code v = value_of(pattern[k]);
        std::memcpy(key.data() + k * sizeof(Code), &v, sizeof(Code));
      }
    };
    std::unordered_map<std::string, std::size_t> slot;
    for (std::size_t i : rows) {
      make_key([&](std::size_t p) { return static_cast<Code>(inputs.get(i, p)); });
      slot.emplace(key, slot.size());
    }
    std::vector<double> counts(slot.size() * dom, 0.0);
    for (std::size_t r = 0; r < row_count_; ++r) {
      make_key([&](std::size_t p) { return codes_[r * A + p]; });
      auto it = slot.find(key);
      if (it != slot.end()) counts[it->second * dom + codes_[r * A + target]] += 1.0;
    }
    for (std::size_t i : rows) {
      make_key([&](std::size_t p) { return static_cast<Code>(inputs.get(i, p)); });
      const double* c = counts.data() + slot.at(key) * dom;
      double total = 0;
      for (std::size_t v = 0; v < dom; ++v) total += c[v];
      double* o = out.data() + i * dom;
      if (total == 0) {
        std::copy(marginal.begin(), marginal.end(), o);
      } else {
        for (std::size_t v = 0; v < dom; ++v) o[v] = c[v] / total;
      }
    }
  }
}

void RecordingEstimator::conditional(const Assignments& inputs, std::size_t target, std::vector<double>& out) const {
  Request req;
  req.target = target;
  for (std::size_t p = 0; p < inputs.width(); ++p)
    for (std::size_t i = 0; i < inputs.rows(); ++i)
      if (inputs.assigned(i, p)) {
        req.assigned.push_back(p);
        break;
      }
  requests_.push_back(std::move(req));
  inner_->conditional(inputs, target, out);
}

}  // namespace cinest
