#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "cinest/attributes.hpp"
#include "cinest/joiner.hpp"

namespace cinest {

inline constexpr std::int32_t kUnassigned = -1;

// A batch of partial assignments over one layout: rows x layout positions,
// kUnassigned where the attribute is not given.
class Assignments {
 public:
  Assignments() = default;
  Assignments(std::size_t rows, std::size_t width) : rows_(rows), width_(width), values_(rows * width, kUnassigned) {}

  std::size_t rows() const { return rows_; }
  std::size_t width() const { return width_; }
  std::int32_t get(std::size_t row, std::size_t pos) const { return values_[row * width_ + pos]; }
  void set(std::size_t row, std::size_t pos, std::int32_t v) { values_[row * width_ + pos] = v; }
  bool assigned(std::size_t row, std::size_t pos) const { return get(row, pos) != kUnassigned; }
  const std::int32_t* row_data(std::size_t row) const { return values_.data() + row * width_; }

 private:
  std::size_t rows_ = 0;
  std::size_t width_ = 0;
  std::vector<std::int32_t> values_;
};

// Conditional categorical distributions over the attributes of one joined
// relation.
class DensityEstimator {
 public:
  virtual ~DensityEstimator() = default;

  virtual const AttributeLayout& layout() const = 0;
  // |J_e| of the relation the estimator describes.
  virtual std::uint64_t join_size() const = 0;

  // For every row of `inputs`, P(target | assigned attributes), written
  // row-major into `out` (rows x dom(target)). Rows sum to 1.
  virtual void conditional(const Assignments& inputs, std::size_t target, std::vector<double>& out) const = 0;
};

// Relative frequencies over a fixed set of encoded rows: either the full
// materialized join or a sample of it.
class ExactEmpiricalEstimator final : public DensityEstimator {
 public:
  explicit ExactEmpiricalEstimator(const JoinedRelation& rel);
  // Frequencies of the sample rows, scaled to the sample's join size.
  explicit ExactEmpiricalEstimator(const JoinSample& sample);

  const AttributeLayout& layout() const override { return layout_; }
  std::uint64_t join_size() const override { return join_size_; }
  std::size_t row_count() const { return row_count_; }

  // When no row matches an assignment, the target's marginal is returned.
  void conditional(const Assignments& inputs, std::size_t target, std::vector<double>& out) const override;

 private:
  AttributeLayout layout_;
  std::uint64_t join_size_ = 0;
  std::size_t row_count_ = 0;
  std::vector<Code> codes_;
};

// Forwards to another estimator and records every request; used to check
// which attributes the inference path touches.
class RecordingEstimator final : public DensityEstimator {
 public:
  struct Request {
    std::size_t target = 0;
    std::vector<std::size_t> assigned;  // positions assigned in at least one row
  };

  explicit RecordingEstimator(std::shared_ptr<const DensityEstimator> inner) : inner_(std::move(inner)) {}

  const AttributeLayout& layout() const override { return inner_->layout(); }
  std::uint64_t join_size() const override { return inner_->join_size(); }
  void conditional(const Assignments& inputs, std::size_t target, std::vector<double>& out) const override;

  const std::vector<Request>& requests() const { return requests_; }

 private:
  std::shared_ptr<const DensityEstimator> inner_;
  mutable std::vector<Request> requests_;
};

}  // namespace cinest
