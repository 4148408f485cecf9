#include "cinest/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "cinest/error.hpp"

namespace cinest {

double q_error(double truth, double estimate) {
  if (std::isnan(truth) || std::isnan(estimate)) throw Error("q_error of NaN");
  const double c = std::max(truth, 1.0);
  const double e = std::max(estimate, 1.0);
  return std::max(c, e) / std::min(c, e);
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw Error("percentile of an empty vector");
  if (p < 0 || p > 100) throw Error("percentile outside [0, 100]");
  std::sort(values.begin(), values.end());
  const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.median = percentile(values, 50);
  s.p90 = percentile(values, 90);
  s.p95 = percentile(values, 95);
  s.p99 = percentile(values, 99);
  s.max = *std::max_element(values.begin(), values.end());
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  return s;
}

nlohmann::json to_json(const Summary& s) {
  return {{"count", s.count}, {"median", s.median}, {"p90", s.p90}, {"p95", s.p95},
          {"p99", s.p99},     {"max", s.max},       {"mean", s.mean}};
}

}  // namespace cinest
