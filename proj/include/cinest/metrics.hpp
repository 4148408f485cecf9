#pragma once

#include <vector>

#include <json.hpp>

namespace cinest {

// max(C, Ĉ) / min(C, Ĉ), with both sides clamped to at least 1.
double q_error(double truth, double estimate);

// Linear interpolation between closest ranks (p in [0, 100]).
double percentile(std::vector<double> values, double p);

struct Summary {
  std::size_t count = 0;
  double median = 0;
  double p90 = 0;
  double p95 = 0;
  double p99 = 0;
  double max = 0;
  double mean = 0;
};

Summary summarize(const std::vector<double>& values);
nlohmann::json to_json(const Summary& s);

}  // namespace cinest
