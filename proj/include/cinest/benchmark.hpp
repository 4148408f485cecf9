#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cinest/attributes.hpp"
#include "cinest/metrics.hpp"
#include "cinest/query.hpp"

namespace cinest {

struct Method {
  std::string name;
  std::function<double(const Query&)> estimate;
};

struct MetricRow {
  std::string query_id;
  std::string method;
  std::uint64_t truth = 0;
  double estimate = 0;
  double q_error = 0;
  std::optional<double> p_error;
  double millis = 0;
  std::string error;  // non-empty when the method failed on this query
};

struct MethodSummary {
  std::string method;
  Summary q_error;
  Summary p_error;
  double mean_millis = 0;
  std::size_t failures = 0;
};

struct BenchmarkResult {
  std::vector<MetricRow> rows;
  std::vector<MethodSummary> summaries;
};

struct BenchmarkOptions {
  bool p_error = true;
};

// Queries lacking a stored true cardinality get one from the exact oracle.
// A method throwing on a query is recorded in that row and skipped in the
// summary.
BenchmarkResult run_benchmark(const Database& db, const AttributeCatalog& catalog, const Workload& workload,
                              const std::vector<Method>& methods, const BenchmarkOptions& options = {});

// One JSON object per row, then a final {"summary": [...]} line. Timings
// are left out so that reruns are byte-identical.
void write_results(const std::filesystem::path& path, const BenchmarkResult& result);
void write_timings(const std::filesystem::path& path, const BenchmarkResult& result);
std::string format_table(const BenchmarkResult& result);

}  // namespace cinest
