#include "cinest/benchmark.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cinest/error.hpp"
#include "cinest/joiner.hpp"
#include "cinest/planner.hpp"

namespace cinest {

BenchmarkResult run_benchmark(const Database& db, const AttributeCatalog& catalog, const Workload& workload,
                              const std::vector<Method>& methods, const BenchmarkOptions& options) {
  BenchmarkResult result;
  const auto& schema = db.schema;
  for (const Query& q : workload.queries) {
    const std::uint64_t truth = q.true_cardinality ? *q.true_cardinality : true_cardinality(q, db, catalog);
    CardinalityMap true_cards;
    if (options.p_error)
      true_cards = collect_cardinalities(q, schema, [&](const Query& sub) {
        return static_cast<double>(true_cardinality(sub, db, catalog));
      });
    for (const Method& m : methods) {
      MetricRow row;
      row.query_id = q.id;
      row.method = m.name;
      row.truth = truth;
      try {
        const auto start = std::chrono::steady_clock::now();
        row.estimate = m.estimate(q);
        row.millis = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        row.q_error = q_error(static_cast<double>(truth), row.estimate);
        if (options.p_error) row.p_error = p_error(q, schema, collect_cardinalities(q, schema, m.estimate), true_cards);
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      result.rows.push_back(std::move(row));
    }
  }
  for (const Method& m : methods) {
    MethodSummary s;
    s.method = m.name;
    std::vector<double> qs, ps;
    double millis = 0;
    for (const auto& row : result.rows) {
      if (row.method != m.name) continue;
      if (!row.error.empty()) {
        ++s.failures;
        continue;
      }
      qs.push_back(row.q_error);
      if (row.p_error) ps.push_back(*row.p_error);
      millis += row.millis;
    }
    s.q_error = summarize(qs);
    s.p_error = summarize(ps);
    s.mean_millis = qs.empty() ? 0.0 : millis / static_cast<double>(qs.size());
    result.summaries.push_back(std::move(s));
  }
  return result;
}

void write_results(const std::filesystem::path& path, const BenchmarkResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& row : result.rows) {
    nlohmann::json j = {{"query", row.query_id}, {"method", row.method}, {"true", row.truth}};
    if (row.error.empty()) {
      j["estimate"] = row.estimate;
      j["q_error"] = row.q_error;
      if (row.p_error) j["p_error"] = *row.p_error;
    } else {
      j["error"] = row.error;
    }
    out << j.dump() << "\n";
  }
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& s : result.summaries)
    summary.push_back({{"method", s.method}, {"q_error", to_json(s.q_error)}, {"p_error", to_json(s.p_error)}, {"failures", s.failures}});
  out << nlohmann::json{{"summary", summary}}.dump() << "\n";
}

void write_timings(const std::filesystem::path& path, const BenchmarkResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& row : result.rows)
    out << nlohmann::json{{"query", row.query_id}, {"method", row.method}, {"millis", row.millis}}.dump() << "\n";
  for (const auto& s : result.summaries)
    out << nlohmann::json{{"method", s.method}, {"mean_millis", s.mean_millis}}.dump() << "\n";
}

std::string format_table(const BenchmarkResult& result) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %-7s %9s %9s %9s %9s %10s %9s\n", "method", "metric", "median", "90th",
                "95th", "99th", "max", "mean ms");
  out << line;
  for (const auto& s : result.summaries) {
    auto row = [&](const char* metric, const Summary& v, bool with_time) {
      std::snprintf(line, sizeof line, "%-10s %-7s %9.3f %9.3f %9.3f %9.3f %10.3f", s.method.c_str(), metric, v.median,
                    v.p90, v.p95, v.p99, v.max);
      out << line;
      if (with_time) {
        std::snprintf(line, sizeof line, " %9.3f", s.mean_millis);
        out << line;
      }
      out << "\n";
    };
    row("Q-Error", s.q_error, true);
    if (s.p_error.count > 0) row("P-Error", s.p_error, false);
    if (s.failures > 0) out << "  " << s.failures << " failed queries\n";
  }
  return out.str();
}

}  // namespace cinest
