#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "cinest/benchmark.hpp"
#include "cinest/error.hpp"
#include "cinest/pipeline.hpp"
#include "cinest/synth.hpp"
#include "fixtures.hpp"

using namespace cinest;

namespace {

struct Fixture {
  SynthSpec spec = fixtures::small_spec();
  Database db = generate_database(spec);
  AttributeCatalog catalog{db};
  Workload workload;

  Fixture() {
    spec.max_tables = 4;
    workload = workload_from_json(workload_to_json(generate_workload(db, spec)), db);
  }
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), {});
}

}  // namespace

TEST_CASE("an oracle scores perfectly", "[benchmark]") {
  Fixture fx;
  const Method oracle{"oracle", [&](const Query& q) { return static_cast<double>(true_cardinality(q, fx.db, fx.catalog)); }};
  const Method half{"half", [&](const Query& q) { return 0.5 * static_cast<double>(true_cardinality(q, fx.db, fx.catalog)) + 3; }};
  const auto r = run_benchmark(fx.db, fx.catalog, fx.workload, {oracle, half});
  REQUIRE(r.rows.size() == 2 * fx.workload.queries.size());
  for (const auto& row : r.rows) {
    REQUIRE(row.error.empty());
    REQUIRE(row.p_error.has_value());
    CHECK(*row.p_error >= 1.0);
    if (row.method == "oracle") {
      CHECK(row.q_error == 1.0);
      CHECK(*row.p_error == 1.0);
    }
  }
  CHECK(r.summaries[0].q_error.max == 1.0);
  CHECK(r.summaries[1].q_error.median > 1.0);
  CHECK(format_table(r).find("P-Error") != std::string::npos);
}

TEST_CASE("a failing query is recorded and skipped", "[benchmark]") {
  Fixture fx;
  const std::string bad = fx.workload.queries[2].id;
  const Method flaky{"flaky", [&](const Query& q) -> double {
                       if (q.id == bad) throw EstimationError("no model");
                       return 10.0;
                     }};
  const auto r = run_benchmark(fx.db, fx.catalog, fx.workload, {flaky}, {.p_error = false});
  std::size_t failed = 0;
  for (const auto& row : r.rows) {
    CHECK_FALSE(row.p_error.has_value());
    if (row.query_id == bad) CHECK(row.error == "no model");
    failed += !row.error.empty();
  }
  CHECK(failed == 1);
  CHECK(r.summaries[0].failures == 1);
  CHECK(r.summaries[0].q_error.count == fx.workload.queries.size() - 1);
}

TEST_CASE("results files repeat exactly", "[benchmark]") {
  Fixture fx;
  RunConfig cfg;
  cfg.inference_samples = 300;
  Engine engine(cfg, fx.db);
  const auto dir = std::filesystem::path(fixtures::temp_dir("bench"));
  const auto a = run_benchmark(engine.db(), engine.catalog(), fx.workload, engine.methods({"cin-exact", "histogram"}));
  write_results(dir / "a.jsonl", a);
  write_timings(dir / "t.jsonl", a);
  Engine again(cfg, generate_database(fx.spec));
  const auto b = run_benchmark(again.db(), again.catalog(), fx.workload, again.methods({"cin-exact", "histogram"}));
  write_results(dir / "b.jsonl", b);
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  CHECK(slurp(dir / "a.jsonl").find("millis") == std::string::npos);
  CHECK(slurp(dir / "t.jsonl").find("millis") != std::string::npos);
}

TEST_CASE("exact backend on single-subschema queries", "[benchmark]") {
  Fixture fx;
  fx.spec.subschema_count = 1;
  fx.spec.queries = 20;
  const auto w = workload_from_json(workload_to_json(generate_workload(fx.db, fx.spec)), fx.db);
  RunConfig cfg;
  cfg.inference_samples = 2000;
  Engine engine(cfg, fx.db);
  const auto r = run_benchmark(engine.db(), engine.catalog(), w, engine.methods({"cin-exact"}), {.p_error = false});
  CHECK(r.summaries[0].failures == 0);
  CHECK(r.summaries[0].q_error.median <= 1.05);
}
