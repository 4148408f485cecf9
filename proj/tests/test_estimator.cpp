#include <catch_amalgamated.hpp>

#include <numeric>

#include "cinest/error.hpp"
#include "cinest/estimator.hpp"
#include "cinest/synth.hpp"
#include "fixtures.hpp"

using namespace cinest;

namespace {

struct Fixture {
  Database db = generate_database(fixtures::small_spec());
  AttributeCatalog catalog{db};
  SubschemaHypergraph h = partition(db.schema);
};

// Frequencies of `target` among rows whose `cond` position equals `value`,
// counted straight from the relation's code matrix.
std::vector<double> filtered_frequencies(const JoinedRelation& rel, std::size_t target, std::optional<std::pair<std::size_t, Code>> cond) {
  std::vector<double> f(rel.layout.domain_size(target), 0);
  double n = 0;
  for (std::size_t r = 0; r < rel.row_count; ++r) {
    if (cond && rel.code(r, cond->first) != cond->second) continue;
    f[rel.code(r, target)] += 1;
    n += 1;
  }
  for (auto& x : f) x /= n;
  return f;
}

}  // namespace

TEST_CASE("exact estimator reproduces marginal and conditional frequencies", "[estimator]") {
  Fixture fx;
  for (const auto& s : fx.h.hyperedges) {
    const auto rel = materialize(fx.db, fx.catalog, s);
    const ExactEmpiricalEstimator est(rel);
    CHECK(est.join_size() == rel.row_count);
    const std::size_t width = rel.layout.size();
    for (std::size_t target = 0; target < width; ++target) {
      Assignments none(1, width);
      std::vector<double> out;
      est.conditional(none, target, out);
      const auto want = filtered_frequencies(rel, target, std::nullopt);
      REQUIRE(out.size() == want.size());
      for (std::size_t c = 0; c < want.size(); ++c) CHECK(out[c] == Catch::Approx(want[c]).margin(1e-12));

      // Condition on every observed value of one other attribute.
      const std::size_t cond = (target + 1) % width;
      Assignments rows(rel.layout.domain_size(cond), width);
      for (std::size_t v = 0; v < rows.rows(); ++v) rows.set(v, cond, static_cast<std::int32_t>(v));
      est.conditional(rows, target, out);
      for (std::size_t v = 0; v < rows.rows(); ++v) {
        double total = 0;
        for (std::size_t c = 0; c < want.size(); ++c) total += out[v * want.size() + c];
        CHECK(total == Catch::Approx(1.0).margin(1e-6));
        bool seen = false;
        for (std::size_t r = 0; r < rel.row_count && !seen; ++r) seen = rel.code(r, cond) == v;
        if (!seen) continue;
        const auto w = filtered_frequencies(rel, target, std::make_pair(cond, static_cast<Code>(v)));
        for (std::size_t c = 0; c < w.size(); ++c) CHECK(out[v * want.size() + c] == Catch::Approx(w[c]).margin(1e-12));
      }
    }
  }
}

TEST_CASE("exact estimator falls back to the marginal without matches", "[estimator]") {
  using K = ColumnKind;
  const SchemaGraph g({{"X", {{"a", K::integer}, {"b", K::integer}}}}, {});
  const Database db = fixtures::make_db(g, {{"X", {{"1", "1"}, {"1", "2"}, {"2", "2"}, {"3", "2"}}}});
  const AttributeCatalog catalog(db);
  const auto rel = materialize(db, catalog, partition(g).hyperedges[0]);
  const ExactEmpiricalEstimator est(rel);
  const auto pa = *rel.layout.position(*catalog.base(0, 0)), pb = *rel.layout.position(*catalog.base(0, 1));
  Assignments in(1, rel.layout.size());
  in.set(0, pa, 0);  // NULL never occurs
  std::vector<double> out;
  est.conditional(in, pb, out);
  CHECK(out == std::vector<double>{0.0, 0.25, 0.75});

  in.set(0, pa, 1);
  est.conditional(in, pb, out);
  CHECK(out == std::vector<double>{0.0, 0.5, 0.5});
}

TEST_CASE("exact estimator over a join sample", "[estimator]") {
  Fixture fx;
  const auto& s = fx.h.hyperedges[0];
  const auto sample = sample_join(fx.db, fx.catalog, s, 3000, 5);
  const ExactEmpiricalEstimator est(sample);
  CHECK(est.join_size() == sample.join_size);
  CHECK(est.row_count() == 3000);
  const std::size_t target = 0;
  std::vector<double> want(sample.layout.domain_size(target), 0);
  for (std::size_t r = 0; r < sample.sample_count; ++r) want[sample.code(r, target)] += 1.0 / 3000;
  std::vector<double> out;
  est.conditional(Assignments(1, sample.layout.size()), target, out);
  for (std::size_t c = 0; c < want.size(); ++c) CHECK(out[c] == Catch::Approx(want[c]).margin(1e-12));
}

TEST_CASE("estimator argument checks", "[estimator]") {
  Fixture fx;
  const auto rel = materialize(fx.db, fx.catalog, fx.h.hyperedges[0]);
  const ExactEmpiricalEstimator est(rel);
  std::vector<double> out;
  CHECK_THROWS_AS(est.conditional(Assignments(1, rel.layout.size()), rel.layout.size(), out), EstimationError);
  CHECK_THROWS_AS(est.conditional(Assignments(1, rel.layout.size() + 1), 0, out), EstimationError);
}

TEST_CASE("recording estimator forwards and logs requests", "[estimator]") {
  Fixture fx;
  auto inner = std::make_shared<ExactEmpiricalEstimator>(materialize(fx.db, fx.catalog, fx.h.hyperedges[0]));
  RecordingEstimator rec(inner);
  Assignments in(2, inner->layout().size());
  in.set(1, 2, 1);
  std::vector<double> a, b;
  rec.conditional(in, 0, a);
  inner->conditional(in, 0, b);
  CHECK(a == b);
  REQUIRE(rec.requests().size() == 1);
  CHECK(rec.requests()[0].target == 0);
  CHECK(rec.requests()[0].assigned == std::vector<std::size_t>{2});
}
