#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cinest/attributes.hpp"
#include "cinest/baselines.hpp"
#include "cinest/benchmark.hpp"
#include "cinest/dae.hpp"
#include "cinest/inference.hpp"
#include "cinest/joiner.hpp"

namespace cinest {

inline const std::vector<std::string> kMethodNames = {"cin-exact", "cin-dae", "histogram", "ur-exact", "ur-dae"};

struct RunConfig {
  std::filesystem::path schema;
  std::filesystem::path data_dir;
  std::filesystem::path model_dir;
  std::size_t train_samples = 10000;
  std::size_t inference_samples = kDefaultInferenceSamples;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::uint64_t materialize_limit = kDefaultMaterializeLimit;
  std::size_t histogram_bins = kDefaultHistogramBins;
  bool train_universal = false;  // also train the ur-dae baseline model
  bool p_error = true;
  DaeConfig dae;
  std::vector<std::string> methods{"cin-dae"};

  // Relative paths are taken relative to `base_dir`.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

std::filesystem::path model_path(const RunConfig& config, const std::string& subschema);
inline constexpr const char* kUniversalModelName = "universal";

// Loaded data plus everything derived from it. Estimator sets are built on
// first use and cached.
class Engine {
 public:
  explicit Engine(RunConfig config);
  Engine(RunConfig config, Database db);

  const RunConfig& config() const { return config_; }
  const Database& db() const { return db_; }
  const AttributeCatalog& catalog() const { return catalog_; }
  const SubschemaHypergraph& hypergraph() const { return hypergraph_; }

  // Exact estimators over the materialized subschema joins; joins above the
  // materialization limit fall back to a join sample of train_samples rows.
  const EstimatorSet& exact_estimators();
  const EstimatorSet& dae_estimators();
  const DensityEstimator& universal_exact();
  const DensityEstimator& universal_dae();
  const HistogramSet& histograms();

  double estimate(const std::string& method, const Query& q);
  std::vector<Method> methods(const std::vector<std::string>& names);

  std::uint64_t query_seed(const Query& q) const;

 private:
  RunConfig config_;
  Database db_;
  AttributeCatalog catalog_;
  SubschemaHypergraph hypergraph_;
  std::optional<EstimatorSet> exact_;
  std::optional<EstimatorSet> dae_;
  std::shared_ptr<const DensityEstimator> ur_exact_;
  std::shared_ptr<const DensityEstimator> ur_dae_;
  std::optional<HistogramSet> histograms_;
};

struct TrainedModel {
  std::string name;
  std::filesystem::path path;
  std::size_t samples = 0;
  double seconds = 0;
  double final_loss = 0;
};

// Trains and saves one model per subschema (plus the universal model when
// configured) on up to config.workers threads. Seeds are derived per
// subschema name, so the worker count does not change the files.
std::vector<TrainedModel> train_models(const Engine& engine, const std::function<void(const TrainedModel&)>& on_done = {});

}  // namespace cinest
