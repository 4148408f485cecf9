#include "cinest/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

#include "cinest/error.hpp"
#include "cinest/random.hpp"

namespace cinest {

RunConfig RunConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  auto path = [&](const char* key) -> std::filesystem::path {
    if (!j.contains(key)) return {};
    std::filesystem::path p = j.at(key).get<std::string>();
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  try {
    c.schema = path("schema");
    c.data_dir = path("data_dir");
    c.model_dir = path("model_dir");
    c.train_samples = j.value("train_samples", c.train_samples);
    c.inference_samples = j.value("inference_samples", c.inference_samples);
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    c.materialize_limit = j.value("materialize_limit", c.materialize_limit);
    c.histogram_bins = j.value("histogram_bins", c.histogram_bins);
    c.train_universal = j.value("train_universal", c.train_universal);
    c.p_error = j.value("p_error", c.p_error);
    if (j.contains("dae")) c.dae = DaeConfig::from_json(j.at("dae"));
    if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  } catch (const ModelError& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (c.train_samples < 1) throw ParseError("config: train_samples must be >= 1");
  if (c.inference_samples < 1) throw ParseError("config: inference_samples must be >= 1");
  if (c.workers < 1) throw ParseError("config: workers must be >= 1");
  for (const auto& m : c.methods)
    if (std::find(kMethodNames.begin(), kMethodNames.end(), m) == kMethodNames.end())
      throw ParseError("unknown method '" + m + "'");
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

nlohmann::json RunConfig::to_json() const {
  return {{"schema", schema.string()},
          {"data_dir", data_dir.string()},
          {"model_dir", model_dir.string()},
          {"train_samples", train_samples},
          {"inference_samples", inference_samples},
          {"seed", seed},
          {"workers", workers},
          {"materialize_limit", materialize_limit},
          {"histogram_bins", histogram_bins},
          {"train_universal", train_universal},
          {"p_error", p_error},
          {"dae", dae.to_json()},
          {"methods", methods}};
}

std::filesystem::path model_path(const RunConfig& config, const std::string& subschema) {
  return config.model_dir / (subschema + ".cinm");
}

namespace {

Database load_configured(const RunConfig& config) {
  if (config.schema.empty()) throw ParseError("config: no schema path");
  if (config.data_dir.empty()) throw ParseError("config: no data_dir");
  return load_database(SchemaGraph::load(config.schema), config.data_dir);
}

}  // namespace

Engine::Engine(RunConfig config) : Engine(config, load_configured(config)) {}

Engine::Engine(RunConfig config, Database db)
    : config_(std::move(config)), db_(std::move(db)), catalog_(db_), hypergraph_(partition(db_.schema)) {}

const EstimatorSet& Engine::exact_estimators() {
  if (!exact_) {
    EstimatorSet set;
    for (const auto& s : hypergraph_.hyperedges) {
      const JoinTree tree = subschema_tree(s);
      if (full_outer_join_size(db_, catalog_, tree) <= config_.materialize_limit) {
        set.push_back(std::make_shared<ExactEmpiricalEstimator>(materialize(db_, catalog_, s, config_.materialize_limit)));
      } else {
        const auto sample = sample_join(db_, catalog_, s, config_.train_samples, derive_seed(config_.seed, "sample:" + s.name));
        set.push_back(std::make_shared<ExactEmpiricalEstimator>(sample));
      }
    }
    exact_ = std::move(set);
  }
  return *exact_;
}

const EstimatorSet& Engine::dae_estimators() {
  if (!dae_) {
    EstimatorSet set;
    for (const auto& s : hypergraph_.hyperedges)
      set.push_back(std::make_shared<DaeModel>(load_model(model_path(config_, s.name), subschema_layout(catalog_, db_.schema, s))));
    dae_ = std::move(set);
  }
  return *dae_;
}

const DensityEstimator& Engine::universal_exact() {
  if (!ur_exact_) {
    const auto layout = universal_layout(catalog_, db_.schema);
    ur_exact_ = std::make_shared<ExactEmpiricalEstimator>(
        materialize(db_, catalog_, universal_tree(db_.schema), layout, config_.materialize_limit));
  }
  return *ur_exact_;
}

const DensityEstimator& Engine::universal_dae() {
  if (!ur_dae_)
    ur_dae_ = std::make_shared<DaeModel>(
        load_model(model_path(config_, kUniversalModelName), universal_layout(catalog_, db_.schema)));
  return *ur_dae_;
}

const HistogramSet& Engine::histograms() {
  if (!histograms_) histograms_ = HistogramSet(db_, config_.histogram_bins);
  return *histograms_;
}

std::uint64_t Engine::query_seed(const Query& q) const { return derive_seed(config_.seed, "inference:" + q.id); }

double Engine::estimate(const std::string& method, const Query& q) {
  InferenceOptions opt;
  opt.samples = config_.inference_samples;
  opt.seed = query_seed(q);
  if (method == "cin-exact")
    return estimate_cardinality(q, db_.schema, hypergraph_, exact_estimators(), catalog_, opt).cardinality;
  if (method == "cin-dae")
    return estimate_cardinality(q, db_.schema, hypergraph_, dae_estimators(), catalog_, opt).cardinality;
  if (method == "histogram") return estimate_independent(q, histograms());
  if (method == "ur-exact") return estimate_universal(q, db_.schema, universal_exact(), catalog_, opt.samples, opt.seed);
  if (method == "ur-dae") return estimate_universal(q, db_.schema, universal_dae(), catalog_, opt.samples, opt.seed);
  throw ParseError("unknown method '" + method + "'");
}

std::vector<Method> Engine::methods(const std::vector<std::string>& names) {
  std::vector<Method> out;
  for (const auto& name : names) {
    if (std::find(kMethodNames.begin(), kMethodNames.end(), name) == kMethodNames.end())
      throw ParseError("unknown method '" + name + "'");
    // Load models up front so a missing file is a setup failure rather
    // than one error per query.
    if (name == "cin-exact") exact_estimators();
    if (name == "cin-dae") dae_estimators();
    if (name == "histogram") histograms();
    if (name == "ur-exact") universal_exact();
    if (name == "ur-dae") universal_dae();
    out.push_back({name, [this, name](const Query& q) { return estimate(name, q); }});
  }
  return out;
}

std::vector<TrainedModel> train_models(const Engine& engine, const std::function<void(const TrainedModel&)>& on_done) {
  const RunConfig& cfg = engine.config();
  const auto& db = engine.db();
  const auto& catalog = engine.catalog();
  const auto& h = engine.hypergraph();
  std::filesystem::create_directories(cfg.model_dir);

  // Job i < hyperedge count trains subschema i; the optional last job
  // trains the universal relation.
  const std::size_t jobs = h.hyperedges.size() + (cfg.train_universal ? 1 : 0);
  std::vector<TrainedModel> done(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  std::mutex report_mutex;

  auto run = [&](std::size_t i) {
    const bool universal = i == h.hyperedges.size();
    const std::string name = universal ? kUniversalModelName : h.hyperedges[i].name;
    JoinSample sample;
    const std::uint64_t sample_seed = derive_seed(cfg.seed, "sample:" + name);
    if (universal) {
      const auto rel = materialize(db, catalog, universal_tree(db.schema), universal_layout(catalog, db.schema),
                                   cfg.materialize_limit);
      sample = sample_rows(rel, cfg.train_samples, sample_seed);
    } else {
      sample = sample_join(db, catalog, h.hyperedges[i], cfg.train_samples, sample_seed);
    }
    DaeConfig dc = cfg.dae;
    dc.seed = derive_seed(cfg.seed, "dae:" + name);
    TrainReport report;
    const DaeModel model = train_dae(sample, dc, &report);
    TrainedModel tm{name, model_path(cfg, name), sample.sample_count, report.seconds,
                    report.losses.empty() ? 0.0 : report.losses.back()};
    save_model(model, tm.path);
    done[i] = tm;
    if (on_done) {
      std::lock_guard lock(report_mutex);
      on_done(tm);
    }
  };
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs; i = next++) {
      try {
        run(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(cfg.workers, std::max<std::size_t>(jobs, 1));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return done;
}

}  // namespace cinest
