// Command-line front end: partition, join-sample, train, estimate,
// evaluate, synth. Exit codes: 0 ok, 2 usage/config error, 3 runtime failure.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "cinest/benchmark.hpp"
#include "cinest/error.hpp"
#include "cinest/pipeline.hpp"
#include "cinest/synth.hpp"

namespace {

using namespace cinest;

struct ConfigFlags {
  std::string config;
  std::string schema;
  std::string data;
  std::string model_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  std::optional<std::size_t> train_samples;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> steps;

  void add_to(CLI::App* cmd) {
    cmd->add_option("-c,--config", config, "JSON run config");
    cmd->add_option("--schema", schema, "schema JSON (overrides config)");
    cmd->add_option("--data", data, "directory with <table>.csv files");
    cmd->add_option("--model-dir", model_dir, "directory for model files");
    cmd->add_option("--seed", seed, "base seed");
    cmd->add_option("-n,--samples", samples, "progressive samples per estimate");
    cmd->add_option("--train-samples", train_samples, "join samples per subschema for training");
    cmd->add_option("-j,--workers", workers, "parallel training jobs");
    cmd->add_option("--steps", steps, "training steps per model");
  }

  // Flags win over the config file.
  RunConfig resolve() const {
    RunConfig c = config.empty() ? RunConfig{} : RunConfig::load(config);
    if (!schema.empty()) c.schema = schema;
    if (!data.empty()) c.data_dir = data;
    if (!model_dir.empty()) c.model_dir = model_dir;
    if (seed) c.seed = *seed;
    if (samples) c.inference_samples = *samples;
    if (train_samples) c.train_samples = *train_samples;
    if (workers) c.workers = *workers;
    if (steps) c.dae.steps = *steps;
    if (c.inference_samples < 1 || c.train_samples < 1 || c.workers < 1)
      throw ParseError("sample counts and worker count must be >= 1");
    return c;
  }
};

int cmd_partition(const std::string& schema_path) {
  const SchemaGraph schema = SchemaGraph::load(schema_path);
  const auto h = partition(schema);
  std::cout << h.hyperedges.size() << " subschemas\n";
  for (const auto& s : h.hyperedges) {
    std::cout << s.name << ": center " << schema.table(s.center).name << ", tables {";
    for (std::size_t i = 0; i < s.vertices.size(); ++i) std::cout << (i ? "," : "") << schema.table(s.vertices[i]).name;
    std::cout << "}\n  edges:";
    if (s.edge_choice.empty()) std::cout << " (none)";
    for (EdgeId e : s.edge_choice) std::cout << " " << schema.edge_name(e);
    std::cout << "\n  external fanouts:";
    if (s.external_fanout_edges.empty()) std::cout << " (none)";
    for (EdgeId e : s.external_fanout_edges) std::cout << " " << schema.edge_name(e);
    std::cout << "\n";
  }
  std::cout << "hypergraph: " << (check_connected(h, schema) ? "connected" : "disconnected") << "\n";
  return 0;
}

int cmd_join_sample(const RunConfig& cfg, const std::string& subschema, const std::string& out) {
  Engine engine(cfg);
  const auto idx = engine.hypergraph().find(subschema);
  if (!idx) throw ParseError("unknown subschema '" + subschema + "'");
  const auto& s = engine.hypergraph().hyperedges[*idx];
  const auto sample = sample_join(engine.db(), engine.catalog(), s, cfg.train_samples, derive_seed(cfg.seed, "sample:" + s.name));
  save_join_sample(sample, out);
  std::cout << "wrote " << sample.sample_count << " samples of " << s.name << " (|J| = " << sample.join_size << ") to "
            << out << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  if (cfg.model_dir.empty()) throw ParseError("no model directory (--model-dir or config model_dir)");
  Engine engine(cfg);
  train_models(engine, [](const TrainedModel& m) {
    std::printf("%-12s %6zu samples  %8.2f s  final loss %.4f  -> %s\n", m.name.c_str(), m.samples, m.seconds, m.final_loss,
                m.path.string().c_str());
    std::fflush(stdout);
  });
  return 0;
}

int cmd_estimate(const RunConfig& cfg, const std::string& workload_path, const std::string& method, const std::string& out) {
  Engine engine(cfg);
  const Workload w = parse_workload(workload_path, engine.db());
  auto methods = engine.methods({method});
  std::ofstream file;
  if (!out.empty()) {
    file.open(out, std::ios::binary);
    if (!file) throw Error("cannot write " + out);
  }
  std::ostream& os = out.empty() ? std::cout : file;
  std::size_t failures = 0;
  for (const Query& q : w.queries) {
    nlohmann::json j = {{"query", q.id}, {"method", method}};
    try {
      j["estimate"] = methods.front().estimate(q);
    } catch (const Error& e) {
      j["error"] = e.what();
      ++failures;
    }
    os << j.dump() << "\n";
  }
  if (failures == w.queries.size() && failures > 0) {
    std::cerr << "error: every query failed\n";
    return 3;
  }
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& workload_path, const std::string& out, const std::string& timings) {
  Engine engine(cfg);
  const Workload w = parse_workload(workload_path, engine.db());
  BenchmarkOptions opt;
  opt.p_error = cfg.p_error;
  const auto result = run_benchmark(engine.db(), engine.catalog(), w, engine.methods(cfg.methods), opt);
  if (!out.empty()) write_results(out, result);
  if (!timings.empty()) write_timings(timings, result);
  std::cout << format_table(result);
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
              std::optional<std::size_t> queries) {
  SynthSpec spec;
  if (!spec_path.empty()) {
    std::ifstream in(spec_path);
    if (!in) throw ParseError("cannot open " + spec_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(spec_path + ": " + e.what());
    }
    spec = SynthSpec::from_json(j);
  }
  if (seed) spec.seed = *seed;
  if (queries) spec.queries = *queries;
  const Database db = generate_database(spec);
  const auto workload = generate_workload(db, spec);
  write_dataset(out_dir, db, workload);
  std::cout << "wrote " << db.schema.table_count() << " tables and " << workload.size() << " queries to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"join cardinality estimation over closed in-neighborhood subschemas"};
  app.require_subcommand(1);

  std::string schema_path;
  auto* partition_cmd = app.add_subcommand("partition", "print the subschema partition of a schema");
  partition_cmd->add_option("schema", schema_path, "schema JSON")->required();

  ConfigFlags sample_flags;
  std::string subschema, sample_out;
  auto* sample_cmd = app.add_subcommand("join-sample", "write a CINJ1 join sample of one subschema");
  sample_flags.add_to(sample_cmd);
  sample_cmd->add_option("--subschema", subschema, "subschema name")->required();
  sample_cmd->add_option("-o,--out", sample_out, "output file")->required();

  ConfigFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "train one model per subschema");
  train_flags.add_to(train_cmd);
  bool train_universal = false;
  train_cmd->add_flag("--universal", train_universal, "also train the universal-relation baseline model");

  ConfigFlags estimate_flags;
  std::string estimate_workload, estimate_method = "cin-dae", estimate_out;
  auto* estimate_cmd = app.add_subcommand("estimate", "estimate cardinalities of a workload");
  estimate_flags.add_to(estimate_cmd);
  estimate_cmd->add_option("-w,--workload", estimate_workload, "workload JSON")->required();
  estimate_cmd->add_option("-m,--method", estimate_method, "cin-exact | cin-dae | histogram | ur-exact | ur-dae");
  estimate_cmd->add_option("-o,--out", estimate_out, "JSON-lines output (default stdout)");

  ConfigFlags eval_flags;
  std::string eval_workload, eval_out, eval_timings;
  std::vector<std::string> eval_methods;
  bool no_p_error = false;
  auto* eval_cmd = app.add_subcommand("evaluate", "Q-Error / P-Error benchmark");
  eval_flags.add_to(eval_cmd);
  eval_cmd->add_option("-w,--workload", eval_workload, "workload JSON")->required();
  eval_cmd->add_option("-m,--methods", eval_methods, "methods to compare")->delimiter(',');
  eval_cmd->add_option("-o,--out", eval_out, "results file (JSON lines)");
  eval_cmd->add_option("--timings", eval_timings, "response-time file (JSON lines)");
  eval_cmd->add_flag("--no-p-error", no_p_error, "skip planning and P-Error");

  std::string synth_spec, synth_out;
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> synth_queries;
  auto* synth_cmd = app.add_subcommand("synth", "generate the synthetic dataset and workload");
  synth_cmd->add_option("--spec", synth_spec, "generator spec JSON");
  synth_cmd->add_option("-o,--out-dir", synth_out, "output directory")->required();
  synth_cmd->add_option("--seed", synth_seed, "generator seed");
  synth_cmd->add_option("--queries", synth_queries, "workload size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*partition_cmd) return cmd_partition(schema_path);
    if (*sample_cmd) return cmd_join_sample(sample_flags.resolve(), subschema, sample_out);
    if (*train_cmd) {
      RunConfig cfg = train_flags.resolve();
      if (train_universal) cfg.train_universal = true;
      return cmd_train(cfg);
    }
    if (*estimate_cmd) {
      if (std::find(kMethodNames.begin(), kMethodNames.end(), estimate_method) == kMethodNames.end())
        throw ParseError("unknown method '" + estimate_method + "'");
      return cmd_estimate(estimate_flags.resolve(), estimate_workload, estimate_method, estimate_out);
    }
    if (*eval_cmd) {
      RunConfig cfg = eval_flags.resolve();
      if (!eval_methods.empty()) cfg.methods = eval_methods;
      if (no_p_error) cfg.p_error = false;
      for (const auto& m : cfg.methods)
        if (std::find(kMethodNames.begin(), kMethodNames.end(), m) == kMethodNames.end())
          throw ParseError("unknown method '" + m + "'");
      return cmd_evaluate(cfg, eval_workload, eval_out, eval_timings);
    }
    if (*synth_cmd) return cmd_synth(synth_spec, synth_out, synth_seed, synth_queries);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const LoadError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
