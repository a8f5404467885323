#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fhm/checkpoint.hpp"
#include "fhm/dataset.hpp"
#include "fhm/error.hpp"
#include "fhm/evalmetrics.hpp"
#include "fhm/fcm_reference.hpp"
#include "fhm/inverse.hpp"
#include "fhm/topology.hpp"
#include "fhm/training.hpp"

namespace fhm::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Everything a subcommand may read, as given on the command line. Unset
// options fall back to the config file, then to the built-in defaults.
struct Flags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> topology;
  std::optional<std::string> data;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> folds;
  std::optional<std::size_t> tmax;
  std::optional<double> lambda_soft;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> samples;
  std::optional<double> noise;
  std::optional<std::string> checkpoint;
  std::optional<std::string> query;
  std::optional<std::string> start;
  std::optional<std::string> activation;
  std::vector<std::string> reports;
};

struct RunConfig {
  std::string topology = "base-urban-9";
  std::optional<fs::path> data;
  fs::path out = "runs";
  std::optional<std::uint64_t> seed;
  TrainConfig train;
  InverseSchedule inverse;
  std::optional<std::size_t> samples;
  std::optional<double> noise;
  std::optional<double> drive_std;
  std::optional<fs::path> checkpoint;
  std::optional<fs::path> query;
  std::vector<double> start;
  Activation activation = Activation::sigmoid;

  std::uint64_t require_seed() const {
    if (!seed) throw ConfigError("a seed is required (--seed or \"seed\" in the config file)");
    return *seed;
  }
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

json parse_json_file(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + " is not valid JSON: " + e.what());
  }
}

std::vector<double> parse_vector(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("'" + item + "' in --start is not a number");
    }
  }
  return v;
}

Activation parse_activation(const std::string& name) {
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + name + "' (sigmoid, tanh)");
}

// Relative paths in a config file are relative to that file.
fs::path relative_to(const fs::path& base, const std::string& path) {
  const fs::path p(path);
  return p.is_absolute() || base.empty() ? p : base / p;
}

bool looks_like_path(const std::string& s) {
  return s.find('/') != std::string::npos || s.ends_with(".json");
}

RunConfig resolve(const Flags& f) {
  RunConfig rc;
  if (f.config) {
    const fs::path path(*f.config);
    const json doc = parse_json_file(path);
    if (!doc.is_object()) throw ConfigError(path.string() + " must hold a JSON object");
    const fs::path base = path.parent_path();
    try {
      if (doc.contains("topology")) {
        const auto t = doc.at("topology").get<std::string>();
        rc.topology = looks_like_path(t) ? relative_to(base, t).string() : t;
      }
      if (doc.contains("data") && !doc.at("data").is_null()) {
        rc.data = relative_to(base, doc.at("data").get<std::string>());
      }
      if (doc.contains("out")) rc.out = relative_to(base, doc.at("out").get<std::string>());
      if (doc.contains("seed")) rc.seed = doc.at("seed").get<std::uint64_t>();
      if (doc.contains("train")) rc.train = train_config_from_json(doc.at("train"), rc.train);
      if (doc.contains("threads")) rc.train.threads = doc.at("threads").get<std::size_t>();
      if (doc.contains("inverse")) {
        const json& inv = doc.at("inverse");
        rc.inverse.steps = inv.value("steps", rc.inverse.steps);
        rc.inverse.lambda_soft = inv.value("lambda_soft", rc.inverse.lambda_soft);
        rc.inverse.noise_std = inv.value("noise_std", rc.inverse.noise_std);
        rc.inverse.lr = inv.value("lr", rc.inverse.lr);
        rc.inverse.momentum = inv.value("momentum", rc.inverse.momentum);
      }
      if (doc.contains("generator")) {
        const json& g = doc.at("generator");
        if (g.contains("samples")) rc.samples = g.at("samples").get<std::size_t>();
        if (g.contains("noise")) rc.noise = g.at("noise").get<double>();
        if (g.contains("drive_std")) rc.drive_std = g.at("drive_std").get<double>();
      }
      if (doc.contains("checkpoint")) {
        rc.checkpoint = relative_to(base, doc.at("checkpoint").get<std::string>());
      }
      if (doc.contains("query")) rc.query = relative_to(base, doc.at("query").get<std::string>());
      if (doc.contains("start")) rc.start = doc.at("start").get<std::vector<double>>();
      if (doc.contains("activation")) {
        rc.activation = parse_activation(doc.at("activation").get<std::string>());
      }
    } catch (const json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  if (f.topology) rc.topology = *f.topology;
  if (f.data) rc.data = *f.data;
  if (f.out) rc.out = *f.out;
  if (f.seed) rc.seed = *f.seed;
  if (f.threads) rc.train.threads = *f.threads;
  if (f.epochs) rc.train.epochs = *f.epochs;
  if (f.folds) rc.train.folds = *f.folds;
  if (f.tmax) rc.train.t_max = *f.tmax;
  if (f.lambda_soft) rc.inverse.lambda_soft = *f.lambda_soft;
  if (f.steps) rc.inverse.steps = *f.steps;
  if (f.samples) rc.samples = *f.samples;
  if (f.noise) rc.noise = *f.noise;
  if (f.checkpoint) rc.checkpoint = *f.checkpoint;
  if (f.query) rc.query = *f.query;
  if (f.start) rc.start = parse_vector(*f.start);
  if (f.activation) rc.activation = parse_activation(*f.activation);
  if (rc.seed) rc.train.seed = *rc.seed;
  return rc;
}

// The topology with the run's generator overrides applied. The run seed
// also seeds the generator.
TopologySpec load_spec(const RunConfig& rc) {
  TopologySpec spec = resolve_topology(rc.topology);
  if (rc.seed) spec.generator.seed = *rc.seed;
  if (rc.samples) spec.generator.samples = *rc.samples;
  if (rc.noise) spec.generator.noise = *rc.noise;
  if (rc.drive_std) spec.generator.drive_std = *rc.drive_std;
  spec.validate();
  return spec;
}

fs::path run_dir(const RunConfig& rc, const std::string& command, const std::string& name,
                 const json& identity) {
  const fs::path dir = rc.out / (command + "-" + name + "-" + config_hash(identity.dump()));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int cmd_generate(const RunConfig& rc, std::ostream& out) {
  rc.require_seed();
  const TopologySpec spec = load_spec(rc);
  const MetricDataset data = generate_synthetic(spec);
  const json identity{{"command", "generate"}, {"topology", to_json(spec)}};
  const fs::path dir = run_dir(rc, "generate", spec.name, identity);
  write_csv(data, dir / "data.csv");
  write_topology(spec, dir / "topology.json");
  const double density =
      static_cast<double>(spec.edges.size()) / static_cast<double>(spec.size());
  out << "generated " << spec.name << ": n=" << spec.size() << " N=" << data.samples()
      << " edges=" << spec.edges.size() << " density=" << std::fixed << std::setprecision(2)
      << density << " edges/node\n"
      << "wrote " << (dir / "data.csv").string() << " and " << (dir / "topology.json").string()
      << '\n';
  return kOk;
}

int cmd_train(const RunConfig& rc, std::ostream& out) {
  rc.require_seed();
  rc.train.validate();
  const TopologySpec spec = load_spec(rc);
  const FcmGraph graph = spec.graph();

  MetricDataset data;
  json source;
  if (rc.data) {
    data = load_csv(*rc.data, CsvSchema::from_topology(spec));
    source = {{"kind", "csv"},
              {"path", rc.data->filename().string()},
              {"content_hash", config_hash(read_file(*rc.data))},
              {"dropped_rows", data.dropped_rows}};
  } else {
    data = generate_synthetic(spec);
    source = {{"kind", "synthetic"},
              {"samples", spec.generator.samples},
              {"noise", spec.generator.noise},
              {"drive_std", spec.generator.drive_std},
              {"seed", spec.generator.seed}};
  }
  source["rows"] = data.samples();

  const json identity{{"command", "train"},
                      {"topology", to_json(spec)},
                      {"data", source},
                      {"train", to_json(rc.train)}};
  const fs::path dir = run_dir(rc, "train", spec.name, identity);

  const auto started = std::chrono::steady_clock::now();
  const CrossValidation cv = cross_validate(data, graph, rc.train, spec.name);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  json details = json::array();
  for (const auto& f : cv.folds) {
    const std::string file = "fold_" + std::to_string(f.fold) + ".json";
    write_checkpoint({graph, rc.train, f.params, f.fold}, dir / file);
    details.push_back({{"fold", f.fold},
                       {"checkpoint", file},
                       {"train_rows", f.train_rows},
                       {"validation_rows", f.validation_rows},
                       {"validation_loss", f.validation_loss},
                       {"s_perf", f.s_perf},
                       {"final_train_loss", f.train_loss.empty() ? 0.0 : f.train_loss.back()}});
  }
  json report = to_json(cv.report);
  report["data"] = source;
  report["fold_details"] = std::move(details);
  write_file(dir / "report.json", report.dump(2) + "\n");

  const std::string table = render_table({cv.report});
  write_file(dir / "table.txt", table);
  const json best{{"best_fold", cv.report.best_fold},
                  {"checkpoint", "fold_" + std::to_string(cv.report.best_fold) + ".json"},
                  {"direct_edge_accuracy", cv.best().direct}};
  write_file(dir / "best_fold.json", best.dump(2) + "\n");
  write_file(dir / "timing.json", json{{"seconds", seconds}, {"threads", rc.train.threads}}.dump(2) + "\n");

  out << table << "best fold: " << cv.report.best_fold << "\n"
      << "wrote " << dir.string() << '\n';
  return kOk;
}

Checkpoint load_checkpoint(const fs::path& path) {
  if (fs::is_directory(path)) {
    const json best = parse_json_file(path / "best_fold.json");
    return read_checkpoint(path / best.at("checkpoint").get<std::string>());
  }
  return read_checkpoint(path);
}

int cmd_invert(const RunConfig& rc, const Flags& flags, std::ostream& out) {
  if (!rc.checkpoint) throw ConfigError("invert needs --checkpoint");
  if (!rc.query) throw ConfigError("invert needs --query");
  const Checkpoint ck = load_checkpoint(*rc.checkpoint);
  const json query = parse_json_file(*rc.query);

  std::map<std::size_t, double> targets;
  InverseSchedule schedule = rc.inverse;
  std::uint64_t seed = rc.seed.value_or(ck.config.seed);
  try {
    if (query.contains("targets")) {
      for (const auto& [name, value] : query.at("targets").items()) {
        targets[ck.graph.index_of(name)] = value.get<double>();
      }
    }
    if (query.contains("fuzzy")) {
      std::map<std::string, std::string> labels = query.at("fuzzy").get<std::map<std::string, std::string>>();
      const auto memberships = query.contains("memberships")
                                   ? query.at("memberships").get<std::map<std::string, double>>()
                                   : default_memberships();
      for (const auto& [node, value] : fuzzy_query(labels, memberships, ck.graph)) targets[node] = value;
    }
    if (query.contains("schedule")) {
      const json& s = query.at("schedule");
      schedule.steps = s.value("steps", schedule.steps);
      schedule.lambda_soft = s.value("lambda_soft", schedule.lambda_soft);
      schedule.noise_std = s.value("noise_std", schedule.noise_std);
      schedule.lr = s.value("lr", schedule.lr);
      schedule.momentum = s.value("momentum", schedule.momentum);
    }
    if (query.contains("seed") && !flags.seed) seed = query.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError("query: " + std::string(e.what()));
  }
  if (flags.steps) schedule.steps = *flags.steps;
  if (flags.lambda_soft) schedule.lambda_soft = *flags.lambda_soft;

  const InverseProblem problem =
      InverseProblem::from_model(ck.params.w_fcm, ck.graph.adjacency(), targets, schedule, seed);
  const InverseSolution sol = solve(problem);

  json schedule_json{{"steps", schedule.steps},         {"lambda_soft", schedule.lambda_soft},
                     {"noise_std", schedule.noise_std}, {"lr", schedule.lr},
                     {"momentum", schedule.momentum},   {"seed", seed}};
  json target_json = json::object();
  for (const auto& [node, value] : targets) target_json[ck.graph.nodes()[node]] = value;
  json doc;
  doc["targets"] = target_json;
  doc["schedule"] = schedule_json;
  doc["checkpoint_fold"] = ck.fold;
  doc["late_phase_note"] =
      "for t >= T/2 the raw flow is compared against logit(target)";
  const json solution = to_json(sol, ck.graph);
  for (const auto& [key, value] : solution.items()) doc[key] = value;

  const json identity{{"command", "invert"},
                      {"checkpoint", to_json(ck)},
                      {"targets", target_json},
                      {"schedule", schedule_json}};
  const fs::path dir = run_dir(rc, "invert", "query", identity);
  write_file(dir / "solution.json", doc.dump(2) + "\n");

  out << "inverse solve, T=" << schedule.steps << ", lambda_soft=" << schedule.lambda_soft << '\n';
  for (const auto& [node, value] : targets) {
    out << "  " << ck.graph.nodes()[node] << ": target " << value << ", predicted "
        << sol.predicted[node] << '\n';
  }
  out << "  ||F_forbidden||_2 = " << sol.forbidden_norm << '\n'
      << "wrote " << (dir / "solution.json").string() << '\n';
  return kOk;
}

int cmd_fcm_sim(const RunConfig& rc, std::ostream& out) {
  const std::uint64_t seed = rc.require_seed();
  const TopologySpec spec = load_spec(rc);
  const FcmGraph graph = spec.graph();
  Rng rng(seed);
  const Matrix weights = sample_weights(graph.adjacency(), rng);
  std::vector<double> start = rc.start;
  if (start.empty()) start.assign(graph.size(), 0.5);
  if (start.size() != graph.size()) {
    throw ConfigError("--start has " + std::to_string(start.size()) + " values for " +
                      std::to_string(graph.size()) + " nodes");
  }
  const ClassicFcm fcm(weights, FcmOptions{rc.activation});
  const FixedPointResult fp = fcm.run_to_fixed_point(start, {}, true);

  std::string csv = "step";
  for (const auto& n : graph.nodes()) csv += "," + n;
  csv += '\n';
  for (std::size_t k = 0; k < fp.trajectory.size(); ++k) {
    csv += std::to_string(k);
    for (double v : fp.trajectory[k]) csv += "," + format_double(v);
    csv += '\n';
  }
  json start_json = start;
  const json identity{{"command", "fcm-sim"},
                      {"topology", to_json(spec)},
                      {"seed", seed},
                      {"start", start_json},
                      {"activation", rc.activation == Activation::tanh ? "tanh" : "sigmoid"}};
  const fs::path dir = run_dir(rc, "fcm-sim", spec.name, identity);
  write_file(dir / "trajectory.csv", csv);
  out << (fp.converged ? "converged" : "not converged") << " after " << fp.iterations
      << " iterations, residual " << fcm.residual(fp.state) << '\n'
      << "wrote " << (dir / "trajectory.csv").string() << '\n';
  return kOk;
}

int cmd_eval(const RunConfig& rc, const Flags& flags, std::ostream& out) {
  std::vector<EvalReport> reports;
  for (const auto& path : flags.reports) reports.push_back(report_from_json(parse_json_file(path)));
  if (rc.checkpoint) {
    const Checkpoint ck = load_checkpoint(*rc.checkpoint);
    FoldScore score{ck.fold, direct_edge_accuracy(ck.params.w_fcm, ck.graph.adjacency()), {}};
    try {
      score.transitive = transitive_chain_accuracy(ck.params.w_fcm, ck.graph.adjacency());
    } catch (const UndefinedMetricError&) {
    }
    reports.push_back(aggregate("checkpoint fold " + std::to_string(ck.fold), ck.graph.size(), {score}));
  }
  if (reports.empty()) throw ConfigError("eval needs --report or --checkpoint");
  out << render_table(reports);
  return kOk;
}

const char* category(const Error& e) {
  if (dynamic_cast<const SchemaError*>(&e)) return "schema";
  if (dynamic_cast<const IngestionError*>(&e)) return "ingestion";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const UsageError*>(&e)) return "usage";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric";
  if (dynamic_cast<const GenerationError*>(&e)) return "generation";
  if (dynamic_cast<const DimensionError*>(&e)) return "dimension";
  if (dynamic_cast<const UndefinedMetricError*>(&e)) return "metric";
  return "error";
}

int exit_code(const Error& e) {
  if (dynamic_cast<const IoError*>(&e)) return kIoError;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const UsageError*>(&e)) {
    return kConfigError;
  }
  return kRuntimeError;
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file (flags override it)");
  sub->add_option("--seed", f.seed, "Random seed");
  sub->add_option("--out", f.out, "Output root directory");
}

}  // namespace

std::string config_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"FHM: learn, evaluate and invert fuzzy cognitive maps", "fhm"};
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("generate", "Synthesise a dataset for a topology");
  add_common(gen, f);
  gen->add_option("--topology", f.topology, "Built-in name or topology file");
  gen->add_option("--samples", f.samples, "Number of rows N");
  gen->add_option("--noise", f.noise, "Observation noise std");

  auto* train = app.add_subcommand("train", "Cross-validate the model on a dataset");
  add_common(train, f);
  train->add_option("--topology", f.topology, "Built-in name or topology file");
  train->add_option("--data", f.data, "CSV dataset (synthesised when omitted)");
  train->add_option("--samples", f.samples, "Rows to synthesise when --data is omitted");
  train->add_option("--threads", f.threads, "Folds trained concurrently");
  train->add_option("--epochs", f.epochs, "Training epochs per fold");
  train->add_option("--folds", f.folds, "Cross-validation folds");
  train->add_option("--tmax", f.tmax, "Propagation steps");

  auto* invert = app.add_subcommand("invert", "Solve for inputs that reach target outputs");
  add_common(invert, f);
  invert->add_option("--checkpoint", f.checkpoint, "Checkpoint file or train output directory");
  invert->add_option("--query", f.query, "Query JSON file");
  invert->add_option("--steps", f.steps, "Solver steps T");
  invert->add_option("--lambda-soft", f.lambda_soft, "Topology penalty weight");

  auto* sim = app.add_subcommand("fcm-sim", "Run the reference FCM to a fixed point");
  add_common(sim, f);
  sim->add_option("--topology", f.topology, "Built-in name or topology file");
  sim->add_option("--start", f.start, "Comma-separated start state (default all 0.5)");
  sim->add_option("--activation", f.activation, "sigmoid or tanh");

  auto* eval = app.add_subcommand("eval", "Render report files or score a checkpoint");
  eval->add_option("--report", f.reports, "report.json from a train run (repeatable)");
  eval->add_option("--checkpoint", f.checkpoint, "Checkpoint file or train output directory");

  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    const RunConfig rc = resolve(f);
    if (gen->parsed()) return cmd_generate(rc, out);
    if (train->parsed()) return cmd_train(rc, out);
    if (invert->parsed()) return cmd_invert(rc, f, out);
    if (sim->parsed()) return cmd_fcm_sim(rc, out);
    if (eval->parsed()) return cmd_eval(rc, f, out);
  } catch (const Error& e) {
    err << "fhm: " << category(e) << " error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    err << "fhm: error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kConfigError;
}

}  // namespace fhm::cli
