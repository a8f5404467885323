#include "fhm/checkpoint.hpp"

#include <fstream>

#include "fhm/error.hpp"

namespace fhm {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kFormat = "fhm-checkpoint";
constexpr int kVersion = 1;

}  // namespace

json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"data", std::vector<double>(m.values().begin(), m.values().end())}};
}

Matrix matrix_from_json(const json& doc) {
  try {
    const auto rows = doc.at("rows").get<std::size_t>();
    const auto cols = doc.at("cols").get<std::size_t>();
    return Matrix(rows, cols, doc.at("data").get<std::vector<double>>());
  } catch (const DimensionError& e) {
    throw SchemaError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed matrix: ") + e.what());
  }
}

json to_json(const FcmGraph& graph) {
  json groups = json::array();
  for (const auto& g : graph.groups()) groups.push_back({{"name", g.name}, {"nodes", g.nodes}});
  return {{"nodes", graph.nodes()}, {"adjacency", matrix_to_json(graph.adjacency())},
          {"groups", std::move(groups)}};
}

FcmGraph graph_from_json(const json& doc) {
  std::vector<MetricGroup> groups;
  for (const auto& g : doc.at("groups")) {
    groups.push_back({g.at("name").get<std::string>(), g.at("nodes").get<std::vector<std::size_t>>()});
  }
  return FcmGraph(doc.at("nodes").get<std::vector<std::string>>(),
                  matrix_from_json(doc.at("adjacency")), std::move(groups));
}

json to_json(const Checkpoint& c) {
  json params = json::object();
  const auto names = c.params.tensor_names();
  const auto tensors = c.params.tensors();
  for (std::size_t i = 0; i < names.size(); ++i) params[names[i]] = matrix_to_json(*tensors[i]);
  json cfg = to_json(c.config);
  return {{"format", kFormat}, {"version", kVersion}, {"seed", c.config.seed},
          {"fold", c.fold},    {"config", std::move(cfg)}, {"graph", to_json(c.graph)},
          {"params", std::move(params)}};
}

Checkpoint checkpoint_from_json(const json& doc) {
  try {
    if (doc.value("format", std::string()) != kFormat) {
      throw SchemaError("not an fhm checkpoint (missing format tag)");
    }
    if (doc.at("version").get<int>() != kVersion) {
      throw SchemaError("unsupported checkpoint version " + doc.at("version").dump());
    }
    Checkpoint c;
    c.graph = graph_from_json(doc.at("graph"));
    c.config = train_config_from_json(doc.at("config"));
    c.fold = doc.value("fold", std::size_t{0});
    const json& params = doc.at("params");
    c.params.heads.resize(c.graph.groups().size());
    const auto names = c.params.tensor_names();
    auto tensors = c.params.tensors();
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (!params.contains(names[i])) throw SchemaError("checkpoint lacks tensor '" + names[i] + "'");
      *tensors[i] = matrix_from_json(params.at(names[i]));
    }
    validate_params(c.params, c.graph);
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed checkpoint: ") + e.what());
  }
}

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << to_json(checkpoint).dump(1) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace fhm
