#include "fhm/topology.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "builtin_topologies.hpp"
#include "fhm/error.hpp"

namespace fhm {

namespace {

using json = nlohmann::ordered_json;

std::size_t resolve_node(const json& ref, const std::vector<std::string>& nodes,
                         const std::string& context) {
  if (ref.is_number_unsigned()) {
    const auto i = ref.get<std::size_t>();
    if (i >= nodes.size()) {
      throw ConfigError(context + ": node index " + std::to_string(i) + " out of range");
    }
    return i;
  }
  if (ref.is_string()) {
    const auto name = ref.get<std::string>();
    const auto it = std::find(nodes.begin(), nodes.end(), name);
    if (it == nodes.end()) throw ConfigError(context + ": unknown node '" + name + "'");
    return static_cast<std::size_t>(it - nodes.begin());
  }
  throw ConfigError(context + ": node reference must be a name or an index");
}

template <typename T>
T field(const json& doc, const char* key, const std::string& context) {
  if (!doc.contains(key)) throw ConfigError(context + ": missing field '" + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(context + ": field '" + key + "': " + e.what());
  }
}

}  // namespace

FcmGraph TopologySpec::graph() const {
  validate();
  Matrix a(size(), size());
  for (const auto& e : edges) a(e.from, e.to) = e.sign;
  return FcmGraph(nodes, std::move(a), groups);
}

void TopologySpec::validate() const {
  const std::string context = "topology '" + name + "'";
  if (nodes.empty()) throw ConfigError(context + " has no nodes");
  std::set<std::string> unique(nodes.begin(), nodes.end());
  if (unique.size() != nodes.size()) throw ConfigError(context + " has duplicate node names");
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& e : edges) {
    if (e.from >= size() || e.to >= size()) {
      throw ConfigError(context + ": edge references a node outside 0.." +
                        std::to_string(size() - 1));
    }
    if (e.from == e.to) throw ConfigError(context + ": self-loop on '" + nodes[e.from] + "'");
    if (e.sign != 1 && e.sign != -1) throw ConfigError(context + ": edge sign must be +1 or -1");
    if (!seen.insert({e.from, e.to}).second) {
      throw ConfigError(context + ": duplicate edge " + nodes[e.from] + " -> " + nodes[e.to]);
    }
  }
  if (!(generator.noise >= 0.0) || !(generator.drive_std >= 0.0)) {
    throw ConfigError(context + ": generator noise and drive_std must be non-negative");
  }
}

TopologySpec topology_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("topology document must be a JSON object");
  TopologySpec spec;
  spec.name = doc.contains("name") ? field<std::string>(doc, "name", "topology") : "unnamed";
  const std::string context = "topology '" + spec.name + "'";
  spec.nodes = field<std::vector<std::string>>(doc, "nodes", context);

  for (const auto& e : doc.value("edges", json::array())) {
    Edge edge;
    edge.from = resolve_node(e.at("from"), spec.nodes, context);
    edge.to = resolve_node(e.at("to"), spec.nodes, context);
    edge.sign = e.value("sign", 1);
    spec.edges.push_back(edge);
  }

  const json groups = field<json>(doc, "groups", context);
  if (!groups.is_object()) throw ConfigError(context + ": 'groups' must be an object");
  for (const auto& [group_name, members] : groups.items()) {
    MetricGroup g{group_name, {}};
    for (const auto& m : members) g.nodes.push_back(resolve_node(m, spec.nodes, context));
    spec.groups.push_back(std::move(g));
  }

  if (doc.contains("generator")) {
    const json& g = doc.at("generator");
    spec.generator.noise = g.value("noise", spec.generator.noise);
    spec.generator.samples = g.value("samples", spec.generator.samples);
    spec.generator.seed = g.value("seed", spec.generator.seed);
    spec.generator.drive_std = g.value("drive_std", spec.generator.drive_std);
  }
  spec.validate();
  spec.graph();  // group partition checks
  return spec;
}

json to_json(const TopologySpec& spec) {
  json doc;
  doc["name"] = spec.name;
  doc["nodes"] = spec.nodes;
  json edges = json::array();
  for (const auto& e : spec.edges) {
    edges.push_back({{"from", spec.nodes.at(e.from)}, {"to", spec.nodes.at(e.to)}, {"sign", e.sign}});
  }
  doc["edges"] = std::move(edges);
  json groups = json::object();
  for (const auto& g : spec.groups) {
    json members = json::array();
    for (std::size_t i : g.nodes) members.push_back(spec.nodes.at(i));
    groups[g.name] = std::move(members);
  }
  doc["groups"] = std::move(groups);
  doc["generator"] = {{"noise", spec.generator.noise},
                      {"samples", spec.generator.samples},
                      {"seed", spec.generator.seed},
                      {"drive_std", spec.generator.drive_std}};
  return doc;
}

TopologySpec read_topology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open topology file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("topology file " + path.string() + " is not valid JSON: " + e.what());
  }
  return topology_from_json(doc);
}

void write_topology(const TopologySpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write topology file " + path.string());
  out << to_json(spec).dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::string> builtin_topology_names() {
  std::vector<std::string> names;
  for (const auto& [name, body] : detail::builtin_topology_sources()) names.emplace_back(name);
  return names;
}

TopologySpec builtin_topology(const std::string& name) {
  for (const auto& [key, body] : detail::builtin_topology_sources()) {
    if (key == name) return topology_from_json(json::parse(body));
  }
  std::string known;
  for (const auto& n : builtin_topology_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown topology '" + name + "' (built-in: " + known + ")");
}

TopologySpec resolve_topology(const std::string& name_or_path) {
  for (const auto& [key, body] : detail::builtin_topology_sources()) {
    if (key == name_or_path) return builtin_topology(name_or_path);
  }
  if (std::filesystem::exists(name_or_path)) return read_topology(name_or_path);
  return builtin_topology(name_or_path);
}

bool is_weakly_connected(const Matrix& adjacency) {
  const std::size_t n = adjacency.rows();
  if (n == 0) return true;
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    for (std::size_t j = 0; j < n; ++j) {
      if (!seen[j] && (adjacency(i, j) != 0.0 || adjacency(j, i) != 0.0)) {
        seen[j] = true;
        stack.push_back(j);
      }
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

}  // namespace fhm
