#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fhm/graph.hpp"

namespace fhm {

struct Edge {
  std::size_t from = 0;
  std::size_t to = 0;
  int sign = 1;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct GeneratorParams {
  double noise = 0.02;        // observation noise std on the [0, 1] scale
  std::size_t samples = 200;  // N
  std::uint64_t seed = 0;
  double drive_std = 0.5;     // per-sample exogenous input std

  friend bool operator==(const GeneratorParams&, const GeneratorParams&) = default;
};

// A ground-truth causal topology plus the parameters used to synthesise data
// for it. File format (JSON):
//
//   {"name": "...", "nodes": ["a", "b", ...],
//    "edges": [{"from": "a", "to": "b", "sign": -1}, ...],
//    "groups": {"group": ["a", ...], ...},
//    "generator": {"noise": 0.02, "samples": 200, "seed": 1, "drive_std": 0.5}}
//
// Edge endpoints and group members may be node names or indices. The
// generator block is optional.
struct TopologySpec {
  std::string name;
  std::vector<std::string> nodes;
  std::vector<Edge> edges;
  std::vector<MetricGroup> groups;
  GeneratorParams generator;

  std::size_t size() const { return nodes.size(); }
  FcmGraph graph() const;
  // Edges, signs and groups reference valid nodes; no duplicates or self-loops.
  void validate() const;

  friend bool operator==(const TopologySpec&, const TopologySpec&) = default;
};

TopologySpec topology_from_json(const nlohmann::ordered_json& doc);
nlohmann::ordered_json to_json(const TopologySpec& spec);
TopologySpec read_topology(const std::filesystem::path& path);
void write_topology(const TopologySpec& spec, const std::filesystem::path& path);

std::vector<std::string> builtin_topology_names();
// Throws ConfigError listing the registry for unknown names.
TopologySpec builtin_topology(const std::string& name);
// A registry name, or else a path to a topology file.
TopologySpec resolve_topology(const std::string& name_or_path);

// Whether the undirected skeleton of the graph is connected.
bool is_weakly_connected(const Matrix& adjacency);

}  // namespace fhm
