#include "fhm/graph.hpp"

#include <limits>

#include "fhm/error.hpp"

namespace fhm {

FcmGraph::FcmGraph(std::vector<std::string> nodes, Matrix adjacency,
                   std::vector<MetricGroup> groups)
    : nodes_(std::move(nodes)), adjacency_(std::move(adjacency)), groups_(std::move(groups)) {
  const std::size_t n = nodes_.size();
  if (adjacency_.shape() != Shape{n, n}) {
    throw DimensionError("adjacency is " + adjacency_.shape().str() + " for " +
                         std::to_string(n) + " nodes");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = adjacency_(i, j);
      if (a != 0.0 && a != 1.0 && a != -1.0) {
        throw ConfigError("adjacency entries must be -1, 0 or +1; (" + std::to_string(i) + "," +
                          std::to_string(j) + ") is " + std::to_string(a));
      }
      if (i == j && a != 0.0) {
        throw ConfigError("adjacency has a self-loop on '" + nodes_[i] + "'");
      }
    }
  }
  constexpr std::size_t unassigned = std::numeric_limits<std::size_t>::max();
  group_of_.assign(n, unassigned);
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    if (groups_[g].nodes.empty()) {
      throw ConfigError("metric group '" + groups_[g].name + "' is empty");
    }
    for (std::size_t node : groups_[g].nodes) {
      if (node >= n) {
        throw ConfigError("metric group '" + groups_[g].name + "' references node " +
                          std::to_string(node) + " of " + std::to_string(n));
      }
      if (group_of_[node] != unassigned) {
        throw ConfigError("node '" + nodes_[node] + "' belongs to more than one metric group");
      }
      group_of_[node] = g;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (group_of_[i] == unassigned) {
      throw ConfigError("node '" + nodes_[i] + "' is not in any metric group");
    }
  }
}

std::size_t FcmGraph::edge_count() const {
  std::size_t count = 0;
  for (double a : adjacency_.values()) count += a != 0.0 ? 1 : 0;
  return count;
}

std::size_t FcmGraph::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i] == name) return i;
  }
  std::string known;
  for (const auto& node : nodes_) known += (known.empty() ? "" : ", ") + node;
  throw UsageError("unknown node '" + name + "' (known: " + known + ")");
}

std::size_t FcmGraph::group_of(std::size_t node) const {
  if (node >= group_of_.size()) throw UsageError("node index out of range");
  return group_of_[node];
}

}  // namespace fhm
