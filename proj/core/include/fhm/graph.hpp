#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fhm/matrix.hpp"

namespace fhm {

struct MetricGroup {
  std::string name;
  std::vector<std::size_t> nodes;

  friend bool operator==(const MetricGroup&, const MetricGroup&) = default;
};

// Named concepts, a signed adjacency matrix A (A[i][j] in {-1, 0, +1}, i
// causes j) and a partition of the concepts into metric groups.
class FcmGraph {
 public:
  FcmGraph() = default;
  FcmGraph(std::vector<std::string> nodes, Matrix adjacency, std::vector<MetricGroup> groups);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::string>& nodes() const { return nodes_; }
  const Matrix& adjacency() const { return adjacency_; }
  const std::vector<MetricGroup>& groups() const { return groups_; }

  // 0/1 matrix marking the edges of A.
  Matrix edge_mask() const { return nonzero_mask(adjacency_); }
  std::size_t edge_count() const;

  // Index of a node by name; UsageError listing the nodes when unknown.
  std::size_t index_of(const std::string& name) const;
  // Index of the metric group holding `node`.
  std::size_t group_of(std::size_t node) const;

  friend bool operator==(const FcmGraph&, const FcmGraph&) = default;

 private:
  std::vector<std::string> nodes_;
  Matrix adjacency_;
  std::vector<MetricGroup> groups_;
  std::vector<std::size_t> group_of_;
};

}  // namespace fhm
