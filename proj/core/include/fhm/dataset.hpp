#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fhm/graph.hpp"
#include "fhm/matrix.hpp"
#include "fhm/rng.hpp"
#include "fhm/topology.hpp"

namespace fhm {

// Observations of every concept, one column per graph node, all in [0, 1].
// The block DATA^(m) of metric m is the set of columns listed in groups[m];
// targets[m] is its grand mean over rows and columns.
struct MetricDataset {
  std::vector<std::string> columns;
  Matrix values;  // N x n
  std::vector<MetricGroup> groups;
  std::vector<double> targets;
  std::size_t dropped_rows = 0;  // filled by load_csv

  // Validates the range and shapes and computes the targets.
  static MetricDataset from_values(std::vector<std::string> columns, Matrix values,
                                   std::vector<MetricGroup> groups);

  std::size_t samples() const { return values.rows(); }
  std::size_t nodes() const { return values.cols(); }
  // N x d_m block of metric m.
  Matrix block(std::size_t m) const;
  // The given rows, in order, with targets recomputed from them alone.
  MetricDataset subset(std::span<const std::size_t> rows) const;
  std::vector<double> recompute_targets() const;
};

// v_m = (1/N) sum_i (1/d_m) sum_{j in m} x_ij for every group.
std::vector<double> group_targets(const Matrix& values, const std::vector<MetricGroup>& groups);

// Ground-truth weights: sign(A) times a magnitude uniform in [0.3, 0.9].
Matrix sample_weights(const Matrix& adjacency, Rng& rng);

struct SyntheticData {
  MetricDataset dataset;
  Matrix weights;        // ground-truth FCM weights
  Matrix steady_states;  // N x n, tanh range, before mapping and noise
  Matrix drives;         // N x n exogenous inputs used for each row
  std::size_t attempts = 0;
  std::size_t non_converged = 0;
};

// Each row: random start in (-1, 1)^n and drive u ~ N(0, drive_std^2), the
// tanh FCM iterated to its steady state under u, mapped by (s + 1) / 2,
// Gaussian observation noise added, clipped to [0, 1]. Non-convergent draws
// are replaced; GenerationError once more than half of the draws fail.
SyntheticData generate_synthetic_full(const TopologySpec& spec);
MetricDataset generate_synthetic(const TopologySpec& spec);

// Columns to read from a CSV file, and how they group into metrics.
struct CsvSchema {
  std::vector<std::string> columns;
  std::vector<MetricGroup> groups;

  static CsvSchema from_topology(const TopologySpec& spec);
};

// Reads the schema columns (by header name; extra columns are ignored),
// drops rows with a missing value ("", "?", "NA", "nan"), and min-max
// normalises each column. A constant column becomes all zeros.
MetricDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);
// Header plus values at round-trip precision.
void write_csv(const MetricDataset& data, const std::filesystem::path& path);

}  // namespace fhm
