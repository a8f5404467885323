#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fhm/matrix.hpp"

namespace fhm {

// Fraction of ground-truth edges (A[i][j] != 0) whose learned weight has the
// same sign. A zero learned weight never matches. UndefinedMetricError when
// A has no edges.
double direct_edge_accuracy(const Matrix& learned, const Matrix& truth);

// Over all ordered two-hop chains i -> j -> k of the ground truth (i == k is
// allowed when the graph has a 2-cycle), the fraction whose learned sign
// product matches the true one. UndefinedMetricError when there are no chains.
double transitive_chain_accuracy(const Matrix& learned, const Matrix& truth);
std::size_t chain_count(const Matrix& truth);

struct FoldScore {
  std::size_t fold = 0;
  double direct = 0.0;
  std::optional<double> transitive;  // empty when undefined for the graph
};

struct Summary {
  std::optional<double> mean;
  std::optional<double> std;  // population
};

// Mean and population std of the defined values.
Summary summarize(const std::vector<double>& values);

struct EvalReport {
  std::string experiment;
  std::size_t nodes = 0;
  std::vector<FoldScore> folds;
  Summary direct;
  Summary transitive;
  std::size_t best_fold = 0;  // highest direct accuracy, first on ties
  nlohmann::ordered_json config;
};

EvalReport aggregate(std::string experiment, std::size_t nodes, std::vector<FoldScore> folds,
                     nlohmann::ordered_json config = nlohmann::ordered_json::object());

nlohmann::ordered_json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::ordered_json& doc);

// "97.14% ± 2.20%", or "N/A".
std::string format_summary(const Summary& s);
// Aligned plain-text table: Experiment, Nodes, Direct Edge Acc., Transitive Chain Acc.
std::string render_table(const std::vector<EvalReport>& reports);

}  // namespace fhm
