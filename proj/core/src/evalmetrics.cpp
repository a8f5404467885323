#include "fhm/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fhm/error.hpp"

namespace fhm {

namespace {

using json = nlohmann::ordered_json;

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

void check_shapes(const Matrix& learned, const Matrix& truth) {
  if (learned.shape() != truth.shape() || truth.rows() != truth.cols()) {
    throw DimensionError("learned weights are " + learned.shape().str() + ", ground truth is " +
                         truth.shape().str());
  }
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

}  // namespace

double direct_edge_accuracy(const Matrix& learned, const Matrix& truth) {
  check_shapes(learned, truth);
  std::size_t edges = 0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = sign_of(truth[i]);
    if (t == 0) continue;
    ++edges;
    if (sign_of(learned[i]) == t) ++correct;
  }
  if (edges == 0) throw UndefinedMetricError("direct edge accuracy is undefined without edges");
  return static_cast<double>(correct) / static_cast<double>(edges);
}

std::size_t chain_count(const Matrix& truth) {
  const std::size_t n = truth.rows();
  std::size_t chains = 0;
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t in = 0;
    std::size_t out = 0;
    for (std::size_t i = 0; i < n; ++i) in += truth(i, j) != 0.0;
    for (std::size_t k = 0; k < n; ++k) out += truth(j, k) != 0.0;
    chains += in * out;
  }
  return chains;
}

double transitive_chain_accuracy(const Matrix& learned, const Matrix& truth) {
  check_shapes(learned, truth);
  const std::size_t n = truth.rows();
  std::size_t chains = 0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (truth(i, j) == 0.0) continue;
      for (std::size_t k = 0; k < n; ++k) {
        if (truth(j, k) == 0.0) continue;
        ++chains;
        const int want = sign_of(truth(i, j) * truth(j, k));
        if (sign_of(learned(i, j) * learned(j, k)) == want) ++correct;
      }
    }
  }
  if (chains == 0) {
    throw UndefinedMetricError("transitive chain accuracy is undefined without two-hop chains");
  }
  return static_cast<double>(correct) / static_cast<double>(chains);
}

Summary summarize(const std::vector<double>& values) {
  if (values.empty()) return {};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return {mean, std::sqrt(var)};
}

EvalReport aggregate(std::string experiment, std::size_t nodes, std::vector<FoldScore> folds,
                     json config) {
  if (folds.empty()) throw UsageError("aggregate needs at least one fold");
  EvalReport r;
  r.experiment = std::move(experiment);
  r.nodes = nodes;
  r.config = std::move(config);
  std::vector<double> direct, transitive;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    direct.push_back(folds[f].direct);
    if (folds[f].transitive) transitive.push_back(*folds[f].transitive);
    if (folds[f].direct > folds[r.best_fold].direct) r.best_fold = f;
  }
  r.best_fold = folds[r.best_fold].fold;
  r.direct = summarize(direct);
  r.transitive = summarize(transitive);
  r.folds = std::move(folds);
  return r;
}

json to_json(const EvalReport& report) {
  json doc;
  doc["experiment"] = report.experiment;
  doc["nodes"] = report.nodes;
  json folds = json::array();
  for (const auto& f : report.folds) {
    folds.push_back({{"fold", f.fold},
                     {"direct_edge_accuracy", f.direct},
                     {"transitive_chain_accuracy", optional_number(f.transitive)}});
  }
  doc["folds"] = std::move(folds);
  doc["aggregate"] = {
      {"direct_edge_accuracy",
       {{"mean", optional_number(report.direct.mean)}, {"std", optional_number(report.direct.std)}}},
      {"transitive_chain_accuracy",
       {{"mean", optional_number(report.transitive.mean)},
        {"std", optional_number(report.transitive.std)}}}};
  doc["best_fold"] = report.best_fold;
  doc["metric_note"] =
      "accuracies are sign-recovery rates; std is the population std over folds";
  doc["config"] = report.config;
  return doc;
}

EvalReport report_from_json(const json& doc) {
  try {
    EvalReport r;
    r.experiment = doc.at("experiment").get<std::string>();
    r.nodes = doc.at("nodes").get<std::size_t>();
    for (const auto& f : doc.at("folds")) {
      r.folds.push_back({f.at("fold").get<std::size_t>(), f.at("direct_edge_accuracy").get<double>(),
                         read_optional(f.at("transitive_chain_accuracy"))});
    }
    const json& agg = doc.at("aggregate");
    r.direct = {read_optional(agg.at("direct_edge_accuracy").at("mean")),
                read_optional(agg.at("direct_edge_accuracy").at("std"))};
    r.transitive = {read_optional(agg.at("transitive_chain_accuracy").at("mean")),
                    read_optional(agg.at("transitive_chain_accuracy").at("std"))};
    r.best_fold = doc.at("best_fold").get<std::size_t>();
    r.config = doc.value("config", json::object());
    return r;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed report: ") + e.what());
  }
}

std::string format_summary(const Summary& s) {
  if (!s.mean) return "N/A";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f%% ± %.2f%%", 100.0 * *s.mean, 100.0 * s.std.value_or(0.0));
  return buf;
}

std::string render_table(const std::vector<EvalReport>& reports) {
  const std::vector<std::string> header{"Experiment", "Nodes", "Direct Edge Acc.",
                                        "Transitive Chain Acc."};
  std::vector<std::vector<std::string>> rows{header};
  for (const auto& r : reports) {
    rows.push_back({r.experiment, std::to_string(r.nodes), format_summary(r.direct),
                    format_summary(r.transitive)});
  }
  // Display width: the plus-minus sign is two bytes but one column.
  auto width = [](const std::string& s) {
    std::size_t w = 0;
    for (unsigned char c : s) w += (c & 0xC0) != 0x80;
    return w;
  };
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], width(row[c]));
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      out << (c ? "  " : "") << rows[r][c];
      if (c + 1 < rows[r].size()) out << std::string(widths[c] - width(rows[r][c]), ' ');
    }
    out << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : widths) total += w;
      out << std::string(total + 2 * (widths.size() - 1), '-') << '\n';
    }
  }
  return out.str();
}

}  // namespace fhm
