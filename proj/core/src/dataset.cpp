#include "fhm/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "fhm/error.hpp"
#include "fhm/fcm_reference.hpp"

namespace fhm {

std::vector<double> group_targets(const Matrix& values, const std::vector<MetricGroup>& groups) {
  std::vector<double> targets;
  targets.reserve(groups.size());
  const std::size_t rows = values.rows();
  for (const auto& g : groups) {
    double total = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      double row = 0.0;
      for (std::size_t j : g.nodes) row += values(i, j);
      total += row / static_cast<double>(g.nodes.size());
    }
    targets.push_back(rows == 0 ? 0.0 : total / static_cast<double>(rows));
  }
  return targets;
}

MetricDataset MetricDataset::from_values(std::vector<std::string> columns, Matrix values,
                                         std::vector<MetricGroup> groups) {
  if (columns.size() != values.cols()) {
    throw DimensionError(std::to_string(columns.size()) + " column names for " +
                         std::to_string(values.cols()) + " columns");
  }
  for (double v : values.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw IngestionError("dataset value " + std::to_string(v) + " is outside [0, 1]");
    }
  }
  for (const auto& g : groups) {
    if (g.nodes.empty()) throw ConfigError("metric group '" + g.name + "' is empty");
    for (std::size_t j : g.nodes) {
      if (j >= columns.size()) {
        throw ConfigError("metric group '" + g.name + "' references column " + std::to_string(j));
      }
    }
  }
  MetricDataset d;
  d.columns = std::move(columns);
  d.values = std::move(values);
  d.groups = std::move(groups);
  d.targets = group_targets(d.values, d.groups);
  return d;
}

Matrix MetricDataset::block(std::size_t m) const {
  const auto& g = groups.at(m);
  Matrix out(samples(), g.nodes.size());
  for (std::size_t i = 0; i < samples(); ++i) {
    for (std::size_t k = 0; k < g.nodes.size(); ++k) out(i, k) = values(i, g.nodes[k]);
  }
  return out;
}

MetricDataset MetricDataset::subset(std::span<const std::size_t> rows) const {
  Matrix sub(rows.size(), nodes());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= samples()) throw UsageError("subset row " + std::to_string(rows[r]) + " out of range");
    std::copy(values.row(rows[r]).begin(), values.row(rows[r]).end(), sub.row(r).begin());
  }
  MetricDataset d = *this;
  d.values = std::move(sub);
  d.targets = group_targets(d.values, d.groups);
  d.dropped_rows = 0;
  return d;
}

std::vector<double> MetricDataset::recompute_targets() const {
  return group_targets(values, groups);
}

Matrix sample_weights(const Matrix& adjacency, Rng& rng) {
  Matrix w(adjacency.shape());
  for (std::size_t i = 0; i < adjacency.rows(); ++i) {
    for (std::size_t j = 0; j < adjacency.cols(); ++j) {
      const double a = adjacency(i, j);
      if (a != 0.0) w(i, j) = (a > 0.0 ? 1.0 : -1.0) * rng.uniform(0.3, 0.9);
    }
  }
  return w;
}

SyntheticData generate_synthetic_full(const TopologySpec& spec) {
  const FcmGraph graph = spec.graph();
  const GeneratorParams& gen = spec.generator;
  const std::size_t n = graph.size();
  const std::size_t target = gen.samples;
  if (target == 0) throw ConfigError("topology '" + spec.name + "': generator needs samples >= 1");

  Rng rng(gen.seed);
  SyntheticData out;
  out.weights = sample_weights(graph.adjacency(), rng);
  const ClassicFcm fcm(out.weights, FcmOptions{Activation::tanh});

  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> drives;
  std::vector<double> start(n), drive(n);
  while (states.size() < target) {
    for (double& s : start) s = rng.uniform(-1.0, 1.0);
    for (double& u : drive) u = rng.gaussian(gen.drive_std);
    const FixedPointResult fp = fcm.run_to_fixed_point(start, drive);
    ++out.attempts;
    if (fp.converged) {
      states.push_back(fp.state);
      drives.push_back(drive);
    } else {
      ++out.non_converged;
    }
    if (2 * out.non_converged > out.attempts && out.attempts >= target) {
      throw GenerationError("topology '" + spec.name + "': reference FCM failed to converge for " +
                            std::to_string(out.non_converged) + " of " +
                            std::to_string(out.attempts) + " starts");
    }
  }

  out.steady_states = Matrix(target, n);
  out.drives = Matrix(target, n);
  Matrix values(target, n);
  for (std::size_t i = 0; i < target; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out.steady_states(i, j) = states[i][j];
      out.drives(i, j) = drives[i][j];
      const double observed = 0.5 * (states[i][j] + 1.0) + rng.gaussian(gen.noise);
      values(i, j) = std::clamp(observed, 0.0, 1.0);
    }
  }
  out.dataset = MetricDataset::from_values(graph.nodes(), std::move(values), graph.groups());
  return out;
}

MetricDataset generate_synthetic(const TopologySpec& spec) {
  return generate_synthetic_full(spec).dataset;
}

CsvSchema CsvSchema::from_topology(const TopologySpec& spec) {
  return CsvSchema{spec.nodes, spec.groups};
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string trim(std::string s) {
  auto space = [](unsigned char c) { return std::isspace(c) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), space));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), space).base(), s.end());
  return s;
}

bool is_missing(const std::string& token) {
  std::string lower;
  for (unsigned char c : token) lower += static_cast<char>(std::tolower(c));
  return lower.empty() || lower == "?" || lower == "na" || lower == "nan";
}

}  // namespace

MetricDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path.string());

  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw IngestionError("dataset " + path.string() + " is empty");
  for (auto& h : header) h = trim(h);

  std::vector<std::size_t> source;
  for (const auto& col : schema.columns) {
    const auto it = std::find(header.begin(), header.end(), col);
    if (it == header.end()) {
      throw SchemaError("dataset " + path.string() + " has no column '" + col + "'");
    }
    source.push_back(static_cast<std::size_t>(it - header.begin()));
  }

  std::vector<double> raw;
  std::size_t kept = 0;
  std::size_t dropped = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    std::vector<double> row;
    bool missing = false;
    for (std::size_t c = 0; c < source.size(); ++c) {
      const std::string token = source[c] < fields.size() ? trim(fields[source[c]]) : "";
      if (is_missing(token)) {
        missing = true;
        break;
      }
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(token, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != token.size() || !std::isfinite(v)) {
        throw IngestionError(path.string() + ":" + std::to_string(line_no) + ": column '" +
                             schema.columns[c] + "' value '" + token + "' is not a number");
      }
      row.push_back(v);
    }
    if (missing) {
      ++dropped;
      continue;
    }
    raw.insert(raw.end(), row.begin(), row.end());
    ++kept;
  }
  if (kept == 0) throw IngestionError("dataset " + path.string() + " has no complete rows");

  const std::size_t n = source.size();
  Matrix values(kept, n, std::move(raw));
  for (std::size_t j = 0; j < n; ++j) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < kept; ++i) {
      lo = std::min(lo, values(i, j));
      hi = std::max(hi, values(i, j));
    }
    const double range = hi - lo;
    for (std::size_t i = 0; i < kept; ++i) {
      values(i, j) = range > 0.0 ? std::clamp((values(i, j) - lo) / range, 0.0, 1.0) : 0.0;
    }
  }
  MetricDataset d = MetricDataset::from_values(schema.columns, std::move(values), schema.groups);
  d.dropped_rows = dropped;
  return d;
}

void write_csv(const MetricDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset " + path.string());
  for (std::size_t j = 0; j < data.columns.size(); ++j) {
    out << (j ? "," : "") << data.columns[j];
  }
  out << '\n';
  char buf[40];
  for (std::size_t i = 0; i < data.samples(); ++i) {
    for (std::size_t j = 0; j < data.nodes(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", data.values(i, j));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace fhm
