#include "fhm/inverse.hpp"

#include <algorithm>
#include <cmath>

#include "fhm/error.hpp"
#include "fhm/tape.hpp"

namespace fhm {

namespace {

using json = nlohmann::ordered_json;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double v) {
  const double c = std::clamp(v, 1e-6, 1.0 - 1e-6);
  return std::log(c / (1.0 - c));
}

std::vector<double> masked_product(const Matrix& w, const Matrix& mask, const std::vector<double>& s) {
  std::vector<double> out(w.rows(), 0.0);
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) out[i] += w(i, j) * mask(i, j) * s[j];
  }
  return out;
}

Matrix as_column(const std::vector<double>& v) { return Matrix(v.size(), 1, v); }

}  // namespace

void InverseProblem::validate() const {
  const std::size_t n = w.rows();
  if (w.cols() != n || m_valid.shape() != w.shape() || m_forbidden.shape() != w.shape()) {
    throw DimensionError("inverse problem: W " + w.shape().str() + ", M_valid " +
                         m_valid.shape().str() + ", M_forbidden " + m_forbidden.shape().str());
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double v = m_valid[i];
    if ((v != 0.0 && v != 1.0) || v + m_forbidden[i] != 1.0) {
      throw ConfigError("inverse masks must be 0/1 and complementary (entry " + std::to_string(i) +
                        ")");
    }
  }
  if (!all_finite(w)) throw ConfigError("inverse weight matrix has non-finite entries");
  if (targets.empty()) throw UsageError("inverse problem has no targets");
  for (const auto& [node, value] : targets) {
    if (node >= n) {
      throw UsageError("target node " + std::to_string(node) + " out of range for " +
                       std::to_string(n) + " nodes");
    }
    if (!(value >= 0.0 && value <= 1.0)) {
      throw ConfigError("target value " + std::to_string(value) + " is outside [0, 1]");
    }
  }
  if (schedule.steps < 2) throw ConfigError("inverse solve needs at least 2 steps");
  if (!(schedule.lr > 0.0)) throw ConfigError("inverse lr must be positive");
  if (!(schedule.momentum >= 0.0 && schedule.momentum < 1.0)) {
    throw ConfigError("inverse momentum must lie in [0, 1)");
  }
  if (!(schedule.lambda_soft >= 0.0) || !(schedule.noise_std >= 0.0)) {
    throw ConfigError("lambda_soft and noise_std must be non-negative");
  }
}

InverseProblem InverseProblem::from_model(const Matrix& w_fcm, const Matrix& adjacency,
                                          std::map<std::size_t, double> targets,
                                          InverseSchedule schedule, std::uint64_t seed) {
  if (w_fcm.shape() != adjacency.shape()) {
    throw DimensionError("W_fcm is " + w_fcm.shape().str() + ", adjacency is " +
                         adjacency.shape().str());
  }
  InverseProblem p;
  p.w = transpose(w_fcm);
  p.m_valid = transpose(nonzero_mask(adjacency));
  p.m_forbidden = Matrix(p.m_valid.shape(), 1.0) - p.m_valid;
  p.targets = std::move(targets);
  p.schedule = schedule;
  p.seed = seed;
  return p;
}

Flows split_flows(const Matrix& w, const Matrix& m_valid, const Matrix& m_forbidden,
                  const std::vector<double>& x_raw) {
  if (w.rows() != w.cols() || m_valid.shape() != w.shape() || m_forbidden.shape() != w.shape() ||
      x_raw.size() != w.cols()) {
    throw DimensionError("split_flows: W " + w.shape().str() + ", masks " +
                         m_valid.shape().str() + " / " + m_forbidden.shape().str() + ", x has " +
                         std::to_string(x_raw.size()) + " entries");
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (m_valid[i] + m_forbidden[i] != 1.0) {
      throw ConfigError("split_flows: masks are not complementary");
    }
  }
  std::vector<double> s(x_raw.size());
  for (std::size_t j = 0; j < s.size(); ++j) s[j] = sigmoid(x_raw[j]);
  return {masked_product(w, m_valid, s), masked_product(w, m_forbidden, s)};
}

bool in_noise_phase(std::size_t t, std::size_t steps) { return 2 * t < steps; }

std::vector<double> annealed_output(const Flows& flows, std::size_t t, std::size_t steps, Rng& rng,
                                    double noise_std) {
  if (t >= steps) throw UsageError("annealed_output: step " + std::to_string(t) + " >= T");
  if (flows.valid.size() != flows.forbidden.size()) {
    throw DimensionError("annealed_output: flow lengths differ");
  }
  std::vector<double> y(flows.valid.size());
  const bool noisy = in_noise_phase(t, steps);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double f = flows.valid[i] + flows.forbidden[i];
    y[i] = noisy ? sigmoid(f + rng.gaussian(noise_std)) : f;
  }
  return y;
}

double topology_weight(double lambda_soft, std::size_t t, std::size_t steps) {
  if (steps == 0) throw UsageError("topology_weight: T must be positive");
  return lambda_soft * (1.0 + static_cast<double>(t) / static_cast<double>(steps));
}

InverseLosses inverse_losses(const std::vector<double>& y, const std::map<std::size_t, double>& targets,
                             const std::vector<double>& f_forbidden, std::size_t t,
                             std::size_t steps, double lambda_soft) {
  if (targets.empty()) throw UsageError("inverse_losses: no targets");
  InverseLosses l;
  for (const auto& [node, value] : targets) {
    if (node >= y.size()) {
      throw UsageError("target node " + std::to_string(node) + " out of range for " +
                       std::to_string(y.size()) + " outputs");
    }
    const double d = y[node] - value;
    l.target += 100.0 * d * d;
  }
  double sq = 0.0;
  for (double f : f_forbidden) sq += f * f;
  l.topology = topology_weight(lambda_soft, t, steps) * std::sqrt(sq);
  l.total = l.target + l.topology;
  return l;
}

std::vector<double> predict(const Matrix& w, const std::vector<double>& x_raw) {
  const Matrix ones(w.shape(), 1.0);
  std::vector<double> s(x_raw.size());
  for (std::size_t j = 0; j < s.size(); ++j) s[j] = sigmoid(x_raw[j]);
  std::vector<double> out = masked_product(w, ones, s);
  for (double& v : out) v = sigmoid(v);
  return out;
}

InverseSolution solve(const InverseProblem& problem) {
  Rng rng(problem.seed);
  return solve(problem, rng);
}

InverseSolution solve(const InverseProblem& problem, Rng& rng) {
  problem.validate();
  const std::size_t n = problem.size();
  const std::size_t steps = problem.schedule.steps;
  const InverseSchedule& sched = problem.schedule;

  ad::Tape tape;
  const ad::Var x = tape.variable(Matrix(n, 1));
  const ad::Var s = ad::sigmoid(x);
  const ad::Var f_valid = ad::matmul(tape.constant(hadamard(problem.w, problem.m_valid)), s);
  const ad::Var f_forb = ad::matmul(tape.constant(hadamard(problem.w, problem.m_forbidden)), s);
  const ad::Var flow = f_valid + f_forb;
  const ad::Var eps = tape.constant(Matrix(n, 1));
  const ad::Var y_noisy = ad::sigmoid(flow + eps);
  const ad::Var forb_norm = ad::l2_norm(f_forb);

  // Per-phase targets on the targeted rows; other rows are masked out.
  Matrix select(n, 1), early(n, 1), late(n, 1);
  for (const auto& [node, value] : problem.targets) {
    select(node, 0) = 1.0;
    early(node, 0) = value;
    late(node, 0) = logit(value);
  }
  const ad::Var sel = tape.constant(select);
  const ad::Var goal = tape.constant(early);
  const ad::Var weight = tape.constant(Matrix(1, 1));
  auto build = [&](ad::Var y) {
    const ad::Var target_loss = 100.0 * ad::sq_norm(ad::hadamard(y - goal, sel));
    return std::pair{target_loss, target_loss + ad::matmul(weight, forb_norm)};
  };
  const auto [target_noisy, total_noisy] = build(y_noisy);
  const auto [target_raw, total_raw] = build(flow);

  InverseSolution sol;
  sol.trace.reserve(steps);
  Matrix x_raw(n, 1);
  Matrix velocity(n, 1);
  bool late_goal = false;
  for (std::size_t t = 0; t < steps; ++t) {
    const bool noisy = in_noise_phase(t, steps);
    if (noisy) {
      Matrix e(n, 1);
      for (double& v : e.values()) v = rng.gaussian(sched.noise_std);
      tape.assign(eps, std::move(e));
    } else if (!late_goal) {
      tape.assign(goal, late);
      late_goal = true;
    }
    tape.assign(weight, Matrix::scalar(topology_weight(sched.lambda_soft, t, steps)));
    tape.assign(x, x_raw);

    const ad::Var total = noisy ? total_noisy : total_raw;
    const ad::Var target = noisy ? target_noisy : target_raw;
    InverseLosses l;
    try {
      l.total = tape.forward(total).item();
      l.target = tape.value(target).item();
      l.topology = tape.value(weight).item() * tape.value(forb_norm).item();
    } catch (const NumericError& e) {
      throw NumericError("inverse solve, step " + std::to_string(t) + ": " + e.what());
    }
    if (!std::isfinite(l.total)) {
      throw NumericError("inverse solve, step " + std::to_string(t) + ": loss is not finite");
    }
    sol.trace.push_back(l);

    const ad::Gradients grads = tape.backward(total);
    const Matrix& g = grads[x];
    for (std::size_t i = 0; i < n; ++i) {
      velocity[i] = sched.momentum * velocity[i] - sched.lr * g[i];
      x_raw[i] += velocity[i];
    }
  }

  sol.x_raw.assign(x_raw.values().begin(), x_raw.values().end());
  sol.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) sol.x[i] = sigmoid(sol.x_raw[i]);
  sol.predicted = predict(problem.w, sol.x_raw);
  const Flows flows = split_flows(problem.w, problem.m_valid, problem.m_forbidden, sol.x_raw);
  double sq = 0.0;
  for (double f : flows.forbidden) sq += f * f;
  sol.forbidden_norm = std::sqrt(sq);
  return sol;
}

std::map<std::size_t, double> fuzzy_query(const std::map<std::string, std::string>& labels,
                                          const std::map<std::string, double>& memberships,
                                          const FcmGraph& graph) {
  std::map<std::size_t, double> targets;
  for (const auto& [node, term] : labels) {
    const auto it = memberships.find(term);
    if (it == memberships.end()) {
      std::string known;
      for (const auto& [k, v] : memberships) known += (known.empty() ? "" : ", ") + k;
      throw UsageError("unknown fuzzy term '" + term + "' (known: " + known + ")");
    }
    if (!(it->second >= 0.0 && it->second <= 1.0)) {
      throw ConfigError("membership of '" + term + "' is outside [0, 1]");
    }
    targets[graph.index_of(node)] = it->second;
  }
  return targets;
}

std::map<std::string, double> default_memberships() {
  return {{"very_low", 0.1}, {"low", 0.2}, {"medium", 0.5}, {"high", 0.8}, {"very_high", 0.9}};
}

json to_json(const InverseSolution& solution, const FcmGraph& graph) {
  json doc;
  json nodes = json::object();
  for (std::size_t i = 0; i < solution.x.size(); ++i) {
    const std::string name = i < graph.size() ? graph.nodes()[i] : std::to_string(i);
    nodes[name] = {{"x_raw", solution.x_raw[i]},
                   {"x", solution.x[i]},
                   {"predicted", solution.predicted[i]}};
  }
  doc["nodes"] = std::move(nodes);
  doc["forbidden_flow_norm"] = solution.forbidden_norm;
  json trace = json::array();
  for (const auto& l : solution.trace) trace.push_back({l.target, l.topology, l.total});
  doc["trace_columns"] = {"target", "topology", "total"};
  doc["trace"] = std::move(trace);
  return doc;
}

}  // namespace fhm
