#include "fhm/model.hpp"

#include <algorithm>
#include <cmath>

#include "fhm/error.hpp"

namespace fhm {

namespace {

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
  return m;
}

double fan_in_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

void expect_shape(const Matrix& m, Shape want, const std::string& name) {
  if (m.shape() != want) {
    throw DimensionError("parameter " + name + " is " + m.shape().str() + ", expected " +
                         want.str());
  }
}

}  // namespace

FhmParams FhmParams::initialize(std::size_t features, const FcmGraph& graph,
                                const ModelConfig& config, Rng& rng) {
  if (features == 0 || config.hidden == 0 || config.latent == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  FhmParams p;
  p.w1 = uniform_matrix(features, config.hidden, fan_in_bound(features), rng);
  p.b1 = Matrix(1, config.hidden);
  p.w2 = uniform_matrix(config.hidden, config.latent, fan_in_bound(config.hidden), rng);
  p.b2 = Matrix(1, config.latent);
  for (std::size_t g = 0; g < graph.groups().size(); ++g) {
    HeadParams h;
    h.w1 = uniform_matrix(config.latent, kHeadWidth, fan_in_bound(config.latent), rng);
    h.b1 = Matrix(1, kHeadWidth);
    h.w2 = uniform_matrix(kHeadWidth, 1, fan_in_bound(kHeadWidth), rng);
    h.b2 = Matrix(1, 1);
    p.heads.push_back(std::move(h));
  }
  p.w_fcm = uniform_matrix(graph.size(), graph.size(), 0.1, rng);
  return p;
}

FhmParams FhmParams::zeros_like(const FhmParams& p) {
  FhmParams z = p;
  for (Matrix* m : z.tensors()) *m = Matrix(m->shape());
  return z;
}

std::vector<Matrix*> FhmParams::tensors() {
  std::vector<Matrix*> out{&w1, &b1, &w2, &b2, &w_fcm};
  for (auto& h : heads) {
    out.insert(out.end(), {&h.w1, &h.b1, &h.w2, &h.b2});
  }
  return out;
}

std::vector<const Matrix*> FhmParams::tensors() const {
  std::vector<const Matrix*> out{&w1, &b1, &w2, &b2, &w_fcm};
  for (const auto& h : heads) {
    out.insert(out.end(), {&h.w1, &h.b1, &h.w2, &h.b2});
  }
  return out;
}

std::vector<std::string> FhmParams::tensor_names() const {
  std::vector<std::string> out{"w1", "b1", "w2", "b2", "w_fcm"};
  for (std::size_t m = 0; m < heads.size(); ++m) {
    const std::string prefix = "head" + std::to_string(m) + ".";
    for (const char* s : {"w1", "b1", "w2", "b2"}) out.push_back(prefix + s);
  }
  return out;
}

void validate_params(const FhmParams& params, const FcmGraph& graph) {
  const std::size_t n = graph.size();
  const std::size_t hidden = params.w1.cols();
  const std::size_t latent = params.w2.cols();
  expect_shape(params.b1, {1, hidden}, "b1");
  expect_shape(params.w2, {hidden, latent}, "w2");
  expect_shape(params.b2, {1, latent}, "b2");
  expect_shape(params.w_fcm, {n, n}, "w_fcm");
  if (params.heads.size() != graph.groups().size()) {
    throw DimensionError("model has " + std::to_string(params.heads.size()) +
                         " metric heads, graph has " + std::to_string(graph.groups().size()) +
                         " groups");
  }
  for (std::size_t m = 0; m < params.heads.size(); ++m) {
    const auto& h = params.heads[m];
    const std::string prefix = "head" + std::to_string(m) + ".";
    expect_shape(h.w1, {latent, kHeadWidth}, prefix + "w1");
    expect_shape(h.b1, {1, kHeadWidth}, prefix + "b1");
    expect_shape(h.w2, {kHeadWidth, 1}, prefix + "w2");
    expect_shape(h.b2, {1, 1}, prefix + "b2");
  }
}

Matrix node_features(const Matrix& observations) {
  const std::size_t samples = observations.rows();
  const std::size_t n = observations.cols();
  if (samples == 0) throw UsageError("node_features needs at least one observation row");
  const double count = static_cast<double>(samples);

  std::vector<double> mean(n, 0.0), sd(n, 0.0);
  Matrix out(n, feature_count(n));
  for (std::size_t j = 0; j < n; ++j) {
    double lo = observations(0, j);
    double hi = lo;
    for (std::size_t r = 0; r < samples; ++r) {
      const double v = observations(r, j);
      mean[j] += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    mean[j] /= count;
    double var = 0.0;
    for (std::size_t r = 0; r < samples; ++r) {
      const double d = observations(r, j) - mean[j];
      var += d * d;
    }
    sd[j] = std::sqrt(var / count);
    out(j, 0) = mean[j];
    out(j, 1) = sd[j];
    out(j, 2) = lo;
    out(j, 3) = hi;
  }
  for (std::size_t i = 0; i < n; ++i) {
    out(i, kSummaryFeatures + i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      double corr = 0.0;
      if (sd[i] > 0.0 && sd[j] > 0.0) {
        double cov = 0.0;
        for (std::size_t r = 0; r < samples; ++r) {
          cov += (observations(r, i) - mean[i]) * (observations(r, j) - mean[j]);
        }
        corr = std::clamp(cov / count / (sd[i] * sd[j]), -1.0, 1.0);
      }
      out(i, kSummaryFeatures + j) = corr;
      out(j, kSummaryFeatures + i) = corr;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

BoundParams BoundParams::bind(ad::Tape& tape, const FhmParams& params, bool learnable) {
  auto leaf = [&](const Matrix& m) {
    return learnable ? tape.variable(m) : tape.constant(m);
  };
  BoundParams b;
  b.w1 = leaf(params.w1);
  b.b1 = leaf(params.b1);
  b.w2 = leaf(params.w2);
  b.b2 = leaf(params.b2);
  b.w_fcm = leaf(params.w_fcm);
  for (const auto& h : params.heads) {
    b.heads.push_back({leaf(h.w1), leaf(h.b1), leaf(h.w2), leaf(h.b2)});
  }
  return b;
}

FhmParams BoundParams::collect(const ad::Gradients& grads) const {
  FhmParams g;
  g.w1 = grads[w1];
  g.b1 = grads[b1];
  g.w2 = grads[w2];
  g.b2 = grads[b2];
  g.w_fcm = grads[w_fcm];
  for (const auto& h : heads) {
    g.heads.push_back({grads[h.w1], grads[h.b1], grads[h.w2], grads[h.b2]});
  }
  return g;
}

ad::Var encode(ad::Var x0, const BoundParams& p) {
  return ad::matmul(ad::tanh(ad::matmul(x0, p.w1) + p.b1), p.w2) + p.b2;
}

ad::Var mini_fcm(ad::Var h_curr, ad::Var w_fcm, const Matrix& adjacency) {
  ad::Tape& tape = h_curr.tape();
  const ad::Var mask = tape.constant(nonzero_mask(adjacency));
  return ad::matmul(ad::transpose(ad::hadamard(w_fcm, mask)), h_curr);
}

ad::Var embedding_similarity(ad::Var h_curr, bool centred) {
  const ad::Var unit = ad::normalize_rows(centred ? ad::center_rows(h_curr) : h_curr);
  return ad::matmul(unit, ad::transpose(unit));
}

ad::Var fusion_penalty(ad::Var w_fcm, ad::Var h_curr, const Matrix& adjacency, bool centred) {
  ad::Tape& tape = h_curr.tape();
  const ad::Var mask = tape.constant(nonzero_mask(adjacency));
  return ad::sum(ad::hadamard(ad::abs(w_fcm - embedding_similarity(h_curr, centred)), mask));
}

ad::Var initial_state(ad::Var h_curr) { return h_curr + ad::sign(h_curr); }

ad::Var propagate_step(ad::Var h_t, ad::Var h_prop, ad::Var h_curr) {
  return ad::tanh(h_t + h_prop) + ad::tanh(kMemoryGain * h_curr);
}

ad::Var output_gate(ad::Var h_t) { return h_t + ad::sign(h_t); }

ad::Var metric_head(ad::Var h_final, const MetricGroup& group, const BoundHead& head) {
  const ad::Var rows = ad::gather_rows(h_final, group.nodes);
  const ad::Var hidden = ad::relu(ad::matmul(rows, head.w1) + head.b1);
  return ad::softsign(ad::matmul(hidden, head.w2) + head.b2);
}

// ---------------------------------------------------------------------------

std::vector<double> node_force(const Matrix& h) {
  std::vector<double> force(h.rows(), 0.0);
  for (std::size_t i = 0; i < h.rows(); ++i) {
    double s = 0.0;
    for (double v : h.row(i)) s += v * v;
    force[i] = std::sqrt(s);
  }
  return force;
}

std::vector<double> transitive_alignment(std::span<const double> force, const Matrix& adjacency,
                                         const Matrix& s_matrix) {
  const std::size_t n = force.size();
  if (adjacency.shape() != Shape{n, n} || s_matrix.shape() != Shape{n, n}) {
    throw DimensionError("transitive_alignment: force has " + std::to_string(n) +
                         " entries, A is " + adjacency.shape().str() + ", S is " +
                         s_matrix.shape().str());
  }
  std::vector<double> gamma(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = adjacency(i, j);
      if (a != 0.0) gamma[i] += a * std::abs(s_matrix(i, j)) * force[j];
    }
  }
  return gamma;
}

double causal_score(std::span<const double> force, std::span<const double> alignment) {
  if (force.size() != alignment.size()) {
    throw DimensionError("causal_score: " + std::to_string(force.size()) + " forces vs " +
                         std::to_string(alignment.size()) + " alignments");
  }
  if (force.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < force.size(); ++i) s += force[i] + alignment[i];
  return s / static_cast<double>(force.size());
}

double state_score(const Matrix& h, const Matrix& adjacency, const Matrix& s_matrix) {
  const auto force = node_force(h);
  return causal_score(force, transitive_alignment(force, adjacency, s_matrix));
}

PropagationState select_best(PropagationState state, const Matrix& h_next, double score) {
  state.t += 1;
  if (score > state.s_perf) {
    state.s_perf = score;
    state.h_perf = h_next;
    state.perf_step = state.t;
  }
  state.h_t = h_next;
  return state;
}

TapeForward forward_full(ad::Tape& tape, ad::Var x0, const FcmGraph& graph, const BoundParams& p,
                         std::size_t t_max, const Matrix& s_matrix) {
  const Matrix& adjacency = graph.adjacency();
  TapeForward out;
  out.h_curr = encode(x0, p);
  const ad::Var h_prop = mini_fcm(out.h_curr, p.w_fcm, adjacency);
  ad::Var h_t = initial_state(out.h_curr);

  PropagationState& state = out.state;
  state.h_curr = tape.forward(out.h_curr);
  state.h_t = tape.forward(h_t);
  state.s_matrix = s_matrix;
  state.t_max = t_max;
  state.h_perf = state.h_t;
  state.s_perf = state_score(state.h_t, adjacency, s_matrix);
  state.perf_step = 0;
  out.h_best = h_t;

  auto record = [&](std::size_t step, const Matrix& h, double score) {
    const auto force = node_force(h);
    double m = 0.0;
    for (double f : force) m += f;
    out.trace.push_back({step, score, force.empty() ? 0.0 : m / static_cast<double>(force.size())});
  };
  record(0, state.h_t, state.s_perf);

  while (!state.done()) {
    const ad::Var h_next = propagate_step(h_t, h_prop, out.h_curr);
    const Matrix& value = tape.forward(h_next);
    const double score = state_score(value, adjacency, s_matrix);
    state = select_best(std::move(state), value, score);
    if (state.perf_step == state.t) out.h_best = h_next;
    record(state.t, value, score);
    h_t = h_next;
  }

  out.h_final = output_gate(out.h_best);
  for (std::size_t m = 0; m < graph.groups().size(); ++m) {
    out.outputs.push_back(metric_head(out.h_final, graph.groups()[m], p.heads.at(m)));
  }
  return out;
}

ForwardResult forward_full(const Matrix& x0, const FcmGraph& graph, const FhmParams& params,
                           std::size_t t_max) {
  validate_params(params, graph);
  ad::Tape tape;
  const BoundParams p = BoundParams::bind(tape, params, false);
  const ad::Var x = tape.constant(x0);
  if (x0.shape() != Shape{graph.size(), params.features()}) {
    throw DimensionError("node features are " + x0.shape().str() + ", model expects " +
                         Shape{graph.size(), params.features()}.str());
  }
  TapeForward f = forward_full(tape, x, graph, p, t_max, params.w_fcm);
  ForwardResult r;
  r.h_curr = f.state.h_curr;
  r.h_final = tape.forward(f.h_final);
  for (const auto& y : f.outputs) r.outputs.push_back(tape.forward(y));
  r.s_perf = f.state.s_perf;
  r.best_step = f.state.perf_step;
  r.trace = std::move(f.trace);
  return r;
}

// ---------------------------------------------------------------------------

Matrix encode(const Matrix& x0, const FhmParams& params) {
  ad::Tape tape;
  const BoundParams p = BoundParams::bind(tape, params, false);
  return tape.forward(encode(tape.constant(x0), p));
}

Matrix mini_fcm(const Matrix& h_curr, const Matrix& w_fcm, const Matrix& adjacency) {
  ad::Tape tape;
  const ad::Var h = tape.constant(h_curr);
  if (w_fcm.shape() != adjacency.shape() || w_fcm.rows() != h_curr.rows()) {
    throw DimensionError("mini_fcm: W_fcm " + w_fcm.shape().str() + ", A " +
                         adjacency.shape().str() + ", H_curr " + h_curr.shape().str());
  }
  return tape.forward(mini_fcm(h, tape.constant(w_fcm), adjacency));
}

Matrix embedding_similarity(const Matrix& h_curr, bool centred) {
  ad::Tape tape;
  return tape.forward(embedding_similarity(tape.constant(h_curr), centred));
}

double fusion_penalty(const Matrix& w_fcm, const Matrix& h_curr, const Matrix& adjacency,
                      bool centred) {
  ad::Tape tape;
  if (w_fcm.shape() != adjacency.shape() || w_fcm.rows() != h_curr.rows()) {
    throw DimensionError("fusion_penalty: W_fcm " + w_fcm.shape().str() + ", A " +
                         adjacency.shape().str() + ", H_curr " + h_curr.shape().str());
  }
  return tape
      .forward(fusion_penalty(tape.constant(w_fcm), tape.constant(h_curr), adjacency, centred))
      .item();
}

Matrix initial_state(const Matrix& h_curr) {
  ad::Tape tape;
  return tape.forward(initial_state(tape.constant(h_curr)));
}

Matrix propagate_step(const PropagationState& state, const Matrix& h_prop) {
  ad::Tape tape;
  return tape.forward(propagate_step(tape.constant(state.h_t), tape.constant(h_prop),
                                     tape.constant(state.h_curr)));
}

Matrix output_gate(const Matrix& h_t) {
  ad::Tape tape;
  return tape.forward(output_gate(tape.constant(h_t)));
}

Matrix metric_head(const Matrix& h_final, std::size_t group, const FcmGraph& graph,
                   const FhmParams& params) {
  if (group >= graph.groups().size() || group >= params.heads.size()) {
    throw UsageError("unknown metric group " + std::to_string(group) + " (graph has " +
                     std::to_string(graph.groups().size()) + ")");
  }
  ad::Tape tape;
  const BoundParams p = BoundParams::bind(tape, params, false);
  return tape.forward(metric_head(tape.constant(h_final), graph.groups()[group], p.heads[group]));
}

}  // namespace fhm
