#pragma once

// The FHM forward pass: encoder, mini-FCM fusion, propagation operator,
// causal scoring with best-state selection, output gate and per-metric
// projection heads.
//
// Every differentiable stage exists twice: as a tape builder (ad::Var in,
// ad::Var out) used for training, and as a Matrix convenience overload that
// evaluates the builder on a private tape. Both go through the same code.

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fhm/graph.hpp"
#include "fhm/matrix.hpp"
#include "fhm/rng.hpp"
#include "fhm/tape.hpp"

namespace fhm {

// Gain of the memory term tanh(5 * H_curr). Architectural, not learnable.
inline constexpr double kMemoryGain = 5.0;
// Width of the first projection layer of every metric head.
inline constexpr std::size_t kHeadWidth = 4;
// Per-node summary statistics ahead of the correlation profile.
inline constexpr std::size_t kSummaryFeatures = 4;

struct ModelConfig {
  std::size_t hidden = 16;
  std::size_t latent = 8;
  std::size_t t_max = 5;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct HeadParams {
  Matrix w1;  // latent x 4
  Matrix b1;  // 1 x 4
  Matrix w2;  // 4 x 1
  Matrix b2;  // 1 x 1

  friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

struct FhmParams {
  Matrix w1;  // features x hidden
  Matrix b1;  // 1 x hidden
  Matrix w2;  // hidden x latent
  Matrix b2;  // 1 x latent
  std::vector<HeadParams> heads;  // one per metric group
  Matrix w_fcm;  // n x n; only entries on edges of A are ever read

  // Weights uniform in +-1/sqrt(fan_in), biases zero, W_fcm uniform in +-0.1.
  static FhmParams initialize(std::size_t features, const FcmGraph& graph,
                              const ModelConfig& config, Rng& rng);
  // Same layout, all zeros (gradient / velocity buffers).
  static FhmParams zeros_like(const FhmParams& p);

  std::size_t nodes() const { return w_fcm.rows(); }
  std::size_t features() const { return w1.rows(); }

  // Stable ordering of all tensors: w1, b1, w2, b2, w_fcm, then each head.
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;
  std::vector<std::string> tensor_names() const;

  friend bool operator==(const FhmParams&, const FhmParams&) = default;
};

// Checks every tensor shape against the graph; throws DimensionError.
void validate_params(const FhmParams& params, const FcmGraph& graph);

// Node feature matrix from an N x n observation table (values in [0, 1]).
// Row i holds (mean, std, min, max) of column i followed by the Pearson
// correlation of column i with every column; undefined correlations are 0
// and the self-correlation is always 1. Result is n x (4 + n).
Matrix node_features(const Matrix& observations);
inline std::size_t feature_count(std::size_t nodes) { return kSummaryFeatures + nodes; }

// ---------------------------------------------------------------------------
// Tape builders
// ---------------------------------------------------------------------------

struct BoundHead {
  ad::Var w1, b1, w2, b2;
};

struct BoundParams {
  ad::Var w1, b1, w2, b2;
  std::vector<BoundHead> heads;
  ad::Var w_fcm;

  static BoundParams bind(ad::Tape& tape, const FhmParams& params, bool learnable = true);
  // Gradients laid out like the parameters.
  FhmParams collect(const ad::Gradients& grads) const;
};

// H0 = tanh(X0 W1 + b1) W2 + b2 (affine outer layer).
ad::Var encode(ad::Var x0, const BoundParams& p);
// H_prop = (mask(A) * W_fcm)^T H_curr: node j sums its causes' embeddings.
ad::Var mini_fcm(ad::Var h_curr, ad::Var w_fcm, const Matrix& adjacency);
// Row cosine similarity G (n x n); a zero row has similarity 0 with everything.
// With `centred` the mean row is removed first, which makes G blind to any
// offset shared by all nodes (the encoder bias b2 in particular).
ad::Var embedding_similarity(ad::Var h_curr, bool centred = true);
// Sum over edges of |W_fcm[i][j] - G[i][j]|.
ad::Var fusion_penalty(ad::Var w_fcm, ad::Var h_curr, const Matrix& adjacency,
                       bool centred = true);
// H + sign(H); the sign term carries no gradient.
ad::Var initial_state(ad::Var h_curr);
// tanh(H_t + H_prop) + tanh(5 H_curr).
ad::Var propagate_step(ad::Var h_t, ad::Var h_prop, ad::Var h_curr);
ad::Var output_gate(ad::Var h_t);
// Softsign(ReLU(H_final[group] W_m1 + b_m1) W_m2 + b_m2); one row per group node.
ad::Var metric_head(ad::Var h_final, const MetricGroup& group, const BoundHead& head);

// ---------------------------------------------------------------------------
// Scoring and selection (not differentiated)
// ---------------------------------------------------------------------------

struct PropagationState {
  Matrix h_curr;
  Matrix h_t;
  Matrix h_perf;
  Matrix s_matrix;
  std::size_t t = 0;
  std::size_t t_max = 0;
  double s_perf = -std::numeric_limits<double>::infinity();
  // Step at which s_perf was last raised.
  std::size_t perf_step = 0;

  bool done() const { return t >= t_max; }
};

// E[i] = ||row i||_2.
std::vector<double> node_force(const Matrix& h);
// Gamma = E (A * |S|)^T, i.e. Gamma[i] = sum_j A[i][j] |S[i][j]| E[j].
std::vector<double> transitive_alignment(std::span<const double> force, const Matrix& adjacency,
                                         const Matrix& s_matrix);
double causal_score(std::span<const double> force, std::span<const double> alignment);
// causal_score(E, Gamma) of a state.
double state_score(const Matrix& h, const Matrix& adjacency, const Matrix& s_matrix);
// Strict improvement replaces the best state; t always advances.
PropagationState select_best(PropagationState state, const Matrix& h_next, double score);

// ---------------------------------------------------------------------------
// Full pass
// ---------------------------------------------------------------------------

struct TraceEntry {
  std::size_t step = 0;
  double score = 0.0;
  double mean_force = 0.0;
};

struct TapeForward {
  ad::Var h_curr;
  ad::Var h_best;   // selected H_T
  ad::Var h_final;  // output gate applied to h_best
  std::vector<ad::Var> outputs;  // per metric group, d_m x 1
  PropagationState state;
  std::vector<TraceEntry> trace;  // entry 0 scores the initial state
};

// encode -> initial_state -> t_max propagate/score/select steps -> gate on the
// selected state -> all heads. `s_matrix` is the past-embedding matrix S.
TapeForward forward_full(ad::Tape& tape, ad::Var x0, const FcmGraph& graph, const BoundParams& p,
                         std::size_t t_max, const Matrix& s_matrix);

struct ForwardResult {
  Matrix h_curr;
  Matrix h_final;
  std::vector<Matrix> outputs;
  double s_perf = 0.0;
  std::size_t best_step = 0;
  std::vector<TraceEntry> trace;
};

// Evaluation-only pass; S is the current W_fcm.
ForwardResult forward_full(const Matrix& x0, const FcmGraph& graph, const FhmParams& params,
                           std::size_t t_max);

// Matrix conveniences over the builders above.
Matrix encode(const Matrix& x0, const FhmParams& params);
Matrix mini_fcm(const Matrix& h_curr, const Matrix& w_fcm, const Matrix& adjacency);
Matrix embedding_similarity(const Matrix& h_curr, bool centred = true);
double fusion_penalty(const Matrix& w_fcm, const Matrix& h_curr, const Matrix& adjacency,
                      bool centred = true);
Matrix initial_state(const Matrix& h_curr);
Matrix propagate_step(const PropagationState& state, const Matrix& h_prop);
Matrix output_gate(const Matrix& h_t);
Matrix metric_head(const Matrix& h_final, std::size_t group, const FcmGraph& graph,
                   const FhmParams& params);

}  // namespace fhm
