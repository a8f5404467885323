#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "fhm/dataset.hpp"
#include "fhm/evalmetrics.hpp"
#include "fhm/graph.hpp"
#include "fhm/model.hpp"
#include "fhm/rng.hpp"
#include "fhm/tape.hpp"

namespace fhm {

struct TrainConfig {
  std::size_t epochs = 300;
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t t_max = 5;
  double beta = 0.1;    // fusion penalty weight
  double noise = 0.01;  // gradient noise std at epoch 0, decays linearly to 0
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::size_t hidden = 16;
  std::size_t latent = 8;
  bool centred_similarity = true;
  std::size_t threads = 1;

  ModelConfig model() const { return {hidden, latent, t_max}; }
  // ConfigError on lr <= 0, momentum outside [0, 1), folds < 2, and so on.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// sum_m sum_{k in m} (Y_m[k] - v_m)^2.
ad::Var tune_loss(const std::vector<ad::Var>& outputs, const std::vector<double>& targets);
double tune_loss(const std::vector<Matrix>& outputs, const std::vector<double>& targets);
// tune_loss + beta * fusion_penalty.
ad::Var total_loss(const TapeForward& forward, const BoundParams& params, const FcmGraph& graph,
                   const std::vector<double>& targets, double beta, bool centred = true);

// v <- momentum v - lr (g + eps), eps ~ N(0, noise^2); p <- p + v. Entries
// where `mask` is 0 are left untouched and draw no noise.
void sgd_momentum_update(Matrix& param, const Matrix& grad, Matrix& velocity, double lr,
                         double momentum, double noise, Rng& rng, const Matrix* mask = nullptr);
// The same over every tensor; W_fcm is restricted to the edges of the graph.
void sgd_momentum_step(FhmParams& params, const FhmParams& grads, FhmParams& velocity,
                       const Matrix& edge_mask, double lr, double momentum, double noise, Rng& rng);

// base * (1 - epoch / (epochs - 1)); zero at the final epoch (and for a single epoch).
double langevin_scale(double base, std::size_t epoch, std::size_t epochs);

struct Evaluation {
  double loss = 0.0;
  double s_perf = 0.0;
  std::size_t best_step = 0;
};

// Loss and best-state score of `params` on a dataset (no update).
Evaluation evaluate(const FhmParams& params, const MetricDataset& data, const FcmGraph& graph,
                    const TrainConfig& config);

struct FoldResult {
  std::size_t fold = 0;
  FhmParams params;  // final
  Matrix w_fcm;      // learned W_fcm snapshot
  std::vector<double> train_loss;  // one per epoch, before that epoch's update
  double validation_loss = 0.0;
  double s_perf = 0.0;  // validation pass
  double direct = 0.0;
  std::optional<double> transitive;
  std::size_t train_rows = 0;
  std::size_t validation_rows = 0;
};

// Trains fresh parameters drawn from `rng` on `train` and scores them on
// `validation`. Aborts with NumericError naming the epoch on a non-finite loss.
FoldResult train_fold(const MetricDataset& train, const MetricDataset& validation,
                      const FcmGraph& graph, const TrainConfig& config, Rng& rng,
                      std::size_t fold = 0);

// Seeded shuffle of 0..N-1 cut into `folds` contiguous blocks.
std::vector<std::vector<std::size_t>> fold_split(std::size_t samples, std::size_t folds,
                                                 std::uint64_t seed);

struct CrossValidation {
  std::vector<FoldResult> folds;
  EvalReport report;
  const FoldResult& best() const { return folds.at(report.best_fold); }
};

// Fold k validates on block k and trains on the rest with its own RNG stream
// derived from (seed, k). Folds run on `config.threads` threads; results do
// not depend on the thread count.
CrossValidation cross_validate(const MetricDataset& data, const FcmGraph& graph,
                               const TrainConfig& config, const std::string& experiment = "");

nlohmann::ordered_json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::ordered_json& doc, TrainConfig base = {});

}  // namespace fhm
