#include "fhm/training.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "fhm/error.hpp"

namespace fhm {

namespace {

using json = nlohmann::ordered_json;

// Stream ids for Rng::derive; folds use their own index.
constexpr std::uint64_t kShuffleStream = 0xF01D5ULL;

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be non-negative");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("noise must be non-negative");
  if (hidden == 0 || latent == 0) throw ConfigError("hidden and latent sizes must be positive");
  if (threads == 0) throw ConfigError("threads must be at least 1");
}

ad::Var tune_loss(const std::vector<ad::Var>& outputs, const std::vector<double>& targets) {
  if (outputs.size() != targets.size()) {
    throw DimensionError(std::to_string(outputs.size()) + " head outputs for " +
                         std::to_string(targets.size()) + " targets");
  }
  if (outputs.empty()) throw UsageError("tune_loss needs at least one metric");
  ad::Tape& tape = outputs.front().tape();
  ad::Var loss;
  for (std::size_t m = 0; m < outputs.size(); ++m) {
    const ad::Var target = tape.constant(Matrix(outputs[m].shape(), targets[m]));
    const ad::Var term = ad::sq_norm(outputs[m] - target);
    loss = loss.valid() ? loss + term : term;
  }
  return loss;
}

double tune_loss(const std::vector<Matrix>& outputs, const std::vector<double>& targets) {
  if (outputs.size() != targets.size()) {
    throw DimensionError(std::to_string(outputs.size()) + " head outputs for " +
                         std::to_string(targets.size()) + " targets");
  }
  double loss = 0.0;
  for (std::size_t m = 0; m < outputs.size(); ++m) {
    for (double y : outputs[m].values()) loss += (y - targets[m]) * (y - targets[m]);
  }
  return loss;
}

ad::Var total_loss(const TapeForward& forward, const BoundParams& params, const FcmGraph& graph,
                   const std::vector<double>& targets, double beta, bool centred) {
  const ad::Var tune = tune_loss(forward.outputs, targets);
  if (beta == 0.0) return tune;
  return tune + beta * fusion_penalty(params.w_fcm, forward.h_curr, graph.adjacency(), centred);
}

void sgd_momentum_update(Matrix& param, const Matrix& grad, Matrix& velocity, double lr,
                         double momentum, double noise, Rng& rng, const Matrix* mask) {
  if (grad.shape() != param.shape() || velocity.shape() != param.shape() ||
      (mask && mask->shape() != param.shape())) {
    throw DimensionError("sgd update: param " + param.shape().str() + ", grad " +
                         grad.shape().str() + ", velocity " + velocity.shape().str());
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    if (mask && (*mask)[i] == 0.0) continue;
    const double eps = rng.gaussian(noise);
    velocity[i] = momentum * velocity[i] - lr * (grad[i] + eps);
    param[i] += velocity[i];
  }
}

void sgd_momentum_step(FhmParams& params, const FhmParams& grads, FhmParams& velocity,
                       const Matrix& edge_mask, double lr, double momentum, double noise,
                       Rng& rng) {
  auto p = params.tensors();
  const auto g = grads.tensors();
  auto v = velocity.tensors();
  if (g.size() != p.size() || v.size() != p.size()) {
    throw DimensionError("gradient / velocity layout does not match the parameters");
  }
  for (std::size_t t = 0; t < p.size(); ++t) {
    const Matrix* mask = p[t] == &params.w_fcm ? &edge_mask : nullptr;
    sgd_momentum_update(*p[t], *g[t], *v[t], lr, momentum, noise, rng, mask);
  }
}

double langevin_scale(double base, std::size_t epoch, std::size_t epochs) {
  if (epochs <= 1) return 0.0;
  const double frac = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  return frac >= 1.0 ? 0.0 : base * (1.0 - frac);
}

Evaluation evaluate(const FhmParams& params, const MetricDataset& data, const FcmGraph& graph,
                    const TrainConfig& config) {
  ad::Tape tape;
  const BoundParams p = BoundParams::bind(tape, params, false);
  const ad::Var x = tape.constant(node_features(data.values));
  const TapeForward f = forward_full(tape, x, graph, p, config.t_max, params.w_fcm);
  const ad::Var loss =
      total_loss(f, p, graph, data.targets, config.beta, config.centred_similarity);
  Evaluation e;
  e.loss = tape.forward(loss).item();
  e.s_perf = f.state.s_perf;
  e.best_step = f.state.perf_step;
  return e;
}

FoldResult train_fold(const MetricDataset& train, const MetricDataset& validation,
                      const FcmGraph& graph, const TrainConfig& config, Rng& rng,
                      std::size_t fold) {
  config.validate();
  if (train.samples() == 0 || validation.samples() == 0) {
    throw UsageError("fold " + std::to_string(fold) +
                     " needs at least one training and one validation row");
  }
  if (train.nodes() != graph.size() || validation.nodes() != graph.size()) {
    throw DimensionError("dataset has " + std::to_string(train.nodes()) + " columns, graph has " +
                         std::to_string(graph.size()) + " nodes");
  }

  const Matrix features = node_features(train.values);
  const Matrix edge_mask = graph.edge_mask();
  FhmParams params = FhmParams::initialize(features.cols(), graph, config.model(), rng);
  FhmParams velocity = FhmParams::zeros_like(params);

  FoldResult result;
  result.fold = fold;
  result.train_rows = train.samples();
  result.validation_rows = validation.samples();
  result.train_loss.reserve(config.epochs);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    ad::Tape tape;
    const BoundParams p = BoundParams::bind(tape, params);
    const ad::Var x = tape.constant(features);
    double loss_value = 0.0;
    ad::Var loss;
    try {
      const TapeForward f = forward_full(tape, x, graph, p, config.t_max, params.w_fcm);
      loss = total_loss(f, p, graph, train.targets, config.beta, config.centred_similarity);
      loss_value = tape.forward(loss).item();
    } catch (const NumericError& e) {
      throw NumericError("fold " + std::to_string(fold) + ", epoch " + std::to_string(epoch) +
                         ": " + e.what());
    }
    if (!std::isfinite(loss_value)) {
      throw NumericError("fold " + std::to_string(fold) + ", epoch " + std::to_string(epoch) +
                         ": loss is not finite");
    }
    result.train_loss.push_back(loss_value);
    const FhmParams grads = p.collect(tape.backward(loss));
    sgd_momentum_step(params, grads, velocity, edge_mask, config.lr, config.momentum,
                      langevin_scale(config.noise, epoch, config.epochs), rng);
    for (const Matrix* m : params.tensors()) {
      if (!all_finite(*m)) {
        throw NumericError("fold " + std::to_string(fold) + ", epoch " + std::to_string(epoch) +
                           ": parameters became non-finite");
      }
    }
  }

  const Evaluation val = evaluate(params, validation, graph, config);
  result.validation_loss = val.loss;
  result.s_perf = val.s_perf;
  result.w_fcm = params.w_fcm;
  result.direct = direct_edge_accuracy(params.w_fcm, graph.adjacency());
  try {
    result.transitive = transitive_chain_accuracy(params.w_fcm, graph.adjacency());
  } catch (const UndefinedMetricError&) {
    result.transitive.reset();
  }
  result.params = std::move(params);
  return result;
}

std::vector<std::vector<std::size_t>> fold_split(std::size_t samples, std::size_t folds,
                                                 std::uint64_t seed) {
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (folds > samples) {
    throw UsageError("cannot split " + std::to_string(samples) + " rows into " +
                     std::to_string(folds) + " folds");
  }
  std::vector<std::size_t> order(samples);
  for (std::size_t i = 0; i < samples; ++i) order[i] = i;
  Rng rng = Rng::derive(seed, kShuffleStream);
  for (std::size_t i = samples; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::size_t>> blocks(folds);
  for (std::size_t k = 0; k < folds; ++k) {
    const std::size_t lo = k * samples / folds;
    const std::size_t hi = (k + 1) * samples / folds;
    blocks[k].assign(order.begin() + static_cast<std::ptrdiff_t>(lo),
                     order.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return blocks;
}

CrossValidation cross_validate(const MetricDataset& data, const FcmGraph& graph,
                               const TrainConfig& config, const std::string& experiment) {
  config.validate();
  const auto blocks = fold_split(data.samples(), config.folds, config.seed);

  CrossValidation cv;
  cv.folds.resize(config.folds);
  std::vector<std::exception_ptr> errors(config.folds);

  auto run = [&](std::size_t k) {
    try {
      std::vector<std::size_t> train_rows;
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (b != k) train_rows.insert(train_rows.end(), blocks[b].begin(), blocks[b].end());
      }
      Rng rng = Rng::derive(config.seed, k);
      cv.folds[k] = train_fold(data.subset(train_rows), data.subset(blocks[k]), graph, config, rng, k);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };

  const std::size_t workers = std::min(config.threads, config.folds);
  if (workers <= 1) {
    for (std::size_t k = 0; k < config.folds; ++k) run(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < config.folds; k = next++) run(k);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<FoldScore> scores;
  for (const auto& f : cv.folds) scores.push_back({f.fold, f.direct, f.transitive});
  cv.report = aggregate(experiment, graph.size(), std::move(scores), to_json(config));
  return cv;
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},   {"lr", c.lr},         {"momentum", c.momentum},
          {"t_max", c.t_max},     {"beta", c.beta},     {"noise", c.noise},
          {"folds", c.folds},     {"seed", c.seed},     {"hidden", c.hidden},
          {"latent", c.latent},   {"centred_similarity", c.centred_similarity}};
}

TrainConfig train_config_from_json(const json& doc, TrainConfig c) {
  if (!doc.is_object()) throw ConfigError("training config must be a JSON object");
  try {
    c.epochs = doc.value("epochs", c.epochs);
    c.lr = doc.value("lr", c.lr);
    c.momentum = doc.value("momentum", c.momentum);
    c.t_max = doc.value("t_max", c.t_max);
    c.beta = doc.value("beta", c.beta);
    c.noise = doc.value("noise", c.noise);
    c.folds = doc.value("folds", c.folds);
    c.seed = doc.value("seed", c.seed);
    c.hidden = doc.value("hidden", c.hidden);
    c.latent = doc.value("latent", c.latent);
    c.centred_similarity = doc.value("centred_similarity", c.centred_similarity);
    c.threads = doc.value("threads", c.threads);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  return c;
}

}  // namespace fhm
