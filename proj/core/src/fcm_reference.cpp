#include "fhm/fcm_reference.hpp"

#include <algorithm>
#include <cmath>

#include "fhm/error.hpp"

namespace fhm {

namespace {

double activate(Activation a, double x) {
  if (a == Activation::tanh) return std::tanh(x);
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double max_norm_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

ClassicFcm::ClassicFcm(Matrix weights, FcmOptions options)
    : weights_(std::move(weights)), options_(options) {
  if (weights_.rows() != weights_.cols()) {
    throw DimensionError("FCM weight matrix must be square, got " + weights_.shape().str());
  }
  if (options_.max_iters < 1) throw ConfigError("FCM max_iters must be at least 1");
  if (!(options_.tol > 0.0)) throw ConfigError("FCM tol must be positive");
  for (std::size_t i = 0; i < weights_.rows(); ++i) {
    for (std::size_t j = 0; j < weights_.cols(); ++j) {
      const double w = weights_(i, j);
      if (!std::isfinite(w) || std::abs(w) > 1.0) {
        throw ConfigError("FCM weight (" + std::to_string(i) + "," + std::to_string(j) +
                          ") = " + std::to_string(w) + " is outside [-1, 1]");
      }
      if (i == j && w != 0.0 && !options_.allow_self_loops) {
        throw ConfigError("FCM self-loop on concept " + std::to_string(i) +
                          " (enable allow_self_loops to permit it)");
      }
    }
  }
}

void ClassicFcm::check_length(std::span<const double> v, const char* what) const {
  if (v.size() != size()) {
    throw DimensionError(std::string(what) + " has length " + std::to_string(v.size()) +
                         ", FCM has " + std::to_string(size()) + " concepts");
  }
}

std::vector<double> ClassicFcm::pre_activation(std::span<const double> state,
                                               std::span<const double> external) const {
  check_length(state, "state");
  if (!external.empty()) check_length(external, "external input");
  const std::size_t n = size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = state[i];
    if (s == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) out[j] += s * weights_(i, j);
  }
  if (!external.empty()) {
    for (std::size_t j = 0; j < n; ++j) out[j] += external[j];
  }
  return out;
}

std::vector<double> ClassicFcm::step(std::span<const double> state,
                                     std::span<const double> external) const {
  std::vector<double> out = pre_activation(state, external);
  for (double& v : out) v = activate(options_.activation, v);
  return out;
}

double ClassicFcm::residual(std::span<const double> state,
                            std::span<const double> external) const {
  return max_norm_diff(step(state, external), state);
}

FixedPointResult ClassicFcm::run_to_fixed_point(std::span<const double> start,
                                                std::span<const double> external,
                                                bool record_trajectory) const {
  check_length(start, "start");
  FixedPointResult result;
  std::vector<double> current(start.begin(), start.end());
  if (record_trajectory) result.trajectory.push_back(current);
  for (std::size_t k = 1; k <= options_.max_iters; ++k) {
    std::vector<double> next = step(current, external);
    if (record_trajectory) result.trajectory.push_back(next);
    result.iterations = k;
    if (max_norm_diff(next, current) < options_.tol) {
      result.converged = true;
      break;
    }
    current = std::move(next);
  }
  result.state = std::move(current);
  return result;
}

}  // namespace fhm
