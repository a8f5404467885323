#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fhm/matrix.hpp"

namespace fhm {

enum class Activation { sigmoid, tanh };

struct FcmOptions {
  Activation activation = Activation::sigmoid;
  std::size_t max_iters = 200;
  double tol = 1e-6;
  bool allow_self_loops = false;
};

struct FixedPointResult {
  std::vector<double> state;
  std::size_t iterations = 0;
  bool converged = false;
  // start, then every state produced by step(); empty unless requested.
  std::vector<std::vector<double>> trajectory;
};

// Classical fuzzy cognitive map: s_{t+1} = f(s_t W + u), where W[i][j] is the
// influence of concept i on concept j and u is an optional external input
// (zero in the textbook update). Immutable after construction.
class ClassicFcm {
 public:
  explicit ClassicFcm(Matrix weights, FcmOptions options = {});

  std::size_t size() const { return weights_.rows(); }
  const Matrix& weights() const { return weights_; }
  const FcmOptions& options() const { return options_; }

  // s W (+ u), before the activation.
  std::vector<double> pre_activation(std::span<const double> state,
                                     std::span<const double> external = {}) const;
  std::vector<double> step(std::span<const double> state,
                           std::span<const double> external = {}) const;

  // Iterates step() until two successive states differ by less than tol in
  // max-norm. The returned state is the earlier of that pair, so when
  // converged its residual ||f(sW + u) - s||_inf is below tol.
  FixedPointResult run_to_fixed_point(std::span<const double> start,
                                      std::span<const double> external = {},
                                      bool record_trajectory = false) const;

  double residual(std::span<const double> state, std::span<const double> external = {}) const;

 private:
  void check_length(std::span<const double> v, const char* what) const;

  Matrix weights_;
  FcmOptions options_;
};

}  // namespace fhm
