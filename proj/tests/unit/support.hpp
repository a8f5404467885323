#pragma once

// Shared fixtures: random instances and a central-difference gradient oracle.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "fhm/graph.hpp"
#include "fhm/matrix.hpp"
#include "fhm/rng.hpp"
#include "fhm/tape.hpp"

namespace fhm::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

// Random signed digraph: a random spanning tree plus extra edges up to
// `density` edges per node; nodes grouped in runs of three.
inline FcmGraph random_graph(std::size_t n, Rng& rng, double density = 1.5) {
  Matrix a(n, n);
  auto sign = [&] { return rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0; };
  for (std::size_t k = 1; k < n; ++k) {
    const std::size_t other = static_cast<std::size_t>(rng.next_u64() % k);
    if (rng.uniform(0.0, 1.0) < 0.5) {
      a(other, k) = sign();
    } else {
      a(k, other) = sign();
    }
  }
  const std::size_t target = static_cast<std::size_t>(density * static_cast<double>(n));
  std::size_t edges = n - 1;
  for (std::size_t tries = 0; edges < target && tries < 50 * n; ++tries) {
    const std::size_t i = rng.next_u64() % n;
    const std::size_t j = rng.next_u64() % n;
    if (i == j || a(i, j) != 0.0 || a(j, i) != 0.0) continue;
    a(i, j) = sign();
    ++edges;
  }
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("c" + std::to_string(i));
  std::vector<MetricGroup> groups;
  for (std::size_t start = 0; start < n; start += 3) {
    MetricGroup g{"g" + std::to_string(start / 3), {}};
    for (std::size_t i = start; i < std::min(n, start + 3); ++i) g.nodes.push_back(i);
    groups.push_back(g);
  }
  return FcmGraph(names, std::move(a), groups);
}

inline double relative_error(double a, double b, double floor = 1e-7) {
  return std::abs(a - b) / std::max(floor, std::max(std::abs(a), std::abs(b)));
}

// Largest relative error between the tape gradient of a scalar root and the
// central difference with step h, over every entry of every leaf.
inline double max_gradient_error(ad::Tape& tape, ad::Var root, const std::vector<ad::Var>& leaves,
                                 double h = 1e-5) {
  tape.forward(root);
  const ad::Gradients grads = tape.backward(root);
  double worst = 0.0;
  for (const ad::Var& leaf : leaves) {
    const Matrix base = tape.value(leaf);
    const Matrix analytic = grads[leaf];
    for (std::size_t i = 0; i < base.size(); ++i) {
      Matrix plus = base;
      Matrix minus = base;
      plus[i] += h;
      minus[i] -= h;
      tape.assign(leaf, plus);
      const double fp = tape.forward(root).item();
      tape.assign(leaf, minus);
      const double fm = tape.forward(root).item();
      tape.assign(leaf, base);
      const double numeric = (fp - fm) / (2.0 * h);
      worst = std::max(worst, relative_error(analytic[i], numeric, 1e-6));
    }
  }
  tape.forward(root);
  return worst;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fhm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fhm::testing
