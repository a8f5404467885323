#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fhm/graph.hpp"
#include "fhm/matrix.hpp"
#include "fhm/rng.hpp"

namespace fhm {

// Inverse problems use the column-vector convention F = (W * M) sigma(x):
// row i of W lists the influences arriving at node i.

inline constexpr double kInverseNoiseStd = 0.01;

struct InverseSchedule {
  std::size_t steps = 1000;  // T
  double lambda_soft = 0.1;
  double noise_std = kInverseNoiseStd;
  double lr = 0.05;
  double momentum = 0.9;

  friend bool operator==(const InverseSchedule&, const InverseSchedule&) = default;
};

struct InverseProblem {
  Matrix w;            // n x n, frozen
  Matrix m_valid;      // 0/1
  Matrix m_forbidden;  // 1 - m_valid
  std::map<std::size_t, double> targets;
  InverseSchedule schedule;
  std::uint64_t seed = 0;

  std::size_t size() const { return w.rows(); }
  // Masks complementary and 0/1, shapes agree, targets in range and in [0, 1].
  void validate() const;

  // From a learned W_fcm (row = cause) and its adjacency: W = W_fcm^T kept in
  // full, M_valid marks W entries that correspond to edges of A.
  static InverseProblem from_model(const Matrix& w_fcm, const Matrix& adjacency,
                                   std::map<std::size_t, double> targets,
                                   InverseSchedule schedule = {}, std::uint64_t seed = 0);
};

struct Flows {
  std::vector<double> valid;
  std::vector<double> forbidden;
};

// (W * M_valid) sigma(x_raw) and (W * M_forbidden) sigma(x_raw).
Flows split_flows(const Matrix& w, const Matrix& m_valid, const Matrix& m_forbidden,
                  const std::vector<double>& x_raw);

// For t < T/2: sigma(F_valid + F_forbidden + eps), eps ~ N(0, noise_std^2)
// per component. Otherwise the raw sum, with no noise and no sigma.
std::vector<double> annealed_output(const Flows& flows, std::size_t t, std::size_t steps, Rng& rng,
                                    double noise_std = kInverseNoiseStd);
bool in_noise_phase(std::size_t t, std::size_t steps);

// lambda_soft (1 + t / T).
double topology_weight(double lambda_soft, std::size_t t, std::size_t steps);

struct InverseLosses {
  double target = 0.0;
  double topology = 0.0;
  double total = 0.0;
};

// L_target = 100 sum_i (Y[i] - v_i)^2, L_topology = lambda_t ||F_forbidden||_2.
InverseLosses inverse_losses(const std::vector<double>& y, const std::map<std::size_t, double>& targets,
                             const std::vector<double>& f_forbidden, std::size_t t,
                             std::size_t steps, double lambda_soft);

struct InverseSolution {
  std::vector<double> x_raw;
  std::vector<double> x;          // sigma(x_raw)
  std::vector<double> predicted;  // sigma(W sigma(x_raw))
  std::vector<InverseLosses> trace;  // one entry per step, before that step's update
  double forbidden_norm = 0.0;       // ||F_forbidden||_2 at the solution
};

// Annealed masked descent from x_raw = 0. In the late phase the output is the
// raw flow, which is compared against logit(v) so that sigma of it lands on v;
// the loss trace records exactly what was minimised.
InverseSolution solve(const InverseProblem& problem);
// solve() with an explicit RNG, so tests can observe the draws.
InverseSolution solve(const InverseProblem& problem, Rng& rng);

// sigma(W sigma(x_raw)).
std::vector<double> predict(const Matrix& w, const std::vector<double>& x_raw);

// Maps node labels to fuzzy terms, e.g. {"mpg": "high"}, through a membership
// table such as {"low": 0.2, "high": 0.8}.
std::map<std::size_t, double> fuzzy_query(const std::map<std::string, std::string>& labels,
                                          const std::map<std::string, double>& memberships,
                                          const FcmGraph& graph);
std::map<std::string, double> default_memberships();

nlohmann::ordered_json to_json(const InverseSolution& solution, const FcmGraph& graph);

}  // namespace fhm
