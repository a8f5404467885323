// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any of them fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "../unit/support.hpp"
#include "cli.hpp"
#include "fhm/dataset.hpp"
#include "fhm/fcm_reference.hpp"
#include "fhm/inverse.hpp"
#include "fhm/model.hpp"
#include "fhm/topology.hpp"
#include "fhm/training.hpp"

namespace fs = std::filesystem;
using namespace fhm;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::size_t worker_count() { return std::max(1U, std::min(5U, std::thread::hardware_concurrency())); }

FhmParams perturbed_params(const FcmGraph& g, std::size_t features, Rng& rng) {
  FhmParams p = FhmParams::initialize(features, g, ModelConfig{}, rng);
  for (Matrix* m : p.tensors()) {
    for (double& v : m->values()) v += rng.uniform(-0.3, 0.3);
  }
  return p;
}

double loss_of(const FhmParams& params, const Matrix& x, const FcmGraph& g,
               const std::vector<double>& targets, const Matrix& s_matrix) {
  ad::Tape t;
  const BoundParams p = BoundParams::bind(t, params);
  const TapeForward f = forward_full(t, t.constant(x), g, p, 3, s_matrix);
  return t.forward(total_loss(f, p, g, targets, 0.1)).item();
}

Outcome gradient_integrity() {
  Rng rng(2024);
  const FcmGraph g = testing::random_graph(5, rng);
  const FhmParams params = perturbed_params(g, feature_count(5), rng);
  const Matrix x = testing::random_matrix(5, feature_count(5), rng);
  std::vector<double> targets;
  for (std::size_t m = 0; m < g.groups().size(); ++m) targets.push_back(rng.uniform(0.2, 0.8));
  const Matrix s_matrix = params.w_fcm;

  ad::Tape t;
  const BoundParams p = BoundParams::bind(t, params);
  const TapeForward f = forward_full(t, t.constant(x), g, p, 3, s_matrix);
  const ad::Var loss = total_loss(f, p, g, targets, 0.1);
  t.forward(loss);
  const FhmParams analytic = p.collect(t.backward(loss));

  // Every evaluation rebuilds the whole pipeline, selection included.
  const double h = 1e-5;
  double worst = 0.0;
  std::size_t checked = 0;
  const auto grads = analytic.tensors();
  FhmParams probe = params;
  const auto slots = probe.tensors();
  for (std::size_t k = 0; k < slots.size(); ++k) {
    for (std::size_t i = 0; i < slots[k]->size(); ++i) {
      const double base = (*slots[k])[i];
      (*slots[k])[i] = base + h;
      const double up = loss_of(probe, x, g, targets, s_matrix);
      (*slots[k])[i] = base - h;
      const double down = loss_of(probe, x, g, targets, s_matrix);
      (*slots[k])[i] = base;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, testing::relative_error((*grads[k])[i], numeric, 1e-6));
      ++checked;
    }
  }
  return {worst < 1e-3, fmt("%.0f parameters, max relative error %.2e", checked, worst)};
}

CrossValidation run_synthetic(const std::string& topology, std::uint64_t seed) {
  TopologySpec spec = builtin_topology(topology);
  spec.generator.seed = seed;
  TrainConfig config;
  config.seed = seed;
  config.threads = worker_count();
  return cross_validate(generate_synthetic(spec), spec.graph(), config, spec.name);
}

struct Means {
  double direct = 0.0;
  double transitive = 0.0;
};

Means seed_means(const std::string& topology) {
  Means m;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const EvalReport r = run_synthetic(topology, seed).report;
    m.direct += *r.direct.mean / 10.0;
    m.transitive += *r.transitive.mean / 10.0;
  }
  return m;
}

Means base_means;

Outcome synthetic_regression() {
  base_means = seed_means("base-urban-9");
  return {base_means.direct >= 0.90 && base_means.transitive >= 0.85,
          fmt("direct %.4f, transitive %.4f", base_means.direct, base_means.transitive)};
}

Outcome scale_trend() {
  const Means large = seed_means("expanded-urban-24");
  return {base_means.direct > large.direct,
          fmt("9 nodes %.4f vs 24 nodes %.4f", base_means.direct, large.direct)};
}

Outcome oracle_equivalence() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const std::size_t n = 4 + seed % 3;
    const FcmGraph g = testing::random_graph(n, rng);
    const Matrix truth = sample_weights(g.adjacency(), rng);
    const std::size_t d = feature_count(n);
    FhmParams p = FhmParams::initialize(d, g, ModelConfig{d, d, 1}, rng);
    p.w1 = Matrix::identity(d);
    p.b1 = Matrix(1, d);
    p.w2 = Matrix::identity(d);
    p.b2 = Matrix(1, d);
    p.w_fcm = truth;
    const Matrix x = testing::random_matrix(n, d, rng);
    const ForwardResult r = forward_full(x, g, p, 1);
    const Matrix prop = mini_fcm(r.h_curr, truth, g.adjacency());
    const ClassicFcm fcm(truth);
    for (std::size_t c = 0; c < d; ++c) {
      std::vector<double> column(n);
      for (std::size_t i = 0; i < n; ++i) column[i] = r.h_curr(i, c);
      const auto ref = fcm.pre_activation(column);
      for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(prop(i, c) - ref[i]));
    }
  }
  return {worst <= 1e-10, fmt("50 instances, max deviation %.2e", worst)};
}

Outcome mask_respect() {
  std::size_t probes = 0, violations = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed + 500);
    const FcmGraph g = testing::random_graph(4 + seed % 5, rng);
    const std::size_t n = g.size();
    const FhmParams p = perturbed_params(g, feature_count(n), rng);
    const Matrix x = testing::random_matrix(n, feature_count(n), rng);
    const ForwardResult base = forward_full(x, g, p, 5);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (g.adjacency()(i, j) != 0.0) continue;
        for (double v : {10.0, -10.0}) {
          FhmParams q = p;
          q.w_fcm(i, j) = v;
          const ForwardResult r = forward_full(x, g, q, 5);
          ++probes;
          violations += !(r.outputs == base.outputs && r.h_final == base.h_final &&
                          r.s_perf == base.s_perf && r.best_step == base.best_step);
        }
      }
    }
  }
  return {violations == 0, fmt("%.0f perturbations, %.0f changed an output", probes, violations)};
}

Outcome selection_correctness() {
  std::size_t failures = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    const std::size_t len = 1 + rng.next_u64() % 12;
    PropagationState s;
    s.t_max = len;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t first = 0;
    for (std::size_t k = 0; k < len; ++k) {
      const double score = std::round(rng.uniform(0.0, 6.0)) / 2.0;
      if (score > best) {
        best = score;
        first = k;
      }
      s = select_best(std::move(s), Matrix::scalar(static_cast<double>(k)), score);
    }
    failures += !(s.s_perf == best && s.h_perf == Matrix::scalar(static_cast<double>(first)));
  }
  return {failures == 0, fmt("1000 sequences, %.0f mismatches", failures)};
}

class CountingRng : public Rng {
 public:
  using Rng::Rng;
  double gaussian(double stddev) override {
    ++draws;
    return Rng::gaussian(stddev);
  }
  std::size_t draws = 0;
};

TopologySpec spec_from_graph(const FcmGraph& g, std::uint64_t seed) {
  TopologySpec s;
  s.name = "random";
  s.nodes = g.nodes();
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double a = g.adjacency()(i, j);
      if (a != 0.0) s.edges.push_back({i, j, a > 0 ? 1 : -1});
    }
  }
  s.groups = g.groups();
  s.generator.samples = 100;
  s.generator.seed = seed;
  return s;
}

Outcome inverse_solver() {
  std::size_t reached = 0, reduced = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 7000);
    const FcmGraph g = testing::random_graph(5, rng);
    const MetricDataset data = generate_synthetic(spec_from_graph(g, seed));
    TrainConfig config;
    Rng train_rng(seed);
    const FoldResult model = train_fold(data, data, g, config, train_rng);

    std::size_t node = 0;
    for (std::size_t j = 0; j < 5; ++j) {
      for (std::size_t i = 0; i < 5; ++i) {
        if (g.adjacency()(i, j) != 0.0) node = j;
      }
    }
    const InverseProblem probe = InverseProblem::from_model(model.w_fcm, g.adjacency(), {{node, 0.5}});
    std::vector<double> x_star(5);
    for (double& v : x_star) v = rng.uniform(-2.0, 2.0);
    const double target = predict(probe.w, x_star)[node];

    InverseProblem p = InverseProblem::from_model(model.w_fcm, g.adjacency(), {{node, target}},
                                                  InverseSchedule{}, seed);
    const InverseSolution sol = solve(p);
    const double err = std::abs(sol.predicted[node] - target);
    worst = std::max(worst, err);
    reached += err < 0.02;

    p.schedule.lambda_soft = 0.0;
    const double free_norm = solve(p).forbidden_norm;
    p.schedule.lambda_soft = 10.0;
    reduced += solve(p).forbidden_norm < free_norm;
  }

  Rng rng(1);
  const FcmGraph g = testing::random_graph(5, rng);
  InverseProblem p = InverseProblem::from_model(testing::random_matrix(5, 5, rng), g.adjacency(),
                                                {{4, 0.6}});
  CountingRng spy(3);
  (void)solve(p, spy);
  const bool exact_draws = spy.draws == 5 * (p.schedule.steps / 2);

  return {reached >= 18 && reduced >= 18 && exact_draws,
          fmt("targets reached %.0f/20 (worst %.4f), ", reached, worst) +
              fmt("penalty reduced forbidden flow %.0f/20, noise draws %.0f", reduced, spy.draws)};
}

Outcome schedule_exactness() {
  const InverseSchedule s;
  const double start = topology_weight(s.lambda_soft, 0, s.steps);
  const double end = topology_weight(s.lambda_soft, s.steps, s.steps);
  const bool pass = std::abs(start - s.lambda_soft) <= 1e-12 &&
                    std::abs(end - 2 * s.lambda_soft) <= 1e-12 && s.noise_std == 0.01 &&
                    kInverseNoiseStd == 0.01;
  return {pass, fmt("lambda_0 %.3g, lambda_T %.3g, noise std %.3g", start, end, s.noise_std)};
}

int cli(const std::vector<std::string>& args, std::string* err = nullptr) {
  std::ostringstream o, e;
  std::vector<std::string> argv{"fhm"};
  argv.insert(argv.end(), args.begin(), args.end());
  const int code = cli::run(argv, o, e);
  if (err) *err = e.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path train_dir(const fs::path& root) {
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.path().filename().string().starts_with("train-")) return e.path();
  }
  return {};
}

Outcome determinism() {
  std::string reports[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path root = testing::scratch_dir("acceptance_det_" + std::to_string(k));
    if (cli({"train", "--topology", "base-urban-9", "--seed", "11", "--out", root.string()}) != 0) {
      return {false, "train failed"};
    }
    reports[k] = slurp(train_dir(root) / "report.json");
  }
  return {!reports[0].empty() && reports[0] == reports[1],
          fmt("report.json %.0f bytes, identical: %.0f", reports[0].size(), reports[0] == reports[1])};
}

Outcome real_data_smoke() {
  const fs::path root = testing::scratch_dir("acceptance_mpg");
  const fs::path csv = fs::path(FHM_SOURCE_DIR) / "data" / "auto_mpg_sample.csv";
  std::string err;
  if (cli({"train", "--topology", "auto-mpg-6", "--data", csv.string(), "--seed", "0", "--out",
           root.string()},
          &err) != 0) {
    return {false, "train failed: " + err};
  }
  const auto doc = nlohmann::json::parse(slurp(train_dir(root) / "report.json"));
  const auto& agg = doc["aggregate"];
  const auto finite = [](const nlohmann::json& v) {
    return v.is_number() && std::isfinite(v.get<double>());
  };
  const bool ok = finite(agg["direct_edge_accuracy"]["mean"]) && finite(agg["transitive_chain_accuracy"]["mean"]);
  return {ok, ok ? fmt("direct %.4f, transitive %.4f", agg["direct_edge_accuracy"]["mean"].get<double>(),
                       agg["transitive_chain_accuracy"]["mean"].get<double>())
                 : "non-finite or missing accuracy"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient integrity", gradient_integrity},
      {"synthetic regression (base-urban-9)", synthetic_regression},
      {"scale trend (9 vs 24 nodes)", scale_trend},
      {"oracle equivalence", oracle_equivalence},
      {"mask respect", mask_respect},
      {"selection correctness", selection_correctness},
      {"inverse solver", inverse_solver},
      {"schedule exactness", schedule_exactness},
      {"determinism", determinism},
      {"real-data smoke (auto mpg)", real_data_smoke},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto started = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k + 1 << ": " << criteria[k].first
              << " - " << o.detail << fmt(" [%.1fs]", secs) << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
