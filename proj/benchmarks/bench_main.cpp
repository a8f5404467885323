#include <benchmark/benchmark.h>

#include "fhm/dataset.hpp"
#include "fhm/fcm_reference.hpp"
#include "fhm/inverse.hpp"
#include "fhm/model.hpp"
#include "fhm/topology.hpp"
#include "fhm/training.hpp"

namespace {

using namespace fhm;

const char* topology_for(int64_t n) {
  switch (n) {
    case 9: return "base-urban-9";
    case 14: return "extended-urban-14";
    case 19: return "ministry-urban-19";
    default: return "expanded-urban-24";
  }
}

struct Setup {
  FcmGraph graph;
  MetricDataset data;
  Matrix features;
  FhmParams params;

  explicit Setup(int64_t n) {
    TopologySpec spec = builtin_topology(topology_for(n));
    graph = spec.graph();
    data = generate_synthetic(spec);
    features = node_features(data.values);
    Rng rng(1);
    params = FhmParams::initialize(features.cols(), graph, ModelConfig{}, rng);
  }
};

void BM_ForwardBackward(benchmark::State& state) {
  const Setup s(state.range(0));
  for (auto _ : state) {
    ad::Tape tape;
    const BoundParams p = BoundParams::bind(tape, s.params);
    const TapeForward f = forward_full(tape, tape.constant(s.features), s.graph, p, 5, s.params.w_fcm);
    const ad::Var loss = total_loss(f, p, s.graph, s.data.targets, 0.1);
    tape.forward(loss);
    benchmark::DoNotOptimize(tape.backward(loss));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(9)->Arg(14)->Arg(19)->Arg(24)->Unit(benchmark::kMicrosecond);

void BM_ForwardOnly(benchmark::State& state) {
  const Setup s(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(forward_full(s.features, s.graph, s.params, 5));
}
BENCHMARK(BM_ForwardOnly)->Arg(9)->Arg(24)->Unit(benchmark::kMicrosecond);

void BM_TrainFold(benchmark::State& state) {
  const Setup s(9);
  TrainConfig config;
  config.epochs = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    Rng rng(2);
    benchmark::DoNotOptimize(train_fold(s.data, s.data, s.graph, config, rng));
  }
}
BENCHMARK(BM_TrainFold)->Arg(50)->Arg(300)->Unit(benchmark::kMillisecond);

void BM_InverseSolve(benchmark::State& state) {
  const Setup s(state.range(0));
  InverseProblem p = InverseProblem::from_model(s.params.w_fcm, s.graph.adjacency(), {{0, 0.6}});
  for (auto _ : state) benchmark::DoNotOptimize(solve(p));
}
BENCHMARK(BM_InverseSolve)->Arg(9)->Arg(24)->Unit(benchmark::kMillisecond);

void BM_FcmFixedPoint(benchmark::State& state) {
  const TopologySpec spec = builtin_topology(topology_for(state.range(0)));
  Rng rng(3);
  const ClassicFcm fcm(sample_weights(spec.graph().adjacency(), rng), {Activation::tanh});
  const std::vector<double> start(spec.size(), 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(fcm.run_to_fixed_point(start));
}
BENCHMARK(BM_FcmFixedPoint)->Arg(9)->Arg(24);

}  // namespace
BENCHMARK_MAIN();
