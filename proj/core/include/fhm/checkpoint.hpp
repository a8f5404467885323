#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "fhm/graph.hpp"
#include "fhm/matrix.hpp"
#include "fhm/model.hpp"
#include "fhm/training.hpp"

namespace fhm {

// A trained model with everything needed to rerun it: the graph, the
// training config (including the seed) and every parameter tensor as
// {"rows", "cols", "data"}. Doubles are written at round-trip precision, so
// read(write(c)) == c exactly.
struct Checkpoint {
  FcmGraph graph;
  TrainConfig config;
  FhmParams params;
  std::size_t fold = 0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

nlohmann::ordered_json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::ordered_json& doc);

nlohmann::ordered_json to_json(const FcmGraph& graph);
FcmGraph graph_from_json(const nlohmann::ordered_json& doc);

nlohmann::ordered_json to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const nlohmann::ordered_json& doc);

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace fhm
