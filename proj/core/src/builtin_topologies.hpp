#pragma once

#include <string_view>
#include <utility>
#include <vector>

namespace fhm::detail {

// (registry name, JSON text) for every shipped topology, sorted by name.
const std::vector<std::pair<std::string_view, std::string_view>>& builtin_topology_sources();

}  // namespace fhm::detail
