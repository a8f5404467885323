#include <gtest/gtest.h>

#include <fstream>

#include "fhm/error.hpp"
#include "fhm/topology.hpp"
#include "support.hpp"

namespace fhm {
namespace {

using json = nlohmann::ordered_json;

json small_doc() {
  return json::parse(R"({
    "name": "tiny",
    "nodes": ["a", "b", "c"],
    "edges": [{"from": "a", "to": "b", "sign": 1}, {"from": 1, "to": 2, "sign": -1}],
    "groups": {"first": ["a", "b"], "second": [2]}
  })");
}

TEST(Topology, ParsesNamesAndIndices) {
  const TopologySpec s = topology_from_json(small_doc());
  EXPECT_EQ(s.name, "tiny");
  ASSERT_EQ(s.edges.size(), 2U);
  EXPECT_EQ(s.edges[1], (Edge{1, 2, -1}));
  const FcmGraph g = s.graph();
  EXPECT_EQ(g.adjacency(), Matrix::from_rows({{0, 1, 0}, {0, 0, -1}, {0, 0, 0}}));
  EXPECT_EQ(g.groups()[0].name, "first");
  EXPECT_EQ(g.groups()[1].nodes, (std::vector<std::size_t>{2}));
  EXPECT_EQ(s.generator, GeneratorParams{});
}

TEST(Topology, JsonRoundTrip) {
  TopologySpec s = topology_from_json(small_doc());
  s.generator.seed = 99;
  s.generator.noise = 0.05;
  EXPECT_EQ(topology_from_json(to_json(s)), s);
  const auto path = testing::scratch_dir("topology") / "t.json";
  write_topology(s, path);
  EXPECT_EQ(read_topology(path), s);
  EXPECT_EQ(resolve_topology(path.string()), s);
}

TEST(Topology, RejectsBadDocuments) {
  auto with = [](auto edit) {
    json d = small_doc();
    edit(d);
    return d;
  };
  EXPECT_THROW((void)topology_from_json(with([](json& d) { d["edges"][0]["to"] = "zz"; })),
               ConfigError);
  EXPECT_THROW((void)topology_from_json(with([](json& d) { d["edges"][0]["sign"] = 2; })),
               ConfigError);
  EXPECT_THROW((void)topology_from_json(with([](json& d) { d["edges"][0]["to"] = "a"; })),
               ConfigError);
  EXPECT_THROW((void)topology_from_json(with([](json& d) { d["edges"].push_back(d["edges"][0]); })),
               ConfigError);
  EXPECT_THROW((void)topology_from_json(with([](json& d) { d["groups"].erase("second"); })),
               ConfigError);
  EXPECT_THROW((void)topology_from_json(with([](json& d) { d.erase("nodes"); })), ConfigError);
  EXPECT_THROW((void)topology_from_json(json::parse("[1, 2]")), ConfigError);
}

TEST(Topology, MissingFileIsIoError) {
  EXPECT_THROW((void)read_topology("/nonexistent/topology.json"), IoError);
}

TEST(Topology, UnknownBuiltinListsRegistry) {
  try {
    (void)builtin_topology("nope");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("base-urban-9"), std::string::npos);
  }
}

TEST(Builtins, SizesAndConnectivity) {
  const std::map<std::string, std::size_t> sizes{
      {"base-urban-9", 9},  {"extended-urban-14", 14}, {"ministry-urban-19", 19},
      {"expanded-urban-24", 24}, {"sachs-11", 11}, {"sachs-25", 25},
      {"auto-mpg-6", 6},    {"ieee-14", 14}};
  const auto names = builtin_topology_names();
  EXPECT_EQ(names.size(), sizes.size());
  for (const auto& name : names) {
    const TopologySpec s = builtin_topology(name);
    EXPECT_EQ(s.name, name);
    EXPECT_EQ(s.size(), sizes.at(name)) << name;
    EXPECT_NO_THROW(s.validate()) << name;
    const FcmGraph g = s.graph();
    EXPECT_TRUE(is_weakly_connected(g.adjacency())) << name;
    EXPECT_GT(g.edge_count(), s.size() - 1) << name;
    EXPECT_GE(g.groups().size(), 2U) << name;
  }
}

TEST(Builtins, SachsMatchesConsensusNetwork) {
  const FcmGraph g = builtin_topology("sachs-11").graph();
  EXPECT_EQ(g.edge_count(), 18U);
  EXPECT_EQ(g.adjacency()(g.index_of("PIP3"), g.index_of("Akt")), 1.0);
  EXPECT_EQ(g.adjacency()(g.index_of("PKA"), g.index_of("Raf")), -1.0);
  EXPECT_EQ(g.adjacency()(g.index_of("Raf"), g.index_of("Mek")), 1.0);
}

TEST(Connectivity, Examples) {
  EXPECT_TRUE(is_weakly_connected(Matrix::from_rows({{0, 1, 0}, {0, 0, 0}, {0, -1, 0}})));
  EXPECT_FALSE(is_weakly_connected(Matrix::from_rows({{0, 1, 0}, {0, 0, 0}, {0, 0, 0}})));
  EXPECT_TRUE(is_weakly_connected(Matrix(1, 1)));
}

}  // namespace
}  // namespace fhm
