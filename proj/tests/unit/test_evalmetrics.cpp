#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "fhm/error.hpp"
#include "fhm/evalmetrics.hpp"
#include "support.hpp"

namespace fhm {
namespace {

int sgn(double v) { return (v > 0) - (v < 0); }

// Straightforward enumeration of edges and two-hop chains.
std::pair<double, double> brute_force(const Matrix& learned, const Matrix& truth) {
  const std::size_t n = truth.rows();
  std::size_t edges = 0, edge_hits = 0, chains = 0, chain_hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (truth(i, j) == 0) continue;
      ++edges;
      edge_hits += sgn(learned(i, j)) == sgn(truth(i, j));
      for (std::size_t k = 0; k < n; ++k) {
        if (truth(j, k) == 0) continue;
        ++chains;
        chain_hits += sgn(learned(i, j)) * sgn(learned(j, k)) == sgn(truth(i, j)) * sgn(truth(j, k));
      }
    }
  }
  return {static_cast<double>(edge_hits) / edges,
          chains ? static_cast<double>(chain_hits) / chains : -1.0};
}

TEST(DirectAccuracy, Examples) {
  const Matrix truth = Matrix::from_rows({{0, 1}, {-1, 0}});
  EXPECT_EQ(direct_edge_accuracy(truth, truth), 1.0);
  EXPECT_EQ(direct_edge_accuracy(-1.0 * truth, truth), 0.0);
  EXPECT_EQ(direct_edge_accuracy(Matrix::from_rows({{5, 0.2}, {0.1, 7}}), truth), 0.5);
  EXPECT_EQ(direct_edge_accuracy(Matrix(2, 2), truth), 0.0);
  EXPECT_THROW((void)direct_edge_accuracy(Matrix(2, 2), Matrix(2, 2)), UndefinedMetricError);
  EXPECT_THROW((void)direct_edge_accuracy(Matrix(3, 3), truth), DimensionError);
}

TEST(TransitiveAccuracy, Examples) {
  const Matrix chain = Matrix::from_rows({{0, 1, 0}, {0, 0, -1}, {0, 0, 0}});
  EXPECT_EQ(chain_count(chain), 1U);
  EXPECT_EQ(transitive_chain_accuracy(chain, chain), 1.0);
  // Both signs flipped keep the product.
  EXPECT_EQ(transitive_chain_accuracy(-1.0 * chain, chain), 1.0);
  EXPECT_EQ(transitive_chain_accuracy(Matrix::from_rows({{0, 1, 0}, {0, 0, 1}, {0, 0, 0}}), chain),
            0.0);
  EXPECT_THROW((void)transitive_chain_accuracy(Matrix(2, 2), Matrix::from_rows({{0, 1}, {0, 0}})),
               UndefinedMetricError);
  // A 2-cycle yields the chains a->b->a and b->a->b.
  EXPECT_EQ(chain_count(Matrix::from_rows({{0, 1}, {1, 0}})), 2U);
}

TEST(AccuracyProperty, MatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const FcmGraph g = testing::random_graph(3 + seed % 8, rng, 1.8);
    Matrix learned = testing::random_matrix(g.size(), g.size(), rng);
    learned[seed % learned.size()] = 0.0;
    const auto [direct, transitive] = brute_force(learned, g.adjacency());
    EXPECT_DOUBLE_EQ(direct_edge_accuracy(learned, g.adjacency()), direct);
    if (transitive >= 0) {
      EXPECT_DOUBLE_EQ(transitive_chain_accuracy(learned, g.adjacency()), transitive);
    }
  }
}

TEST(AccuracyProperty, InvariantToPositiveScaling) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const FcmGraph g = testing::random_graph(6, rng, 1.8);
    const Matrix learned = testing::random_matrix(6, 6, rng);
    const double k = rng.uniform(0.01, 100.0);
    EXPECT_EQ(direct_edge_accuracy(k * learned, g.adjacency()),
              direct_edge_accuracy(learned, g.adjacency()));
    EXPECT_EQ(transitive_chain_accuracy(k * learned, g.adjacency()),
              transitive_chain_accuracy(learned, g.adjacency()));
  }
}

TEST(AccuracyProperty, InvariantToNodeRelabelling) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const FcmGraph g = testing::random_graph(6, rng, 1.8);
    const Matrix learned = testing::random_matrix(6, 6, rng);
    std::vector<std::size_t> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    Matrix pl(6, 6), pt(6, 6);
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = 0; j < 6; ++j) {
        pl(perm[i], perm[j]) = learned(i, j);
        pt(perm[i], perm[j]) = g.adjacency()(i, j);
      }
    }
    EXPECT_DOUBLE_EQ(direct_edge_accuracy(pl, pt), direct_edge_accuracy(learned, g.adjacency()));
    EXPECT_DOUBLE_EQ(transitive_chain_accuracy(pl, pt),
                     transitive_chain_accuracy(learned, g.adjacency()));
  }
}

TEST(Summarize, PopulationStd) {
  const Summary s = summarize({1.0, 0.0});
  EXPECT_EQ(*s.mean, 0.5);
  EXPECT_EQ(*s.std, 0.5);
  const Summary one = summarize({0.3});
  EXPECT_EQ(*one.std, 0.0);
  EXPECT_FALSE(summarize({}).mean.has_value());
}

TEST(Aggregate, BestFoldIsFirstMaximum) {
  const EvalReport r = aggregate("x", 4, {{0, 0.5, 0.4}, {1, 0.9, std::nullopt}, {2, 0.9, 0.6}});
  EXPECT_EQ(r.best_fold, 1U);
  EXPECT_NEAR(*r.direct.mean, 2.3 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(*r.transitive.mean, 0.5);
  const EvalReport none = aggregate("y", 2, {{0, 1.0, std::nullopt}, {1, 1.0, std::nullopt}});
  EXPECT_FALSE(none.transitive.mean.has_value());
  EXPECT_EQ(format_summary(none.transitive), "N/A");
}

TEST(Report, JsonRoundTrip) {
  EvalReport r = aggregate("base", 9, {{0, 0.95, 0.9}, {1, 0.9, std::nullopt}},
                           nlohmann::ordered_json{{"lr", 0.01}});
  const auto doc = to_json(r);
  EXPECT_TRUE(doc.contains("aggregate"));
  EXPECT_TRUE(doc.contains("metric_note"));
  const EvalReport back = report_from_json(doc);
  EXPECT_EQ(to_json(back).dump(), doc.dump());
  EXPECT_EQ(back.best_fold, 0U);
}

TEST(Table, FormatsSummaries) {
  EXPECT_EQ(format_summary({0.9714, 0.0220}), "97.14% ± 2.20%");
  const EvalReport a = aggregate("Base Urban", 9, {{0, 1.0, 1.0}, {1, 0.9, 0.8}});
  const EvalReport b = aggregate("Sachs", 11, {{0, 0.5, std::nullopt}});
  const std::string table = render_table({a, b});
  EXPECT_NE(table.find("Direct Edge Acc."), std::string::npos);
  EXPECT_NE(table.find("95.00% ± 5.00%"), std::string::npos);
  EXPECT_NE(table.find("N/A"), std::string::npos);
  std::istringstream lines(table);
  std::string header, rule;
  std::getline(lines, header);
  std::getline(lines, rule);
  EXPECT_EQ(rule.find_first_not_of('-'), std::string::npos);
}

}  // namespace
}  // namespace fhm
