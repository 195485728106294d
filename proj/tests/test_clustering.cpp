#include <doctest.h>

#include <cmath>
#include <numeric>

#include "arbor/clustering.hpp"
#include "arbor/merging.hpp"
#include "arbor/search.hpp"
#include "reference.hpp"

using namespace arbor;

namespace {

std::vector<double> at_angle(double degrees) {
  const double r = degrees * M_PI / 180.0;
  return {std::cos(r), std::sin(r)};
}

std::vector<std::vector<double>> random_unit(RngStream& rng, std::size_t n, std::size_t dim) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(dim);
    double norm = 0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
    for (auto& x : v) x /= std::sqrt(norm);
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<Node> nodes_with_scores(const std::vector<double>& scores, NodeId first = 1) {
  std::vector<Node> out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    Node n;
    n.id = first + static_cast<NodeId>(i);
    n.score = scores[i];
    out.push_back(n);
  }
  return out;
}

}  // namespace

TEST_SUITE("clustering") {
  TEST_CASE("identical vectors form one cluster") {
    std::vector<std::vector<double>> e(5, at_angle(30));
    CHECK(agglomerative_cluster(e, {0.01, Linkage::Average}).cluster_count() == 1);
  }

  TEST_CASE("orthogonal vectors stay apart") {
    std::vector<std::vector<double>> e;
    for (int i = 0; i < 6; ++i) {
      std::vector<double> v(6, 0.0);
      v[i] = 1.0;
      e.push_back(v);
    }
    for (auto l : {Linkage::Average, Linkage::Complete, Linkage::Single}) {
      CHECK(agglomerative_cluster(e, {0.15, l}).cluster_count() == 6);
    }
  }

  TEST_CASE("angles 0, 5, 90, 95 give two clusters") {
    std::vector<std::vector<double>> e{at_angle(0), at_angle(5), at_angle(90), at_angle(95)};
    auto p = agglomerative_cluster(e, {0.15, Linkage::Average});
    CHECK(p == ClusterPartition::from_groups({{0, 1}, {2, 3}}, 4));
    CHECK(p.labels == std::vector<std::size_t>{0, 0, 1, 1});
  }

  TEST_CASE("dimension mismatch") {
    std::vector<std::vector<double>> e{{1, 0}, {1, 0, 0}};
    try {
      (void)agglomerative_cluster(e, {});
      FAIL("expected DimensionMismatch");
    } catch (const Error& err) {
      CHECK(err.kind() == ErrorKind::DimensionMismatch);
    }
  }

  TEST_CASE("matches the naive reference and is permutation invariant") {
    RngStream rng(2024, 1);
    for (int trial = 0; trial < 120; ++trial) {
      const std::size_t n = 1 + rng.below(12);
      const std::size_t dim = 2 + rng.below(4);
      auto pts = random_unit(rng, n, dim);
      const double d = 0.05 + rng.uniform();
      for (auto l : {Linkage::Average, Linkage::Complete, Linkage::Single}) {
        auto got = agglomerative_cluster(pts, {d, l});
        CHECK(got == reference::agglomerative(pts, d, l));
        // Reverse the input: same grouping of the underlying points.
        std::vector<std::vector<double>> rev(pts.rbegin(), pts.rend());
        auto back = agglomerative_cluster(rev, {d, l});
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j)
            CHECK((got.labels[i] == got.labels[j]) == (back.labels[n - 1 - i] == back.labels[n - 1 - j]));
      }
    }
  }

  TEST_CASE("kmeans edge cases and recovery") {
    RngStream rng(5, 5);
    auto pts = random_unit(rng, 6, 3);
    CHECK(kmeans_cluster(pts, 6, rng).cluster_count() == 6);
    CHECK(kmeans_cluster(pts, 1, rng).cluster_count() == 1);
    CHECK_THROWS_AS(kmeans_cluster(pts, 0, rng), Error);
    CHECK_THROWS_AS(kmeans_cluster(pts, 7, rng), Error);
    std::vector<std::vector<double>> groups{{1, 0, 0}, {0.99, 0.1, 0}, {0, 1, 0}, {0.1, 0.99, 0}, {0.98, 0.05, 0}};
    for (int seed = 0; seed < 20; ++seed) {
      RngStream r(seed, 0);
      CHECK(kmeans_cluster(groups, 2, r) == ClusterPartition::from_groups({{0, 1, 4}, {2, 3}}, 5));
    }
  }

  TEST_CASE("similarity degree") {
    CHECK(similarity_degree(10, ClusterPartition::from_groups({{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}}, 10)) == 2.0);
    CHECK(similarity_degree(3, ClusterPartition::from_groups({{0}, {1}, {2}}, 3)) == 1.0);
  }
}

TEST_SUITE("merging") {
  TEST_CASE("aggregation functions") {
    auto nodes = nodes_with_scores({0.2, 0.9});
    std::vector<std::vector<double>> same{{1, 0}, {1, 0}};
    CHECK(merge_states(nodes, same, {}, Aggregation::Max, 0)[0].aggregate_score() == 0.9);
    CHECK(merge_states(nodes, same, {}, Aggregation::Avg, 0)[0].aggregate_score() == doctest::Approx(0.55));
    CHECK(merge_states(nodes, same, {}, Aggregation::Min, 0)[0].aggregate_score() == 0.2);
    CHECK(SearchConfig{}.aggregation == Aggregation::Max);
  }

  TEST_CASE("orthogonal embeddings give singletons with own scores") {
    auto nodes = nodes_with_scores({0.3, 0.6, 0.1});
    std::vector<std::vector<double>> e{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (auto f : {Aggregation::Max, Aggregation::Avg, Aggregation::Min}) {
      auto hs = merge_states(nodes, e, {}, f, 10);
      REQUIRE(hs.size() == 3);
      for (std::size_t i = 0; i < 3; ++i) {
        CHECK(hs[i].hyper_id() == 10 + static_cast<std::int64_t>(i));
        CHECK(hs[i].aggregate_score() == nodes[i].score);
      }
    }
  }

  TEST_CASE("round robin over constituents") {
    HyperNode h(0, {4, 7}, {0.5, 0.9}, Aggregation::Max);
    CHECK(h.next_constituent() == 7);
    CHECK(h.next_constituent() == 4);
    CHECK(h.next_constituent() == 7);
    HyperNode single(1, {3}, {0.1}, Aggregation::Max);
    CHECK(single.next_constituent() == 3);
    CHECK(single.next_constituent() == 3);
    HyperNode ties(2, {9, 2, 5}, {0.4, 0.4, 0.4}, Aggregation::Max);
    CHECK(ties.constituents() == std::vector<NodeId>{2, 5, 9});
    CHECK(ties.top() == 2);
  }

  TEST_CASE("conservation on random batches") {
    RngStream rng(8, 8);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 1 + rng.below(10);
      std::vector<double> scores;
      for (std::size_t i = 0; i < n; ++i) scores.push_back(rng.uniform());
      auto nodes = nodes_with_scores(scores, 100);
      std::vector<std::vector<double>> e;
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v(3, 0.0);
        v[rng.below(3)] = 1.0;
        e.push_back(v);
      }
      std::vector<NodeId> seen;
      for (const auto& h : merge_states(nodes, e, {}, Aggregation::Avg, 0)) {
        seen.insert(seen.end(), h.constituents().begin(), h.constituents().end());
      }
      std::sort(seen.begin(), seen.end());
      std::vector<NodeId> want(n);
      std::iota(want.begin(), want.end(), 100);
      CHECK(seen == want);
    }
  }
}
