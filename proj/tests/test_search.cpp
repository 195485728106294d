#include <doctest.h>

#include <cmath>
#include <functional>
#include <set>

#include "arbor/search.hpp"
#include "arbor/spec_families.hpp"
#include "arbor/valuation.hpp"
#include "helpers.hpp"

using namespace arbor;
using namespace arbor::testing;

namespace {

struct Synth {
  std::shared_ptr<const SyntheticTaskSpec> spec;
  SyntheticPolicy policy;
  SyntheticVerifier verifier;
  ExactAliasEmbedder embedder;

  Synth(std::shared_ptr<const SyntheticTaskSpec> s, SyntheticVerifierMode mode = SyntheticVerifierMode::Oracle,
        double sigma = 0.0)
      : spec(s), policy(s), verifier(s, mode, sigma, 3), embedder(s) {}

  SearchBackends backends() { return {policy, verifier, &embedder}; }
  Problem problem(std::size_t i = 0) const { return spec->dataset().at(i); }
};

std::shared_ptr<const SyntheticTaskSpec> chain(int depth, int aliases = 1, int problems = 1) {
  families::ChainParams p;
  p.depth = depth;
  p.aliases_per_step = aliases;
  p.problems = problems;
  return std::make_shared<const SyntheticTaskSpec>(families::deterministic_chain(p));
}

std::shared_ptr<const SyntheticTaskSpec> small_fanout() {
  families::AliasFanoutParams p;
  p.problems = 6;
  p.min_depth = 3;
  p.max_depth = 4;
  return std::make_shared<const SyntheticTaskSpec>(families::alias_fanout(p));
}

// Two branches that both continue with the same step template.
std::shared_ptr<const SyntheticTaskSpec> converging_spec() {
  return make_spec(one_problem("conv", "1",
                               {{"s0", {edge("left", 0.5, {"Go left."}, "l"), edge("right", 0.5, {"Go right."}, "r")}},
                                {"l", {edge("mid", 1.0, {"Add the numbers."}, "m")}},
                                {"r", {edge("mid", 1.0, {"Add the numbers."}, "m")}},
                                {"m", {answer_edge("end", 1.0, {"The answer is 1."}, "1")}}}));
}

}  // namespace

TEST_SUITE("search") {
  TEST_CASE("tree search budget") {
    CHECK(tree_search_budget(0.95, 0.95, 10) == 1);
    CHECK(tree_search_budget(0.5, 0.95, 10) == 5);
    CHECK(tree_search_budget(0.0, 0.95, 10) == 10);
    CHECK(tree_search_budget(1.0, 0.95, 10) == 1);
    CHECK(tree_search_budget(0.01, 0.95, 10) == 10);
    int prev = 11;
    for (int k = 0; k <= 100; ++k) {
      const int b = tree_search_budget(k / 100.0, 0.95, 10);
      CHECK(b <= prev);
      CHECK(b >= 1);
      prev = b;
    }
    CHECK_THROWS_AS(tree_search_budget(0.5, 1.0, 10), Error);
    CHECK_THROWS_AS(tree_search_budget(0.5, 0.9, 0), Error);
  }

  TEST_CASE("bfs on a deterministic chain") {
    Synth s(chain(3));
    SearchConfig cfg;
    cfg.merging = true;
    auto r = bfs_search(s.problem(), cfg, s.backends());
    REQUIRE(r.answer);
    CHECK(*r.answer == "7");
    CHECK(r.complete);
    CHECK(r.outcome == "complete");
    CHECK(r.expansions == 3);
    CHECK(r.tokens == 3 * 10 * 5);
    CHECK(r.trace.resum_tokens() == r.tokens);

    cfg.merging = false;
    cfg.expansion_size = 1;
    auto single = bfs_search(s.problem(), cfg, s.backends());
    CHECK(single.answer == r.answer);
    CHECK(single.expansions == 3);
  }

  TEST_CASE("unmerged duplicate siblings tie and are swept by id") {
    Synth s(chain(3));
    SearchConfig cfg;
    auto r = bfs_search(s.problem(), cfg, s.backends());
    CHECK(r.answer == std::optional<std::string>("7"));
    CHECK(r.expansions > 3);
    REQUIRE(r.trace.selections.size() >= 3);
    // second and third pops are siblings from the first batch
    CHECK(r.trace.selections[1].hyper_id == 1);
    CHECK(r.trace.selections[2].hyper_id == 2);
  }

  TEST_CASE("merging on an alias chain groups siblings") {
    Synth s(chain(4, 5));
    SearchConfig plain;
    plain.expansion_size = 1;
    SearchConfig merged;
    merged.merging = true;
    auto a = bfs_search(s.problem(), plain, s.backends());
    auto b = bfs_search(s.problem(), merged, s.backends());
    CHECK(a.answer == b.answer);
    CHECK(b.answer == std::optional<std::string>("7"));
    CHECK(b.expansions == 4);
    REQUIRE(b.trace.hyper_nodes.size() == 5);
    for (const auto& h : b.trace.hyper_nodes)
      if (h.hyper_id != 0) CHECK(h.constituents.size() == 10);
  }

  TEST_CASE("merging conserves nodes per batch") {
    Synth s(small_fanout(), SyntheticVerifierMode::Noisy, 0.1);
    for (auto m : {Method::Bfs, Method::Tree, Method::Beam, Method::Mcts}) {
      SearchConfig cfg;
      cfg.method = m;
      cfg.merging = true;
      auto r = run_search(s.problem(), cfg, s.backends());
      for (const auto& sel : r.trace.selections) {
        if (sel.action != "expand") continue;
        std::multiset<NodeId> grouped;
        for (auto h : sel.new_hyper_nodes)
          for (auto id : r.trace.hyper_nodes.at(static_cast<std::size_t>(h)).constituents) grouped.insert(id);
        CHECK(grouped == std::multiset<NodeId>(sel.children.begin(), sel.children.end()));
      }
    }
  }

  TEST_CASE("frontier merging folds same-depth hyper-nodes") {
    auto spec = converging_spec();
    SyntheticPolicy policy(spec);
    TableVerifier v({{"Go left.", 0.6}, {"Go right.", 0.55}, {"Add the numbers.", 0.5}, {"The answer is 1.", 0.9}});
    ExactAliasEmbedder emb(spec);
    SearchConfig cfg;
    cfg.expansion_size = 6;
    cfg.merging = true;
    cfg.frontier_merging = true;
    auto r = bfs_search(spec->dataset()[0], cfg, {policy, v, &emb});
    CHECK(r.answer == std::optional<std::string>("1"));
    bool absorbed = false;
    for (const auto& h : r.trace.hyper_nodes) absorbed |= h.absorbed_into.has_value();
    CHECK(absorbed);
    cfg.frontier_merging = false;
    auto plain = bfs_search(spec->dataset()[0], cfg, {policy, v, &emb});
    for (const auto& h : plain.trace.hyper_nodes) CHECK_FALSE(h.absorbed_into.has_value());
  }

  TEST_CASE("expanded hyper-nodes leave the frontier") {
    Synth s(small_fanout(), SyntheticVerifierMode::Noisy, 0.1);
    for (bool merge : {false, true}) {
      SearchConfig cfg;
      cfg.merging = merge;
      auto r = bfs_search(s.problem(1), cfg, s.backends());
      std::set<std::int64_t> seen;
      for (const auto& sel : r.trace.selections) {
        if (sel.action != "expand") continue;
        CHECK(seen.insert(sel.hyper_id).second);
      }
    }
  }

  TEST_CASE("beam keeps at most B per depth") {
    Synth s(small_fanout(), SyntheticVerifierMode::Noisy, 0.1);
    for (int B : {1, 2, 3}) {
      SearchConfig cfg;
      cfg.method = Method::Beam;
      cfg.beam_size = B;
      cfg.expansion_size = 5;
      cfg.max_total_expansions = 200;
      auto r = beam_search(s.problem(2), cfg, s.backends());
      std::map<std::int64_t, int> per_depth;
      for (const auto& sel : r.trace.selections)
        if (sel.action == "expand") ++per_depth[sel.iteration];
      for (const auto& [d, n] : per_depth) CHECK(n <= (d == 0 ? 1 : B));
    }
  }

  TEST_CASE("beam with B=1 follows the chain") {
    Synth s(chain(4));
    SearchConfig cfg;
    cfg.method = Method::Beam;
    cfg.beam_size = 1;
    auto r = beam_search(s.problem(), cfg, s.backends());
    CHECK(r.answer == std::optional<std::string>("7"));
    CHECK(r.expansions == 4);
  }

  TEST_CASE("a wider merged beam recovers from a misleading first step") {
    auto spec = make_spec(two_branch_spec(0.5));
    SyntheticPolicy policy(spec);
    TableVerifier v({{"Go left.", 0.4}, {"Go right.", 0.6}, {"The answer is 1.", 0.9}, {"The answer is 2.", 0.1}});
    ExactAliasEmbedder emb(spec);
    SearchConfig cfg;
    cfg.method = Method::Beam;
    cfg.merging = true;
    cfg.beam_size = 1;
    auto narrow = beam_search(spec->dataset()[0], cfg, {policy, v, &emb});
    CHECK(narrow.answer == std::optional<std::string>("2"));
    cfg.beam_size = 2;
    auto wide = beam_search(spec->dataset()[0], cfg, {policy, v, &emb});
    CHECK(wide.answer == std::optional<std::string>("1"));
  }

  TEST_CASE("tree search spends less on confident states") {
    Synth s(chain(3));
    SearchConfig cfg;
    cfg.method = Method::Tree;
    auto r = tree_search(s.problem(), cfg, s.backends());
    CHECK(r.answer == std::optional<std::string>("7"));
    for (const auto& sel : r.trace.selections)
      if (sel.action == "expand") CHECK(sel.budget == 1);
  }

  TEST_CASE("mcts visit counts on a single chain") {
    Synth s(chain(6));
    SearchConfig cfg;
    cfg.method = Method::Mcts;
    cfg.mcts_root_budget = 1;
    cfg.mcts_child_budget = 1;
    cfg.mcts_iterations = 4;
    auto r = mcts_search(s.problem(), cfg, s.backends());
    std::map<std::int64_t, std::int64_t> visits;
    for (const auto& m : r.trace.mcts) visits[m.hyper_id] = m.visits;
    // hyper k sits at depth k on a single chain
    for (std::int64_t k = 0; k < 4; ++k) CHECK(visits[k] == 4 - k);
    CHECK(r.trace.resum_tokens() == r.tokens);
  }

  TEST_CASE("mcts without exploration follows the oracle") {
    auto spec = make_spec(two_branch_spec(0.5));
    Synth s(spec);
    SearchConfig cfg;
    cfg.method = Method::Mcts;
    cfg.mcts_exploration = 0.0;
    cfg.mcts_root_budget = 6;
    cfg.mcts_iterations = 12;
    auto r = mcts_search(s.problem(), cfg, s.backends());
    CHECK(r.answer == std::optional<std::string>("1"));
    cfg.mcts_label_mode = true;
    auto l = mcts_search(s.problem(), cfg, s.backends());
    CHECK(l.answer == std::optional<std::string>("1"));
  }

  TEST_CASE("greedy decoding") {
    Synth s(chain(5));
    SearchConfig cfg;
    cfg.method = Method::Greedy;
    auto r = greedy_decode(s.problem(), cfg, s.backends());
    CHECK(r.answer == std::optional<std::string>("7"));
    CHECK(r.trace.nodes.size() == 6);
    CHECK(r.tokens == 25);
    cfg.max_depth = 2;
    auto cut = greedy_decode(s.problem(), cfg, s.backends());
    CHECK(cut.outcome == "budget_exhausted");
    CHECK_FALSE(cut.answer.has_value());
  }

  TEST_CASE("answer aggregation") {
    auto sol = [](std::optional<std::string> a, double score) {
      return Solution{state_of({"x"}), score, std::move(a)};
    };
    std::vector<Solution> xs{sol("7", 0.4), sol("7", 0.4), sol("5", 0.7), sol(std::nullopt, 1.0)};
    CHECK(aggregate_answers(xs, AnswerAggregation::Majority) == "7");
    CHECK(aggregate_answers(xs, AnswerAggregation::BestOfN) == "5");
    CHECK(aggregate_answers(xs, AnswerAggregation::Weighted) == "7");
    std::vector<Solution> tie{sol("3", 0.5), sol("4", 0.5)};
    CHECK(aggregate_answers(tie, AnswerAggregation::Majority) == "3");
    CHECK(aggregate_answers(tie, AnswerAggregation::BestOfN) == "3");
    std::vector<Solution> none{sol(std::nullopt, 0.2)};
    CHECK_THROWS_AS(aggregate_answers(none, AnswerAggregation::Majority), Error);
  }

  TEST_CASE("every method is deterministic and its meter matches the trace") {
    Synth s(small_fanout(), SyntheticVerifierMode::Noisy, 0.1);
    for (auto m : {Method::Bfs, Method::Beam, Method::Tree, Method::Mcts, Method::Greedy, Method::SelfConsistency,
                   Method::BestOfN, Method::WeightedVote}) {
      for (bool merge : {false, true}) {
        SearchConfig cfg;
        cfg.method = m;
        cfg.merging = merge;
        cfg.seed = 5;
        for (std::size_t i = 0; i < 3; ++i) {
          auto a = run_search(s.problem(i), cfg, s.backends());
          auto b = run_search(s.problem(i), cfg, s.backends());
          CHECK(a.trace.dump() == b.trace.dump());
          CHECK(a.trace.resum_tokens() == a.tokens);
          CHECK(a.trace.result.tokens == a.tokens);
          auto back = SearchTrace::parse(a.trace.dump());
          CHECK(back.dump() == a.trace.dump());
        }
      }
    }
  }

  TEST_CASE("different seeds explore differently") {
    Synth s(small_fanout(), SyntheticVerifierMode::Noisy, 0.1);
    SearchConfig a;
    SearchConfig b;
    b.seed = 1;
    CHECK(bfs_search(s.problem(), a, s.backends()).trace.dump() !=
          bfs_search(s.problem(), b, s.backends()).trace.dump());
  }

  TEST_CASE("bfs is invariant under monotone verifier transforms") {
    Synth s(small_fanout(), SyntheticVerifierMode::Noisy, 0.1);
    auto f = [](double x) { return 0.1 + 0.8 * x * x * x; };
    MappedVerifier<decltype(f)> mapped(s.verifier, f);
    for (std::size_t i = 0; i < 6; ++i) {
      SearchConfig cfg;
      cfg.merging = i % 2 == 0;
      auto a = bfs_search(s.problem(i), cfg, s.backends());
      auto b = bfs_search(s.problem(i), cfg, {s.policy, mapped, &s.embedder});
      CHECK(a.answer == b.answer);
      CHECK(a.tokens == b.tokens);
      REQUIRE(a.trace.selections.size() == b.trace.selections.size());
      for (std::size_t k = 0; k < a.trace.selections.size(); ++k) {
        CHECK(a.trace.selections[k].hyper_id == b.trace.selections[k].hyper_id);
        CHECK(a.trace.selections[k].children == b.trace.selections[k].children);
      }
    }
  }

  TEST_CASE("an ensemble of identical verifiers reproduces the single verifier") {
    auto spec = small_fanout();
    Synth s(spec, SyntheticVerifierMode::Noisy, 0.1);
    auto member = std::make_shared<SyntheticVerifier>(spec, SyntheticVerifierMode::Noisy, 0.1, 3);
    EnsembleVerifier ens({member, member, member, member});
    SearchConfig cfg;
    cfg.merging = true;
    for (std::size_t i = 0; i < 3; ++i) {
      auto a = bfs_search(s.problem(i), cfg, s.backends());
      auto b = bfs_search(s.problem(i), cfg, {s.policy, ens, &s.embedder});
      CHECK(a.trace.dump() == b.trace.dump());
    }
  }

  TEST_CASE("expansion cap yields budget_exhausted") {
    Synth s(chain(8));
    SearchConfig cfg;
    cfg.max_total_expansions = 3;
    auto r = bfs_search(s.problem(), cfg, s.backends());
    CHECK(r.outcome == "budget_exhausted");
    CHECK(r.expansions == 3);
    CHECK_FALSE(r.answer.has_value());
    cfg.max_total_expansions = 50;
    cfg.expansion_size = 1;
    cfg.max_depth = 4;
    auto d = bfs_search(s.problem(), cfg, s.backends());
    CHECK(d.outcome == "no_terminal");
  }

  TEST_CASE("config json round trip and validation") {
    SearchConfig cfg;
    cfg.method = Method::Mcts;
    cfg.merging = true;
    cfg.cluster.distance_threshold = 0.3;
    cfg.seed = 42;
    auto back = SearchConfig::from_json(cfg.to_json());
    CHECK(back.to_json().dump() == cfg.to_json().dump());
    CHECK(config_hash(cfg.to_json()) == config_hash(back.to_json()));
    SearchConfig bad;
    bad.expansion_size = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    CHECK_THROWS_AS(SearchConfig::from_json({{"nonsense", 1}}), Error);
    Synth s(chain(2));
    SearchConfig merge;
    merge.merging = true;
    CHECK_THROWS_AS(bfs_search(s.problem(), merge, {s.policy, s.verifier, nullptr}), Error);
  }
}
