// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 on any
// failure. Runs from the project root (data/ is read relative to it).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "arbor/clustering.hpp"
#include "arbor/harness.hpp"
#include "arbor/search.hpp"
#include "arbor/simpairs.hpp"
#include "arbor/spec_families.hpp"
#include "arbor/valuation.hpp"
#include "reference.hpp"

using namespace arbor;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::shared_ptr<const SyntheticTaskSpec> load_spec(const std::string& name) {
  return std::make_shared<const SyntheticTaskSpec>(SyntheticTaskSpec::load("data/synthetic/" + name + ".json"));
}

TrajectoryRecord record_of(const std::vector<double>& v, const std::vector<double>& g) {
  TrajectoryRecord r;
  for (std::size_t i = 0; i < g.size(); ++i) {
    r.states.emplace_back("p", "q");
    r.values.emplace_back(v[i]);
  }
  r.returns = g;
  return r;
}

Verdict lambda_exactness() {
  const auto t0 = Clock::now();
  RngStream rng(1, 1);
  double worst = 0.0;
  bool boundaries = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t T = 1 + rng.below(10);
    std::vector<double> v(T), g(T);
    for (std::size_t j = 0; j < T; ++j) {
      v[j] = rng.uniform();
      g[j] = rng.uniform();
    }
    const double lambda = rng.uniform();
    const auto rec = record_of(v, g);
    for (std::size_t i = 0; i < T; ++i) {
      const double got = lambda_return(rec, i, lambda);
      worst = std::max(worst, std::abs(got - static_cast<double>(reference::lambda_return(v, g, i, lambda))));
      boundaries &= lambda_return(rec, i, 1.0) == g[i];
    }
    boundaries &= lambda_return(rec, T - 1, lambda) == g[T - 1];
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && boundaries && secs < 1.0,
          "max |err| " + fmt("%.3g", worst) + ", boundaries " + (boundaries ? "exact" : "NOT exact") + ", " +
              fmt("%.3f s", secs)};
}

Verdict lambda_convexity() {
  RngStream rng(2, 2);
  double worst_sum = 0.0;
  std::size_t outside = 0, instances = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t T = 1 + rng.below(10);
    std::vector<double> v(T), g(T);
    for (std::size_t j = 0; j < T; ++j) {
      v[j] = rng.uniform();
      g[j] = rng.uniform();
    }
    const double lambda = rng.uniform();
    const auto rec = record_of(v, g);
    const auto ones = record_of(std::vector<double>(T, 1.0), std::vector<double>(T, 1.0));
    for (std::size_t i = 0; i < T; ++i) {
      ++instances;
      // with every input at 1 the output is the weight sum
      worst_sum = std::max(worst_sum, std::abs(lambda_return(ones, i, lambda) - 1.0));
      double lo = g[i], hi = g[i];
      for (std::size_t j = i + 1; j < T; ++j) {
        lo = std::min(lo, v[j]);
        hi = std::max(hi, v[j]);
      }
      const double x = lambda_return(rec, i, lambda);
      if (x < lo || x > hi) ++outside;
    }
  }
  return {worst_sum <= 1e-12 && outside == 0,
          "max |sum-1| " + fmt("%.3g", worst_sum) + ", outside range " + std::to_string(outside) + "/" +
              std::to_string(instances)};
}

std::vector<std::vector<double>> random_points(RngStream& rng, std::size_t n, std::size_t dim) {
  std::vector<std::vector<double>> out(n, std::vector<double>(dim));
  for (auto& p : out)
    for (auto& x : p) x = rng.normal();
  return out;
}

bool refines(const ClusterPartition& fine, const ClusterPartition& coarse) {
  for (const auto& c : fine.clusters)
    for (auto m : c)
      if (coarse.labels[m] != coarse.labels[c.front()]) return false;
  return true;
}

Verdict clustering_equivalence() {
  const auto t0 = Clock::now();
  RngStream rng(3, 3);
  int mismatches = 0, nonmonotone = 0, checks = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    const auto pts = random_points(rng, n, 2 + rng.below(6));
    const double d1 = 0.05 + 0.9 * rng.uniform();
    const double d2 = d1 + 0.5 * rng.uniform();
    for (auto l : {Linkage::Average, Linkage::Complete, Linkage::Single}) {
      ++checks;
      const auto a = agglomerative_cluster(pts, {d1, l});
      if (!(a == reference::agglomerative(pts, d1, l))) ++mismatches;
      const auto b = agglomerative_cluster(pts, {d2, l});
      if (!(b == reference::agglomerative(pts, d2, l))) ++mismatches;
      if (b.cluster_count() > a.cluster_count() || !refines(a, b)) ++nonmonotone;
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && nonmonotone == 0 && secs < 5.0,
          std::to_string(mismatches) + " mismatches, " + std::to_string(nonmonotone) + " monotonicity violations in " +
              std::to_string(checks) + " set/linkage cases, " + fmt("%.2f s", secs)};
}

Verdict merging_conservation() {
  auto spec = load_spec("alias_fanout");
  SyntheticPolicy policy(spec);
  SyntheticVerifier verifier(spec, SyntheticVerifierMode::Noisy, 0.1, 0);
  ExactAliasEmbedder embedder(spec);
  const auto problems = spec->dataset();
  std::size_t runs = 0, children = 0, dropped = 0, duplicated = 0;
  for (std::uint64_t seed = 0; runs < 200; ++seed) {
    for (const auto& p : problems) {
      if (runs == 200) break;
      SearchConfig cfg;
      cfg.merging = true;
      cfg.seed = seed;
      auto r = bfs_search(p, cfg, {policy, verifier, &embedder});
      ++runs;
      for (const auto& sel : r.trace.selections) {
        if (sel.action != "expand") continue;
        std::map<NodeId, int> seen;
        for (auto h : sel.new_hyper_nodes)
          for (auto id : r.trace.hyper_nodes.at(static_cast<std::size_t>(h)).constituents) ++seen[id];
        for (auto id : sel.children) {
          ++children;
          const int k = seen.count(id) ? seen[id] : 0;
          if (k == 0) ++dropped;
          if (k > 1) ++duplicated;
        }
        std::size_t grouped = 0;
        for (const auto& [id, k] : seen) grouped += static_cast<std::size_t>(k);
        if (grouped != sel.children.size()) ++duplicated;
      }
    }
  }
  return {dropped == 0 && duplicated == 0,
          std::to_string(runs) + " runs, " + std::to_string(children) + " children, " + std::to_string(dropped) +
              " dropped, " + std::to_string(duplicated) + " duplicated"};
}

Verdict over_exploration() {
  const auto t0 = Clock::now();
  auto spec = load_spec("alias_fanout");
  SyntheticPolicy policy(spec);
  SyntheticVerifier verifier(spec, SyntheticVerifierMode::Noisy, 0.1, 0);
  ExactAliasEmbedder embedder(spec);
  const auto problems = spec->dataset();
  std::int64_t tok_plain = 0, tok_merged = 0;
  int right_plain = 0, right_merged = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (const auto& p : problems) {
      SearchConfig cfg;
      cfg.seed = seed;
      auto a = bfs_search(p, cfg, {policy, verifier, &embedder});
      cfg.merging = true;
      auto b = bfs_search(p, cfg, {policy, verifier, &embedder});
      tok_plain += a.tokens;
      tok_merged += b.tokens;
      right_plain += a.answer && answers_match(*a.answer, *p.reference_answer);
      right_merged += b.answer && answers_match(*b.answer, *p.reference_answer);
      ++total;
    }
  }
  const double saving = 1.0 - static_cast<double>(tok_merged) / static_cast<double>(tok_plain);
  const double acc_a = static_cast<double>(right_plain) / total;
  const double acc_b = static_cast<double>(right_merged) / total;
  const double secs = seconds_since(t0);
  return {saving >= 0.30 && std::abs(acc_b - acc_a) <= 0.02 && secs < 60.0,
          "token saving " + fmt("%.1f%%", 100 * saving) + ", accuracy " + fmt("%.3f", acc_a) + " -> " +
              fmt("%.3f", acc_b) + " over " + std::to_string(total) + " paired runs, " + fmt("%.1f s", secs)};
}

double sample_variance(const std::vector<double>& xs) {
  const double s = sample_std(xs);
  return s * s;
}

Verdict variance_reduction() {
  auto spec = load_spec("noisy_ladder");
  SyntheticPolicy policy(spec);
  bool ok = true;
  std::size_t steps = 0;
  double worst_ratio = 0.0;
  for (const auto& problem : spec->dataset()) {
    // One fixed trajectory per problem: the most likely path to the answer.
    RngStream path_rng(0, 0);
    TokenMeter meter;
    const auto root = spec->root_state(problem.id);
    auto traj = rollout(policy, root, {0.0, 1.0}, path_rng, 12, kDefaultAnswerMarker, meter);
    std::vector<ReasoningState> states{root};
    for (const auto& s : traj.appended) states.push_back(states.back().extend(s, kDefaultAnswerMarker));
    const std::size_t T = states.size();
    ok &= T >= 3;

    std::vector<std::vector<double>> mc(T), td(T);
    ReturnEstimation est;
    for (std::uint64_t r = 0; r < 100; ++r) {
      RngStream rng(r, 77);
      SyntheticVerifier verifier(spec, SyntheticVerifierMode::Noisy, 0.1, r);
      TrajectoryRecord rec;
      rec.states = states;
      rec.returns = estimate_returns(policy, states, *problem.reference_answer, est, rng, meter);
      for (const auto& s : states) rec.values.push_back(score_state(verifier, s));
      rec.rollout_count = est.rollouts;
      std::vector<TrajectoryRecord> one{rec};
      const auto a = export_value_labels(one, LabelMethod::Mc, 0.8);
      const auto b = export_value_labels(one, LabelMethod::TdLambda, 0.8);
      for (std::size_t i = 0; i < T; ++i) {
        mc[i].push_back(a[i].target);
        td[i].push_back(b[i].target);
      }
    }
    for (std::size_t i = 0; i + 1 < T; ++i) {
      const double vm = sample_variance(mc[i]);
      const double vt = sample_variance(td[i]);
      ok &= vt < vm;
      worst_ratio = std::max(worst_ratio, vm > 0 ? vt / vm : INFINITY);
      ++steps;
    }
  }
  return {ok, std::to_string(steps) + " non-final steps over " + std::to_string(spec->dataset().size()) +
                  " ladder problems, worst Var(TD)/Var(MC) " + fmt("%.3f", worst_ratio)};
}

Verdict ensemble_variance() {
  auto spec = std::make_shared<const SyntheticTaskSpec>(SyntheticTaskSpec::from_json(
      {{"name", "coin"},
       {"problems",
        nlohmann::json::array({{{"id", "coin"},
                                {"question", "Flip?"},
                                {"answer", "1"},
                                {"root", "s0"},
                                {"states",
                                 {{"s0",
                                   {{{"template", "r"}, {"prob", 0.5}, {"aliases", {"The answer is 1."}}, {"answer", "1"}},
                                    {{"template", "w"},
                                     {"prob", 0.5},
                                     {"aliases", {"The answer is 2."}},
                                     {"answer", "2"}}}}}}}})}}));
  const auto state = spec->root_state("coin");
  const double sigma = 0.1;
  bool ok = true;
  std::string detail;
  for (int k : {2, 4}) {
    std::vector<double> scores;
    for (int t = 0; t < 1000; ++t) {
      std::vector<std::shared_ptr<Verifier>> members;
      for (int m = 0; m < k; ++m) {
        members.push_back(std::make_shared<SyntheticVerifier>(spec, SyntheticVerifierMode::Noisy, sigma,
                                                              static_cast<std::uint64_t>(t * k + m), false));
      }
      EnsembleVerifier ens(members);
      scores.push_back(ens.score(state));
    }
    const double s = sample_std(scores);
    const double target = sigma / std::sqrt(static_cast<double>(k));
    const double rel = std::abs(s - target) / target;
    ok &= rel <= 0.20;
    detail += (detail.empty() ? "" : "; ") + std::string("k=") + std::to_string(k) + " std " + fmt("%.4f", s) +
              " vs " + fmt("%.4f", target);
  }
  return {ok, detail};
}

Verdict similarity_trend() {
  auto spec = load_spec("alias_fanout");
  SyntheticPolicy policy(spec);
  ExactAliasEmbedder embedder(spec);
  const auto problems = spec->dataset();
  const std::vector<int> sizes{2, 3, 5, 10};
  const auto curve = similarity_degree_curve(problems, policy, embedder, {}, sizes, 1000, 8);
  bool ok = true;
  std::string detail;
  double prev = 0.0;
  for (int n : sizes) {
    const double v = curve.at(n);
    ok &= v >= prev;
    prev = v;
    detail += (detail.empty() ? "" : ", ") + std::string("N=") + std::to_string(n) + " " + fmt("%.3f", v);
  }
  return {ok, detail};
}

Verdict determinism() {
  auto spec = load_spec("alias_fanout");
  SyntheticPolicy policy(spec);
  SyntheticVerifier verifier(spec, SyntheticVerifierMode::Noisy, 0.1, 0);
  ExactAliasEmbedder embedder(spec);
  const auto problems = spec->dataset();
  int runs = 0, differing = 0, meter_mismatch = 0;
  for (auto m : {Method::Bfs, Method::Beam, Method::Tree, Method::Mcts}) {
    for (bool merge : {false, true}) {
      for (std::size_t i = 0; i < 10; ++i) {
        SearchConfig cfg;
        cfg.method = m;
        cfg.merging = merge;
        cfg.seed = 11;
        auto a = run_search(problems[i], cfg, {policy, verifier, &embedder});
        auto b = run_search(problems[i], cfg, {policy, verifier, &embedder});
        ++runs;
        if (a.trace.dump() != b.trace.dump()) ++differing;
        if (a.tokens != a.trace.resum_tokens() || b.tokens != b.trace.resum_tokens()) ++meter_mismatch;
      }
    }
  }
  return {differing == 0 && meter_mismatch == 0,
          std::to_string(runs) + " run pairs over bfs/beam/tree/mcts, " + std::to_string(differing) +
              " differing traces, " + std::to_string(meter_mismatch) + " meter mismatches"};
}

Verdict budget_law() {
  bool ok = tree_search_budget(0.95, 0.95, 10) == 1 && tree_search_budget(0.5, 0.95, 10) == 5;
  int prev = 10;
  for (int k = 0; k <= 10000; ++k) {
    const int b = tree_search_budget(k / 10000.0, 0.95, 10);
    ok &= b >= 1 && b <= 10 && b <= prev;
    prev = b;
  }
  return {ok, "b(0.95)=" + std::to_string(tree_search_budget(0.95, 0.95, 10)) +
                  ", b(0.5)=" + std::to_string(tree_search_budget(0.5, 0.95, 10)) + ", range/monotone over 10001 values"};
}

Verdict analytic_ops() {
  int bad = 0, cases = 0;
  auto near = [&](double got, double want) {
    ++cases;
    if (!(std::abs(got - want) <= 1e-9)) ++bad;
  };
  near(bce_objective(0.9, 1), 0.10536051565782628);
  near(bce_objective(0.5, 0), 0.69314718055994531);
  near(bce_objective(0.2, 0), 0.22314355131420976);
  near(bce_objective(0.75, 1), 0.28768207245178090);
  near(edit_distance_similarity("abc", "abd"), 2.0 / 3.0);
  near(edit_distance_similarity("kitten", "sitting"), 4.0 / 7.0);
  near(edit_distance_similarity("flaw", "lawn"), 0.5);
  near(edit_distance_similarity("same", "same"), 1.0);
  near(pearson_correlation(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}), 0.5);
  near(pearson_correlation(std::vector<double>{1, 2, 3, 4}, std::vector<double>{2, 4, 6, 8}), 1.0);
  near(pearson_correlation(std::vector<double>{1, 2, 3, 4}, std::vector<double>{4, 3, 2, 1}), -1.0);
  near(pearson_correlation(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}), 0.8);
  const std::vector<BrierSample> s{{1, 1.0, 1}, {2, 0.7, 1}, {3, 0.5, 0}, {3, 0.5, 1}, {4, 0.9, 0}, {4, 0.1, 0}};
  const auto b = brier_by_step(s);
  near(b.at(1), 0.0);
  near(b.at(2), 0.09);
  near(b.at(3), 0.25);
  near(b.at(4), 0.41);
  return {bad == 0, std::to_string(cases - bad) + "/" + std::to_string(cases) + " closed-form cases within 1e-9"};
}

Verdict baselines() {
  auto spec = load_spec("stochastic");
  SyntheticPolicy policy(spec);
  SyntheticVerifier oracle(spec, SyntheticVerifierMode::Oracle);
  const auto problems = spec->dataset();
  std::map<Method, int> right;
  int total = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (const auto& p : problems) {
      ++total;
      for (auto m : {Method::Greedy, Method::SelfConsistency, Method::BestOfN}) {
        SearchConfig cfg;
        cfg.method = m;
        cfg.seed = seed;
        cfg.num_samples = 10;
        auto r = run_search(p, cfg, {policy, oracle, nullptr});
        right[m] += r.answer && answers_match(*r.answer, *p.reference_answer);
      }
    }
  }
  const double g = static_cast<double>(right[Method::Greedy]) / total;
  const double sc = static_cast<double>(right[Method::SelfConsistency]) / total;
  const double bon = static_cast<double>(right[Method::BestOfN]) / total;
  return {g <= sc && sc <= bon,
          "greedy " + fmt("%.4f", g) + " <= self-consistency " + fmt("%.4f", sc) + " <= best-of-N " + fmt("%.4f", bon) +
              " over " + std::to_string(total) + " problem-seeds"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"lambda-return exactness", lambda_exactness},
      {"lambda-return convexity", lambda_convexity},
      {"clustering reference equivalence", clustering_equivalence},
      {"merging conservation", merging_conservation},
      {"over-exploration token saving", over_exploration},
      {"TD(lambda) variance reduction", variance_reduction},
      {"ensemble variance", ensemble_variance},
      {"similarity-degree trend", similarity_trend},
      {"search determinism and trace integrity", determinism},
      {"tree-search budget law", budget_law},
      {"analytic operations", analytic_ops},
      {"baseline accuracy ordering", baselines},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("%s criterion %zu: %s (%s)\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
