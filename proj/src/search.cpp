#include "arbor/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

#include "arbor/kernels.hpp"

namespace arbor {

int tree_search_budget(double value, double expected_accuracy, int max_budget) {
  if (max_budget < 1) throw Error(ErrorKind::InvalidArgument, "max budget must be >= 1");
  if (!(expected_accuracy > 0.0 && expected_accuracy < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "expected accuracy must lie in (0,1)");
  }
  if (value >= 1.0 - 1e-6) return 1;
  if (value <= 1e-6) return max_budget;
  const double ratio = std::log(1.0 - expected_accuracy) / std::log(1.0 - value);
  // Absorb last-ulp noise so exact integer ratios do not round up.
  const double needed = std::ceil(ratio - 1e-9);
  return static_cast<int>(std::clamp(needed, 1.0, static_cast<double>(max_budget)));
}

namespace {

constexpr std::int64_t kNoHyper = -1;

// Tree of nodes plus the hyper-nodes that group each expansion batch. Shared by
// every algorithm; owns the token meter, the random stream and the trace.
class SearchTree {
 public:
  SearchTree(const Problem& problem, const SearchConfig& config, SearchBackends backends)
      : problem_(problem),
        config_(config),
        backends_(backends),
        rng_(config.seed, fnv1a64(problem.id)),
        params_{config.temperature, config.top_p} {
    config_.validate();
    if (config_.merging && backends_.embedder == nullptr) {
      throw Error(ErrorKind::InvalidArgument, "merging requires an embedder");
    }
    trace_.problem_id = problem.id;
    trace_.method = std::string(to_string(config.method));
    trace_.seed = config.seed;
    trace_.config = config.to_json();

    Node root{0, kRootParent, ReasoningState(problem.id, problem.question), 0.0, NodeStatus::Unexplored};
    root.score = score_state(backends_.verifier, root.state);
    nodes_.push_back(std::move(root));
    hypers_.emplace_back(0, std::vector<NodeId>{0}, std::vector<double>{nodes_[0].score}, config_.aggregation);
    hyper_batch_.push_back(0);
    absorbed_into_.push_back(std::nullopt);
    node_hyper_[0] = 0;
  }

  const SearchConfig& config() const { return config_; }
  const Problem& problem() const { return problem_; }
  SearchBackends backends() const { return backends_; }
  RngStream& rng() { return rng_; }
  TokenMeter& meter() { return meter_; }
  SearchTrace& trace() { return trace_; }
  const SamplingParams& params() const { return params_; }

  const Node& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  HyperNode& hyper(std::int64_t id) { return hypers_.at(static_cast<std::size_t>(id)); }
  const HyperNode& hyper(std::int64_t id) const { return hypers_.at(static_cast<std::size_t>(id)); }
  std::int64_t hyper_of(NodeId id) const { return node_hyper_.at(id); }
  std::optional<std::int64_t> absorbed_into(std::int64_t hyper_id) const {
    return absorbed_into_.at(static_cast<std::size_t>(hyper_id));
  }
  std::int64_t expansions() const { return expansions_; }
  NodeId node_count() const { return static_cast<NodeId>(nodes_.size()); }

  bool is_terminal(std::int64_t hyper_id) const { return node(hyper(hyper_id).top()).state.terminal(); }

  NodeId min_node(std::int64_t hyper_id) const {
    const auto& c = hyper(hyper_id).constituents();
    return *std::min_element(c.begin(), c.end());
  }

  // Orders by aggregate score descending, then by lowest constituent node id.
  bool ranks_before(std::int64_t a, std::int64_t b) const {
    const double sa = hyper(a).aggregate_score();
    const double sb = hyper(b).aggregate_score();
    if (sa != sb) return sa > sb;
    return min_node(a) < min_node(b);
  }

  bool can_expand(NodeId id) const {
    const auto& n = node(id);
    return !n.state.terminal() && n.state.depth() < static_cast<std::size_t>(config_.max_depth);
  }

  bool can_expand_hyper(std::int64_t hyper_id) const {
    const auto& c = hyper(hyper_id).constituents();
    return std::any_of(c.begin(), c.end(), [&](NodeId id) { return can_expand(id); });
  }

  struct Expansion {
    std::vector<NodeId> expanded_from;
    std::vector<NodeId> children;
    std::vector<std::int64_t> hypers;
  };

  // Generates `budget` children round-robin over the hyper-node's expandable
  // constituents, scores them, and groups the batch into new hyper-nodes.
  Expansion expand(std::int64_t hyper_id, int budget) {
    Expansion out;
    if (!can_expand_hyper(hyper_id)) return out;
    auto& h = hyper(hyper_id);
    std::vector<std::pair<NodeId, int>> plan;
    for (int k = 0; k < budget;) {
      const NodeId id = h.next_constituent();
      if (!can_expand(id)) continue;
      auto it = std::find_if(plan.begin(), plan.end(), [&](const auto& p) { return p.first == id; });
      if (it == plan.end()) {
        plan.emplace_back(id, 1);
      } else {
        ++it->second;
      }
      ++k;
    }
    ++expansions_;
    const std::int64_t batch = expansions_;

    std::vector<Node> batch_nodes;
    for (const auto& [parent_id, count] : plan) {
      out.expanded_from.push_back(parent_id);
      const ReasoningState parent_state = node(parent_id).state;
      auto steps = generate_steps(backends_.policy, parent_state, count, params_, rng_, meter_);
      for (auto& step : steps) {
        Node child;
        child.id = static_cast<NodeId>(nodes_.size());
        child.parent = parent_id;
        child.state = parent_state.extend(std::move(step), config_.marker);
        child.score = score_state(backends_.verifier, child.state);
        child.status = child.state.terminal() ? NodeStatus::Terminal : NodeStatus::Unexplored;
        out.children.push_back(child.id);
        batch_nodes.push_back(child);
        nodes_.push_back(std::move(child));
      }
      nodes_[static_cast<std::size_t>(parent_id)].status = NodeStatus::Expanded;
    }

    const auto first_id = static_cast<std::int64_t>(hypers_.size());
    std::vector<HyperNode> grouped;
    if (config_.merging) {
      std::vector<std::vector<double>> embeddings;
      for (const auto& n : batch_nodes) embeddings.push_back(embedding_of(n));
      grouped = merge_states(batch_nodes, embeddings, config_.cluster, config_.aggregation, first_id);
    } else {
      grouped = singleton_hyper_nodes(batch_nodes, config_.aggregation, first_id);
    }
    for (auto& g : grouped) {
      out.hypers.push_back(g.hyper_id());
      for (auto id : g.constituents()) node_hyper_[id] = g.hyper_id();
      hypers_.push_back(std::move(g));
      hyper_batch_.push_back(batch);
      absorbed_into_.push_back(std::nullopt);
    }
    return out;
  }

  // Frontier-wide merging: folds each new hyper-node into an unexplored
  // frontier entry of the same depth when their linkage distance is below the
  // threshold. Returns the frontier after replacement.
  std::vector<std::int64_t> merge_into_frontier(std::vector<std::int64_t> frontier,
                                                const std::vector<std::int64_t>& fresh) {
    for (auto h : fresh) {
      const std::size_t depth = node(hyper(h).top()).state.depth();
      std::int64_t best = kNoHyper;
      double best_d = std::numeric_limits<double>::infinity();
      for (auto e : frontier) {
        if (e == h || std::find(fresh.begin(), fresh.end(), e) != fresh.end()) continue;
        if (node(hyper(e).top()).state.depth() != depth) continue;
        const double d = linkage_distance(e, h);
        if (d < best_d || (d == best_d && best != kNoHyper && min_node(e) < min_node(best))) {
          best_d = d;
          best = e;
        }
      }
      if (best == kNoHyper || !(best_d < config_.cluster.distance_threshold)) continue;
      std::vector<NodeId> ids = hyper(best).constituents();
      std::vector<double> scores = hyper(best).constituent_scores();
      for (std::size_t k = 0; k < hyper(h).constituents().size(); ++k) {
        ids.push_back(hyper(h).constituents()[k]);
        scores.push_back(hyper(h).constituent_scores()[k]);
      }
      const auto merged_id = static_cast<std::int64_t>(hypers_.size());
      hypers_.emplace_back(merged_id, std::move(ids), std::move(scores), config_.aggregation);
      hyper_batch_.push_back(hyper_batch_[static_cast<std::size_t>(h)]);
      absorbed_into_.push_back(std::nullopt);
      absorbed_into_[static_cast<std::size_t>(best)] = merged_id;
      absorbed_into_[static_cast<std::size_t>(h)] = merged_id;
      for (auto id : hyper(merged_id).constituents()) node_hyper_[id] = merged_id;
      std::replace(frontier.begin(), frontier.end(), best, merged_id);
      frontier.erase(std::remove(frontier.begin(), frontier.end(), h), frontier.end());
    }
    return frontier;
  }

  void log(TraceSelection s) { trace_.selections.push_back(std::move(s)); }

  void log_expansion(std::int64_t iteration, std::int64_t hyper_id, int budget, const Expansion& e) {
    TraceSelection s;
    s.iteration = iteration;
    s.hyper_id = hyper_id;
    s.action = "expand";
    s.budget = budget;
    s.expanded_from = e.expanded_from;
    s.children = e.children;
    s.new_hyper_nodes = e.hypers;
    log(std::move(s));
  }

  void add_rollout(TraceRollout r) { trace_.rollouts.push_back(std::move(r)); }

  std::vector<TerminalCandidate> terminals() const {
    std::vector<TerminalCandidate> out;
    for (const auto& n : nodes_) {
      if (n.state.terminal()) out.push_back({n.state, n.score, extract_answer(n.state, config_.marker)});
    }
    return out;
  }

  // Best-scored terminal node, else best-scored unexpanded leaf, else root.
  NodeId fallback_choice() const {
    auto pick = [&](auto pred) -> std::optional<NodeId> {
      std::optional<NodeId> best;
      for (const auto& n : nodes_) {
        if (!pred(n)) continue;
        if (!best || n.score > node(*best).score) best = n.id;
      }
      return best;
    };
    if (auto t = pick([](const Node& n) { return n.state.terminal(); })) return *t;
    if (auto l = pick([](const Node& n) { return n.status == NodeStatus::Unexplored && n.id != 0; })) return *l;
    return 0;
  }

  SearchResult finish(std::optional<NodeId> chosen, std::string outcome) {
    SearchResult r;
    r.outcome = std::move(outcome);
    r.complete = r.outcome == "complete";
    if (chosen) {
      const auto& n = node(*chosen);
      r.chosen = n.state;
      if (n.state.terminal()) r.answer = extract_answer(n.state, config_.marker);
    }
    r.terminals = terminals();
    r.tokens = meter_.generated_tokens();
    r.expansions = expansions_;
    write_trace(chosen, std::nullopt, r);
    r.trace = trace_;
    return r;
  }

  void write_trace(std::optional<NodeId> chosen, std::optional<std::int64_t> chosen_rollout, const SearchResult& r) {
    trace_.nodes.clear();
    for (const auto& n : nodes_) {
      TraceNode tn;
      tn.id = n.id;
      tn.parent = n.parent;
      tn.depth = n.state.depth();
      if (!n.state.empty()) {
        tn.step = n.state.last_step().text;
        tn.tokens = n.state.last_step().token_count;
        tn.logprob = n.state.last_step().logprob;
      }
      tn.score = n.score;
      tn.status = n.status;
      if (n.state.terminal()) tn.answer = extract_answer(n.state, config_.marker);
      trace_.nodes.push_back(std::move(tn));
    }
    trace_.hyper_nodes.clear();
    for (std::size_t k = 0; k < hypers_.size(); ++k) {
      const auto& h = hypers_[k];
      trace_.hyper_nodes.push_back({h.hyper_id(), hyper_batch_[k], h.constituents(), h.constituent_scores(),
                                    std::string(to_string(h.aggregation())), h.aggregate_score(),
                                    absorbed_into_[k]});
    }
    trace_.result.answer = r.answer;
    trace_.result.chosen_node = chosen;
    trace_.result.chosen_rollout = chosen_rollout;
    trace_.result.outcome = r.outcome;
    trace_.result.tokens = r.tokens;
    trace_.result.expansions = r.expansions;
    trace_.result.terminals.clear();
    for (const auto& n : nodes_) {
      if (n.state.terminal()) trace_.result.terminals.push_back({n.id, n.score, extract_answer(n.state, config_.marker)});
    }
  }

  // Node chain for greedy decoding: appends one child without hyper-node grouping.
  NodeId append_child(NodeId parent_id, Step step) {
    Node child;
    child.id = static_cast<NodeId>(nodes_.size());
    child.parent = parent_id;
    child.state = node(parent_id).state.extend(std::move(step), config_.marker);
    child.score = score_state(backends_.verifier, child.state);
    child.status = child.state.terminal() ? NodeStatus::Terminal : NodeStatus::Unexplored;
    nodes_[static_cast<std::size_t>(parent_id)].status = NodeStatus::Expanded;
    nodes_.push_back(child);
    return child.id;
  }

 private:
  const std::vector<double>& embedding_of(const Node& n) {
    auto it = embeddings_.find(n.id);
    if (it != embeddings_.end()) return it->second;
    const std::string text = config_.embed_text == EmbedText::NewestStep ? n.state.last_step().text : n.state.text();
    auto v = backends_.embedder->embed(text);
    return embeddings_.emplace(n.id, std::move(v)).first->second;
  }

  double linkage_distance(std::int64_t a, std::int64_t b) {
    std::vector<std::vector<double>> rows;
    const auto& ca = hyper(a).constituents();
    const auto& cb = hyper(b).constituents();
    for (auto id : ca) rows.push_back(embedding_of(node(id)));
    for (auto id : cb) rows.push_back(embedding_of(node(id)));
    const auto dist = kernels_distance(rows);
    const std::size_t n = rows.size();
    double acc = config_.cluster.linkage == Linkage::Single ? std::numeric_limits<double>::infinity() : 0.0;
    for (std::size_t i = 0; i < ca.size(); ++i) {
      for (std::size_t j = ca.size(); j < n; ++j) {
        const double d = dist[i * n + j];
        switch (config_.cluster.linkage) {
          case Linkage::Average: acc += d; break;
          case Linkage::Complete: acc = std::max(acc, d); break;
          case Linkage::Single: acc = std::min(acc, d); break;
        }
      }
    }
    if (config_.cluster.linkage == Linkage::Average) acc /= static_cast<double>(ca.size() * cb.size());
    return acc;
  }

  static std::vector<double> kernels_distance(const std::vector<std::vector<double>>& rows) {
    return kernels::cosine_distance_matrix(rows);
  }

  const Problem& problem_;
  SearchConfig config_;
  SearchBackends backends_;
  RngStream rng_;
  SamplingParams params_;
  TokenMeter meter_;
  SearchTrace trace_;
  std::vector<Node> nodes_;
  std::vector<HyperNode> hypers_;
  std::vector<std::int64_t> hyper_batch_;
  std::vector<std::optional<std::int64_t>> absorbed_into_;
  std::unordered_map<NodeId, std::int64_t> node_hyper_;
  std::unordered_map<NodeId, std::vector<double>> embeddings_;
  std::int64_t expansions_ = 0;
};

SearchResult best_first(const Problem& problem, const SearchConfig& config, SearchBackends backends,
                        bool dynamic_budget) {
  SearchTree tree(problem, config, backends);
  std::vector<std::int64_t> frontier{0};
  std::int64_t iteration = 0;
  for (;; ++iteration) {
    if (frontier.empty()) return tree.finish(tree.fallback_choice(), "no_terminal");
    auto best_it = std::min_element(frontier.begin(), frontier.end(),
                                    [&](auto a, auto b) { return tree.ranks_before(a, b); });
    const std::int64_t h = *best_it;
    if (tree.is_terminal(h)) {
      tree.log({iteration, h, "return", 0, {}, {}, {}});
      return tree.finish(tree.hyper(h).top(), "complete");
    }
    if (tree.expansions() >= config.max_total_expansions) {
      return tree.finish(tree.fallback_choice(), "budget_exhausted");
    }
    frontier.erase(best_it);
    if (!tree.can_expand_hyper(h)) {
      tree.log({iteration, h, "dead_end", 0, {}, {}, {}});
      continue;
    }
    const int budget = dynamic_budget ? tree_search_budget(tree.hyper(h).aggregate_score(),
                                                           config.expected_accuracy, config.expansion_size)
                                      : config.expansion_size;
    auto e = tree.expand(h, budget);
    tree.log_expansion(iteration, h, budget, e);
    frontier.insert(frontier.end(), e.hypers.begin(), e.hypers.end());
    if (config.frontier_merging) frontier = tree.merge_into_frontier(std::move(frontier), e.hypers);
  }
}

}  // namespace

SearchResult bfs_search(const Problem& problem, const SearchConfig& config, SearchBackends backends) {
  return best_first(problem, config, backends, false);
}

SearchResult tree_search(const Problem& problem, const SearchConfig& config, SearchBackends backends) {
  return best_first(problem, config, backends, true);
}

SearchResult beam_search(const Problem& problem, const SearchConfig& config, SearchBackends backends) {
  SearchTree tree(problem, config, backends);
  std::vector<std::int64_t> beam{0};
  std::vector<std::int64_t> finished;
  std::int64_t depth = 0;
  bool capped = false;
  while (!beam.empty() && depth < config.max_depth) {
    std::vector<std::int64_t> candidates;
    for (auto h : beam) {
      if (tree.expansions() >= config.max_total_expansions) {
        capped = true;
        break;
      }
      if (!tree.can_expand_hyper(h)) {
        tree.log({depth, h, "dead_end", 0, {}, {}, {}});
        continue;
      }
      auto e = tree.expand(h, config.expansion_size);
      tree.log_expansion(depth, h, config.expansion_size, e);
      for (auto c : e.hypers) (tree.is_terminal(c) ? finished : candidates).push_back(c);
    }
    if (capped) break;
    std::sort(candidates.begin(), candidates.end(), [&](auto a, auto b) { return tree.ranks_before(a, b); });
    if (candidates.size() > static_cast<std::size_t>(config.beam_size)) candidates.resize(config.beam_size);
    beam = std::move(candidates);
    ++depth;
  }
  if (finished.empty()) return tree.finish(tree.fallback_choice(), capped ? "budget_exhausted" : "no_terminal");
  const auto best = *std::min_element(finished.begin(), finished.end(),
                                      [&](auto a, auto b) { return tree.ranks_before(a, b); });
  tree.log({depth, best, "return", 0, {}, {}, {}});
  return tree.finish(tree.hyper(best).top(), capped ? "budget_exhausted" : "complete");
}

SearchResult mcts_search(const Problem& problem, const SearchConfig& config, SearchBackends backends) {
  SearchTree tree(problem, config, backends);
  struct Stats {
    std::int64_t visits = 0;
    double total = 0.0;
    bool expanded = false;
    std::vector<std::int64_t> children;
  };
  std::map<std::int64_t, Stats> stats;
  stats[0];
  const bool label_mode = config.mcts_label_mode && problem.reference_answer.has_value();

  auto terminal_value = [&](const ReasoningState& s, double verifier_score) {
    if (label_mode) return answers_match(extract_answer(s, config.marker), *problem.reference_answer) ? 1.0 : 0.0;
    return verifier_score;
  };

  for (std::int64_t it = 0; it < config.mcts_iterations; ++it) {
    std::vector<std::int64_t> path{0};
    std::int64_t cur = 0;
    while (stats[cur].expanded && !stats[cur].children.empty()) {
      const auto& st = stats[cur];
      std::int64_t pick = -1;
      double pick_score = -std::numeric_limits<double>::infinity();
      for (auto c : st.children) {  // children are in ascending min-node order
        const auto& cs = stats[c];
        if (cs.visits == 0) {
          pick = c;
          break;
        }
        const double mean = cs.total / static_cast<double>(cs.visits);
        const double ucb = mean + config.mcts_exploration *
                                      std::sqrt(std::log(static_cast<double>(st.visits)) / static_cast<double>(cs.visits));
        if (ucb > pick_score) {
          pick_score = ucb;
          pick = c;
        }
      }
      cur = pick;
      path.push_back(cur);
    }

    double value = 0.0;
    const NodeId leaf_node = tree.hyper(cur).top();
    const ReasoningState leaf_state = tree.node(leaf_node).state;
    if (leaf_state.terminal()) {
      value = terminal_value(leaf_state, tree.node(leaf_node).score);
      tree.log({it, cur, "terminal", 0, {}, {}, {}});
    } else {
      auto& st = stats[cur];
      if (!st.expanded && tree.can_expand_hyper(cur) && tree.expansions() < config.max_total_expansions) {
        const int budget = cur == 0 ? config.mcts_root_budget : config.mcts_child_budget;
        auto e = tree.expand(cur, budget);
        tree.log_expansion(it, cur, budget, e);
        st.expanded = true;
        st.children = e.hypers;
        for (auto c : e.hypers) stats[c];
      }
      const int remaining = config.max_depth - static_cast<int>(leaf_state.depth());
      if (remaining < 1) {
        value = tree.node(leaf_node).score;
      } else {
        double sum = 0.0;
        for (int k = 0; k < config.mcts_simulation_rollouts; ++k) {
          auto r = rollout(backends.policy, leaf_state, tree.params(), tree.rng(), remaining, config.marker,
                           tree.meter());
          TraceRollout tr;
          tr.from = leaf_node;
          tr.purpose = "simulation";
          for (const auto& s : r.appended) tr.steps.push_back({s.text, s.token_count});
          tr.terminal = r.state.terminal();
          if (tr.terminal) tr.answer = extract_answer(r.state, config.marker);
          tr.value = tr.terminal ? terminal_value(r.state, score_state(backends.verifier, r.state))
                                 : score_state(backends.verifier, r.state);
          sum += tr.value;
          tree.add_rollout(std::move(tr));
        }
        value = sum / static_cast<double>(config.mcts_simulation_rollouts);
      }
      tree.log({it, cur, "simulate", 0, {leaf_node}, {}, {}});
    }
    for (auto h : path) {
      stats[h].visits += 1;
      stats[h].total += value;
    }
  }

  for (const auto& [h, st] : stats) {
    tree.trace().mcts.push_back(
        {h, st.visits, st.total, st.visits > 0 ? st.total / static_cast<double>(st.visits) : 0.0});
  }

  // Terminal with the most visits, then the highest score, then the lowest id.
  std::optional<NodeId> best;
  std::int64_t best_visits = -1;
  for (NodeId id = 0; id < tree.node_count(); ++id) {
    const Node* n = &tree.node(id);
    if (!n->state.terminal()) continue;
    const auto& st = stats[tree.hyper_of(id)];
    if (!best || st.visits > best_visits || (st.visits == best_visits && n->score > tree.node(*best).score)) {
      best = id;
      best_visits = st.visits;
    }
  }
  if (!best) return tree.finish(tree.fallback_choice(), "no_terminal");
  return tree.finish(best, "complete");
}

SearchResult greedy_decode(const Problem& problem, const SearchConfig& config, SearchBackends backends) {
  SearchConfig greedy = config;
  greedy.method = Method::Greedy;
  greedy.merging = false;
  greedy.frontier_merging = false;
  SearchTree tree(problem, greedy, backends);
  const SamplingParams params{0.0, 1.0};
  NodeId cur = 0;
  for (int d = 0; d < greedy.max_depth; ++d) {
    auto steps = generate_steps(backends.policy, tree.node(cur).state, 1, params, tree.rng(), tree.meter());
    const NodeId child = tree.append_child(cur, std::move(steps.front()));
    tree.log({d, 0, "expand", 1, {cur}, {child}, {}});
    cur = child;
    if (tree.node(cur).state.terminal()) return tree.finish(cur, "complete");
  }
  return tree.finish(cur, "budget_exhausted");
}

std::vector<Solution> sample_solutions(const Problem& problem, int n, const SearchConfig& config,
                                       SearchBackends backends, bool score, RngStream& rng, TokenMeter& meter) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "sample_solutions needs n >= 1");
  const ReasoningState root(problem.id, problem.question);
  const SamplingParams params{config.temperature, config.top_p};
  std::vector<Solution> out;
  for (int k = 0; k < n; ++k) {
    auto r = rollout(backends.policy, root, params, rng, config.max_depth, config.marker, meter);
    Solution s{r.state, std::nullopt, std::nullopt};
    if (score) s.score = score_state(backends.verifier, r.state);
    if (r.state.terminal()) s.answer = extract_answer(r.state, config.marker);
    out.push_back(std::move(s));
  }
  return out;
}

std::string aggregate_answers(std::span<const Solution> solutions, AnswerAggregation mode) {
  struct Tally {
    std::size_t first_seen;
    int count = 0;
    double total = 0.0;
    double best = -std::numeric_limits<double>::infinity();
  };
  std::map<std::string, Tally> tally;
  for (std::size_t k = 0; k < solutions.size(); ++k) {
    const auto& s = solutions[k];
    if (!s.answer) continue;
    auto [it, fresh] = tally.try_emplace(*s.answer, Tally{k});
    const double score = s.score.value_or(0.0);
    it->second.count += 1;
    it->second.total += score;
    it->second.best = std::max(it->second.best, score);
  }
  if (tally.empty()) throw Error(ErrorKind::NoSolutions, "no solution reached an answer");
  const std::pair<const std::string, Tally>* win = nullptr;
  auto better = [&](const Tally& a, const Tally& b) {
    switch (mode) {
      case AnswerAggregation::Majority:
        if (a.count != b.count) return a.count > b.count;
        if (a.total != b.total) return a.total > b.total;
        break;
      case AnswerAggregation::BestOfN:
        if (a.best != b.best) return a.best > b.best;
        break;
      case AnswerAggregation::Weighted:
        if (a.total != b.total) return a.total > b.total;
        break;
    }
    return a.first_seen < b.first_seen;
  };
  for (const auto& entry : tally) {
    if (!win || better(entry.second, win->second)) win = &entry;
  }
  return win->first;
}

namespace {

SearchResult run_sampling(const Problem& problem, const SearchConfig& config, SearchBackends backends,
                          AnswerAggregation mode) {
  config.validate();
  RngStream rng(config.seed, fnv1a64(problem.id));
  TokenMeter meter;
  SearchResult r;
  r.trace.problem_id = problem.id;
  r.trace.method = std::string(to_string(config.method));
  r.trace.seed = config.seed;
  r.trace.config = config.to_json();

  const ReasoningState root(problem.id, problem.question);
  r.trace.nodes.push_back({0, kRootParent, 0, std::nullopt, 0, std::nullopt,
                           score_state(backends.verifier, root), NodeStatus::Expanded, std::nullopt});
  auto solutions = sample_solutions(problem, config.num_samples, config, backends, true, rng, meter);
  for (const auto& s : solutions) {
    TraceRollout tr;
    tr.from = 0;
    tr.purpose = "sample";
    for (const auto& step : s.state.steps()) tr.steps.push_back({step.text, step.token_count});
    tr.terminal = s.state.terminal();
    tr.answer = s.answer;
    tr.value = s.score.value_or(0.0);
    r.trace.rollouts.push_back(std::move(tr));
    if (s.answer) r.terminals.push_back({s.state, s.score.value_or(0.0), *s.answer});
  }
  r.tokens = meter.generated_tokens();
  try {
    r.answer = aggregate_answers(solutions, mode);
    r.complete = true;
    r.outcome = "complete";
    std::optional<std::size_t> pick;
    for (std::size_t k = 0; k < solutions.size(); ++k) {
      if (solutions[k].answer != r.answer) continue;
      if (!pick || solutions[k].score.value_or(0.0) > solutions[*pick].score.value_or(0.0)) pick = k;
    }
    r.chosen = solutions[*pick].state;
    r.trace.result.chosen_rollout = static_cast<std::int64_t>(*pick);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoSolutions) throw;
    r.outcome = "no_terminal";
  }
  r.trace.result.answer = r.answer;
  r.trace.result.outcome = r.outcome;
  r.trace.result.tokens = r.tokens;
  r.trace.result.expansions = 0;
  return r;
}

}  // namespace

SearchResult run_search(const Problem& problem, const SearchConfig& config, SearchBackends backends) {
  switch (config.method) {
    case Method::Bfs: return bfs_search(problem, config, backends);
    case Method::Tree: return tree_search(problem, config, backends);
    case Method::Beam: return beam_search(problem, config, backends);
    case Method::Mcts: return mcts_search(problem, config, backends);
    case Method::Greedy: return greedy_decode(problem, config, backends);
    case Method::SelfConsistency: return run_sampling(problem, config, backends, AnswerAggregation::Majority);
    case Method::BestOfN: return run_sampling(problem, config, backends, AnswerAggregation::BestOfN);
    case Method::WeightedVote: return run_sampling(problem, config, backends, AnswerAggregation::Weighted);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown method");
}

}  // namespace arbor
