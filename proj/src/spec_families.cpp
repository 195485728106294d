#include "arbor/spec_families.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace arbor::families {

namespace {

using nlohmann::json;

json edge(const std::string& tmpl, double prob, std::vector<std::string> aliases, std::int64_t tokens,
          const std::string& next) {
  return json{{"template", tmpl}, {"prob", prob}, {"aliases", std::move(aliases)}, {"tokens", tokens}, {"next", next}};
}

json terminal_edge(const std::string& tmpl, double prob, std::vector<std::string> aliases, std::int64_t tokens,
                   const std::string& answer) {
  return json{
      {"template", tmpl}, {"prob", prob}, {"aliases", std::move(aliases)}, {"tokens", tokens}, {"answer", answer}};
}

const char* const kLeadIns[] = {"So", "Then", "Next,", "Now", "Thus", "Hence", "We get", "Therefore",
                                "This means", "It follows that", "Clearly", "Note that"};

std::vector<std::string> paraphrases(const std::string& core, int count, const std::string& suffix = "") {
  std::vector<std::string> out;
  for (int a = 0; a < count; ++a) {
    const std::string lead = kLeadIns[a % std::size(kLeadIns)];
    std::string text = lead + " " + core;
    if (a >= static_cast<int>(std::size(kLeadIns))) text += " (" + std::to_string(a) + ")";
    out.push_back(text + suffix);
  }
  return out;
}

std::vector<std::string> answer_aliases(const std::string& tag, const std::string& answer, int count) {
  std::vector<std::string> out;
  for (int a = 0; a < count; ++a) {
    out.push_back("[" + tag + "] " + kLeadIns[a % std::size(kLeadIns)] + " we finish." +
                  (a >= static_cast<int>(std::size(kLeadIns)) ? " (" + std::to_string(a) + ")" : "") +
                  " The answer is " + answer + ".");
  }
  return out;
}

}  // namespace

SyntheticTaskSpec deterministic_chain(const ChainParams& p) {
  json spec{{"name", "chain"}, {"problems", json::array()}};
  for (int i = 0; i < p.problems; ++i) {
    const std::string pid = "chain-" + std::to_string(i);
    const std::string answer = std::to_string(7 + 3 * i);
    json states = json::object();
    for (int k = 0; k < p.depth; ++k) {
      const std::string name = "s" + std::to_string(k);
      const std::string tmpl = pid + "/step" + std::to_string(k);
      if (k + 1 < p.depth) {
        states[name] = json::array({edge(tmpl, 1.0,
                                         paraphrases("[" + pid + "] step " + std::to_string(k + 1) + " holds.",
                                                     p.aliases_per_step),
                                         p.tokens_per_step, "s" + std::to_string(k + 1))});
      } else {
        states[name] = json::array(
            {terminal_edge(tmpl, 1.0, answer_aliases(pid, answer, p.aliases_per_step), p.tokens_per_step, answer)});
      }
    }
    spec["problems"].push_back({{"id", pid},
                                {"question", "Chain problem " + std::to_string(i) + ": follow the steps."},
                                {"answer", answer},
                                {"root", "s0"},
                                {"states", std::move(states)}});
  }
  return SyntheticTaskSpec::from_json(spec);
}

SyntheticTaskSpec alias_fanout(const AliasFanoutParams& p) {
  RngStream rng(p.seed, 0);
  const int templates = std::max(1, static_cast<int>(std::lround(1.0 / p.alias_rate)));
  json spec{{"name", "alias_fanout"}, {"problems", json::array()}};
  for (int i = 0; i < p.problems; ++i) {
    const std::string pid = "fan-" + std::to_string(i);
    const int depth = p.min_depth + static_cast<int>(rng.below(static_cast<std::uint64_t>(p.max_depth - p.min_depth + 1)));
    const std::string answer = std::to_string(10 + static_cast<int>(rng.below(90)));
    const std::string wrong = std::to_string(100 + static_cast<int>(rng.below(900)));
    json states = json::object();
    // Layer k has states L{k}S{j}; the root is the single state of layer 0.
    for (int k = 0; k + 1 < depth; ++k) {
      const int width = k == 0 ? 1 : templates;
      for (int s = 0; s < width; ++s) {
        json edges = json::array();
        for (int j = 0; j < templates; ++j) {
          const std::string tmpl = pid + "/L" + std::to_string(k) + "S" + std::to_string(s) + "T" + std::to_string(j);
          const std::string core = "[" + pid + "] from state " + std::to_string(k) + "." + std::to_string(s) +
                                   " take route " + std::to_string(j) + ".";
          const auto tokens = static_cast<std::int64_t>(6 + rng.below(15));
          edges.push_back(edge(tmpl, 1.0 / templates, paraphrases(core, p.aliases_per_template), tokens,
                               "L" + std::to_string(k + 1) + "S" + std::to_string(j)));
        }
        states["L" + std::to_string(k) + "S" + std::to_string(s)] = std::move(edges);
      }
    }
    const int last = depth - 1;
    const int width = last == 0 ? 1 : templates;
    for (int s = 0; s < width; ++s) {
      const double success = p.min_success + (p.max_success - p.min_success) * rng.uniform();
      const std::string base = pid + "/L" + std::to_string(last) + "S" + std::to_string(s);
      const auto tokens = static_cast<std::int64_t>(6 + rng.below(15));
      states["L" + std::to_string(last) + "S" + std::to_string(s)] = json::array(
          {terminal_edge(base + "/right", success, answer_aliases(base + " right", answer, p.aliases_per_template),
                         tokens, answer),
           terminal_edge(base + "/wrong", 1.0 - success,
                         answer_aliases(base + " wrong", wrong, p.aliases_per_template), tokens, wrong)});
    }
    spec["problems"].push_back({{"id", pid},
                                {"question", "Fanout problem " + std::to_string(i) + "."},
                                {"answer", answer},
                                {"sigma", p.sigma},
                                {"root", "L0S0"},
                                {"states", std::move(states)}});
  }
  return SyntheticTaskSpec::from_json(spec);
}

SyntheticTaskSpec noisy_ladder(const LadderParams& p) {
  json spec{{"name", "noisy_ladder"}, {"problems", json::array()}};
  for (int i = 0; i < p.problems; ++i) {
    const int level = 1 + i % std::max(p.levels, 1);
    const std::string pid = "ladder-" + std::to_string(i);
    const std::string answer = std::to_string(20 + i);
    const std::string wrong = std::to_string(900 + i);
    json states = json::object();
    for (int k = 0; k < p.depth; ++k) {
      const std::string name = "s" + std::to_string(k);
      const std::string base = pid + "/s" + std::to_string(k);
      if (k + 1 < p.depth) {
        states[name] = json::array(
            {edge(base + "/advance", p.advance_prob,
                  paraphrases("[" + pid + "] rung " + std::to_string(k + 1) + " is correct.", p.aliases_per_template),
                  8, "s" + std::to_string(k + 1)),
             terminal_edge(base + "/slip", 1.0 - p.advance_prob,
                           answer_aliases(base + " slip", wrong, p.aliases_per_template), 6, wrong)});
      } else {
        states[name] = json::array(
            {terminal_edge(base + "/right", p.final_success,
                           answer_aliases(base + " right", answer, p.aliases_per_template), 6, answer),
             terminal_edge(base + "/wrong", 1.0 - p.final_success,
                           answer_aliases(base + " wrong", wrong, p.aliases_per_template), 6, wrong)});
      }
    }
    spec["problems"].push_back({{"id", pid},
                                {"question", "Ladder problem " + std::to_string(i) + " (level " +
                                                 std::to_string(level) + ")."},
                                {"answer", answer},
                                {"sigma", p.sigma_base * level},
                                {"root", "s0"},
                                {"states", std::move(states)}});
  }
  return SyntheticTaskSpec::from_json(spec);
}

SyntheticTaskSpec stochastic_answers(const StochasticParams& p) {
  RngStream rng(p.seed, 0);
  json spec{{"name", "stochastic"}, {"problems", json::array()}};
  for (int i = 0; i < p.problems; ++i) {
    const std::string pid = "sto-" + std::to_string(i);
    const std::string answer = std::to_string(1 + static_cast<int>(rng.below(50)));
    const std::string distractor = std::to_string(100 + static_cast<int>(rng.below(50)));
    // Approach weights from a broken stick; each approach answers correctly
    // with its own probability, the rest goes to a shared distractor.
    std::vector<double> weights(static_cast<std::size_t>(p.approaches));
    for (auto& w : weights) w = 0.2 + rng.uniform();
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (auto& w : weights) w /= total;
    // Exact-sum guard for the spec validator.
    weights.back() = 1.0 - std::accumulate(weights.begin(), weights.end() - 1, 0.0);

    json states = json::object();
    json root_edges = json::array();
    for (int a = 0; a < p.approaches; ++a) {
      const std::string prefix = "A" + std::to_string(a);
      root_edges.push_back(edge(pid + "/" + prefix, weights[static_cast<std::size_t>(a)],
                                paraphrases("[" + pid + "] try approach " + std::to_string(a) + ".", 3), 7,
                                prefix + "C0"));
      const double success = 0.15 + 0.8 * rng.uniform();
      for (int c = 0; c < p.chain_length; ++c) {
        const std::string name = prefix + "C" + std::to_string(c);
        const std::string base = pid + "/" + name;
        if (c + 1 < p.chain_length) {
          states[name] = json::array({edge(base, 1.0,
                                           paraphrases("[" + pid + "] approach " + std::to_string(a) + " part " +
                                                           std::to_string(c + 1) + ".",
                                                       3),
                                           9, prefix + "C" + std::to_string(c + 1))});
        } else {
          states[name] = json::array(
              {terminal_edge(base + "/right", success, answer_aliases(base + " right", answer, 3), 5, answer),
               terminal_edge(base + "/wrong", 1.0 - success, answer_aliases(base + " wrong", distractor, 3), 5,
                             distractor)});
        }
      }
    }
    states["root"] = std::move(root_edges);
    spec["problems"].push_back({{"id", pid},
                                {"question", "Stochastic problem " + std::to_string(i) + "."},
                                {"answer", answer},
                                {"root", "root"},
                                {"states", std::move(states)}});
  }
  return SyntheticTaskSpec::from_json(spec);
}

}  // namespace arbor::families
