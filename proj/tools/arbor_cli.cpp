#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "arbor/harness.hpp"
#include "arbor/simpairs.hpp"
#include "arbor/spec_families.hpp"
#include "arbor/valuation.hpp"

namespace fs = std::filesystem;
using namespace arbor;

namespace {

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig c = path.empty() ? RunConfig{} : RunConfig::load(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::InvalidArgument, "--set expects key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return c;
}

void emit(const std::string& out, const std::string& content) {
  if (out.empty() || out == "-") {
    std::cout << content;
  } else {
    write_file(out, content);
  }
}

DifficultyIndex difficulty_for(const RunConfig& c, const std::string& override_path) {
  const std::string& p = override_path.empty() ? c.difficulty : override_path;
  if (p.empty() || p == "auto") return {};
  return read_difficulty_csv(p);
}

std::string level_table(const std::string& key, const std::string& value, const std::map<int, double>& m) {
  std::string out = key + "," + value + "\n";
  for (const auto& [k, v] : m) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    out += std::to_string(k) + "," + buf + "\n";
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"arbor: verifier-guided tree search with state merging"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("-c,--config", config_path, "Run config (key = value lines)");
    if (required) opt->required();
    sub->add_option("--set", overrides, "Override a config key (key=value), repeatable");
  };

  // search
  auto* search = app.add_subcommand("search", "Run the configured method over a dataset");
  add_config(search, true);
  std::string output;
  search->add_option("-o,--output", output, "Run directory (overrides 'output')");

  // difficulty
  auto* difficulty = app.add_subcommand("difficulty", "Bucket problems by policy failure rate");
  add_config(difficulty, true);
  std::string diff_out = "difficulty.csv";
  int diff_rollouts = 64;
  difficulty->add_option("-o,--output", diff_out, "CSV output");
  difficulty->add_option("--rollouts", diff_rollouts, "Rollouts per problem")->check(CLI::PositiveNumber);

  // label-pairs
  auto* pairs = app.add_subcommand("label-pairs", "Label sibling step pairs from recorded traces");
  add_config(pairs, true);
  std::string run_dir, pairs_out = "-", pair_method = "consistency", prompt_path = "data/prompts/equivalence_prompt.txt";
  ConsistencyConfig cc;
  std::string cc_mode = "raw";
  std::size_t max_pairs = 45;
  pairs->add_option("--run", run_dir, "Run directory holding traces/")->required();
  pairs->add_option("-o,--output", pairs_out, "JSONL output ('-' for stdout)");
  pairs->add_option("--method", pair_method, "consistency | prompting")->check(CLI::IsMember({"consistency", "prompting"}));
  pairs->add_option("--alpha", cc.alpha, "Same-state threshold");
  pairs->add_option("--beta", cc.beta, "Distinct-state threshold");
  pairs->add_option("--k", cc.rollouts, "Continuations per pair");
  pairs->add_option("--mode", cc_mode, "raw | length_normalized");
  pairs->add_option("--prompt", prompt_path, "Prompt template with {STEP_A} and {STEP_B}");
  pairs->add_option("--max-pairs-per-batch", max_pairs, "Cap on pairs per expansion batch");

  // value-labels
  auto* values = app.add_subcommand("value-labels", "Export MC or TD(lambda) value labels");
  add_config(values, true);
  std::string values_out = "-", label_method = "td_lambda";
  double lambda = 0.8;
  int per_problem = 1;
  ReturnEstimation est;
  values->add_option("-o,--output", values_out, "JSONL output ('-' for stdout)");
  values->add_option("--method", label_method, "mc | td_lambda");
  values->add_option("--lambda", lambda, "TD(lambda) mixing weight")->check(CLI::Range(0.0, 1.0));
  values->add_option("--trajectories", per_problem, "Trajectories per problem")->check(CLI::PositiveNumber);
  values->add_option("--rollouts", est.rollouts, "Rollouts per state (rho)")->check(CLI::PositiveNumber);

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Similarity degree, score std by difficulty, Brier by step");
  add_config(analyze, true);
  std::string what = "similarity", analyze_out = "-", analyze_difficulty;
  int draws = 1000, trajectories = 10, attempts = 200;
  std::vector<int> sizes{2, 3, 5, 10};
  analyze->add_option("what", what, "similarity | variance | brier")
      ->check(CLI::IsMember({"similarity", "variance", "brier"}));
  analyze->add_option("-o,--output", analyze_out, "CSV output ('-' for stdout)");
  analyze->add_option("--draws", draws, "Sampled states (similarity)");
  analyze->add_option("--sizes", sizes, "Batch sizes N (similarity)");
  analyze->add_option("--trajectories", trajectories, "Trajectories per problem (variance, brier)");
  analyze->add_option("--attempts", attempts, "Sampling cap per problem (variance)");
  analyze->add_option("--difficulty", analyze_difficulty, "Difficulty CSV (variance)");

  // compare
  auto* compare = app.add_subcommand("compare", "Compare two runs over the same dataset");
  std::string report_a, report_b, compare_out = "-";
  compare->add_option("a", report_a, "Baseline report.csv")->required()->check(CLI::ExistingFile);
  compare->add_option("b", report_b, "Candidate report.csv")->required()->check(CLI::ExistingFile);
  compare->add_option("-o,--output", compare_out, "CSV output ('-' for stdout)");

  // report
  auto* report = app.add_subcommand("report", "Re-render report.csv and summary.json from traces");
  add_config(report, true);
  std::string report_run, report_difficulty, report_paired;
  report->add_option("--run", report_run, "Run directory")->required()->check(CLI::ExistingDirectory);
  report->add_option("--difficulty", report_difficulty, "Difficulty CSV");
  report->add_option("--paired-with", report_paired, "Baseline report.csv for the token_ratio column");

  // generate-spec
  auto* gen = app.add_subcommand("generate-spec", "Write a built-in synthetic spec family as JSON");
  std::string family, gen_out = "-";
  int gen_problems = -1;
  std::uint64_t gen_seed = 0;
  bool seed_given = false;
  double alias_rate = 0.5;
  gen->add_option("family", family, "chain | alias_fanout | noisy_ladder | stochastic")
      ->required()
      ->check(CLI::IsMember({"chain", "alias_fanout", "noisy_ladder", "stochastic"}));
  gen->add_option("-o,--output", gen_out, "JSON output ('-' for stdout)");
  gen->add_option("--problems", gen_problems, "Problem count");
  gen->add_option("--seed", gen_seed, "Generator seed")->each([&](const std::string&) { seed_given = true; });
  gen->add_option("--alias-rate", alias_rate, "Sibling alias rate (alias_fanout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (search->parsed()) {
      auto c = load_config(config_path, overrides);
      if (!output.empty()) c.output = output;
      const auto res = run_experiment(c);
      std::cout << res.report.summary_json();
      std::cerr << "wrote " << c.output << "\n";
      return 0;
    }
    if (difficulty->parsed()) {
      auto c = load_config(config_path, overrides);
      auto b = make_backends(c);
      auto problems = load_problems(c, b);
      auto index = build_difficulty_index(problems, *b.policy, diff_rollouts, c.search.seed,
                                          {c.search.temperature, c.search.top_p}, c.search.max_depth, c.search.marker,
                                          c.workers);
      write_difficulty_csv(diff_out, index);
      return 0;
    }
    if (pairs->parsed()) {
      auto c = load_config(config_path, overrides);
      auto b = make_backends(c);
      std::map<std::string, Problem> by_id;
      for (auto& p : load_problems(c, b)) by_id[p.id] = p;
      cc.mode = parse_probability_mode(cc_mode);
      cc.marker = c.search.marker;
      cc.validate();
      std::optional<PromptTemplate> prompt;
      if (pair_method == "prompting") prompt = PromptTemplate::load(prompt_path);

      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(fs::path(run_dir) / "traces")) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      std::vector<SimilarityPair> out;
      std::size_t discarded = 0;
      for (const auto& f : files) {
        auto trace = SearchTrace::parse(read_file(f.string()));
        auto it = by_id.find(trace.problem_id);
        if (it == by_id.end()) throw Error(ErrorKind::DatasetMismatch, "trace for unknown problem " + trace.problem_id);
        for (auto& cand : mine_sibling_pairs(trace, it->second.question, max_pairs)) {
          SimilarityPair sp;
          sp.step_a = cand.a.last_step().text;
          sp.step_b = cand.b.last_step().text;
          if (pair_method == "prompting") {
            sp.source = PairSource::Prompting;
            sp.label = prompt_label(sp.step_a, sp.step_b, *b.judge, *prompt);
          } else {
            if (cand.a.terminal() && cand.b.terminal()) {
              ++discarded;
              continue;
            }
            if (cand.a.terminal()) std::swap(cand.a, cand.b), std::swap(sp.step_a, sp.step_b);
            RngStream rng(c.search.seed, fnv1a64(trace.problem_id + '\x1f' + sp.step_a + '\x1f' + sp.step_b));
            TokenMeter meter;
            sp.delta = consistency_delta(*b.policy, cand.a, cand.b, cc, rng, meter);
            sp.label = label_pair(*sp.delta, cc);
          }
          if (!sp.label) ++discarded;
          out.push_back(std::move(sp));
        }
      }
      std::ostringstream ss;
      write_pairs_jsonl(ss, out, &cc);
      emit(pairs_out, ss.str());
      std::cerr << out.size() - discarded << " labeled pairs, " << discarded << " discarded\n";
      return 0;
    }
    if (values->parsed()) {
      auto c = load_config(config_path, overrides);
      auto b = make_backends(c);
      est.marker = c.search.marker;
      est.max_depth = c.search.max_depth;
      std::vector<TrajectoryRecord> records;
      for (const auto& p : load_problems(c, b)) {
        RngStream rng(c.search.seed, fnv1a64("value-labels\x1f" + p.id));
        TokenMeter meter;
        for (int t = 0; t < per_problem; ++t) {
          records.push_back(build_trajectory_record(*b.policy, *b.verifier, p, est,
                                                    {c.search.temperature, c.search.top_p}, rng, meter));
        }
      }
      std::ostringstream ss;
      write_value_labels_jsonl(ss, export_value_labels(records, parse_label_method(label_method), lambda));
      emit(values_out, ss.str());
      return 0;
    }
    if (analyze->parsed()) {
      auto c = load_config(config_path, overrides);
      auto b = make_backends(c);
      auto problems = load_problems(c, b);
      const SamplingParams params{c.search.temperature, c.search.top_p};
      if (what == "similarity") {
        auto curve = similarity_degree_curve(problems, *b.policy, *b.embedder, c.search.cluster, sizes, draws,
                                             c.search.seed, params, c.search.max_depth, c.search.marker);
        emit(analyze_out, level_table("n", "similarity_degree", curve));
      } else if (what == "variance") {
        auto index = difficulty_for(c, analyze_difficulty);
        if (index.empty()) {
          index = build_difficulty_index(problems, *b.policy, c.difficulty_rollouts, c.search.seed, params,
                                         c.search.max_depth, c.search.marker, c.workers);
        }
        auto stds = score_std_analysis(problems, *b.policy, *b.verifier, index, trajectories, attempts, c.search.seed,
                                       params, c.search.max_depth, c.search.marker);
        emit(analyze_out, level_table("level", "score_std", stds));
      } else {
        auto brier = brier_analysis(problems, *b.policy, *b.verifier, trajectories, c.search.seed, params,
                                    c.search.max_depth, c.search.marker);
        emit(analyze_out, level_table("step", "brier", brier));
      }
      return 0;
    }
    if (compare->parsed()) {
      emit(compare_out, compare_runs(read_report_csv(report_a), read_report_csv(report_b)).csv());
      return 0;
    }
    if (report->parsed()) {
      auto c = load_config(config_path, overrides);
      auto b = make_backends(c);
      auto problems = load_problems(c, b);
      std::optional<RunReport> baseline;
      if (!report_paired.empty()) baseline = read_report_csv(report_paired);
      auto rep = rerender_report(report_run, problems, difficulty_for(c, report_difficulty),
                                 baseline ? &*baseline : nullptr);
      std::cout << rep.summary_json();
      return 0;
    }
    if (gen->parsed()) {
      SyntheticTaskSpec spec = [&] {
        if (family == "chain") {
          families::ChainParams p;
          if (gen_problems > 0) p.problems = gen_problems;
          return families::deterministic_chain(p);
        }
        if (family == "alias_fanout") {
          families::AliasFanoutParams p;
          if (gen_problems > 0) p.problems = gen_problems;
          if (seed_given) p.seed = gen_seed;
          p.alias_rate = alias_rate;
          return families::alias_fanout(p);
        }
        if (family == "noisy_ladder") {
          families::LadderParams p;
          if (gen_problems > 0) p.problems = gen_problems;
          return families::noisy_ladder(p);
        }
        families::StochasticParams p;
        if (gen_problems > 0) p.problems = gen_problems;
        if (seed_given) p.seed = gen_seed;
        return families::stochastic_answers(p);
      }();
      emit(gen_out, spec.to_json().dump(1) + "\n");
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
