#pragma once
// Experiment orchestration: run configs, backend assembly, per-problem
// search in a worker pool, reports, difficulty buckets and analyses.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "arbor/http_backend.hpp"
#include "arbor/search.hpp"
#include "arbor/synthetic.hpp"

namespace arbor {

// Key-value run configuration, one `key = value` per line, `#` comments.
// Keys: dataset, spec, backend (synthetic|http), verifier (oracle|noisy|http),
// sigma, per_problem_sigma, verifier_seed, embedder (exact_alias|hashed|http),
// workers, output, difficulty (CSV path | auto), difficulty_rollouts,
// paired_with (baseline report.csv), every SearchConfig key (method,
// expansion_size, merging, seed, ...), and http.* keys (base_url, model,
// embed_model, verifier_model, token_env, timeout_seconds, max_retries,
// backoff_ms, max_tokens, pool_size, score_path).
struct RunConfig {
  std::string dataset;  // empty: the synthetic spec's own problems
  std::string spec;
  std::string backend = "synthetic";
  std::string verifier = "noisy";
  double sigma = 0.1;
  bool per_problem_sigma = true;
  std::uint64_t verifier_seed = 0;
  std::string embedder = "exact_alias";
  HttpBackendConfig http;
  std::string http_embed_model;
  std::string http_verifier_model;
  SearchConfig search;
  int workers = 1;
  std::string output = "runs/latest";
  std::string difficulty;
  int difficulty_rollouts = 64;
  std::string paired_with;

  void validate() const;  // also checks that referenced paths exist
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  // Applies one key; InvalidArgument for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
};

// Owns everything a search needs. All members are safe to share across
// worker threads.
struct BackendBundle {
  std::shared_ptr<const SyntheticTaskSpec> spec;  // synthetic only
  std::shared_ptr<Policy> policy;
  std::shared_ptr<Verifier> verifier;
  std::shared_ptr<Embedder> embedder;
  std::shared_ptr<TextCompleter> judge;

  SearchBackends view() const { return {*policy, *verifier, embedder.get()}; }
};
BackendBundle make_backends(const RunConfig& config);
std::vector<Problem> load_problems(const RunConfig& config, const BackendBundle& backends);

struct DifficultyEntry {
  double failure_rate = 0.0;
  int level = 1;
};
using DifficultyIndex = std::map<std::string, DifficultyEntry>;

int difficulty_level(double failure_rate);
DifficultyIndex build_difficulty_index(std::span<const Problem> problems, Policy& policy, int rollouts,
                                       std::uint64_t seed, const SamplingParams& params = {}, int max_depth = 12,
                                       std::string_view marker = kDefaultAnswerMarker, int workers = 1);
void write_difficulty_csv(const std::string& path, const DifficultyIndex& index);
DifficultyIndex read_difficulty_csv(const std::string& path);

struct ReportRow {
  std::string id;
  std::optional<std::string> predicted;
  bool correct = false;
  std::int64_t tokens = 0;
  int level = 0;  // 0 = unknown
  std::string outcome;
  std::int64_t expansions = 0;
  std::string trace;  // path relative to the run directory
  std::optional<double> token_ratio;
};

struct LevelSummary {
  int level = 0;
  std::size_t problems = 0;
  double accuracy = 0.0;
  double mean_tokens_k = 0.0;
};

struct RunReport {
  std::string method;
  std::string config_hash;
  std::vector<ReportRow> rows;  // ordered by problem id
  double accuracy = 0.0;
  double mean_tokens_k = 0.0;
  std::size_t errors = 0;
  std::vector<LevelSummary> levels;

  // Recomputes the aggregates from rows.
  void summarize();
  std::string csv() const;
  std::string summary_json() const;
};

RunReport read_report_csv(const std::string& path);

// Report from traces alone; also what `report` re-renders.
RunReport build_report(std::span<const SearchTrace> traces, std::span<const Problem> problems,
                       const DifficultyIndex& difficulty, const RunReport* baseline = nullptr);

struct RunOutcome {
  RunReport report;
  std::vector<SearchTrace> traces;
  std::map<std::string, double> wall_ms;
};

// Searches every problem; writes traces/, report.csv, summary.json and
// timing.csv under config.output. Backend errors are recorded per problem.
RunOutcome run_experiment(const RunConfig& config);
RunOutcome run_experiment(const RunConfig& config, const BackendBundle& backends,
                          std::span<const Problem> problems, const DifficultyIndex& difficulty);

// Re-reads traces/ under run_dir and rewrites report.csv and summary.json.
RunReport rerender_report(const std::string& run_dir, std::span<const Problem> problems,
                          const DifficultyIndex& difficulty, const RunReport* baseline = nullptr);

struct LevelComparison {
  int level = 0;
  std::size_t problems = 0;
  double tokens_a_k = 0.0;
  double tokens_b_k = 0.0;
  double delta_k = 0.0;  // b - a
  double token_ratio = 0.0;  // b / a
  double accuracy_a = 0.0;
  double accuracy_b = 0.0;
};

struct Comparison {
  double accuracy_a = 0.0;
  double accuracy_b = 0.0;
  double delta_accuracy = 0.0;  // b - a
  double token_ratio = 0.0;
  std::vector<LevelComparison> levels;  // levels 1-4 with problems
  std::vector<std::string> notes;

  std::string csv() const;
};

// DatasetMismatch when the id sets differ. Levels come from report a.
Comparison compare_runs(const RunReport& a, const RunReport& b);

// Mean N/C for batches of N sibling steps sampled from states along random
// rollouts, for each N.
std::map<int, double> similarity_degree_curve(std::span<const Problem> problems, Policy& policy, Embedder& embedder,
                                              const ClusterConfig& cluster, std::span<const int> sizes, int draws,
                                              std::uint64_t seed, const SamplingParams& params = {},
                                              int max_depth = 12, std::string_view marker = kDefaultAnswerMarker);

// Verifier score std over up to `trajectories` correct sampled trajectories
// per problem (final-state score), averaged per difficulty level.
std::map<int, double> score_std_analysis(std::span<const Problem> problems, Policy& policy, Verifier& verifier,
                                         const DifficultyIndex& difficulty, int trajectories, int max_attempts,
                                         std::uint64_t seed, const SamplingParams& params = {}, int max_depth = 12,
                                         std::string_view marker = kDefaultAnswerMarker);

// Brier score per step index over sampled trajectories.
std::map<int, double> brier_analysis(std::span<const Problem> problems, Policy& policy, Verifier& verifier,
                                     int trajectories, std::uint64_t seed, const SamplingParams& params = {},
                                     int max_depth = 12, std::string_view marker = kDefaultAnswerMarker);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace arbor
