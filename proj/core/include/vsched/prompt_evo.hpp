#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "vsched/embedding.hpp"

namespace vsched {

struct KeywordSets {
  std::set<std::string> ku;  // tokens over-represented in high-fitness prompts
  std::set<std::string> ki;  // tokens over-represented in low-fitness prompts

  bool operator==(const KeywordSets&) const = default;
  void validate() const;
};

struct PromptFitnessParams {
  std::vector<double> metric_weights{1.0};
  double lambda_tok = 0.01;
  double lambda_div = 0.1;
  double lambda_exp = 0.05;
  double delta = 0.8;

  void validate() const;
};

/// Task given to a worker. For the mock worker `planted` holds the hidden
/// target keywords; `vocabulary` is the token pool mutation draws from.
struct PromptTask {
  std::string name = "mock";
  std::vector<std::string> planted;
  std::vector<std::string> vocabulary;
  std::uint64_t noise_seed = 0;
  std::vector<std::string> seed_prompts;
};

PromptTask parse_prompt_task(std::string_view json_text);

class WorkerEvaluator {
 public:
  virtual ~WorkerEvaluator() = default;
  /// Metrics in [0, 1]; must be deterministic for a fixed task.
  virtual std::vector<double> evaluate(const Prompt& prompt, const PromptTask& task) const = 0;
};

/// Deterministic stand-in for a language-model worker. One metric:
///   base = (1 - exp(-3 f)) / (1 - exp(-3)),  f = |tokens ∩ planted| / |planted|
///   metric = clamp(base - 0.02 * distractors + noise, 0, 1)
/// where distractors counts tokens outside the planted set and noise is a
/// hash of (prompt id, noise seed) scaled into [0, 0.02).
class MockWorker final : public WorkerEvaluator {
 public:
  MockWorker(std::vector<std::string> planted, std::uint64_t noise_seed);
  std::vector<double> evaluate(const Prompt& prompt, const PromptTask& task) const override;

  static constexpr double kNoiseFloor = 0.02;
  static constexpr double kDistractorPenalty = 0.02;

 private:
  std::set<std::string> planted_;
  std::uint64_t noise_seed_;
};

std::unique_ptr<WorkerEvaluator> mock_worker(const PromptTask& task);

/// Adapter point for an external worker; not implemented, always throws.
class ExternalWorker final : public WorkerEvaluator {
 public:
  std::vector<double> evaluate(const Prompt& prompt, const PromptTask& task) const override;
};

struct FitnessTerms {
  double weighted_metrics = 0.0;
  double token_cost = 0.0;
  double diversity = 0.0;       // sum over others of max(0, sim - delta)
  double untraceable = 0.0;     // fraction of tokens in neither KU nor KI
  double value = 0.0;
};

/// Regularized prompt fitness. `others` is the population excluding `p`.
FitnessTerms prompt_fitness_terms(const Prompt& p, const PromptTask& task, const std::vector<Prompt>& others,
                                  const PromptFitnessParams& params, const WorkerEvaluator& worker,
                                  const KeywordSets& kw, EmbeddingBank& bank);
double prompt_fitness(const Prompt& p, const PromptTask& task, const std::vector<Prompt>& others,
                      const PromptFitnessParams& params, const WorkerEvaluator& worker, const KeywordSets& kw,
                      EmbeddingBank& bank);

/// Quartile statistics accumulated over generations.
class KeywordTracker {
 public:
  explicit KeywordTracker(double threshold = 1.0) : threshold_(threshold) {}
  /// Adds one generation: prompts ordered by descending fitness.
  void observe(const std::vector<Prompt>& ranked);
  /// Tokens whose add-one smoothed log-odds (top vs bottom quartile) is at
  /// least +threshold (KU) or at most -threshold (KI).
  KeywordSets current() const;
  double log_odds(const std::string& token) const;

 private:
  double threshold_;
  std::map<std::string, int> top_;
  std::map<std::string, int> bottom_;
  int top_total_ = 0;
  int bottom_total_ = 0;
};

struct PromptGaParams {
  int generations = 40;
  int pop_size = 16;
  double crossover_prob = 0.7;
  double mutation_prob = 0.9;
  int elite = 2;
  int max_tokens = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PromptTraceRow {
  int generation = 0;
  double best = 0.0;  // best fitness over every admitted prompt so far
  double mean = 0.0;
  std::size_t ku_size = 0;
  std::size_t ki_size = 0;
  std::string ku;  // space-joined, sorted
};

struct PromptEvolution {
  Prompt best;
  double best_fitness = 0.0;
  std::vector<Prompt> final_population;
  KeywordSets keywords;
  std::vector<PromptTraceRow> trace;
  std::vector<std::string> warnings;
};

/// Seed prompts default to random vocabulary draws when `seed_pop` is empty.
PromptEvolution evolve_prompts(const PromptTask& task, std::vector<Prompt> seed_pop,
                               const PromptFitnessParams& fitness, const PromptGaParams& ga,
                               const WorkerEvaluator& worker);

std::string trace_to_csv(const std::vector<PromptTraceRow>& trace);

}  // namespace vsched
