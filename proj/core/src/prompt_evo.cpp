#include "vsched/prompt_evo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "vsched/errors.hpp"
#include "vsched/json_support.hpp"
#include "vsched/random.hpp"

namespace vsched {

void KeywordSets::validate() const {
  for (const auto& t : ku) {
    if (ki.count(t)) throw ValidationError("token '" + t + "' is in both KU and KI");
  }
}

void PromptFitnessParams::validate() const {
  if (metric_weights.empty()) throw ValidationError("metric_weights must not be empty");
  double sum = 0.0;
  for (double w : metric_weights) {
    if (!(w >= 0.0)) throw ValidationError("metric weights must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("metric weights must sum to 1");
  for (double l : {lambda_tok, lambda_div, lambda_exp}) {
    if (!(l >= 0.0)) throw ValidationError("fitness lambdas must be >= 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
}

void PromptGaParams::validate() const {
  if (generations < 0) throw ValidationError("generations must be >= 0");
  if (pop_size < 2) throw ValidationError("pop_size must be >= 2");
  if (elite < 0 || elite >= pop_size) throw ValidationError("elite must be in [0, pop_size)");
  if (max_tokens < 1) throw ValidationError("max_tokens must be >= 1");
  if (!(crossover_prob >= 0.0 && crossover_prob <= 1.0)) throw ValidationError("crossover_prob outside [0, 1]");
  if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0)) throw ValidationError("mutation_prob outside [0, 1]");
}

PromptTask parse_prompt_task(std::string_view json_text) {
  const JsonDocument doc = JsonDocument::parse(json_text);
  if (!doc.root().is_object()) doc.fail("", "task document must be an object");
  auto strings = [&](const char* key, bool required) {
    std::vector<std::string> out;
    if (!doc.root().contains(key)) {
      if (required) doc.fail("", std::string("missing field '") + key + "'");
      return out;
    }
    const auto& arr = doc.require("", key);
    if (!arr.is_array()) doc.fail(std::string("/") + key, "expected an array of strings");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_string()) doc.fail("/" + std::string(key) + "/" + std::to_string(i), "expected a string");
      out.push_back(arr[i].get<std::string>());
    }
    return out;
  };
  PromptTask t;
  if (doc.root().contains("name")) t.name = doc.string("", "name");
  for (const auto& p : strings("planted", true)) {
    for (auto& tok : tokenize(p)) t.planted.push_back(std::move(tok));
  }
  for (const auto& v : strings("vocabulary", false)) {
    for (auto& tok : tokenize(v)) t.vocabulary.push_back(std::move(tok));
  }
  t.seed_prompts = strings("seed_prompts", false);
  t.noise_seed = static_cast<std::uint64_t>(doc.optional_integer("", "noise_seed").value_or(0));
  if (t.planted.empty()) doc.fail("/planted", "planted keyword set must be nonempty");
  return t;
}

MockWorker::MockWorker(std::vector<std::string> planted, std::uint64_t noise_seed)
    : planted_(planted.begin(), planted.end()), noise_seed_(noise_seed) {
  if (planted_.empty()) throw ValidationError("mock worker needs a nonempty planted set");
}

std::vector<double> MockWorker::evaluate(const Prompt& prompt, const PromptTask&) const {
  std::set<std::string> hit;
  int distractors = 0;
  for (const auto& t : prompt.tokens) {
    if (planted_.count(t)) {
      hit.insert(t);
    } else {
      ++distractors;
    }
  }
  const double frac = static_cast<double>(hit.size()) / static_cast<double>(planted_.size());
  const double base = (1.0 - std::exp(-3.0 * frac)) / (1.0 - std::exp(-3.0));
  const std::uint64_t h = fnv1a_u64(noise_seed_, fnv1a(prompt.id));
  const double noise = kNoiseFloor * static_cast<double>(h >> 11) * 0x1.0p-53;
  const double m = base - kDistractorPenalty * distractors + noise;
  return {std::clamp(m, 0.0, 1.0)};
}

std::unique_ptr<WorkerEvaluator> mock_worker(const PromptTask& task) {
  return std::make_unique<MockWorker>(task.planted, task.noise_seed);
}

std::vector<double> ExternalWorker::evaluate(const Prompt& prompt, const PromptTask&) const {
  throw EvaluationError(prompt.id, "no external worker is configured");
}

FitnessTerms prompt_fitness_terms(const Prompt& p, const PromptTask& task, const std::vector<Prompt>& others,
                                  const PromptFitnessParams& params, const WorkerEvaluator& worker,
                                  const KeywordSets& kw, EmbeddingBank& bank) {
  std::vector<double> metrics;
  try {
    metrics = worker.evaluate(p, task);
  } catch (const EvaluationError&) {
    throw;
  } catch (const std::exception& e) {
    throw EvaluationError(p.id, e.what());
  }
  if (metrics.size() != params.metric_weights.size()) {
    throw EvaluationError(p.id, "worker returned " + std::to_string(metrics.size()) + " metrics, expected " +
                                    std::to_string(params.metric_weights.size()));
  }
  FitnessTerms f;
  for (std::size_t k = 0; k < metrics.size(); ++k) {
    if (!(metrics[k] >= 0.0 && metrics[k] <= 1.0)) throw EvaluationError(p.id, "worker metric outside [0, 1]");
    f.weighted_metrics += params.metric_weights[k] * metrics[k];
  }
  f.token_cost = static_cast<double>(p.tokens.size());
  const Embedding& e = bank.get(p);
  for (const auto& q : others) f.diversity += std::max(0.0, cosine(e, bank.get(q)) - params.delta);
  std::size_t untraced = 0;
  for (const auto& t : p.tokens) {
    if (!kw.ku.count(t) && !kw.ki.count(t)) ++untraced;
  }
  f.untraceable = static_cast<double>(untraced) / static_cast<double>(p.tokens.size());
  f.value = f.weighted_metrics - params.lambda_tok * f.token_cost - params.lambda_div * f.diversity -
            params.lambda_exp * f.untraceable;
  return f;
}

double prompt_fitness(const Prompt& p, const PromptTask& task, const std::vector<Prompt>& others,
                      const PromptFitnessParams& params, const WorkerEvaluator& worker, const KeywordSets& kw,
                      EmbeddingBank& bank) {
  return prompt_fitness_terms(p, task, others, params, worker, kw, bank).value;
}

void KeywordTracker::observe(const std::vector<Prompt>& ranked) {
  const std::size_t q = std::max<std::size_t>(1, ranked.size() / 4);
  auto count = [&](auto first, auto last, std::map<std::string, int>& into, int& total) {
    for (auto it = first; it != last; ++it) {
      const std::set<std::string> distinct(it->tokens.begin(), it->tokens.end());
      for (const auto& t : distinct) ++into[t];
      ++total;
    }
  };
  count(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(q), top_, top_total_);
  count(ranked.end() - static_cast<std::ptrdiff_t>(q), ranked.end(), bottom_, bottom_total_);
}

double KeywordTracker::log_odds(const std::string& token) const {
  auto lookup = [&](const std::map<std::string, int>& m) {
    const auto it = m.find(token);
    return it == m.end() ? 0 : it->second;
  };
  const double a = lookup(top_);
  const double b = lookup(bottom_);
  return std::log((a + 1.0) / (top_total_ - a + 1.0)) - std::log((b + 1.0) / (bottom_total_ - b + 1.0));
}

KeywordSets KeywordTracker::current() const {
  std::set<std::string> tokens;
  for (const auto& [t, _] : top_) tokens.insert(t);
  for (const auto& [t, _] : bottom_) tokens.insert(t);
  KeywordSets kw;
  for (const auto& t : tokens) {
    const double lo = log_odds(t);
    if (lo >= threshold_) {
      kw.ku.insert(t);
    } else if (lo <= -threshold_) {
      kw.ki.insert(t);
    }
  }
  return kw;
}

namespace {

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[rng.below(v.size())];
}

template <typename Set>
std::vector<std::string> as_vector(const Set& s) {
  return {s.begin(), s.end()};
}

class Operators {
 public:
  Operators(const PromptTask& task, const PromptGaParams& ga, Rng& rng) : task_(task), ga_(ga), rng_(rng) {}

  std::vector<std::string> crossover(const Prompt& a, const Prompt& b) {
    const std::size_t cut_a = 1 + rng_.below(a.tokens.size());
    const std::size_t cut_b = rng_.below(b.tokens.size());
    std::vector<std::string> child(a.tokens.begin(), a.tokens.begin() + static_cast<std::ptrdiff_t>(cut_a));
    child.insert(child.end(), b.tokens.begin() + static_cast<std::ptrdiff_t>(cut_b), b.tokens.end());
    return child;
  }

  void mutate(std::vector<std::string>& tokens, const KeywordSets& kw) {
    const double r = rng_.uniform();
    if (r < 0.5) {
      insert(tokens, kw);
    } else if (r < 0.8) {
      erase(tokens, kw);
    } else if (tokens.size() >= 2) {
      const std::size_t i = rng_.below(tokens.size());
      const std::size_t j = rng_.below(tokens.size());
      std::swap(tokens[i], tokens[j]);
    }
  }

  void trim(std::vector<std::string>& tokens, const KeywordSets& kw) {
    while (tokens.size() > static_cast<std::size_t>(ga_.max_tokens)) {
      std::vector<std::size_t> candidates;
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (!kw.ku.count(tokens[i])) candidates.push_back(i);
      }
      const std::size_t victim = candidates.empty() ? rng_.below(tokens.size()) : pick(candidates, rng_);
      tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(victim));
    }
  }

 private:
  // KU tokens or vocabulary tokens outside KI; KI tokens are never inserted.
  void insert(std::vector<std::string>& tokens, const KeywordSets& kw) {
    std::string token;
    if (!kw.ku.empty() && rng_.bernoulli(0.5)) {
      token = pick(as_vector(kw.ku), rng_);
    } else {
      std::vector<std::string> pool;
      for (const auto& t : task_.vocabulary) {
        if (!kw.ki.count(t)) pool.push_back(t);
      }
      if (pool.empty()) return;
      token = pick(pool, rng_);
    }
    const std::size_t pos = rng_.below(tokens.size() + 1);
    tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(pos), token);
  }

  // KI tokens first; otherwise any token outside KU. KU tokens are never deleted.
  void erase(std::vector<std::string>& tokens, const KeywordSets& kw) {
    if (tokens.size() < 2) return;
    std::vector<std::size_t> ki_pos;
    std::vector<std::size_t> free_pos;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (kw.ki.count(tokens[i])) ki_pos.push_back(i);
      if (!kw.ku.count(tokens[i])) free_pos.push_back(i);
    }
    const auto& from = ki_pos.empty() ? free_pos : ki_pos;
    if (from.empty()) return;
    tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(pick(from, rng_)));
  }

  const PromptTask& task_;
  const PromptGaParams& ga_;
  Rng& rng_;
};

struct Scored {
  Prompt prompt;
  double fitness = 0.0;
  std::size_t order = 0;  // generation order, breaks fitness ties
};

std::vector<Prompt> without(const std::vector<Prompt>& pop, std::size_t skip) {
  std::vector<Prompt> out;
  out.reserve(pop.size());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (i != skip) out.push_back(pop[i]);
  }
  return out;
}

void by_fitness(std::vector<Scored>& v) {
  std::stable_sort(v.begin(), v.end(), [](const Scored& a, const Scored& b) {
    if (a.fitness != b.fitness) return a.fitness > b.fitness;
    return a.order < b.order;
  });
}

// Greedy admission in fitness order: strict max-similarity bound below delta.
void admit(const std::vector<Scored>& candidates, std::vector<Prompt>& next, std::size_t capacity, double delta,
           EmbeddingBank& bank) {
  for (const auto& c : candidates) {
    if (next.size() >= capacity) return;
    const Embedding& e = bank.get(c.prompt);
    bool ok = true;
    for (const auto& q : next) {
      if (!(cosine(e, bank.get(q)) < delta)) {
        ok = false;
        break;
      }
    }
    if (ok) next.push_back(c.prompt);
  }
}

}  // namespace

PromptEvolution evolve_prompts(const PromptTask& task, std::vector<Prompt> seed_pop,
                               const PromptFitnessParams& fitness, const PromptGaParams& ga,
                               const WorkerEvaluator& worker) {
  fitness.validate();
  ga.validate();
  Rng rng(stream_seed(ga.seed, 0x7072));
  Operators ops(task, ga, rng);
  EmbeddingBank bank;
  PromptEvolution out;

  if (seed_pop.empty()) {
    for (const auto& text : task.seed_prompts) seed_pop.push_back(Prompt::from_text(text));
  }
  if (seed_pop.empty()) {
    if (task.vocabulary.empty()) throw ValidationError("task needs seed prompts or a vocabulary");
    for (int i = 0; i < 2 * ga.pop_size; ++i) {
      std::vector<std::string> tokens;
      const std::size_t len = 3 + rng.below(4);
      for (std::size_t k = 0; k < len; ++k) tokens.push_back(pick(task.vocabulary, rng));
      seed_pop.push_back(Prompt::from_tokens(std::move(tokens)));
    }
  }

  const auto capacity = static_cast<std::size_t>(ga.pop_size);
  KeywordTracker tracker;
  KeywordSets kw;

  std::vector<Scored> seeds;
  for (std::size_t i = 0; i < seed_pop.size(); ++i) {
    seeds.push_back({seed_pop[i], prompt_fitness(seed_pop[i], task, without(seed_pop, i), fitness, worker, kw, bank), i});
  }
  by_fitness(seeds);
  std::vector<Prompt> pop;
  admit(seeds, pop, capacity, fitness.delta, bank);
  if (pop.empty()) pop.push_back(seeds.front().prompt);

  bool have_best = false;
  for (int gen = 0;; ++gen) {
    std::vector<Scored> ranked;
    double sum = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      const double f = prompt_fitness(pop[i], task, without(pop, i), fitness, worker, kw, bank);
      ranked.push_back({pop[i], f, i});
      sum += f;
      if (!have_best || f > out.best_fitness) {
        out.best = pop[i];
        out.best_fitness = f;
        have_best = true;
      }
    }
    by_fitness(ranked);
    std::vector<Prompt> ranked_prompts;
    for (const auto& s : ranked) ranked_prompts.push_back(s.prompt);
    tracker.observe(ranked_prompts);
    kw = tracker.current();
    kw.validate();

    PromptTraceRow row;
    row.generation = gen;
    row.best = out.best_fitness;
    row.mean = sum / static_cast<double>(pop.size());
    row.ku_size = kw.ku.size();
    row.ki_size = kw.ki.size();
    for (const auto& t : kw.ku) row.ku += (row.ku.empty() ? "" : " ") + t;
    out.trace.push_back(row);
    if (gen == ga.generations) break;

    // Parents come from the top-ranked half.
    const std::size_t half = std::max<std::size_t>(1, ranked.size() / 2);
    std::vector<Scored> candidates;
    for (int e = 0; e < ga.elite && static_cast<std::size_t>(e) < ranked.size(); ++e) {
      candidates.push_back({ranked[static_cast<std::size_t>(e)].prompt, ranked[static_cast<std::size_t>(e)].fitness,
                            candidates.size()});
    }
    std::vector<Prompt> next;
    std::size_t attempts = 0;
    const std::size_t max_attempts = 100 * capacity;
    while (true) {
      for (std::size_t b = 0; b < capacity && attempts < max_attempts; ++b, ++attempts) {
        const Prompt& a = ranked[rng.below(half)].prompt;
        const Prompt& c = ranked[rng.below(half)].prompt;
        std::vector<std::string> tokens = rng.bernoulli(ga.crossover_prob) ? ops.crossover(a, c) : a.tokens;
        if (rng.bernoulli(ga.mutation_prob)) ops.mutate(tokens, kw);
        ops.trim(tokens, kw);
        Prompt child = Prompt::from_tokens(std::move(tokens));
        const double f = prompt_fitness(child, task, pop, fitness, worker, kw, bank);
        candidates.push_back({std::move(child), f, candidates.size()});
      }
      std::vector<Scored> ordered = candidates;
      by_fitness(ordered);
      next.clear();
      admit(ordered, next, capacity, fitness.delta, bank);
      if (next.size() >= capacity || attempts >= max_attempts) break;
    }
    if (next.size() < capacity) {
      out.warnings.push_back("generation " + std::to_string(gen + 1) + ": admission deadlock, kept " +
                             std::to_string(next.size()) + " of " + std::to_string(capacity));
    }
    if (next.empty()) next.push_back(ranked.front().prompt);
    pop = std::move(next);
  }

  out.final_population = pop;
  out.keywords = kw;
  return out;
}

std::string trace_to_csv(const std::vector<PromptTraceRow>& trace) {
  std::ostringstream s;
  s.precision(17);
  s << "generation,best,mean,ku_size,ki_size,ku\n";
  for (const auto& r : trace) {
    s << r.generation << ',' << r.best << ',' << r.mean << ',' << r.ku_size << ',' << r.ki_size << ',' << r.ku << '\n';
  }
  return s.str();
}

}  // namespace vsched
