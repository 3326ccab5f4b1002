#include "vsched/bilevel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "vsched/errors.hpp"
#include "vsched/metrics.hpp"

namespace vsched {

void OuterGaParams::validate() const {
  if (pop_size < 2) throw ValidationError("outer pop_size must be >= 2");
  if (generations < 0) throw ValidationError("outer generations must be >= 0");
  if (tournament_size < 1) throw ValidationError("tournament_size must be >= 1");
  if (!(crossover_prob >= 0.0 && crossover_prob <= 1.0)) throw ValidationError("crossover_prob outside [0, 1]");
  if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0)) throw ValidationError("mutation_prob outside [0, 1]");
  if (!(kappa > 0.0)) throw ValidationError("kappa must be positive");
  if (m_samp < 1) throw ValidationError("m_samp must be >= 1");
  if (elite < 0 || elite >= pop_size) throw ValidationError("elite must be in [0, pop_size)");
  if (!(eta > 0.0 && eta < 1.0)) throw ValidationError("eta must lie in (0, 1)");
}

std::vector<std::string> OuterGaParams::range_warnings() const {
  std::vector<std::string> w;
  auto note = [&](bool ok, const std::string& what) {
    if (!ok) w.push_back(what + " is outside the recommended range");
  };
  note(pop_size == 40 || pop_size == 60 || pop_size == 80, "pop_size " + std::to_string(pop_size));
  note(generations >= 60 && generations <= 120, "generations " + std::to_string(generations));
  note(tournament_size == 2 || tournament_size == 3, "tournament_size " + std::to_string(tournament_size));
  note(crossover_prob >= 0.7 && crossover_prob <= 0.9, "crossover_prob");
  note(mutation_prob >= 0.1 && mutation_prob <= 0.3, "mutation_prob");
  note(kappa >= 1.0 && kappa <= 10.0, "kappa");
  note(m_samp == 16 || m_samp == 32 || m_samp == 64, "m_samp " + std::to_string(m_samp));
  note(elite == 1 || elite == 2, "elite " + std::to_string(elite));
  return w;
}

WeightVector eta_safe_project(const SimplexPoint& raw, double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw ValidationError("eta must lie in (0, 1)");
  long double sum = 0.0L;
  for (double r : raw) {
    if (!(r >= -1e-9)) throw ValidationError("raw weight vector has a negative component");
    sum += r;
  }
  if (std::abs(static_cast<double>(sum) - 1.0) > 1e-9) throw ValidationError("raw weight vector is off the simplex");
  WeightVector w;
  w.eta = eta;
  w.raw = raw;
  for (int j = 0; j < kSubsetCount; ++j) {
    const double r = std::max(0.0, raw[static_cast<std::size_t>(j)]);
    w.alpha[static_cast<std::size_t>(j)] = (1.0 - eta) * r;
  }
  w.alpha[kLoadSubset] += eta;
  return w;
}

WeightDraw sample_weights(const WeightVector* parent, double kappa, int m_samp, double eta, Rng& rng) {
  if (!(kappa > 0.0)) throw ValidationError("kappa must be positive");
  if (m_samp < 1) throw ValidationError("m_samp must be >= 1");

  SimplexPoint p{};
  double total = 0.0;
  for (int j = 0; j < kSubsetCount; ++j) {
    const double shape = parent ? kappa * parent->raw[static_cast<std::size_t>(j)] : kappa / kSubsetCount;
    p[static_cast<std::size_t>(j)] = rng.gamma(shape);
    total += p[static_cast<std::size_t>(j)];
  }
  if (total > 0.0) {
    for (double& v : p) v /= total;
  } else {
    p.fill(1.0 / kSubsetCount);
  }

  // Multinomial by sequential conditional binomials.
  WeightDraw draw;
  int remaining = m_samp;
  double mass_left = 1.0;
  for (int j = 0; j < kSubsetCount && remaining > 0; ++j) {
    const auto idx = static_cast<std::size_t>(j);
    int c = 0;
    if (j == kSubsetCount - 1 || mass_left <= p[idx]) {
      c = remaining;
    } else if (p[idx] > 0.0) {
      c = rng.binomial(remaining, std::min(1.0, p[idx] / mass_left));
    }
    draw.counts[idx] = c;
    remaining -= c;
    mass_left -= p[idx];
  }
  SimplexPoint raw{};
  for (int j = 0; j < kSubsetCount; ++j) {
    raw[static_cast<std::size_t>(j)] =
        static_cast<double>(draw.counts[static_cast<std::size_t>(j)]) / static_cast<double>(m_samp);
  }
  draw.weights = eta_safe_project(raw, eta);
  return draw;
}

WeightVector crossover_weights(const WeightVector& a, const WeightVector& b, double lambda) {
  if (a.eta != b.eta) throw ValidationError("crossover parents use different eta floors");
  if (a == b) return a;
  SimplexPoint raw{};
  for (int j = 0; j < kSubsetCount; ++j) {
    const auto i = static_cast<std::size_t>(j);
    raw[i] = lambda * a.raw[i] + (1.0 - lambda) * b.raw[i];
  }
  return eta_safe_project(raw, a.eta);
}

WeightVector crossover_weights(const WeightVector& a, const WeightVector& b, Rng& rng) {
  return crossover_weights(a, b, rng.uniform());
}

StratumKey stratum_of(const Scenario& scenario) {
  std::map<int, std::size_t> counts;
  for (const auto& r : scenario.requests) ++counts[r.class_id];
  StratumKey key;
  std::size_t best = 0;
  for (const auto& [cls, c] : counts) {
    if (c > best) {
      best = c;
      key.dominant_class = cls;
    }
  }
  key.weather = static_cast<int>(scenario.weather.size());
  return key;
}

std::vector<std::string> SealedTestSet::names() const {
  std::vector<std::string> out;
  for (const auto& m : members_) out.push_back(m.name);
  return out;
}

struct DataSplitBuilder {
  static void seal(SealedTestSet& set, std::vector<SplitMember> members) { set.members_ = std::move(members); }
};

DataSplit stratified_split(std::vector<std::pair<std::string, Scenario>> scenarios, std::uint64_t seed,
                           const RelaxationOptions& relax) {
  if (scenarios.size() < 3) throw UsageError("a train/validation/test split needs at least 3 scenarios");
  std::sort(scenarios.begin(), scenarios.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  std::map<StratumKey, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < scenarios.size(); ++i) strata[stratum_of(scenarios[i].second)].push_back(i);

  DataSplit split;
  std::vector<SplitMember> test;
  Rng rng(stream_seed(seed, 0x5350));
  std::size_t turn = 0;
  for (auto& [key, members] : strata) {
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.below(i)]);
    if (members.size() < 3) {
      split.warnings.push_back("stratum (class " + std::to_string(key.dominant_class) + ", weather " +
                               std::to_string(key.weather) + ") has " + std::to_string(members.size()) +
                               " scenario(s) and cannot appear in every split");
    }
    for (std::size_t idx : members) {
      auto& [name, sc] = scenarios[idx];
      SplitMember m{name, sc, build_relaxed_instance(sc, relax)};
      switch (turn++ % 3) {
        case 0:
          split.train.push_back(std::move(m));
          break;
        case 1:
          split.validation.push_back(std::move(m));
          break;
        default:
          test.push_back(std::move(m));
          break;
      }
    }
  }
  DataSplitBuilder::seal(split.test, std::move(test));
  return split;
}

bool ranks_before(const GenomeScore& a, const GenomeScore& b) {
  const double ka[] = {a.fitness, a.std_wait, a.tail_95, a.penalty};
  const double kb[] = {b.fitness, b.std_wait, b.tail_95, b.penalty};
  for (int i = 0; i < 4; ++i) {
    if (ka[i] < kb[i] - kTieTolerance) return true;
    if (kb[i] < ka[i] - kTieTolerance) return false;
  }
  return false;
}

namespace {

struct Evaluator {
  const std::vector<const SplitMember*>& members;
  std::map<SimplexPoint, GenomeScore> memo;
  std::size_t solves = 0;

  GenomeScore operator()(const WeightVector& w) {
    if (auto it = memo.find(w.alpha); it != memo.end()) return it->second;
    GenomeScore s;
    for (const SplitMember* m : members) {
      const InnerSolution sol = solve_inner(w, m->instance);
      ++solves;
      const RelaxedMetrics rm = relaxed_metrics(sol.z, m->instance, m->scenario);
      s.fitness += rm.avg_wait;
      s.std_wait += rm.std_wait;
      s.tail_95 += rm.tail_95;
      s.penalty += rm.penalty_total;
    }
    const double k = static_cast<double>(members.size());
    s.fitness /= k;
    s.std_wait /= k;
    s.tail_95 /= k;
    s.penalty /= k;
    memo.emplace(w.alpha, s);
    return s;
  }
};

// Population order by rank; linear insertion keeps the comparator's
// tolerance semantics without requiring a strict weak ordering.
std::vector<std::size_t> rank_order(const std::vector<GenomeScore>& scores) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    auto pos = order.begin();
    while (pos != order.end() && !ranks_before(scores[i], scores[*pos])) ++pos;
    order.insert(pos, i);
  }
  return order;
}

std::size_t tournament(const std::vector<GenomeScore>& scores, int size, Rng& rng) {
  std::size_t best = rng.below(scores.size());
  for (int k = 1; k < size; ++k) {
    const std::size_t c = rng.below(scores.size());
    if (ranks_before(scores[c], scores[best]) || (!ranks_before(scores[best], scores[c]) && c < best)) best = c;
  }
  return best;
}

std::vector<const SplitMember*> feasible_members(const std::vector<SplitMember>& members,
                                                 std::vector<std::string>& warnings) {
  std::vector<const SplitMember*> out;
  for (const auto& m : members) {
    try {
      (void)feasible_start(m.instance);
      out.push_back(&m);
    } catch (const InfeasibleError& e) {
      warnings.push_back("scenario '" + m.name + "' excluded: " + e.what());
    }
  }
  if (out.empty()) throw InfeasibleError("every validation scenario is infeasible for the inner problem");
  return out;
}

}  // namespace

EvolutionResult evolve_weights(const DataSplit& split, const OuterGaParams& params) {
  params.validate();
  EvolutionResult result;
  result.warnings = params.range_warnings();
  if (split.validation.empty()) throw UsageError("validation split is empty");
  const auto members = feasible_members(split.validation, result.warnings);
  Evaluator eval{members, {}, 0};

  const auto pop_n = static_cast<std::size_t>(params.pop_size);
  std::vector<WeightVector> pop;
  pop.reserve(pop_n);
  for (std::size_t i = 0; i < pop_n; ++i) {
    Rng rng(stream_seed(params.seed, 0, i));
    pop.push_back(sample_weights(nullptr, params.kappa, params.m_samp, params.eta, rng).weights);
  }
  result.initial_population = pop;

  std::vector<GenomeScore> scores;
  auto score_all = [&] {
    scores.clear();
    for (const auto& w : pop) scores.push_back(eval(w));
  };
  auto record = [&](int gen, const std::vector<std::size_t>& order) {
    double sum = 0.0;
    for (const auto& s : scores) sum += s.fitness;
    result.history.push_back(GenerationRecord{gen, scores[order.front()].fitness, sum / static_cast<double>(pop_n)});
  };

  score_all();
  auto order = rank_order(scores);
  record(0, order);

  for (int gen = 1; gen <= params.generations; ++gen) {
    std::vector<WeightVector> next;
    next.reserve(pop_n);
    for (int e = 0; e < params.elite; ++e) next.push_back(pop[order[static_cast<std::size_t>(e)]]);
    for (std::size_t i = next.size(); i < pop_n; ++i) {
      Rng rng(stream_seed(params.seed, static_cast<std::uint64_t>(gen), i));
      const WeightVector& a = pop[tournament(scores, params.tournament_size, rng)];
      const WeightVector& b = pop[tournament(scores, params.tournament_size, rng)];
      WeightVector child = rng.bernoulli(params.crossover_prob) ? crossover_weights(a, b, rng) : a;
      if (rng.bernoulli(params.mutation_prob)) {
        child = sample_weights(&child, params.kappa, params.m_samp, params.eta, rng).weights;
      }
      next.push_back(std::move(child));
    }
    pop = std::move(next);
    score_all();
    order = rank_order(scores);
    record(gen, order);
  }

  result.best = pop[order.front()];
  result.best_score = scores[order.front()];
  result.inner_solves = eval.solves;
  return result;
}

namespace {

struct Pool {
  std::vector<double> waits;
  std::size_t departed = 0;
};

ConditionPanel summarize(const ConditionLabel& label, const Pool& pool, double hours) {
  ConditionPanel p;
  p.label = label;
  p.count = pool.waits.size();
  if (pool.waits.empty()) return p;
  const double n = static_cast<double>(pool.waits.size());
  p.avg_wait = std::accumulate(pool.waits.begin(), pool.waits.end(), 0.0) / n;
  double ss = 0.0;
  for (double w : pool.waits) ss += (w - p.avg_wait) * (w - p.avg_wait);
  p.std_wait = std::sqrt(ss / n);
  p.tail_95 = tail_95(std::span<const double>(pool.waits));
  p.throughput = static_cast<double>(pool.departed) / hours;
  return p;
}

double mean_avg_wait(const WeightVector& w, const std::vector<const SplitMember*>& members) {
  double sum = 0.0;
  for (const SplitMember* m : members) {
    const InnerSolution sol = solve_inner(w, m->instance);
    sum += relaxed_metrics(sol.z, m->instance, m->scenario).avg_wait;
  }
  return sum / static_cast<double>(members.size());
}

}  // namespace

BilevelReport FinalReporter::report(const DataSplit& split, const OuterGaParams& params, EvolutionResult evolution) {
  BilevelReport rep;
  rep.params = params;
  for (const auto& m : split.train) rep.train_names.push_back(m.name);
  for (const auto& m : split.validation) rep.validation_names.push_back(m.name);
  rep.test_names = split.test.names();
  rep.warnings = split.warnings;
  rep.warnings.insert(rep.warnings.end(), evolution.warnings.begin(), evolution.warnings.end());

  std::vector<std::string> test_warnings;
  const auto members = feasible_members(split.test.open(), test_warnings);
  rep.warnings.insert(rep.warnings.end(), test_warnings.begin(), test_warnings.end());

  std::map<ConditionLabel, Pool> pools;
  Pool overall;
  double hours = 0.0;
  for (const SplitMember* m : members) {
    const InnerSolution sol = solve_inner(evolution.best, m->instance);
    hours += static_cast<double>(m->scenario.horizon) / 3600.0;
    for (std::size_t i = 0; i < m->instance.n; ++i) {
      const double w = sol.z[static_cast<Eigen::Index>(i)] * m->instance.time_unit;
      const bool departed = m->instance.release[i] + w <= static_cast<double>(m->scenario.horizon);
      for (Pool* p : {&pools[m->scenario.condition_labels[i]], &overall}) {
        p->waits.push_back(w);
        if (departed) ++p->departed;
      }
    }
  }
  rep.test_overall = summarize(ConditionLabel{0, 0}, overall, hours);
  for (const auto& [label, pool] : pools) rep.test_panels.push_back(summarize(label, pool, hours));

  std::vector<double> initial;
  for (const auto& w : evolution.initial_population) initial.push_back(mean_avg_wait(w, members));
  std::sort(initial.begin(), initial.end());
  const std::size_t mid = initial.size() / 2;
  rep.initial_median_test_avg =
      initial.size() % 2 == 1 ? initial[mid] : 0.5 * (initial[mid - 1] + initial[mid]);
  rep.evolution = std::move(evolution);
  return rep;
}

namespace {

nlohmann::json panel_json(const ConditionPanel& p) {
  return {{"uav_class", p.label.uav_class},  {"weather_regime", p.label.weather_regime},
          {"count", p.count},                {"avg_wait", p.avg_wait},
          {"std_wait", p.std_wait},          {"tail_95", p.tail_95},
          {"throughput", p.throughput}};
}

nlohmann::json weights_json(const WeightVector& w) {
  nlohmann::json alpha = nlohmann::json::object();
  for (int j = 0; j < kSubsetCount; ++j) alpha[subset_label(j)] = w.alpha[static_cast<std::size_t>(j)];
  return {{"eta", w.eta}, {"alpha", alpha}};
}

}  // namespace

std::string report_to_json(const BilevelReport& r) {
  nlohmann::ordered_json j;
  const auto& p = r.params;
  j["params"] = {{"pop_size", p.pop_size},       {"generations", p.generations},
                 {"tournament_size", p.tournament_size}, {"crossover_prob", p.crossover_prob},
                 {"mutation_prob", p.mutation_prob},     {"kappa", p.kappa},
                 {"m_samp", p.m_samp},           {"elite", p.elite},
                 {"eta", p.eta},                 {"seed", p.seed}};
  j["split"] = {{"train", r.train_names}, {"validation", r.validation_names}, {"test", r.test_names}};
  j["best"] = weights_json(r.evolution.best);
  j["best_validation"] = {{"avg_wait", r.evolution.best_score.fitness},
                          {"std_wait", r.evolution.best_score.std_wait},
                          {"tail_95", r.evolution.best_score.tail_95},
                          {"penalty_total", r.evolution.best_score.penalty}};
  nlohmann::json gens = nlohmann::json::array();
  for (const auto& g : r.evolution.history) gens.push_back({{"generation", g.generation}, {"best", g.best}, {"mean", g.mean}});
  j["generations"] = gens;
  j["test_overall"] = panel_json(r.test_overall);
  nlohmann::json panels = nlohmann::json::array();
  for (const auto& pnl : r.test_panels) panels.push_back(panel_json(pnl));
  j["test_panels"] = panels;
  j["initial_population_median_test_avg_wait"] = r.initial_median_test_avg;
  j["inner_solves"] = r.evolution.inner_solves;
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

}  // namespace vsched

namespace vsched {

Scenario planted_mean_wait_scenario(std::uint64_t seed, int n) {
  if (n < 1) throw UsageError("planted scenario needs at least one request");
  constexpr Seconds kBin = 60;
  constexpr double kLow = 0.85;
  constexpr double kHigh = 0.99;
  Rng rng(stream_seed(seed, 0x706c));
  Scenario s;
  s.horizon = 2 * n * kBin;
  s.seed = seed;
  s.classes = {ClassSpec{1, 0.0, 1, 0, kDefaultServiceDemand, 1.0, PriorityTag::normal}};
  s.pads = {PadConfig{1, 1, 0}};
  s.pad_weights.bin_width = kBin;
  s.pad_weights.weights = {std::vector<double>(static_cast<std::size_t>(2 * n + 1), 1.0)};
  for (int i = 0; i < n; ++i) {
    const double load = kLow + (kHigh - kLow) * rng.uniform();
    const auto demand = static_cast<Seconds>(std::llround(load * static_cast<double>(kBin)));
    s.requests.push_back(UavRequest{i, 1, 2 * i * kBin, demand, PriorityTag::normal});
    s.condition_labels.push_back(ConditionLabel{1, 0});
  }
  validate(s);
  return s;
}

}  // namespace vsched
