#include "vsched/ga_scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "vsched/errors.hpp"

namespace vsched {

std::string_view to_string(CostVariant v) {
  switch (v) {
    case CostVariant::v1:
      return "v1";
    case CostVariant::v2:
      return "v2";
    case CostVariant::v3:
      return "v3";
    case CostVariant::v4:
      return "v4";
    case CostVariant::v5:
      return "v5";
    case CostVariant::custom:
      return "custom";
  }
  return "?";
}

CostVariant variant_from_string(std::string_view s) {
  for (CostVariant v : {CostVariant::v1, CostVariant::v2, CostVariant::v3, CostVariant::v4, CostVariant::v5,
                        CostVariant::custom}) {
    if (to_string(v) == s) return v;
  }
  throw UsageError("unknown GA variant '" + std::string(s) + "'");
}

CostWeights CostWeights::preset(CostVariant variant) {
  CostWeights w;
  w.variant = variant;
  switch (variant) {
    case CostVariant::v1:
    case CostVariant::v2:
    case CostVariant::v3:
      break;
    case CostVariant::v4:
      w.max_delay_coeff = 200.0;
      break;
    case CostVariant::v5:
      w.max_delay_coeff = 200.0;
      w.alpha2 = 200.0;
      w.alpha3 = 400.0;
      break;
    case CostVariant::custom:
      break;
  }
  return w;
}

void CostWeights::validate() const {
  for (double a : {alpha1, alpha2, alpha3, max_delay_coeff}) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw ValidationError("cost weights must be finite and >= 0");
  }
  if (!(alpha1 > 0.0 || alpha2 > 0.0 || alpha3 > 0.0)) {
    throw ValidationError("at least one of alpha1, alpha2, alpha3 must be positive");
  }
  if (!(class1_penalty_scale >= 0.0 && class1_penalty_scale <= 1.0)) {
    throw ValidationError("class1_penalty_scale must lie in [0, 1]");
  }
}

void GaParams::validate() const {
  if (pop_size < 2) throw ValidationError("pop_size must be >= 2");
  if (generations < 0) throw ValidationError("generations must be >= 0");
  if (!(crossover_prob >= 0.0 && crossover_prob <= 1.0)) throw ValidationError("crossover_prob outside [0, 1]");
  if (!(mutation_prob >= 0.0 && mutation_prob <= 1.0)) throw ValidationError("mutation_prob outside [0, 1]");
  if (elite_count < 0 || elite_count >= pop_size) throw ValidationError("elite_count must be in [0, pop_size)");
  if (tournament_size < 1) throw ValidationError("tournament_size must be >= 1");
}

bool is_valid_permutation(const Chromosome& c, std::size_t n) {
  if (c.order.size() != n) return false;
  std::vector<char> seen(n, 0);
  for (int g : c.order) {
    if (g < 0 || static_cast<std::size_t>(g) >= n || seen[static_cast<std::size_t>(g)]) return false;
    seen[static_cast<std::size_t>(g)] = 1;
  }
  return true;
}

Decoded decode(const Chromosome& chromosome, const Scenario& scenario) {
  const std::size_t n = scenario.requests.size();
  if (!is_valid_permutation(chromosome, n)) {
    throw ValidationError("chromosome is not a permutation of the scenario's requests");
  }
  std::vector<std::vector<Seconds>> pad_free;
  pad_free.reserve(scenario.pads.size());
  for (const auto& p : scenario.pads) pad_free.emplace_back(static_cast<std::size_t>(p.pad_count), 0);

  Decoded out;
  out.schedule.takeoffs.assign(n, Takeoff{});
  out.schedule.grants.reserve(n);
  out.waits.assign(n, 0);
  for (int g : chromosome.order) {
    const auto idx = static_cast<std::size_t>(g);
    const UavRequest& r = scenario.requests[idx];
    auto& pads = pad_free[scenario.class_index(r.class_id)];
    const auto p = static_cast<std::size_t>(std::min_element(pads.begin(), pads.end()) - pads.begin());
    const Seconds start = std::max(r.release_time, pads[p]);
    pads[p] = start + r.service_demand + separation_at(scenario, r.class_id, start);
    out.schedule.takeoffs[idx] = Takeoff{static_cast<int>(p), start};
    out.schedule.grants.push_back(Grant{g, static_cast<int>(p), start, r.service_demand});
    out.waits[idx] = start - r.release_time;
  }
  return out;
}

namespace {

bool time_dependent(CostVariant v) { return v != CostVariant::v1 && v != CostVariant::v2; }
bool scales_class1(CostVariant v) { return v != CostVariant::v1; }

double row_mean(const std::vector<double>& row) {
  return std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
}

}  // namespace

double schedule_cost(std::span<const Seconds> waits, const Schedule& schedule, const Scenario& scenario,
                     const CostWeights& w) {
  if (waits.size() != scenario.requests.size() || schedule.takeoffs.size() != waits.size()) {
    throw ValidationError("wait vector, schedule and scenario sizes disagree");
  }
  if (waits.empty()) return 0.0;
  const MetricVector m = wait_statistics(waits);

  double penalty = 0.0;
  for (std::size_t i = 0; i < waits.size(); ++i) {
    if (waits[i] == 0) continue;
    const int cls = scenario.requests[i].class_id;
    double weight = time_dependent(w.variant)
                        ? pad_weight_clamped(scenario, cls, schedule.takeoffs[i].start)
                        : row_mean(scenario.pad_weights.weights[scenario.class_index(cls)]);
    if (cls == 1 && scales_class1(w.variant)) weight *= w.class1_penalty_scale;
    penalty += weight * static_cast<double>(waits[i]);
  }

  double cost = w.alpha1 * m.avg_wait + w.alpha2 * m.std_wait + w.alpha3 * m.tail_95 + penalty;
  if (w.variant == CostVariant::v4 || w.variant == CostVariant::v5 || w.variant == CostVariant::custom) {
    cost += w.max_delay_coeff * m.max_wait;
  }
  return cost;
}

Chromosome order_crossover(const Chromosome& a, const Chromosome& b, Rng& rng) {
  const std::size_t n = a.order.size();
  if (n != b.order.size()) throw ValidationError("crossover parents differ in length");
  if (n < 2) return a;
  std::size_t lo = rng.below(n);
  std::size_t hi = rng.below(n);
  if (lo > hi) std::swap(lo, hi);

  Chromosome child;
  child.order.assign(n, -1);
  std::vector<char> used(n, 0);
  for (std::size_t i = lo; i <= hi; ++i) {
    child.order[i] = a.order[i];
    used[static_cast<std::size_t>(a.order[i])] = 1;
  }
  std::size_t pos = (hi + 1) % n;
  for (std::size_t k = 0; k < n; ++k) {
    const int gene = b.order[(hi + 1 + k) % n];
    if (used[static_cast<std::size_t>(gene)]) continue;
    child.order[pos] = gene;
    pos = (pos + 1) % n;
  }
  return child;
}

void swap_mutation(Chromosome& c, Rng& rng) {
  const std::size_t n = c.order.size();
  if (n < 2) return;
  const std::size_t i = rng.below(n);
  std::size_t j = rng.below(n - 1);
  if (j >= i) ++j;
  std::swap(c.order[i], c.order[j]);
}

std::string EvolutionTrace::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "generation,best,mean\n";
  for (std::size_t g = 0; g < best.size(); ++g) out << g << ',' << best[g] << ',' << mean[g] << '\n';
  return out.str();
}

namespace {

struct Individual {
  Chromosome genes;
  double cost = 0.0;
};

double evaluate(const Chromosome& c, const Scenario& s, const CostWeights& w) {
  const Decoded d = decode(c, s);
  return schedule_cost(d.waits, d.schedule, s, w);
}

// Index order by (cost, index); a fixed reduction so ties resolve identically
// however the costs were computed.
std::vector<std::size_t> ranking(const std::vector<Individual>& pop) {
  std::vector<std::size_t> idx(pop.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return pop[x].cost < pop[y].cost; });
  return idx;
}

std::size_t tournament(const std::vector<Individual>& pop, int size, Rng& rng) {
  std::size_t best = rng.below(pop.size());
  for (int k = 1; k < size; ++k) {
    const std::size_t c = rng.below(pop.size());
    if (pop[c].cost < pop[best].cost || (pop[c].cost == pop[best].cost && c < best)) best = c;
  }
  return best;
}

}  // namespace

GaResult ga_optimize(const Scenario& scenario, const CostWeights& weights, const GaParams& params) {
  weights.validate();
  params.validate();
  const std::size_t n = scenario.requests.size();
  if (n == 0) throw ValidationError("cannot schedule an empty scenario");
  Rng rng(stream_seed(params.seed, 0x6761));

  std::vector<Individual> pop(static_cast<std::size_t>(params.pop_size));
  for (auto& ind : pop) {
    ind.genes.order.resize(n);
    std::iota(ind.genes.order.begin(), ind.genes.order.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(ind.genes.order[i - 1], ind.genes.order[rng.below(i)]);
    ind.cost = evaluate(ind.genes, scenario, weights);
  }

  GaResult result;
  Individual best_ever = pop[ranking(pop).front()];
  auto record = [&] {
    double sum = 0.0;
    for (const auto& ind : pop) sum += ind.cost;
    result.trace.best.push_back(best_ever.cost);
    result.trace.mean.push_back(sum / static_cast<double>(pop.size()));
  };
  record();

  for (int gen = 0; gen < params.generations; ++gen) {
    const auto order = ranking(pop);
    std::vector<Individual> next;
    next.reserve(pop.size());
    for (int e = 0; e < params.elite_count; ++e) next.push_back(pop[order[static_cast<std::size_t>(e)]]);
    while (next.size() < pop.size()) {
      const Individual& p1 = pop[tournament(pop, params.tournament_size, rng)];
      const Individual& p2 = pop[tournament(pop, params.tournament_size, rng)];
      Individual child;
      child.genes = rng.bernoulli(params.crossover_prob) ? order_crossover(p1.genes, p2.genes, rng) : p1.genes;
      if (rng.bernoulli(params.mutation_prob)) swap_mutation(child.genes, rng);
      child.cost = evaluate(child.genes, scenario, weights);
      next.push_back(std::move(child));
    }
    pop = std::move(next);
    const Individual& gen_best = pop[ranking(pop).front()];
    if (gen_best.cost < best_ever.cost) best_ever = gen_best;
    record();
  }

  Decoded d = decode(best_ever.genes, scenario);
  result.best = std::move(best_ever.genes);
  result.cost = best_ever.cost;
  result.metrics = compute_metrics(d.waits, d.schedule, scenario);
  result.schedule = std::move(d.schedule);
  result.waits = std::move(d.waits);
  return result;
}

Triplet emit_triplet(const TripletContext& context, const Scenario& scenario, const CostWeights& weights,
                     const Schedule& schedule, std::span<const Seconds> waits, const MetricVector& metrics) {
  Triplet t;
  t.prompt_id = context.prompt_id;
  t.prompt_text = context.prompt_text;
  t.fitness = schedule_cost(waits, schedule, scenario, weights);
  t.sense = ObjectiveSense::minimize;
  t.solution.metrics = metrics;
  t.solution.schedule_digest = to_hex(schedule_digest(schedule));
  t.timestamp = context.timestamp;
  t.user_id = context.user_id;
  t.domain = context.domain;
  return t;
}

}  // namespace vsched
