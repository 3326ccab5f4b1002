#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vsched/metrics.hpp"
#include "vsched/random.hpp"
#include "vsched/schedule.hpp"
#include "vsched/triplet.hpp"

namespace vsched {

/// Fitness-function variants of the take-off sequencing GA.
///   v1  wait terms + fixed (time-averaged) pad penalties
///   v2  v1 with Class-1 penalties scaled down
///   v3  v2 with time-dependent pad weights w_k(t)
///   v4  v3 plus a max-delay term
///   v5  alpha-weighted mean / std / tail form with v3 penalties
///   custom  externally supplied weights; every term active
enum class CostVariant { v1, v2, v3, v4, v5, custom };

std::string_view to_string(CostVariant v);
CostVariant variant_from_string(std::string_view s);

struct CostWeights {
  double alpha1 = 1.0;  // mean wait
  double alpha2 = 0.0;  // wait standard deviation
  double alpha3 = 0.0;  // CVaR_0.95 tail
  CostVariant variant = CostVariant::v1;
  double max_delay_coeff = 0.0;
  double class1_penalty_scale = 0.25;

  /// Default weights for a variant.
  static CostWeights preset(CostVariant variant);
  void validate() const;
};

struct GaParams {
  int pop_size = 100;
  int generations = 300;
  double crossover_prob = 0.85;
  double mutation_prob = 0.2;
  int elite_count = 2;
  int tournament_size = 3;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Priority list over request indices (positions in Scenario::requests).
struct Chromosome {
  std::vector<int> order;

  bool operator==(const Chromosome&) const = default;
};

bool is_valid_permutation(const Chromosome& c, std::size_t n);

struct Decoded {
  Schedule schedule;
  WaitVector waits;
};

/// Greedy list scheduling: in chromosome order, each request starts at
/// max(release, earliest pad free time of its class).
Decoded decode(const Chromosome& chromosome, const Scenario& scenario);

double schedule_cost(std::span<const Seconds> waits, const Schedule& schedule, const Scenario& scenario,
                     const CostWeights& weights);

Chromosome order_crossover(const Chromosome& a, const Chromosome& b, Rng& rng);
void swap_mutation(Chromosome& c, Rng& rng);

struct EvolutionTrace {
  std::vector<double> best;  // best-ever cost after each generation (index 0 = initial)
  std::vector<double> mean;  // population mean cost

  std::string to_csv() const;
};

struct GaResult {
  Chromosome best;
  Schedule schedule;
  WaitVector waits;
  MetricVector metrics;
  double cost = 0.0;
  EvolutionTrace trace;
};

GaResult ga_optimize(const Scenario& scenario, const CostWeights& weights, const GaParams& params);

struct TripletContext {
  std::string prompt_id;
  std::string prompt_text;
  std::string user_id;
  std::string domain = "uav-takeoff-scheduling";
  std::int64_t timestamp = 0;
};

/// Packages a finished run for the registry; fitness is the schedule cost.
Triplet emit_triplet(const TripletContext& context, const Scenario& scenario, const CostWeights& weights,
                     const Schedule& schedule, std::span<const Seconds> waits, const MetricVector& metrics);

}  // namespace vsched
