#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vsched/convex_inner.hpp"
#include "vsched/random.hpp"
#include "vsched/relaxation.hpp"
#include "vsched/scenario.hpp"

namespace vsched {

using SimplexPoint = std::array<double, kSubsetCount>;

struct OuterGaParams {
  int pop_size = 60;
  int generations = 80;
  int tournament_size = 3;
  double crossover_prob = 0.8;
  double mutation_prob = 0.2;
  double kappa = 4.0;
  int m_samp = 32;
  int elite = 1;
  double eta = 0.05;
  std::uint64_t seed = 0;

  /// Hard errors (ValidationError) for unusable values.
  void validate() const;
  /// Soft warnings for values outside the recommended ranges.
  std::vector<std::string> range_warnings() const;
};

/// alpha = eta * e_{4} + (1 - eta) * raw. Throws ValidationError when raw is
/// off the simplex by more than 1e-9.
WeightVector eta_safe_project(const SimplexPoint& raw, double eta);

struct WeightDraw {
  WeightVector weights;
  std::array<int, kSubsetCount> counts{};  // multinomial counts, summing to m_samp
};

/// Dirichlet-Multinomial draw: shapes kappa / 15 without a parent, otherwise
/// kappa * parent.raw; raw = counts / m_samp; then the eta-safe projection.
WeightDraw sample_weights(const WeightVector* parent, double kappa, int m_samp, double eta, Rng& rng);

/// Arithmetic crossover of the raw (unprojected) points, then projection.
WeightVector crossover_weights(const WeightVector& a, const WeightVector& b, double lambda);
WeightVector crossover_weights(const WeightVector& a, const WeightVector& b, Rng& rng);

/// Scenario-level stratum: dominant class and weather (number of adverse regimes).
struct StratumKey {
  int dominant_class = 1;
  int weather = 0;

  auto operator<=>(const StratumKey&) const = default;
};

StratumKey stratum_of(const Scenario& scenario);

struct SplitMember {
  std::string name;
  Scenario scenario;
  RelaxedInstance instance;
};

class FinalReporter;

/// Held-out scenarios. Contents are reachable only through FinalReporter;
/// every access is counted.
class SealedTestSet {
 public:
  std::size_t size() const noexcept { return members_.size(); }
  std::size_t reads() const noexcept { return reads_; }
  std::vector<std::string> names() const;

 private:
  friend class FinalReporter;
  friend struct DataSplitBuilder;
  const std::vector<SplitMember>& open() const {
    ++reads_;
    return members_;
  }
  std::vector<SplitMember> members_;
  mutable std::size_t reads_ = 0;
};

struct DataSplit {
  std::vector<SplitMember> train;
  std::vector<SplitMember> validation;
  SealedTestSet test;
  std::vector<std::string> warnings;
};

/// Stratified three-way split; strata are shuffled with `seed` and dealt in
/// turn to train, validation and test. Needs at least three scenarios.
DataSplit stratified_split(std::vector<std::pair<std::string, Scenario>> scenarios, std::uint64_t seed,
                           const RelaxationOptions& relax = {});

/// Validation score of one genome; compared lexicographically.
struct GenomeScore {
  double fitness = 0.0;  // mean validation avg wait (s)
  double std_wait = 0.0;
  double tail_95 = 0.0;
  double penalty = 0.0;
};

inline constexpr double kTieTolerance = 1e-9;

/// True if `a` ranks strictly ahead of `b`: fitness first, then std, tail and
/// penalty, with differences within kTieTolerance treated as ties.
bool ranks_before(const GenomeScore& a, const GenomeScore& b);

struct GenerationRecord {
  int generation = 0;
  double best = 0.0;  // fitness of the population's top-ranked genome
  double mean = 0.0;
};

struct EvolutionResult {
  WeightVector best;
  GenomeScore best_score;
  std::vector<GenerationRecord> history;
  std::vector<WeightVector> initial_population;
  std::vector<std::string> warnings;
  std::size_t inner_solves = 0;
};

/// Outer GA over weight vectors. Reads train and validation only.
EvolutionResult evolve_weights(const DataSplit& split, const OuterGaParams& params);

struct ConditionPanel {
  ConditionLabel label;
  std::size_t count = 0;
  double avg_wait = 0.0;
  double std_wait = 0.0;
  double tail_95 = 0.0;
  double throughput = 0.0;  // departures per hour within the pooled horizons
};

struct BilevelReport {
  OuterGaParams params;
  EvolutionResult evolution;
  std::vector<std::string> train_names;
  std::vector<std::string> validation_names;
  std::vector<std::string> test_names;
  ConditionPanel test_overall;
  std::vector<ConditionPanel> test_panels;  // one per (class, weather) stratum present
  double initial_median_test_avg = 0.0;
  std::vector<std::string> warnings;
};

/// The only reader of the test split.
class FinalReporter {
 public:
  static BilevelReport report(const DataSplit& split, const OuterGaParams& params, EvolutionResult evolution);
};

std::string report_to_json(const BilevelReport& report);

/// Toy scenario on which the mean-wait atom alone is the best focus: n
/// requests of one class on one pad, each alone in a two-minute slot, with
/// service demands drawn so every slot's load lies in [0.85, 0.99) of a bin.
Scenario planted_mean_wait_scenario(std::uint64_t seed, int n = 30);

}  // namespace vsched
