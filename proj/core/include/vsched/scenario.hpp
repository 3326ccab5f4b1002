#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vsched {

/// All schedule arithmetic is in whole seconds.
using Seconds = std::int64_t;

inline constexpr int kMinClassId = 1;
inline constexpr int kMaxClassId = 3;
inline constexpr Seconds kDefaultServiceDemand = 30;

enum class PriorityTag { normal, medical, cargo };

std::string_view to_string(PriorityTag tag);
PriorityTag priority_from_string(std::string_view s);

struct UavRequest {
  int id = 0;
  int class_id = 1;
  Seconds release_time = 0;
  Seconds service_demand = kDefaultServiceDemand;
  PriorityTag priority = PriorityTag::normal;

  bool operator==(const UavRequest&) const = default;
};

struct PadConfig {
  int class_id = 1;
  int pad_count = 1;
  /// Minimum gap between consecutive take-offs on one pad.
  Seconds separation = 0;

  bool operator==(const PadConfig&) const = default;
};

/// Piecewise-constant pad weights w_k(t): weights[class index][bin].
struct PadWeightProfile {
  Seconds bin_width = 60;
  std::vector<std::vector<double>> weights;

  bool operator==(const PadWeightProfile&) const = default;
};

/// A step of the weather schedule, active on [start, end).
struct WeatherRegime {
  Seconds start = 0;
  Seconds end = 0;
  double weight_multiplier = 1.0;
  double separation_multiplier = 1.0;

  bool operator==(const WeatherRegime&) const = default;
};

struct ClassSpec {
  int class_id = 1;
  /// Poisson arrival rate, requests per second.
  double rate = 0.0;
  int pad_count = 1;
  Seconds separation = 0;
  Seconds service_demand = kDefaultServiceDemand;
  double base_weight = 1.0;
  PriorityTag priority = PriorityTag::normal;

  bool operator==(const ClassSpec&) const = default;
};

struct GenerationSpec {
  Seconds horizon = 3600;
  std::uint64_t seed = 0;
  Seconds bin_width = 60;
  std::vector<ClassSpec> classes;
  std::vector<WeatherRegime> weather;
};

/// Stratification label of one request. weather_regime is the 1-based index of
/// the weather step containing the release time, 0 for nominal conditions.
struct ConditionLabel {
  int uav_class = 1;
  int weather_regime = 0;

  bool operator==(const ConditionLabel&) const = default;
  auto operator<=>(const ConditionLabel&) const = default;
};

struct Scenario {
  Seconds horizon = 0;
  std::vector<UavRequest> requests;  // sorted by (release_time, id)
  std::vector<PadConfig> pads;       // one per class, ascending class_id
  PadWeightProfile pad_weights;      // rows aligned with `pads`
  std::uint64_t seed = 0;
  std::vector<ConditionLabel> condition_labels;  // aligned with `requests`

  // Generation provenance, kept so a scenario serializes without loss.
  std::vector<ClassSpec> classes;
  std::vector<WeatherRegime> weather;

  bool operator==(const Scenario&) const = default;

  /// Row of `pads` / `pad_weights` for a class; throws RangeError if absent.
  std::size_t class_index(int class_id) const;
  const PadConfig& pad_config(int class_id) const { return pads[class_index(class_id)]; }
  std::size_t size() const noexcept { return requests.size(); }
};

/// Poisson arrivals per class; a pure function of the spec (including seed).
Scenario generate_scenario(const GenerationSpec& spec);

/// Desk-scale reference scenario: ~500 requests over one hour, three classes,
/// one adverse-weather window.
GenerationSpec reference_desk_spec(std::uint64_t seed);

/// Throws ValidationError on any broken invariant.
void validate(const Scenario& scenario);

/// weights[class, floor(t / bin_width)]; RangeError outside [0, horizon].
double pad_weight(const Scenario& scenario, int class_id, Seconds t);

/// Same lookup with t clamped into [0, horizon]; schedules may run past the
/// horizon while draining.
double pad_weight_clamped(const Scenario& scenario, int class_id, Seconds t);

/// Pad separation after a take-off starting at t, scaled by the weather step.
Seconds separation_at(const Scenario& scenario, int class_id, Seconds t);

int weather_regime_at(const std::vector<WeatherRegime>& weather, Seconds t);

Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::string& path);
std::string serialize_scenario(const Scenario& scenario);
void save_scenario(const Scenario& scenario, const std::string& path);

}  // namespace vsched
