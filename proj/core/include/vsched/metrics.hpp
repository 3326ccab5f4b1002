#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vsched/schedule.hpp"

namespace vsched {

/// Wait threshold for the "% Long Wait (>2min)" statistic.
inline constexpr Seconds kLongWaitThreshold = 120;
inline constexpr double kTailLevel = 0.95;

struct MetricVector {
  double avg_wait = 0.0;
  double max_wait = 0.0;
  double std_wait = 0.0;       // population standard deviation
  double tail_95 = 0.0;        // CVaR_0.95, mean of the worst ceil(0.05 n) waits
  double pct_no_wait = 0.0;    // fraction with wait == 0
  double pct_long_wait = 0.0;  // fraction with wait > 120 s
  double penalty_total = 0.0;  // sum of w_k(start) * wait
  double throughput = 0.0;     // take-offs per hour within the horizon
  Seconds total_wait = 0;
  std::size_t count = 0;

  bool operator==(const MetricVector&) const = default;
};

enum class Metric {
  avg_wait,
  max_wait,
  std_wait,
  tail_95,
  pct_no_wait,
  pct_long_wait,
  penalty_total,
  throughput,
};

std::string_view to_string(Metric m);
Metric metric_from_string(std::string_view name);
/// Benefit-like metrics improve upward (pct_no_wait, throughput).
bool is_benefit_metric(Metric m);
double metric_value(const MetricVector& v, Metric m);

/// Statistics that depend only on the waits (penalty and throughput left 0).
MetricVector wait_statistics(std::span<const Seconds> waits);

MetricVector compute_metrics(std::span<const Seconds> waits, const Schedule& schedule,
                             const Scenario& scenario);

/// CVaR_0.95 by the sorted-tail definition: the mean of the worst
/// ceil(0.05 n) samples.
double tail_95(std::span<const Seconds> waits);
double tail_95(std::span<const double> samples);

/// Nearest-rank empirical 95th percentile (diagnostic only).
double quantile_95(std::span<const Seconds> waits);

/// Signed percentage improvement of `candidate` over `baseline`; positive is
/// better for both cost-like and benefit-like metrics.
double improvement_rate(const MetricVector& baseline, const MetricVector& candidate, Metric m);

/// "12m 18s" style duration used by the comparison tables.
std::string format_duration(double seconds);

/// A comparison table: one column per algorithm run.
struct MetricTable {
  std::vector<std::string> columns;
  std::vector<MetricVector> values;
  /// Column used as the improvement baseline; -1 disables improvement rows.
  int baseline = -1;
  /// Columns that get no improvement entry (rendered as "--").
  std::vector<int> no_improvement;
};

/// CSV with metric rows and "Improvement in ..." rows.
std::string to_csv(const MetricTable& table);

}  // namespace vsched
