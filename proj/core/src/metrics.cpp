#include "vsched/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>

#include "vsched/errors.hpp"

namespace vsched {

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::avg_wait:
      return "avg_wait";
    case Metric::max_wait:
      return "max_wait";
    case Metric::std_wait:
      return "std_wait";
    case Metric::tail_95:
      return "tail_95";
    case Metric::pct_no_wait:
      return "pct_no_wait";
    case Metric::pct_long_wait:
      return "pct_long_wait";
    case Metric::penalty_total:
      return "penalty_total";
    case Metric::throughput:
      return "throughput";
  }
  return "?";
}

Metric metric_from_string(std::string_view name) {
  for (Metric m : {Metric::avg_wait, Metric::max_wait, Metric::std_wait, Metric::tail_95,
                   Metric::pct_no_wait, Metric::pct_long_wait, Metric::penalty_total,
                   Metric::throughput}) {
    if (to_string(m) == name) return m;
  }
  throw UsageError("unknown metric '" + std::string(name) + "'");
}

bool is_benefit_metric(Metric m) { return m == Metric::pct_no_wait || m == Metric::throughput; }

double metric_value(const MetricVector& v, Metric m) {
  switch (m) {
    case Metric::avg_wait:
      return v.avg_wait;
    case Metric::max_wait:
      return v.max_wait;
    case Metric::std_wait:
      return v.std_wait;
    case Metric::tail_95:
      return v.tail_95;
    case Metric::pct_no_wait:
      return v.pct_no_wait;
    case Metric::pct_long_wait:
      return v.pct_long_wait;
    case Metric::penalty_total:
      return v.penalty_total;
    case Metric::throughput:
      return v.throughput;
  }
  return 0.0;
}

namespace {

std::size_t tail_count(std::size_t n) { return (5 * n + 99) / 100; }

template <typename T>
double sorted_tail_mean(std::span<const T> samples) {
  if (samples.empty()) throw RangeError("tail_95 of an empty sample is undefined");
  std::vector<T> v(samples.begin(), samples.end());
  const std::size_t k = tail_count(v.size());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end(), std::greater<T>());
  long double sum = 0.0L;
  for (std::size_t i = 0; i < k; ++i) sum += static_cast<long double>(v[i]);
  return static_cast<double>(sum / static_cast<long double>(k));
}

}  // namespace

double tail_95(std::span<const Seconds> waits) { return sorted_tail_mean(waits); }
double tail_95(std::span<const double> samples) { return sorted_tail_mean(samples); }

double quantile_95(std::span<const Seconds> waits) {
  if (waits.empty()) throw RangeError("quantile of an empty sample is undefined");
  std::vector<Seconds> v(waits.begin(), waits.end());
  const std::size_t rank = (95 * v.size() + 99) / 100;  // 1-based nearest rank
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(rank - 1), v.end());
  return static_cast<double>(v[rank - 1]);
}

MetricVector wait_statistics(std::span<const Seconds> waits) {
  if (waits.empty()) throw RangeError("metrics of an empty wait vector are undefined");
  MetricVector m;
  m.count = waits.size();
  const double n = static_cast<double>(waits.size());
  Seconds max = 0;
  std::size_t no_wait = 0;
  std::size_t long_wait = 0;
  for (Seconds w : waits) {
    if (w < 0) throw ValidationError("wait times must be >= 0");
    m.total_wait += w;
    max = std::max(max, w);
    if (w == 0) ++no_wait;
    if (w > kLongWaitThreshold) ++long_wait;
  }
  m.avg_wait = static_cast<double>(m.total_wait) / n;
  m.max_wait = static_cast<double>(max);
  double ss = 0.0;
  for (Seconds w : waits) {
    const double d = static_cast<double>(w) - m.avg_wait;
    ss += d * d;
  }
  m.std_wait = std::sqrt(ss / n);
  m.tail_95 = tail_95(waits);
  m.pct_no_wait = static_cast<double>(no_wait) / n;
  m.pct_long_wait = static_cast<double>(long_wait) / n;
  return m;
}

MetricVector compute_metrics(std::span<const Seconds> waits, const Schedule& schedule,
                             const Scenario& scenario) {
  if (waits.size() != scenario.requests.size() || schedule.takeoffs.size() != waits.size()) {
    throw ValidationError("wait vector, schedule and scenario sizes disagree");
  }
  MetricVector m = wait_statistics(waits);
  std::size_t departed = 0;
  for (std::size_t i = 0; i < waits.size(); ++i) {
    const Seconds start = schedule.takeoffs[i].start;
    m.penalty_total +=
        pad_weight_clamped(scenario, scenario.requests[i].class_id, start) * static_cast<double>(waits[i]);
    if (start <= scenario.horizon) ++departed;
  }
  m.throughput = static_cast<double>(departed) * 3600.0 / static_cast<double>(scenario.horizon);
  return m;
}

double improvement_rate(const MetricVector& baseline, const MetricVector& candidate, Metric m) {
  const double base = metric_value(baseline, m);
  const double cand = metric_value(candidate, m);
  if (base == 0.0) {
    throw RangeError("improvement rate undefined: baseline " + std::string(to_string(m)) + " is zero");
  }
  const double delta = is_benefit_metric(m) ? (cand - base) : (base - cand);
  return delta / base * 100.0;
}

std::string format_duration(double seconds) {
  const long long total = std::llround(seconds);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02lldm %02llds", total / 60, total % 60);
  return buf;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string to_csv(const MetricTable& table) {
  std::ostringstream out;
  out << "metric";
  for (const auto& c : table.columns) out << ',' << c;
  out << '\n';

  struct Row {
    const char* label;
    std::function<std::string(const MetricVector&)> render;
  };
  const std::vector<Row> rows = {
      {"Avg. Wait Time", [](const MetricVector& v) { return format_duration(v.avg_wait); }},
      {"Max. Wait Time", [](const MetricVector& v) { return format_duration(v.max_wait); }},
      {"% No Wait", [](const MetricVector& v) { return fixed(100.0 * v.pct_no_wait, 2) + "%"; }},
      {"% Long Wait (>2min)", [](const MetricVector& v) { return fixed(100.0 * v.pct_long_wait, 2) + "%"; }},
      {"Avg. Wait (s)", [](const MetricVector& v) { return fixed(v.avg_wait, 3); }},
      {"Max. Wait (s)", [](const MetricVector& v) { return fixed(v.max_wait, 0); }},
      {"Std. Wait (s)", [](const MetricVector& v) { return fixed(v.std_wait, 3); }},
      {"CVaR95 Wait (s)", [](const MetricVector& v) { return fixed(v.tail_95, 3); }},
      {"Penalty Total", [](const MetricVector& v) { return fixed(v.penalty_total, 3); }},
      {"Throughput (/h)", [](const MetricVector& v) { return fixed(v.throughput, 3); }},
  };
  for (const auto& row : rows) {
    out << row.label;
    for (const auto& v : table.values) out << ',' << row.render(v);
    out << '\n';
  }

  if (table.baseline >= 0) {
    const MetricVector& base = table.values.at(static_cast<std::size_t>(table.baseline));
    const std::vector<std::pair<const char*, Metric>> improvements = {
        {"Improvement in Avg. Wait Time (%)", Metric::avg_wait},
        {"Improvement in Max. Wait Time (%)", Metric::max_wait},
        {"Improvement in % No Wait (%)", Metric::pct_no_wait},
        {"Improvement in % Long Wait (%)", Metric::pct_long_wait},
    };
    for (const auto& [label, metric] : improvements) {
      out << label;
      for (std::size_t c = 0; c < table.values.size(); ++c) {
        const bool skip = std::find(table.no_improvement.begin(), table.no_improvement.end(),
                                    static_cast<int>(c)) != table.no_improvement.end();
        if (skip || metric_value(base, metric) == 0.0) {
          out << ",--";
        } else {
          out << ',' << fixed(improvement_rate(base, table.values[c], metric), 2) << '%';
        }
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace vsched
