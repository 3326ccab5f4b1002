#include "vsched/relaxation.hpp"

#include <cmath>
#include <map>
#include <numeric>

#include "vsched/errors.hpp"
#include "vsched/metrics.hpp"

namespace vsched {

RelaxedInstance build_relaxed_instance(const Scenario& scenario, const RelaxationOptions& options) {
  if (scenario.requests.empty()) throw ValidationError("cannot relax an empty scenario");
  const Seconds bw = options.bin_width > 0 ? options.bin_width : scenario.pad_weights.bin_width;
  if (bw <= 0) throw ValidationError("relaxation bin width must be positive");

  RelaxedInstance inst;
  inst.n = scenario.requests.size();
  inst.u_max = options.u_max;
  inst.tau = options.tau;
  inst.smooth_eps = options.smooth_eps;
  inst.cvar_width = options.cvar_width;
  inst.time_unit = static_cast<double>(bw);

  // (class row, bin) -> member requests with their loads.
  std::map<std::pair<std::size_t, Seconds>, std::vector<std::pair<int, double>>> bins;
  for (std::size_t i = 0; i < inst.n; ++i) {
    const UavRequest& r = scenario.requests[i];
    inst.release.push_back(static_cast<double>(r.release_time));
    inst.class_of.push_back(r.class_id);
    const std::size_t k = scenario.class_index(r.class_id);
    const double load = static_cast<double>(r.service_demand) /
                        (static_cast<double>(scenario.pads[k].pad_count) * static_cast<double>(bw));
    bins[{k, r.release_time / bw}].emplace_back(static_cast<int>(i), load);
  }

  std::map<std::pair<std::size_t, Seconds>, LoadRow> pad_rows;
  for (const auto& [key, members] : bins) {
    LoadRow& own = pad_rows[key];
    LoadRow& next = pad_rows[{key.first, key.second + 1}];
    for (const auto& [var, load] : members) {
      own.base += load;
      own.terms.emplace_back(var, -load);
      next.terms.emplace_back(var, load);
    }
  }
  const double pad_share = 1.0 / static_cast<double>(pad_rows.size());
  for (auto& [key, row] : pad_rows) {
    const int cls = scenario.pads[key.first].class_id;
    row.weight = pad_weight_clamped(scenario, cls, key.second * bw) * pad_share;
    inst.rows.push_back(std::move(row));
  }
  const double hold_share = options.hold_weight / static_cast<double>(inst.n);
  for (std::size_t i = 0; i < inst.n; ++i) {
    inst.rows.push_back(LoadRow{{{static_cast<int>(i), 1.0}}, 0.0, hold_share});
  }
  inst.validate();
  return inst;
}

RelaxedMetrics relaxed_metrics(const Eigen::VectorXd& z, const RelaxedInstance& inst, const Scenario& scenario) {
  std::vector<std::size_t> all(inst.n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return relaxed_metrics(z, inst, scenario, all);
}

RelaxedMetrics relaxed_metrics(const Eigen::VectorXd& z, const RelaxedInstance& inst, const Scenario& scenario,
                               const std::vector<std::size_t>& subset) {
  RelaxedMetrics m;
  m.count = subset.size();
  if (subset.empty()) return m;
  std::vector<double> waits;
  waits.reserve(subset.size());
  std::size_t departed = 0;
  for (std::size_t i : subset) {
    const double w = z[static_cast<Eigen::Index>(i)] * inst.time_unit;
    waits.push_back(w);
    const double start = inst.release[i] + w;
    const auto t = static_cast<Seconds>(std::floor(start));
    m.penalty_total += pad_weight_clamped(scenario, inst.class_of[i], t) * w;
    if (start <= static_cast<double>(scenario.horizon)) ++departed;
  }
  const double n = static_cast<double>(waits.size());
  m.avg_wait = std::accumulate(waits.begin(), waits.end(), 0.0) / n;
  double ss = 0.0;
  for (double w : waits) ss += (w - m.avg_wait) * (w - m.avg_wait);
  m.std_wait = std::sqrt(ss / n);
  m.tail_95 = tail_95(std::span<const double>(waits));
  m.throughput = static_cast<double>(departed) * 3600.0 / static_cast<double>(scenario.horizon);
  return m;
}

}  // namespace vsched
