#pragma once

#include <vector>

#include <Eigen/Dense>

#include "vsched/convex_inner.hpp"
#include "vsched/scenario.hpp"

namespace vsched {

struct RelaxationOptions {
  double u_max = 0.95;
  double tau = 0.1;
  double smooth_eps = 1e-6;
  double cvar_width = 1e-3;
  /// Total weight of the per-request holding rows relative to the pad rows.
  double hold_weight = 0.5;
  /// Width of the load bins and unit of z; 0 uses the scenario's pad-weight bins.
  Seconds bin_width = 0;
};

/// Spill model of the pad load. Request i of class k nominally occupies the
/// bin of its release time with load l_i = demand / (pads_k * bin_width);
/// waiting z_i (in bins) shifts l_i * z_i of it into the following bin.
///
///   pad row (k, b):  u = sum_{i in b} l_i - sum_{i in b} l_i z_i + sum_{i in b-1} l_i z_i
///   holding row i:   u = z_i
///
/// Pad rows carry w_k(bin start) / (#pad rows); holding rows share hold_weight.
/// The holding rows keep the map injective, so the load atom is strongly convex.
RelaxedInstance build_relaxed_instance(const Scenario& scenario, const RelaxationOptions& options = {});

/// Schedule statistics of a relaxed wait vector, in seconds.
struct RelaxedMetrics {
  double avg_wait = 0.0;
  double std_wait = 0.0;
  double tail_95 = 0.0;
  double penalty_total = 0.0;
  double throughput = 0.0;  // departures per hour within the horizon
  std::size_t count = 0;
};

RelaxedMetrics relaxed_metrics(const Eigen::VectorXd& z, const RelaxedInstance& inst, const Scenario& scenario);
/// Same statistics restricted to a subset of requests.
RelaxedMetrics relaxed_metrics(const Eigen::VectorXd& z, const RelaxedInstance& inst, const Scenario& scenario,
                               const std::vector<std::size_t>& subset);

}  // namespace vsched
