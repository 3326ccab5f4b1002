#pragma once

#include <cstdint>
#include <string>

#include "vsched/metrics.hpp"

namespace vsched {

enum class ObjectiveSense { minimize, maximize };

struct SolutionSummary {
  MetricVector metrics;
  std::string schedule_digest;  // hex FNV-1a of the take-off table; empty for prompt runs

  bool operator==(const SolutionSummary&) const = default;
};

/// A (prompt, fitness, solution) record.
struct Triplet {
  std::string prompt_id;
  std::string prompt_text;
  double fitness = 0.0;
  ObjectiveSense sense = ObjectiveSense::minimize;
  SolutionSummary solution;
  std::int64_t timestamp = 0;  // logical clock supplied by the caller
  std::string user_id;
  std::string domain;

  bool operator==(const Triplet&) const = default;

  /// Fitness oriented so that larger is better.
  double merit() const { return sense == ObjectiveSense::maximize ? fitness : -fitness; }
};

}  // namespace vsched
