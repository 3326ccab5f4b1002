#pragma once

#include <cstdint>
#include <vector>

#include "vsched/scenario.hpp"

namespace vsched {

/// One contiguous block of pad time granted to a request.
struct Grant {
  int request = 0;  // index into Scenario::requests
  int pad = 0;      // pad index within the request's class
  Seconds start = 0;
  Seconds duration = 0;

  bool operator==(const Grant&) const = default;
};

/// The take-off (wait endpoint) of one request.
struct Takeoff {
  int pad = 0;
  Seconds start = 0;

  bool operator==(const Takeoff&) const = default;
};

struct Schedule {
  std::vector<Takeoff> takeoffs;  // aligned with Scenario::requests
  std::vector<Grant> grants;      // in the order they were issued

  bool operator==(const Schedule&) const = default;
};

using WaitVector = std::vector<Seconds>;

/// FNV-1a over (request, pad, start) of every take-off.
std::uint64_t schedule_digest(const Schedule& schedule);

/// Checks per-pad non-overlap and separation for all grants. Returns an
/// empty string when the schedule is consistent, else a description.
std::string check_pad_exclusivity(const Scenario& scenario, const Schedule& schedule);

}  // namespace vsched
