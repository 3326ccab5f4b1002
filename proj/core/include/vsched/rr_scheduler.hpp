#pragma once

#include <deque>
#include <vector>

#include "vsched/schedule.hpp"

namespace vsched {

inline constexpr Seconds kDefaultQuantum = 30;

/// Queue entry of the Round-Robin scheduler.
struct RrEntry {
  int request = 0;
  Seconds remaining = 0;
};

/// Per-class state. Classes own disjoint pads, so each advances on its own
/// clock; the scheduler visits them in ascending class order once per cycle.
struct RrState {
  int cycle_index = 0;
  std::vector<std::deque<RrEntry>> queues;           // per class
  std::vector<std::vector<Seconds>> pad_free_times;  // per class, per pad
  std::vector<Seconds> clock;                        // per class, last decision time
};

struct RrResult {
  Schedule schedule;
  WaitVector waits;
  int cycles = 0;
};

/// Round-Robin with a fixed quantum. Each visit grants min(quantum, remaining)
/// on the earliest-free pad of the class (lowest index on ties) and decrements
/// remaining by the quantum; a request takes off at the start of its final
/// grant. Requests re-enter the tail of their class queue when a grant ends;
/// arrivals at the same instant queue ahead of re-entries.
RrResult rr_schedule(const Scenario& scenario, Seconds quantum = kDefaultQuantum);

}  // namespace vsched
