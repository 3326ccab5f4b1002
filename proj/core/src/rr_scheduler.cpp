#include "vsched/rr_scheduler.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <tuple>

#include "vsched/errors.hpp"

namespace vsched {

namespace {

struct Requeue {
  Seconds ready;
  long long seq;
  RrEntry entry;
  bool operator>(const Requeue& o) const { return std::tie(ready, seq) > std::tie(o.ready, o.seq); }
};

class ClassRunner {
 public:
  ClassRunner(const Scenario& scenario, int class_id, Seconds quantum, std::deque<RrEntry>& queue,
              std::vector<Seconds>& pad_free, Seconds& clock)
      : scenario_(scenario), class_id_(class_id), quantum_(quantum), queue_(queue),
        pad_free_(pad_free), clock_(clock) {
    for (std::size_t i = 0; i < scenario.requests.size(); ++i) {
      if (scenario.requests[i].class_id == class_id) arrivals_.push_back(static_cast<int>(i));
    }
  }

  bool done() const { return departed_ == arrivals_.size(); }

  /// Issues one grant.
  void step(RrResult& out) {
    const auto p = static_cast<std::size_t>(
        std::min_element(pad_free_.begin(), pad_free_.end()) - pad_free_.begin());
    // Decision times never move backwards: entries admitted at an earlier
    // decision may have become ready after this pad went idle.
    Seconds t = std::max(pad_free_[p], clock_);
    admit(t);
    if (queue_.empty()) {
      t = next_ready_time();
      admit(t);
    }
    clock_ = t;
    RrEntry e = queue_.front();
    queue_.pop_front();

    const Seconds granted = std::min(quantum_, e.remaining);
    out.schedule.grants.push_back(Grant{e.request, static_cast<int>(p), t, granted});
    pad_free_[p] = t + granted + separation_at(scenario_, class_id_, t);
    e.remaining -= quantum_;
    if (e.remaining <= 0) {
      const auto idx = static_cast<std::size_t>(e.request);
      out.schedule.takeoffs[idx] = Takeoff{static_cast<int>(p), t};
      out.waits[idx] = t - scenario_.requests[idx].release_time;
      ++departed_;
    } else {
      requeues_.push(Requeue{t + granted, seq_++, e});
    }
  }

 private:
  Seconds next_ready_time() const {
    Seconds t = std::numeric_limits<Seconds>::max();
    if (next_arrival_ < arrivals_.size()) {
      t = scenario_.requests[static_cast<std::size_t>(arrivals_[next_arrival_])].release_time;
    }
    if (!requeues_.empty()) t = std::min(t, requeues_.top().ready);
    return t;
  }

  // Moves everything ready by time t into the queue, ordered by ready time,
  // arrivals before re-entries at equal times.
  void admit(Seconds t) {
    while (true) {
      const bool has_arrival =
          next_arrival_ < arrivals_.size() &&
          scenario_.requests[static_cast<std::size_t>(arrivals_[next_arrival_])].release_time <= t;
      const bool has_requeue = !requeues_.empty() && requeues_.top().ready <= t;
      if (!has_arrival && !has_requeue) return;
      bool take_arrival = has_arrival;
      if (has_arrival && has_requeue) {
        const Seconds ra = scenario_.requests[static_cast<std::size_t>(arrivals_[next_arrival_])].release_time;
        take_arrival = ra <= requeues_.top().ready;
      }
      if (take_arrival) {
        const int idx = arrivals_[next_arrival_++];
        queue_.push_back(RrEntry{idx, scenario_.requests[static_cast<std::size_t>(idx)].service_demand});
      } else {
        queue_.push_back(requeues_.top().entry);
        requeues_.pop();
      }
    }
  }

  const Scenario& scenario_;
  int class_id_;
  Seconds quantum_;
  std::deque<RrEntry>& queue_;
  std::vector<Seconds>& pad_free_;
  Seconds& clock_;
  std::vector<int> arrivals_;  // request indices, already in (release, id) order
  std::size_t next_arrival_ = 0;
  std::size_t departed_ = 0;
  long long seq_ = 0;
  std::priority_queue<Requeue, std::vector<Requeue>, std::greater<>> requeues_;
};

}  // namespace

RrResult rr_schedule(const Scenario& scenario, Seconds quantum) {
  if (quantum <= 0) throw UsageError("quantum must be positive");
  RrResult out;
  out.schedule.takeoffs.assign(scenario.requests.size(), Takeoff{});
  out.waits.assign(scenario.requests.size(), 0);

  RrState state;
  const std::size_t classes = scenario.pads.size();
  state.queues.resize(classes);
  state.clock.assign(classes, 0);
  for (const auto& pad : scenario.pads) {
    state.pad_free_times.emplace_back(static_cast<std::size_t>(pad.pad_count), 0);
  }
  std::vector<ClassRunner> runners;
  runners.reserve(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    runners.emplace_back(scenario, scenario.pads[c].class_id, quantum, state.queues[c],
                         state.pad_free_times[c], state.clock[c]);
  }

  while (true) {
    bool any = false;
    for (auto& runner : runners) {
      if (runner.done()) continue;
      runner.step(out);
      any = true;
    }
    if (!any) break;
    ++state.cycle_index;
  }
  out.cycles = state.cycle_index;
  return out;
}

}  // namespace vsched
