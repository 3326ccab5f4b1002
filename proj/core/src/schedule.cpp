#include "vsched/schedule.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <utility>

#include "vsched/random.hpp"

namespace vsched {

std::uint64_t schedule_digest(const Schedule& schedule) {
  std::uint64_t h = kFnvOffset;
  for (std::size_t i = 0; i < schedule.takeoffs.size(); ++i) {
    h = fnv1a_u64(i, h);
    h = fnv1a_u64(static_cast<std::uint64_t>(schedule.takeoffs[i].pad), h);
    h = fnv1a_u64(static_cast<std::uint64_t>(schedule.takeoffs[i].start), h);
  }
  return h;
}

std::string check_pad_exclusivity(const Scenario& scenario, const Schedule& schedule) {
  std::map<std::pair<int, int>, std::vector<Grant>> by_pad;
  for (const auto& g : schedule.grants) {
    const int cls = scenario.requests[static_cast<std::size_t>(g.request)].class_id;
    if (g.pad < 0 || g.pad >= scenario.pad_config(cls).pad_count) {
      return "grant for request " + std::to_string(g.request) + " uses a nonexistent pad";
    }
    by_pad[{cls, g.pad}].push_back(g);
  }
  for (auto& [key, grants] : by_pad) {
    std::sort(grants.begin(), grants.end(),
              [](const Grant& a, const Grant& b) { return a.start < b.start; });
    for (std::size_t i = 1; i < grants.size(); ++i) {
      const Grant& prev = grants[i - 1];
      const Seconds ready = prev.start + prev.duration + separation_at(scenario, key.first, prev.start);
      if (grants[i].start < ready) {
        return "class " + std::to_string(key.first) + " pad " + std::to_string(key.second) +
               ": grant at " + std::to_string(grants[i].start) + " violates separation (ready at " +
               std::to_string(ready) + ")";
      }
    }
  }
  return {};
}

}  // namespace vsched
