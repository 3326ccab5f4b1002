#include <doctest.h>

#include <algorithm>
#include <map>

#include "oracles.hpp"
#include "vsched/errors.hpp"
#include "vsched/rr_scheduler.hpp"

using namespace vsched;

TEST_CASE("single request on idle pads departs at once") {
  const Scenario s = testing::make_scenario(300, {PadConfig{1, 2, 0}}, {{1, 42, 30}});
  const RrResult r = rr_schedule(s);
  CHECK(r.waits == WaitVector{0});
  CHECK(r.schedule.takeoffs[0].start == 42);
}

TEST_CASE("two simultaneous requests on one pad are served in turn") {
  const Scenario s = testing::make_scenario(300, {PadConfig{1, 1, 0}}, {{1, 0, 30}, {1, 0, 30}});
  const RrResult r = rr_schedule(s, 30);
  CHECK(r.waits == WaitVector{0, 30});
}

TEST_CASE("long demands take several quanta and depart at the final grant") {
  // Demand 70 with quantum 30: grants of 30, 30, 10; the take-off is the
  // start of the third grant.
  const Scenario s = testing::make_scenario(300, {PadConfig{1, 1, 0}}, {{1, 0, 70}});
  const RrResult r = rr_schedule(s, 30);
  REQUIRE(r.schedule.grants.size() == 3);
  CHECK(r.schedule.grants[2].duration == 10);
  CHECK(r.waits == WaitVector{60});
}

TEST_CASE("non-positive quantum is rejected") {
  const Scenario s = testing::make_scenario(300, {PadConfig{1, 1, 0}}, {{1, 0, 30}});
  CHECK_THROWS_AS(rr_schedule(s, 0), UsageError);
}

TEST_CASE("RR matches the tick-replay oracle on 50 seeded scenarios") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CAPTURE(seed);
    const Scenario s = testing::random_scenario(seed, 20 + static_cast<int>(seed % 7) * 15);
    for (Seconds q : {Seconds{30}, Seconds{17}}) {
      const RrResult r = rr_schedule(s, q);
      CHECK(r.waits == testing::rr_tick_oracle(s, q));
    }
  }
}

TEST_CASE("RR matches the oracle on the desk-scale reference scenario") {
  const Scenario s = generate_scenario(reference_desk_spec(0));
  CHECK(rr_schedule(s).waits == testing::rr_tick_oracle(s, kDefaultQuantum));
}

TEST_CASE("grants never overlap or violate separation, and every request departs") {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const Scenario s = testing::random_scenario(seed, 80);
    const RrResult r = rr_schedule(s, 30);
    CHECK(check_pad_exclusivity(s, r.schedule).empty());
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(r.waits[i] >= 0);
      CHECK(r.schedule.takeoffs[i].start == s.requests[i].release_time + r.waits[i]);
    }
  }
}

TEST_CASE("with demands within one quantum RR is per-class FIFO") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Scenario s = testing::random_scenario(seed, 60);
    for (auto& req : s.requests) req.service_demand = std::min<Seconds>(req.service_demand, 30);
    const RrResult r = rr_schedule(s, 30);
    // FIFO: in release order, start on the earliest-free pad of the class.
    std::map<int, std::vector<Seconds>> free_at;
    for (const auto& p : s.pads) free_at[p.class_id].assign(static_cast<std::size_t>(p.pad_count), 0);
    WaitVector fifo(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto& q = s.requests[i];
      auto& f = free_at[q.class_id];
      auto it = std::min_element(f.begin(), f.end());
      const Seconds start = std::max(q.release_time, *it);
      *it = start + q.service_demand + testing::separation_oracle(s, q.class_id, start);
      fifo[i] = start - q.release_time;
    }
    CHECK(r.waits == fifo);
  }
}

TEST_CASE("waiting entries are served between two grants of the same request") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scenario s = testing::random_scenario(seed, 70);
    const RrResult r = rr_schedule(s, 20);
    const auto& g = r.schedule.grants;
    std::map<int, std::vector<std::size_t>> by_request;
    for (std::size_t k = 0; k < g.size(); ++k) by_request[g[k].request].push_back(k);
    auto cls = [&](int req) { return s.requests[static_cast<std::size_t>(req)].class_id; };

    for (const auto& [req, idx] : by_request) {
      for (std::size_t j = 0; j + 1 < idx.size(); ++j) {
        const std::size_t a = idx[j];
        const std::size_t b = idx[j + 1];
        const Seconds t = g[a].start;
        for (const auto& [other, oidx] : by_request) {
          if (other == req || cls(other) != cls(req)) continue;
          // Waiting at t: released, not in service, and still to be granted.
          if (s.requests[static_cast<std::size_t>(other)].release_time > t) continue;
          const auto before = std::find_if(oidx.rbegin(), oidx.rend(), [&](std::size_t k) { return k < a; });
          if (before != oidx.rend() && g[*before].start + g[*before].duration > t) continue;
          const bool pending = std::any_of(oidx.begin(), oidx.end(), [&](std::size_t k) { return k > a; });
          if (!pending) continue;
          const bool served = std::any_of(oidx.begin(), oidx.end(), [&](std::size_t k) { return k > a && k < b; });
          CHECK_MESSAGE(served, "request " << other << " skipped between grants " << a << " and " << b);
        }
      }
    }
  }
}

TEST_CASE("RR is deterministic") {
  const Scenario s = testing::random_scenario(9, 100);
  const RrResult a = rr_schedule(s);
  const RrResult b = rr_schedule(s);
  CHECK(a.schedule == b.schedule);
  CHECK(a.waits == b.waits);
  CHECK(a.cycles > 0);
}
