#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

#include <unistd.h>

#include "vsched/embedding.hpp"
#include "vsched/json_support.hpp"
#include "vsched/random.hpp"

namespace vsched::testing {

namespace fs = std::filesystem;

Scenario make_scenario(Seconds horizon, const std::vector<PadConfig>& pads, const std::vector<RequestSpec>& requests,
                       const std::vector<WeatherRegime>& weather) {
  json doc;
  doc["horizon"] = horizon;
  doc["classes"] = json::array();
  for (const auto& p : pads) {
    doc["classes"].push_back({{"class_id", p.class_id}, {"pad_count", p.pad_count}, {"separation", p.separation}});
  }
  doc["weather"] = json::array();
  for (const auto& w : weather) {
    doc["weather"].push_back({{"start", w.start},
                              {"end", w.end},
                              {"weight_multiplier", w.weight_multiplier},
                              {"separation_multiplier", w.separation_multiplier}});
  }
  doc["requests"] = json::array();
  for (std::size_t i = 0; i < requests.size(); ++i) {
    doc["requests"].push_back({{"id", static_cast<int>(i)},
                               {"class_id", requests[i].class_id},
                               {"release_time", requests[i].release},
                               {"service_demand", requests[i].demand}});
  }
  return parse_scenario(doc.dump());
}

Scenario random_scenario(std::uint64_t seed, int n_hint) {
  std::mt19937_64 gen(seed * 7919 + 13);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); };
  const Seconds horizon = 60 * pick(10, 30);
  const int classes = pick(1, 3);
  std::vector<PadConfig> pads;
  for (int c = 1; c <= classes; ++c) pads.push_back(PadConfig{c, pick(1, 3), 5 * pick(0, 4)});
  const Seconds demands[] = {10, 20, 30, 30, 45, 60, 75, 90};
  std::vector<RequestSpec> reqs;
  for (int i = 0; i < n_hint; ++i) {
    reqs.push_back(RequestSpec{pick(1, classes), pick(0, static_cast<int>(horizon)), demands[pick(0, 7)]});
  }
  std::vector<WeatherRegime> weather;
  if (pick(0, 1) == 1) {
    const Seconds start = 60 * pick(0, static_cast<int>(horizon / 120));
    weather.push_back(WeatherRegime{start, start + 60 * pick(2, 8), 2.0, 1.5});
  }
  return make_scenario(horizon, pads, reqs, weather);
}

Seconds separation_oracle(const Scenario& s, int class_id, Seconds t) {
  Seconds base = 0;
  for (const auto& p : s.pads) {
    if (p.class_id == class_id) base = p.separation;
  }
  const Seconds tc = std::min(std::max<Seconds>(t, 0), s.horizon);
  for (const auto& w : s.weather) {
    if (w.start <= tc && tc < w.end) return std::llround(static_cast<double>(base) * w.separation_multiplier);
  }
  return base;
}

WaitVector rr_tick_oracle(const Scenario& s, Seconds quantum) {
  WaitVector waits(s.size(), -1);
  for (const auto& pad : s.pads) {
    struct Entry {
      int req;
      Seconds remaining;
    };
    struct Pending {
      Seconds ready;
      Entry e;
    };
    std::vector<int> mine;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.requests[i].class_id == pad.class_id) mine.push_back(static_cast<int>(i));
    }
    std::deque<Entry> queue;
    std::vector<Pending> pending;  // in issue order
    std::vector<Seconds> free_at(static_cast<std::size_t>(pad.pad_count), 0);
    std::size_t next = 0;
    std::size_t left = mine.size();
    for (Seconds t = 0; left > 0; ++t) {
      if (t > 1000000) throw std::runtime_error("rr oracle did not drain");
      while (next < mine.size() && s.requests[static_cast<std::size_t>(mine[next])].release_time == t) {
        const int r = mine[next++];
        queue.push_back({r, s.requests[static_cast<std::size_t>(r)].service_demand});
      }
      for (auto it = pending.begin(); it != pending.end();) {
        if (it->ready == t) {
          queue.push_back(it->e);
          it = pending.erase(it);
        } else {
          ++it;
        }
      }
      while (!queue.empty()) {
        std::size_t best = free_at.size();
        for (std::size_t p = 0; p < free_at.size(); ++p) {
          if (free_at[p] > t) continue;
          if (best == free_at.size() || free_at[p] < free_at[best]) best = p;
        }
        if (best == free_at.size()) break;
        Entry e = queue.front();
        queue.pop_front();
        const Seconds dur = std::min(quantum, e.remaining);
        free_at[best] = t + dur + separation_oracle(s, pad.class_id, t);
        e.remaining -= quantum;
        if (e.remaining <= 0) {
          waits[static_cast<std::size_t>(e.req)] = t - s.requests[static_cast<std::size_t>(e.req)].release_time;
          --left;
        } else {
          pending.push_back({t + dur, e});
        }
      }
    }
  }
  return waits;
}

WaitVector decode_exhaustive_oracle(const Chromosome& c, const Scenario& s) {
  const std::size_t n = c.order.size();
  if (n > 6) throw std::invalid_argument("exhaustive decode oracle is limited to n <= 6");
  std::vector<int> choice(n, 0);
  std::vector<WaitVector> consistent;

  std::function<void(std::size_t)> rec = [&](std::size_t depth) {
    if (depth == n) {
      // Replay the assignment and keep it only if every step took an
      // earliest-free pad with the lowest index among equals.
      std::map<int, std::vector<Seconds>> free_at;
      for (const auto& p : s.pads) free_at[p.class_id].assign(static_cast<std::size_t>(p.pad_count), 0);
      WaitVector w(n, 0);
      for (std::size_t j = 0; j < n; ++j) {
        const auto& r = s.requests[static_cast<std::size_t>(c.order[j])];
        auto& f = free_at[r.class_id];
        const auto chosen = static_cast<std::size_t>(choice[j]);
        for (std::size_t p = 0; p < f.size(); ++p) {
          if (f[p] < f[chosen] || (f[p] == f[chosen] && p < chosen)) return;
        }
        const Seconds start = std::max(r.release_time, f[chosen]);
        f[chosen] = start + r.service_demand + separation_oracle(s, r.class_id, start);
        w[static_cast<std::size_t>(c.order[j])] = start - r.release_time;
      }
      consistent.push_back(w);
      return;
    }
    const int cls = s.requests[static_cast<std::size_t>(c.order[depth])].class_id;
    int pads = 0;
    for (const auto& p : s.pads) {
      if (p.class_id == cls) pads = p.pad_count;
    }
    for (int p = 0; p < pads; ++p) {
      choice[depth] = p;
      rec(depth + 1);
    }
  };
  rec(0);
  if (consistent.size() != 1) throw std::logic_error("expected exactly one earliest-free assignment");
  return consistent.front();
}

double cost_oracle(const WaitVector& waits, const Schedule& sched, const Scenario& s, const CostWeights& w) {
  const double n = static_cast<double>(waits.size());
  long double sum = 0;
  for (Seconds x : waits) sum += x;
  const double mean = static_cast<double>(sum / n);
  long double ss = 0;
  for (Seconds x : waits) ss += (x - static_cast<long double>(mean)) * (x - static_cast<long double>(mean));
  const double sd = std::sqrt(static_cast<double>(ss / n));
  std::vector<double> d(waits.begin(), waits.end());
  const double tail = sorted_tail_mean(d);
  const double mx = *std::max_element(d.begin(), d.end());

  const bool timed = w.variant == CostVariant::v3 || w.variant == CostVariant::v4 ||
                     w.variant == CostVariant::v5 || w.variant == CostVariant::custom;
  double penalty = 0;
  for (std::size_t i = 0; i < waits.size(); ++i) {
    const int cls = s.requests[i].class_id;
    std::size_t row = 0;
    while (s.pads[row].class_id != cls) ++row;
    const auto& weights = s.pad_weights.weights[row];
    double wk;
    if (timed) {
      const Seconds t = std::clamp<Seconds>(sched.takeoffs[i].start, 0, s.horizon);
      wk = weights[static_cast<std::size_t>(t / s.pad_weights.bin_width)];
    } else {
      wk = std::accumulate(weights.begin(), weights.end(), 0.0) / static_cast<double>(weights.size());
    }
    if (cls == 1 && w.variant != CostVariant::v1) wk *= w.class1_penalty_scale;
    penalty += wk * static_cast<double>(waits[i]);
  }
  double cost = w.alpha1 * mean + w.alpha2 * sd + w.alpha3 * tail + penalty;
  if (w.variant == CostVariant::v4 || w.variant == CostVariant::v5 || w.variant == CostVariant::custom) {
    cost += w.max_delay_coeff * mx;
  }
  return cost;
}

double brute_force_min_cost(const Scenario& s, const CostWeights& w) {
  Chromosome c;
  c.order.resize(s.size());
  std::iota(c.order.begin(), c.order.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    const Decoded d = decode(c, s);
    best = std::min(best, schedule_cost(d.waits, d.schedule, s, w));
  } while (std::next_permutation(c.order.begin(), c.order.end()));
  return best;
}

double sorted_tail_mean(std::vector<double> x) {
  std::sort(x.begin(), x.end(), std::greater<>());
  const auto k = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(x.size()) - 1e-12));
  const std::size_t kk = std::max<std::size_t>(k, 1);
  long double s = 0;
  for (std::size_t i = 0; i < kk; ++i) s += x[i];
  return static_cast<double>(s / kk);
}

namespace {

std::size_t tail_count(std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(n) - 1e-12)));
}

}  // namespace

double ru_cvar_exact(const std::vector<double>& x) {
  const long double k = static_cast<long double>(tail_count(x.size()));
  long double best = std::numeric_limits<long double>::infinity();
  for (double nu : x) {
    long double v = nu;
    for (double xi : x) v += std::max<long double>(0, static_cast<long double>(xi) - nu) / k;
    best = std::min(best, v);
  }
  return static_cast<double>(best);
}

double ru_cvar_smoothed(const std::vector<double>& x, double width) {
  const long double k = static_cast<long double>(tail_count(x.size()));
  const long double w = width;
  auto f = [&](long double nu) {
    long double v = nu;
    for (double xi : x) {
      const long double y = (static_cast<long double>(xi) - nu) / w;
      v += w * (std::max<long double>(y, 0) + std::log1p(std::exp(-std::fabs(y)))) / k;
    }
    return v;
  };
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  long double a = *mn - 60 * w;
  long double b = *mx + 60 * w;
  const long double g = (std::sqrt(5.0L) - 1) / 2;
  long double c = b - g * (b - a);
  long double d = a + g * (b - a);
  long double fc = f(c);
  long double fd = f(d);
  for (int it = 0; it < 300 && b - a > 1e-16L * (1 + std::fabs(a)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return static_cast<double>(f((a + b) / 2));
}

long double lse_long(const std::vector<double>& v, double tau) {
  long double s = 0;
  for (double x : v) s += std::exp(static_cast<long double>(x) / tau);
  return tau * std::log(s);
}

std::vector<SimilarRecord> query_rescan(const Registry& reg, const Embedding& v, int k) {
  std::vector<SimilarRecord> all;
  for (const auto& [id, s] : reg.signatures()) {
    if (!s.centroid.empty()) all.push_back({id, RecordKind::signature, cosine(v, s.centroid)});
  }
  for (const auto& [id, t] : reg.triplets()) {
    const auto tokens = tokenize(t.prompt_text);
    if (tokens.empty()) continue;
    all.push_back({id, RecordKind::triplet, cosine(v, embed_tokens(tokens))});
  }
  // Repeated selection of the maximum: quadratic but obviously correct.
  std::vector<SimilarRecord> out;
  std::vector<char> taken(all.size(), 0);
  while (out.size() < static_cast<std::size_t>(k) && out.size() < all.size()) {
    std::size_t best = all.size();
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (taken[i]) continue;
      if (best == all.size() || all[i].similarity > all[best].similarity ||
          (all[i].similarity == all[best].similarity && all[i].id < all[best].id)) {
        best = i;
      }
    }
    taken[best] = 1;
    out.push_back(all[best]);
  }
  return out;
}

TempDir::TempDir(const std::string& tag) {
  static int counter = 0;
  path_ = fs::temp_directory_path() /
          ("vsched-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

}  // namespace vsched::testing
