#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "vsched/errors.hpp"
#include "vsched/scenario.hpp"

using namespace vsched;

namespace {

GenerationSpec three_class_spec(std::uint64_t seed) {
  GenerationSpec spec;
  spec.horizon = 3600;
  spec.seed = seed;
  spec.classes = {ClassSpec{1, 0.2, 2}, ClassSpec{2, 0.1, 2}, ClassSpec{3, 0.05, 1}};
  return spec;
}

}  // namespace

TEST_CASE("zero arrival rates give an empty scenario") {
  GenerationSpec spec = three_class_spec(1);
  for (auto& c : spec.classes) c.rate = 0.0;
  const Scenario s = generate_scenario(spec);
  CHECK(s.requests.empty());
  CHECK(s.condition_labels.empty());
  CHECK(s.pads.size() == 3);
}

TEST_CASE("generation is a pure function of spec and seed") {
  const Scenario a = generate_scenario(three_class_spec(42));
  const Scenario b = generate_scenario(three_class_spec(42));
  CHECK(a == b);
  CHECK(serialize_scenario(a) == serialize_scenario(b));
  CHECK_FALSE(a == generate_scenario(three_class_spec(43)));
}

TEST_CASE("configuration errors") {
  GenerationSpec spec = three_class_spec(0);
  spec.horizon = 0;
  CHECK_THROWS_AS(generate_scenario(spec), ConfigError);
  spec = three_class_spec(0);
  spec.classes.clear();
  CHECK_THROWS_AS(generate_scenario(spec), ConfigError);
  spec = three_class_spec(0);
  spec.classes[0].pad_count = 0;
  CHECK_THROWS_AS(generate_scenario(spec), ConfigError);
}

TEST_CASE("arrival counts follow the Poisson mean") {
  // Mean 3600 * (0.2 + 0.1 + 0.05) = 1260, sd sqrt(1260).
  constexpr double kMean = 1260.0;
  const double sd = std::sqrt(kMean);
  const Scenario s = generate_scenario(three_class_spec(7));
  CHECK(std::abs(static_cast<double>(s.size()) - kMean) <= 4.0 * sd);

  // Over 1000 seeds: the sample mean within 4 standard errors, and the
  // variance close to the mean.
  double sum = 0.0;
  double sq = 0.0;
  constexpr int kSeeds = 1000;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const auto n = static_cast<double>(generate_scenario(three_class_spec(static_cast<std::uint64_t>(seed))).size());
    sum += n;
    sq += n * n;
  }
  const double mean = sum / kSeeds;
  const double var = sq / kSeeds - mean * mean;
  CHECK(std::abs(mean - kMean) <= 4.0 * sd / std::sqrt(static_cast<double>(kSeeds)));
  CHECK(var == doctest::Approx(kMean).epsilon(0.15));
}

TEST_CASE("generated requests are sorted, valid and labelled") {
  const Scenario s = generate_scenario(reference_desk_spec(3));
  validate(s);
  CHECK(s.size() > 300);
  CHECK(s.size() < 700);
  std::set<int> ids;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& r = s.requests[i];
    CHECK(ids.insert(r.id).second);
    if (i > 0) CHECK(s.requests[i - 1].release_time <= r.release_time);
    CHECK(r.release_time <= s.horizon);
    CHECK(r.service_demand > 0);
    // One label per request, matching its class and the weather at release.
    CHECK(s.condition_labels[i].uav_class == r.class_id);
    const bool adverse = r.release_time >= 2400 && r.release_time < 3000;
    CHECK(s.condition_labels[i].weather_regime == (adverse ? 1 : 0));
  }
}

TEST_CASE("minimal scenario document") {
  const char* doc = R"({
  "horizon": 600,
  "classes": [{"class_id": 1, "pad_count": 1}],
  "requests": [{"id": 5, "class_id": 1, "release_time": 10}]
})";
  const Scenario s = parse_scenario(doc);
  REQUIRE(s.size() == 1);
  CHECK(s.requests[0].id == 5);
  CHECK(s.requests[0].service_demand == kDefaultServiceDemand);
  CHECK(s.pads.size() == 1);
}

TEST_CASE("release after the horizon is rejected") {
  const char* doc = R"({
  "horizon": 600,
  "classes": [{"class_id": 1, "pad_count": 1}],
  "requests": [{"id": 0, "class_id": 1, "release_time": 601}]
})";
  CHECK_THROWS_AS(parse_scenario(doc), ValidationError);
}

TEST_CASE("schema errors name the field and line") {
  const char* doc = "{\n  \"classes\": [\n    {\"class_id\": 1}\n  ],\n  \"horizon\": 60\n}";
  try {
    parse_scenario(doc);
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(e.field() == "/classes/0/pad_count");
    CHECK(e.line() == 3);
  }
  try {
    parse_scenario("{\n  \"classes\": []\n}");
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    CHECK(e.field() == "/horizon");
    CHECK(e.line() == 1);
  }
  CHECK_THROWS_AS(parse_scenario("{ not json"), SchemaError);
}

TEST_CASE("serialize and parse round trip") {
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
    const Scenario s = generate_scenario(reference_desk_spec(seed));
    const std::string text = serialize_scenario(s);
    const Scenario back = parse_scenario(text);
    CHECK(back == s);
    CHECK(serialize_scenario(back) == text);
  }
  testing::TempDir dir("scenario");
  const Scenario s = testing::random_scenario(5, 40);
  save_scenario(s, (dir.path() / "s.json").string());
  CHECK(load_scenario((dir.path() / "s.json").string()) == s);
}

TEST_CASE("pad weight lookup") {
  GenerationSpec spec = three_class_spec(0);
  const Scenario uniform = generate_scenario(spec);
  for (Seconds t : {0, 1, 59, 60, 1234, 3600}) CHECK(pad_weight(uniform, 2, t) == 1.0);
  CHECK_THROWS_AS(pad_weight(uniform, 1, 3601), RangeError);
  CHECK_THROWS_AS(pad_weight(uniform, 1, -1), RangeError);

  const char* doc = R"({
  "horizon": 180,
  "classes": [{"class_id": 1, "pad_count": 1}],
  "requests": [],
  "pad_weights": {"bin_width": 60, "weights": [[1.0, 2.5, 0.5, 4.0]]}
})";
  const Scenario s = parse_scenario(doc);
  CHECK(pad_weight(s, 1, 75) == 2.5);
  CHECK(pad_weight(s, 1, 60) == 2.5);
  CHECK(pad_weight(s, 1, 59) == 1.0);
  CHECK(pad_weight(s, 1, 180) == 4.0);

  // Weather doubling on [1800, 3600): base weight 1.0 becomes 2.0.
  spec.weather = {WeatherRegime{1800, 3600, 2.0, 1.0}};
  const Scenario w = generate_scenario(spec);
  CHECK(pad_weight(w, 1, 2000) == 2.0);
  CHECK(pad_weight(w, 1, 1799) == 1.0);
  CHECK(pad_weight(w, 3, 1800) == 2.0);
}

TEST_CASE("pad weights change only at bin boundaries") {
  const Scenario s = generate_scenario(reference_desk_spec(0));
  const Seconds bw = s.pad_weights.bin_width;
  for (int cls = 1; cls <= 3; ++cls) {
    for (Seconds t = 1; t <= s.horizon; ++t) {
      if (t % bw != 0) CHECK(pad_weight(s, cls, t) == pad_weight(s, cls, t - 1));
    }
  }
}

TEST_CASE("separation follows the weather step") {
  const Scenario s = testing::make_scenario(600, {PadConfig{1, 1, 10}}, {{1, 0, 30}},
                                            {WeatherRegime{100, 200, 1.0, 1.5}});
  CHECK(separation_at(s, 1, 50) == 10);
  CHECK(separation_at(s, 1, 150) == 15);
  CHECK(separation_at(s, 1, 200) == 10);
}
