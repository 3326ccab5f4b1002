#include "vsched/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "vsched/errors.hpp"
#include "vsched/json_support.hpp"
#include "vsched/random.hpp"

namespace vsched {

std::string_view to_string(PriorityTag tag) {
  switch (tag) {
    case PriorityTag::normal:
      return "normal";
    case PriorityTag::medical:
      return "medical";
    case PriorityTag::cargo:
      return "cargo";
  }
  return "normal";
}

PriorityTag priority_from_string(std::string_view s) {
  if (s == "normal") return PriorityTag::normal;
  if (s == "medical") return PriorityTag::medical;
  if (s == "cargo") return PriorityTag::cargo;
  throw ValidationError("unknown priority tag '" + std::string(s) + "'");
}

std::size_t Scenario::class_index(int class_id) const {
  for (std::size_t i = 0; i < pads.size(); ++i) {
    if (pads[i].class_id == class_id) return i;
  }
  throw RangeError("no pad configuration for class " + std::to_string(class_id));
}

int weather_regime_at(const std::vector<WeatherRegime>& weather, Seconds t) {
  for (std::size_t i = 0; i < weather.size(); ++i) {
    if (t >= weather[i].start && t < weather[i].end) return static_cast<int>(i) + 1;
  }
  return 0;
}

namespace {

void check_spec(const GenerationSpec& spec) {
  if (spec.horizon <= 0) throw ConfigError("horizon must be positive");
  if (spec.classes.empty()) throw ConfigError("at least one UAV class is required");
  if (spec.bin_width <= 0) throw ConfigError("bin_width must be positive");
  std::set<int> seen;
  for (const auto& c : spec.classes) {
    if (c.class_id < kMinClassId || c.class_id > kMaxClassId) {
      throw ConfigError("class_id must be in {1,2,3}, got " + std::to_string(c.class_id));
    }
    if (!seen.insert(c.class_id).second) {
      throw ConfigError("duplicate class_id " + std::to_string(c.class_id));
    }
    if (c.rate < 0.0 || !std::isfinite(c.rate)) throw ConfigError("arrival rate must be >= 0");
    if (c.pad_count < 1) throw ConfigError("pad_count must be >= 1");
    if (c.separation < 0) throw ConfigError("separation must be >= 0");
    if (c.service_demand <= 0) throw ConfigError("service_demand must be > 0");
    if (c.base_weight < 0.0) throw ConfigError("base_weight must be >= 0");
  }
  for (const auto& w : spec.weather) {
    if (w.end <= w.start) throw ConfigError("weather step must have start < end");
    if (w.weight_multiplier < 0.0 || w.separation_multiplier < 0.0) {
      throw ConfigError("weather multipliers must be >= 0");
    }
  }
}

PadWeightProfile derive_pad_weights(Seconds horizon, Seconds bin_width,
                                    const std::vector<ClassSpec>& classes,
                                    const std::vector<WeatherRegime>& weather) {
  PadWeightProfile profile;
  profile.bin_width = bin_width;
  const auto bins = static_cast<std::size_t>(horizon / bin_width + 1);
  for (const auto& c : classes) {
    std::vector<double> row(bins, c.base_weight);
    for (std::size_t b = 0; b < bins; ++b) {
      const int regime = weather_regime_at(weather, static_cast<Seconds>(b) * bin_width);
      if (regime > 0) row[b] *= weather[static_cast<std::size_t>(regime - 1)].weight_multiplier;
    }
    profile.weights.push_back(std::move(row));
  }
  return profile;
}

void sort_classes(std::vector<ClassSpec>& classes) {
  std::sort(classes.begin(), classes.end(),
            [](const ClassSpec& a, const ClassSpec& b) { return a.class_id < b.class_id; });
}

void finish_scenario(Scenario& s) {
  std::sort(s.requests.begin(), s.requests.end(), [](const UavRequest& a, const UavRequest& b) {
    return std::tie(a.release_time, a.id) < std::tie(b.release_time, b.id);
  });
  s.pads.clear();
  for (const auto& c : s.classes) s.pads.push_back(PadConfig{c.class_id, c.pad_count, c.separation});
  s.condition_labels.clear();
  for (const auto& r : s.requests) {
    s.condition_labels.push_back(ConditionLabel{r.class_id, weather_regime_at(s.weather, r.release_time)});
  }
}

}  // namespace

Scenario generate_scenario(const GenerationSpec& spec) {
  check_spec(spec);
  Scenario s;
  s.horizon = spec.horizon;
  s.seed = spec.seed;
  s.classes = spec.classes;
  sort_classes(s.classes);
  s.weather = spec.weather;

  struct Arrival {
    Seconds release;
    int class_id;
    int seq;
  };
  std::vector<Arrival> arrivals;
  for (const auto& c : s.classes) {
    if (c.rate <= 0.0) continue;
    Rng rng(stream_seed(spec.seed, static_cast<std::uint64_t>(c.class_id)));
    double t = 0.0;
    int seq = 0;
    while (true) {
      t += rng.exponential(c.rate);
      if (t >= static_cast<double>(spec.horizon)) break;
      arrivals.push_back(Arrival{static_cast<Seconds>(std::floor(t)), c.class_id, seq++});
    }
  }
  std::sort(arrivals.begin(), arrivals.end(), [](const Arrival& a, const Arrival& b) {
    return std::tie(a.release, a.class_id, a.seq) < std::tie(b.release, b.class_id, b.seq);
  });
  s.requests.reserve(arrivals.size());
  for (std::size_t i = 0; i < arrivals.size(); ++i) {
    const auto& a = arrivals[i];
    const auto& c = *std::find_if(s.classes.begin(), s.classes.end(),
                                  [&](const ClassSpec& cs) { return cs.class_id == a.class_id; });
    s.requests.push_back(UavRequest{static_cast<int>(i), a.class_id, a.release, c.service_demand, c.priority});
  }
  s.pad_weights = derive_pad_weights(spec.horizon, spec.bin_width, s.classes, s.weather);
  finish_scenario(s);
  return s;
}

GenerationSpec reference_desk_spec(std::uint64_t seed) {
  GenerationSpec spec;
  spec.horizon = 3600;
  spec.seed = seed;
  spec.bin_width = 60;
  spec.classes = {
      ClassSpec{1, 0.070, 4, 10, 30, 1.0, PriorityTag::medical},
      ClassSpec{2, 0.050, 3, 10, 30, 1.0, PriorityTag::normal},
      ClassSpec{3, 0.020, 2, 10, 30, 1.0, PriorityTag::cargo},
  };
  spec.weather = {WeatherRegime{2400, 3000, 2.0, 1.5}};
  return spec;
}

void validate(const Scenario& s) {
  if (s.horizon <= 0) throw ValidationError("horizon must be positive");
  if (s.pads.empty()) throw ValidationError("scenario has no pad configuration");
  for (std::size_t i = 0; i < s.pads.size(); ++i) {
    if (s.pads[i].pad_count < 1) throw ValidationError("pad_count must be >= 1");
    if (s.pads[i].separation < 0) throw ValidationError("separation must be >= 0");
    if (i > 0 && s.pads[i].class_id <= s.pads[i - 1].class_id) {
      throw ValidationError("pad configurations must have ascending unique class ids");
    }
  }
  const auto& pw = s.pad_weights;
  if (pw.bin_width <= 0) throw ValidationError("pad weight bin_width must be positive");
  if (pw.weights.size() != s.pads.size()) {
    throw ValidationError("pad weight rows must match the number of classes");
  }
  const auto bins_needed = static_cast<std::size_t>(s.horizon / pw.bin_width + 1);
  for (const auto& row : pw.weights) {
    if (row.size() < bins_needed) throw ValidationError("pad weights do not cover the horizon");
    for (double w : row) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("pad weights must be finite and >= 0");
    }
  }
  std::set<int> ids;
  for (std::size_t i = 0; i < s.requests.size(); ++i) {
    const auto& r = s.requests[i];
    if (!ids.insert(r.id).second) throw ValidationError("duplicate request id " + std::to_string(r.id));
    if (r.release_time < 0 || r.release_time > s.horizon) {
      throw ValidationError("request " + std::to_string(r.id) + " released outside [0, horizon]");
    }
    if (r.service_demand <= 0) {
      throw ValidationError("request " + std::to_string(r.id) + " has non-positive service demand");
    }
    (void)s.class_index(r.class_id);
    if (i > 0 && std::tie(s.requests[i - 1].release_time, s.requests[i - 1].id) >
                     std::tie(r.release_time, r.id)) {
      throw ValidationError("requests must be sorted by release time");
    }
  }
  if (s.condition_labels.size() != s.requests.size()) {
    throw ValidationError("every request needs exactly one condition label");
  }
}

double pad_weight(const Scenario& s, int class_id, Seconds t) {
  if (t < 0 || t > s.horizon) {
    throw RangeError("pad_weight: t=" + std::to_string(t) + " outside [0, horizon]");
  }
  const auto& row = s.pad_weights.weights[s.class_index(class_id)];
  return row[static_cast<std::size_t>(t / s.pad_weights.bin_width)];
}

double pad_weight_clamped(const Scenario& s, int class_id, Seconds t) {
  return pad_weight(s, class_id, std::clamp<Seconds>(t, 0, s.horizon));
}

Seconds separation_at(const Scenario& s, int class_id, Seconds t) {
  const Seconds base = s.pad_config(class_id).separation;
  const int regime = weather_regime_at(s.weather, std::clamp<Seconds>(t, 0, s.horizon));
  if (regime == 0) return base;
  const double m = s.weather[static_cast<std::size_t>(regime - 1)].separation_multiplier;
  return static_cast<Seconds>(std::llround(static_cast<double>(base) * m));
}

// ---------------------------------------------------------------------------
// Structured-text (JSON) form.

Scenario parse_scenario(std::string_view text) {
  const JsonDocument doc = JsonDocument::parse(text);
  const json& root = doc.root();
  if (!root.is_object()) doc.fail("", "scenario document must be an object");

  GenerationSpec spec;
  spec.horizon = doc.integer("", "horizon");
  if (spec.horizon <= 0) doc.fail("/horizon", "horizon must be positive");
  spec.seed = static_cast<std::uint64_t>(doc.optional_integer("", "seed").value_or(0));
  spec.bin_width = doc.optional_integer("", "bin_width").value_or(60);
  if (spec.bin_width <= 0) doc.fail("/bin_width", "bin_width must be positive");

  const json& classes = doc.require("", "classes");
  if (!classes.is_array() || classes.empty()) doc.fail("/classes", "expected a nonempty array");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const std::string p = "/classes/" + std::to_string(i);
    ClassSpec c;
    c.class_id = static_cast<int>(doc.optional_integer(p, "class_id").value_or(static_cast<std::int64_t>(i) + 1));
    if (c.class_id < kMinClassId || c.class_id > kMaxClassId) doc.fail(p + "/class_id", "must be in {1,2,3}");
    c.rate = doc.optional_number(p, "rate").value_or(0.0);
    if (c.rate < 0.0) doc.fail(p + "/rate", "must be >= 0");
    c.pad_count = static_cast<int>(doc.integer(p, "pad_count"));
    if (c.pad_count < 1) doc.fail(p + "/pad_count", "must be >= 1");
    c.separation = doc.optional_integer(p, "separation").value_or(0);
    if (c.separation < 0) doc.fail(p + "/separation", "must be >= 0");
    c.service_demand = doc.optional_integer(p, "service_demand").value_or(kDefaultServiceDemand);
    if (c.service_demand <= 0) doc.fail(p + "/service_demand", "must be > 0");
    c.base_weight = doc.optional_number(p, "base_weight").value_or(1.0);
    if (c.base_weight < 0.0) doc.fail(p + "/base_weight", "must be >= 0");
    if (classes[i].contains("priority")) {
      try {
        c.priority = priority_from_string(doc.string(p, "priority"));
      } catch (const SchemaError&) {
        throw;
      } catch (const ValidationError& e) {
        doc.fail(p + "/priority", e.what());
      }
    }
    for (const auto& prev : spec.classes) {
      if (prev.class_id == c.class_id) doc.fail(p + "/class_id", "duplicate class id");
    }
    spec.classes.push_back(c);
  }

  if (root.contains("weather")) {
    const json& weather = root["weather"];
    if (!weather.is_array()) doc.fail("/weather", "expected an array");
    for (std::size_t i = 0; i < weather.size(); ++i) {
      const std::string p = "/weather/" + std::to_string(i);
      WeatherRegime w;
      w.start = doc.integer(p, "start");
      w.end = doc.integer(p, "end");
      if (w.end <= w.start) doc.fail(p + "/end", "must be greater than start");
      w.weight_multiplier = doc.number(p, "weight_multiplier");
      if (w.weight_multiplier < 0.0) doc.fail(p + "/weight_multiplier", "must be >= 0");
      w.separation_multiplier = doc.optional_number(p, "separation_multiplier").value_or(1.0);
      if (w.separation_multiplier < 0.0) doc.fail(p + "/separation_multiplier", "must be >= 0");
      spec.weather.push_back(w);
    }
  }

  Scenario s;
  if (root.contains("requests")) {
    s.horizon = spec.horizon;
    s.seed = spec.seed;
    s.classes = spec.classes;
    sort_classes(s.classes);
    s.weather = spec.weather;
    const json& reqs = root["requests"];
    if (!reqs.is_array()) doc.fail("/requests", "expected an array");
    std::set<std::int64_t> ids;
    for (std::size_t i = 0; i < reqs.size(); ++i) {
      const std::string p = "/requests/" + std::to_string(i);
      UavRequest r;
      const auto id = doc.integer(p, "id");
      if (!ids.insert(id).second) doc.fail(p + "/id", "duplicate request id");
      r.id = static_cast<int>(id);
      r.class_id = static_cast<int>(doc.integer(p, "class_id"));
      const auto cls = std::find_if(s.classes.begin(), s.classes.end(),
                                    [&](const ClassSpec& c) { return c.class_id == r.class_id; });
      if (cls == s.classes.end()) doc.fail(p + "/class_id", "no class entry for this class id");
      r.release_time = doc.integer(p, "release_time");
      if (r.release_time < 0) doc.fail(p + "/release_time", "must be >= 0");
      if (r.release_time > s.horizon) doc.fail(p + "/release_time", "release_time exceeds horizon");
      r.service_demand = doc.optional_integer(p, "service_demand").value_or(cls->service_demand);
      if (r.service_demand <= 0) doc.fail(p + "/service_demand", "must be > 0");
      if (reqs[i].contains("priority")) {
        try {
          r.priority = priority_from_string(doc.string(p, "priority"));
        } catch (const SchemaError&) {
          throw;
        } catch (const ValidationError& e) {
          doc.fail(p + "/priority", e.what());
        }
      }
      s.requests.push_back(r);
    }
    s.pad_weights = derive_pad_weights(spec.horizon, spec.bin_width, s.classes, s.weather);
    finish_scenario(s);
  } else {
    s = generate_scenario(spec);
  }

  if (root.contains("pad_weights")) {
    const std::string p = "/pad_weights";
    PadWeightProfile pw;
    pw.bin_width = doc.integer(p, "bin_width");
    if (pw.bin_width <= 0) doc.fail(p + "/bin_width", "must be positive");
    const json& rows = doc.require(p, "weights");
    if (!rows.is_array() || rows.size() != s.classes.size()) {
      doc.fail(p + "/weights", "expected one row per class");
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string rp = p + "/weights/" + std::to_string(i);
      if (!rows[i].is_array()) doc.fail(rp, "expected an array of weights");
      std::vector<double> row;
      for (std::size_t b = 0; b < rows[i].size(); ++b) {
        const json& v = rows[i][b];
        if (!v.is_number() || v.get<double>() < 0.0) doc.fail(rp + "/" + std::to_string(b), "expected a weight >= 0");
        row.push_back(v.get<double>());
      }
      if (row.size() < static_cast<std::size_t>(s.horizon / pw.bin_width + 1)) {
        doc.fail(rp, "weights do not cover the horizon");
      }
      pw.weights.push_back(std::move(row));
    }
    s.pad_weights = std::move(pw);
  }

  validate(s);
  return s;
}

Scenario load_scenario(const std::string& path) { return parse_scenario(read_text_file(path)); }

std::string serialize_scenario(const Scenario& s) {
  json root;
  root["horizon"] = s.horizon;
  root["seed"] = s.seed;
  root["bin_width"] = s.pad_weights.bin_width;
  json classes = json::array();
  for (const auto& c : s.classes) {
    classes.push_back({{"class_id", c.class_id},
                       {"rate", c.rate},
                       {"pad_count", c.pad_count},
                       {"separation", c.separation},
                       {"service_demand", c.service_demand},
                       {"base_weight", c.base_weight},
                       {"priority", std::string(to_string(c.priority))}});
  }
  root["classes"] = std::move(classes);
  json weather = json::array();
  for (const auto& w : s.weather) {
    weather.push_back({{"start", w.start},
                       {"end", w.end},
                       {"weight_multiplier", w.weight_multiplier},
                       {"separation_multiplier", w.separation_multiplier}});
  }
  root["weather"] = std::move(weather);
  json requests = json::array();
  for (const auto& r : s.requests) {
    requests.push_back({{"id", r.id},
                        {"class_id", r.class_id},
                        {"release_time", r.release_time},
                        {"service_demand", r.service_demand},
                        {"priority", std::string(to_string(r.priority))}});
  }
  root["requests"] = std::move(requests);
  root["pad_weights"] = {{"bin_width", s.pad_weights.bin_width}, {"weights", s.pad_weights.weights}};
  return root.dump(2) + "\n";
}

void save_scenario(const Scenario& scenario, const std::string& path) {
  write_text_file(path, serialize_scenario(scenario));
}

}  // namespace vsched
