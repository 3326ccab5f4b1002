#include "vsched/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "manifest.hpp"
#include "params.hpp"
#include "vsched/bilevel.hpp"
#include "vsched/errors.hpp"
#include "vsched/ga_scheduler.hpp"
#include "vsched/json_support.hpp"
#include "vsched/metrics.hpp"
#include "vsched/prompt_evo.hpp"
#include "vsched/random.hpp"
#include "vsched/registry.hpp"
#include "vsched/rr_scheduler.hpp"
#include "vsched/scenario.hpp"

namespace vsched::cli {

namespace fs = std::filesystem;

namespace {

/// Output directory plus the manifest being assembled for one run.
class RunContext {
 public:
  RunContext(std::string command, std::vector<std::string> args, fs::path out, std::ostream& stdout_stream)
      : out_(std::move(out)), stdout_(stdout_stream) {
    manifest_.command = std::move(command);
    manifest_.args = std::move(args);
  }

  /// Records an input's digest. Missing optional inputs (a registry not yet
  /// created) are recorded as absent.
  void input(const std::string& path, bool optional = false) {
    if (path.empty()) return;
    if (!fs::exists(path)) {
      if (optional) return;
      throw UsageError("input not found: " + path);
    }
    for (auto& d : digest_inputs(path)) manifest_.inputs.push_back(std::move(d));
  }
  void seed(const std::string& name, std::uint64_t v) { manifest_.seeds[name] = v; }

  void write(const std::string& name, const std::string& content) {
    const fs::path p = out_ / name;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_text_file(p.string(), content);
    manifest_.outputs.push_back({name, to_hex(fnv1a(content))});
  }

  void finish() {
    manifest_.input_hash = combined_hash(manifest_.command, manifest_.args, manifest_.inputs);
    fs::create_directories(out_);
    write_text_file((out_ / "manifest.json").string(), manifest_.to_json());
  }

  std::ostream& out() { return stdout_; }
  const fs::path& dir() const { return out_; }

 private:
  RunManifest manifest_;
  fs::path out_;
  std::ostream& stdout_;
};

std::string csv_number(double v) {
  std::ostringstream s;
  s.precision(12);
  s << v;
  return s.str();
}

std::string read_input(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("input not found: " + path);
  return read_text_file(path);
}

std::vector<CostVariant> parse_variants(const std::string& list) {
  std::vector<CostVariant> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (item.empty()) continue;
    try {
      out.push_back(variant_from_string(item));
    } catch (const Error&) {
      throw UsageError("unknown variant '" + item + "' (expected v1..v5 or custom)");
    }
  }
  return out;
}

std::string column_name(CostVariant v) { return "GA " + std::string(to_string(v)); }

// ---- generate ---------------------------------------------------------------

struct GenerateOpts {
  std::string config;
  std::string preset = "reference";
  std::optional<std::uint64_t> seed;
  int count = 1;
  int requests = 30;
};

void cmd_generate(const GenerateOpts& o, RunContext& ctx) {
  if (o.count < 1) throw UsageError("--count must be >= 1");
  const std::uint64_t base = o.seed.value_or(0);
  ctx.input(o.config);
  if (o.seed) ctx.seed("seed", base);
  std::optional<json> config;
  if (!o.config.empty()) {
    JsonDocument::parse(read_input(o.config));  // schema errors report lines
    config = json::parse(read_text_file(o.config));
  }
  for (int i = 0; i < o.count; ++i) {
    const std::uint64_t seed = base + static_cast<std::uint64_t>(i);
    Scenario s;
    if (config) {
      json doc = *config;
      if (o.seed || o.count > 1) doc["seed"] = o.seed ? seed : doc.value("seed", std::uint64_t{0}) + i;
      s = parse_scenario(doc.dump());
    } else if (o.preset == "reference") {
      s = generate_scenario(reference_desk_spec(seed));
    } else if (o.preset == "planted") {
      s = planted_mean_wait_scenario(seed, o.requests);
    } else {
      throw UsageError("unknown preset '" + o.preset + "' (expected reference or planted)");
    }
    char name[32];
    std::snprintf(name, sizeof name, "scenario_%03d.json", i);
    const std::string file = o.count == 1 ? "scenario.json" : name;
    ctx.write(file, serialize_scenario(s));
    ctx.out() << file << ": " << s.size() << " requests, horizon " << s.horizon << " s\n";
  }
}

// ---- schedule / compare -------------------------------------------------------

struct ScheduleOpts {
  std::string scenario;
  std::string algo = "rr";
  std::string variant = "v5";
  std::string weights;
  std::string params;
  std::optional<std::uint64_t> seed;
  Seconds quantum = kDefaultQuantum;
  std::string user = "cli";
};

GaParams load_ga_params(const std::string& params, const std::optional<std::uint64_t>& seed) {
  GaParams p = params.empty() ? GaParams{} : parse_ga_params(read_input(params));
  if (seed) p.seed = *seed;
  p.validate();
  return p;
}

std::string waits_csv(const Scenario& s, const Schedule& sched, const WaitVector& waits) {
  std::ostringstream out;
  out << "request_id,class_id,release_time,pad,takeoff,wait\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& r = s.requests[i];
    out << r.id << ',' << r.class_id << ',' << r.release_time << ',' << sched.takeoffs[i].pad << ','
        << sched.takeoffs[i].start << ',' << waits[i] << '\n';
  }
  return out.str();
}

void cmd_schedule(const ScheduleOpts& o, RunContext& ctx) {
  ctx.input(o.scenario);
  ctx.input(o.weights);
  ctx.input(o.params);
  const Scenario s = load_scenario(o.scenario);
  ordered_json summary;
  summary["scenario"] = o.scenario;
  summary["algo"] = o.algo;
  TripletContext tc;
  tc.user_id = o.user;
  if (o.algo == "rr") {
    if (o.quantum <= 0) throw UsageError("--quantum must be positive");
    const RrResult r = rr_schedule(s, o.quantum);
    const MetricVector m = compute_metrics(r.waits, r.schedule, s);
    summary["quantum"] = o.quantum;
    summary["metrics"] = metrics_to_json(m);
    ctx.write("waits.csv", waits_csv(s, r.schedule, r.waits));
    tc.prompt_text = "round-robin quantum " + std::to_string(o.quantum);
    tc.prompt_id = to_hex(fnv1a(tc.prompt_text));
    CostWeights w = CostWeights::preset(CostVariant::v5);
    ctx.write("triplet.json", triplet_to_json(emit_triplet(tc, s, w, r.schedule, r.waits, m)).dump(2) + "\n");
    ctx.out() << "rr: avg " << m.avg_wait << " s, max " << m.max_wait << " s\n";
  } else if (o.algo == "ga") {
    CostVariant v;
    try {
      v = variant_from_string(o.variant);
    } catch (const Error&) {
      throw UsageError("unknown variant '" + o.variant + "' (expected v1..v5 or custom)");
    }
    CostWeights w = CostWeights::preset(v);
    if (!o.weights.empty()) w = parse_cost_weights(read_input(o.weights), w);
    const GaParams p = load_ga_params(o.params, o.seed);
    ctx.seed("seed", p.seed);
    const GaResult r = ga_optimize(s, w, p);
    summary["variant"] = std::string(to_string(w.variant));
    summary["seed"] = p.seed;
    summary["cost"] = r.cost;
    summary["metrics"] = metrics_to_json(r.metrics);
    ctx.write("waits.csv", waits_csv(s, r.schedule, r.waits));
    ctx.write("trace.csv", r.trace.to_csv());
    tc.prompt_text = "ga " + std::string(to_string(w.variant)) + " seed " + std::to_string(p.seed);
    tc.prompt_id = to_hex(fnv1a(tc.prompt_text));
    ctx.write("triplet.json", triplet_to_json(emit_triplet(tc, s, w, r.schedule, r.waits, r.metrics)).dump(2) + "\n");
    ctx.out() << "ga " << to_string(w.variant) << ": cost " << r.cost << ", avg " << r.metrics.avg_wait
              << " s, max " << r.metrics.max_wait << " s\n";
  } else {
    throw UsageError("unknown algorithm '" + o.algo + "' (expected rr or ga)");
  }
  ctx.write("metrics.json", summary.dump(2) + "\n");
}

struct CompareOpts {
  std::string scenario;
  std::string variants = "v1,v2,v3,v4,v5";
  std::string params;
  std::optional<std::uint64_t> seed;
  Seconds quantum = kDefaultQuantum;
};

void cmd_compare(const CompareOpts& o, RunContext& ctx) {
  const auto variants = parse_variants(o.variants);
  ctx.input(o.scenario);
  ctx.input(o.params);
  const Scenario s = load_scenario(o.scenario);
  const GaParams p = load_ga_params(o.params, o.seed);
  ctx.seed("seed", p.seed);

  MetricTable table;
  const RrResult rr = rr_schedule(s, o.quantum);
  table.columns.push_back("RR");
  table.values.push_back(compute_metrics(rr.waits, rr.schedule, s));
  table.no_improvement.push_back(0);
  ordered_json costs;
  for (CostVariant v : variants) {
    const GaResult r = ga_optimize(s, CostWeights::preset(v), p);
    if (v == CostVariant::v1) table.baseline = static_cast<int>(table.columns.size());
    table.columns.push_back(column_name(v));
    table.values.push_back(r.metrics);
    costs[column_name(v)] = r.cost;
  }
  ctx.write("compare.csv", to_csv(table));

  ordered_json j;
  j["scenario"] = o.scenario;
  j["seed"] = p.seed;
  j["columns"] = table.columns;
  ordered_json metrics;
  for (std::size_t c = 0; c < table.columns.size(); ++c) metrics[table.columns[c]] = metrics_to_json(table.values[c]);
  j["metrics"] = std::move(metrics);
  j["ga_cost"] = costs.is_null() ? ordered_json::object() : costs;
  if (table.baseline >= 0) {
    ordered_json imp;
    const MetricVector& base = table.values[static_cast<std::size_t>(table.baseline)];
    for (std::size_t c = 1; c < table.columns.size(); ++c) {
      ordered_json row;
      for (Metric m : {Metric::avg_wait, Metric::max_wait, Metric::std_wait, Metric::tail_95, Metric::pct_no_wait,
                       Metric::pct_long_wait}) {
        row[std::string(to_string(m))] = improvement_rate(base, table.values[c], m);
      }
      imp[table.columns[c]] = std::move(row);
    }
    j["improvement_vs_ga_v1"] = std::move(imp);
  }
  ctx.write("compare.json", j.dump(2) + "\n");
  ctx.out() << to_csv(table);
}

// ---- bilevel ------------------------------------------------------------------

struct BilevelOpts {
  std::string scenarios;
  std::string params;
  std::optional<std::uint64_t> seed;
};

void cmd_bilevel(const BilevelOpts& o, RunContext& ctx) {
  if (!fs::is_directory(o.scenarios)) throw UsageError("--scenarios must be a directory: " + o.scenarios);
  ctx.input(o.scenarios);
  ctx.input(o.params);
  BilevelParams bp = o.params.empty() ? BilevelParams{} : parse_bilevel_params(read_input(o.params));
  if (o.seed) bp.outer.seed = *o.seed;
  ctx.seed("seed", bp.outer.seed);

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(o.scenarios)) {
    if (e.is_regular_file() && e.path().extension() == ".json" && e.path().filename() != "manifest.json") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.size() < 3) throw UsageError("bilevel needs at least 3 scenarios, found " + std::to_string(files.size()));
  std::vector<std::pair<std::string, Scenario>> scenarios;
  for (const auto& f : files) scenarios.emplace_back(f.stem().string(), load_scenario(f.string()));

  const DataSplit split = stratified_split(std::move(scenarios), bp.outer.seed, bp.relax);
  for (const auto& w : split.warnings) ctx.out() << "warning: " << w << '\n';
  EvolutionResult evo = evolve_weights(split, bp.outer);
  std::ostringstream hist;
  hist << "generation,best,mean\n";
  for (const auto& g : evo.history) hist << g.generation << ',' << csv_number(g.best) << ',' << csv_number(g.mean) << '\n';
  const BilevelReport report = FinalReporter::report(split, bp.outer, std::move(evo));
  ctx.write("history.csv", hist.str());
  ctx.write("report.json", report_to_json(report));
  ctx.out() << "validation best " << report.evolution.best_score.fitness << " s; test avg "
            << report.test_overall.avg_wait << " s (initial median " << report.initial_median_test_avg << " s)\n";
}

// ---- prompt-evolve ------------------------------------------------------------

struct PromptOpts {
  std::string task;
  std::string params;
  std::optional<std::uint64_t> seed;
};

void cmd_prompt_evolve(const PromptOpts& o, RunContext& ctx) {
  ctx.input(o.task);
  ctx.input(o.params);
  const PromptTask task = o.task.empty() ? default_prompt_task() : parse_prompt_task(read_input(o.task));
  PromptParams pp = o.params.empty() ? PromptParams{} : parse_prompt_params(read_input(o.params));
  if (o.seed) pp.ga.seed = *o.seed;
  ctx.seed("seed", pp.ga.seed);
  const auto worker = mock_worker(task);
  const PromptEvolution r = evolve_prompts(task, {}, pp.fitness, pp.ga, *worker);
  ctx.write("trace.csv", trace_to_csv(r.trace));

  ordered_json j;
  j["task"] = task.name;
  j["seed"] = pp.ga.seed;
  j["best"] = {{"id", r.best.id}, {"text", r.best.text()}, {"fitness", r.best_fitness}};
  j["ku"] = r.keywords.ku;
  j["ki"] = r.keywords.ki;
  ordered_json pop = ordered_json::array();
  for (const auto& p : r.final_population) pop.push_back({{"id", p.id}, {"text", p.text()}});
  j["final_population"] = std::move(pop);
  std::size_t recovered = 0;
  for (const auto& t : task.planted) recovered += r.keywords.ku.count(t);
  j["planted_recovered"] = recovered;
  j["warnings"] = r.warnings;
  ctx.write("result.json", j.dump(2) + "\n");

  Triplet t;
  t.prompt_id = r.best.id;
  t.prompt_text = r.best.text();
  t.fitness = r.best_fitness;
  t.sense = ObjectiveSense::maximize;
  t.user_id = "cli";
  t.domain = "prompt-evolution:" + task.name;
  ctx.write("triplet.json", triplet_to_json(t).dump(2) + "\n");
  ctx.out() << "best \"" << r.best.text() << "\" fitness " << r.best_fitness << "; KU size " << r.keywords.ku.size()
            << ", planted recovered " << recovered << "/" << task.planted.size() << '\n';
}

// ---- registry -----------------------------------------------------------------

struct RegistryOpts {
  std::string dir;
  std::string prompt;
  std::string vector;
  int k = 5;
  int top_k = 3;
  std::string triplet;
  std::string signature;
};

void cmd_registry_list(const RegistryOpts& o, RunContext& ctx) {
  ctx.input(o.dir, true);
  const Registry reg(o.dir);
  std::ostringstream csv;
  csv << "kind,id,user,domain,prompt_id,value\n";
  for (const auto& [id, t] : reg.triplets()) {
    csv << "triplet," << id << ',' << t.user_id << ',' << t.domain << ',' << t.prompt_id << ','
        << csv_number(t.fitness) << '\n';
  }
  for (const auto& [id, s] : reg.signatures()) {
    csv << "signature," << id << ',' << s.user << ',' << s.domain << ",," << csv_number(s.rho) << '\n';
  }
  ctx.write("list.csv", csv.str());
  ctx.out() << csv.str();
}

void cmd_registry_query(const RegistryOpts& o, RunContext& ctx) {
  ctx.input(o.dir, true);
  ctx.input(o.vector);
  if (o.prompt.empty() == o.vector.empty()) throw UsageError("registry query needs exactly one of --prompt or --vector");
  const Registry reg(o.dir);
  Embedding v;
  if (!o.prompt.empty()) {
    v = embed(Prompt::from_text(o.prompt));
  } else {
    const JsonDocument doc = JsonDocument::parse(read_input(o.vector));
    try {
      v = doc.root().get<Embedding>();
    } catch (const json::exception&) {
      doc.fail("", "expected an array of numbers");
    }
    if (v.size() != kEmbeddingDim) throw ValidationError("query vector must have " + std::to_string(kEmbeddingDim) + " entries");
  }
  const auto hits = reg.query_similar(v, o.k);
  std::ostringstream csv;
  csv << "rank,id,kind,similarity\n";
  for (std::size_t i = 0; i < hits.size(); ++i) {
    csv << i + 1 << ',' << hits[i].id << ',' << (hits[i].kind == RecordKind::triplet ? "triplet" : "signature") << ','
        << csv_number(hits[i].similarity) << '\n';
  }
  ctx.write("query.csv", csv.str());
  ctx.out() << csv.str();
}

void cmd_registry_distill(const RegistryOpts& o, RunContext& ctx) {
  ctx.input(o.dir, true);
  const Registry reg(o.dir);
  const auto groups = distill(reg, o.top_k);
  ordered_json j = ordered_json::array();
  for (const auto& g : groups) {
    ordered_json top = ordered_json::array();
    for (const auto& [id, t] : g.top) {
      ordered_json e;
      e["id"] = id;
      e["record"] = triplet_to_json(t);
      top.push_back(std::move(e));
    }
    j.push_back({{"domain", g.domain}, {"ku_union", g.ku_union}, {"top", std::move(top)}});
  }
  ctx.write("distill.json", j.dump(2) + "\n");
  ctx.out() << groups.size() << " domain(s) distilled\n";
}

void cmd_registry_store(const RegistryOpts& o, RunContext& ctx) {
  if (o.triplet.empty() == o.signature.empty()) {
    throw UsageError("registry store needs exactly one of --triplet or --signature");
  }
  ctx.input(o.dir, true);
  ctx.input(o.triplet);
  ctx.input(o.signature);
  Registry reg(o.dir);
  ordered_json j;
  if (!o.triplet.empty()) {
    const JsonDocument doc = JsonDocument::parse(read_input(o.triplet));
    j["kind"] = "triplet";
    j["id"] = reg.store(triplet_from_json(doc.root()));
  } else {
    j["kind"] = "signature";
    j["id"] = reg.store(parse_signature_document(read_input(o.signature)));
  }
  ctx.write("stored.json", j.dump(2) + "\n");
  ctx.out() << j["id"].get<std::string>() << '\n';
}

// ---- plot ---------------------------------------------------------------------

std::string quote_cell(const std::string& cell) {
  if (cell.find_first_of(" \t") == std::string::npos && !cell.empty()) return cell;
  return "\"" + cell + "\"";
}

void cmd_plot(const std::string& input, RunContext& ctx) {
  ctx.input(input);
  std::istringstream in(read_input(input));
  std::ostringstream dat;
  std::size_t cols = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::vector<std::string> cells;
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(quote_cell(c));
    if (cols == 0) cols = cells.size();
    for (std::size_t i = 0; i < cells.size(); ++i) dat << (i ? " " : "") << cells[i];
    dat << '\n';
  }
  if (cols < 2) throw ValidationError(input + ": need a header and at least two columns");
  const std::string stem = fs::path(input).stem().string();
  std::ostringstream gp;
  gp << "set datafile separator whitespace\n"
     << "set key autotitle columnhead\n"
     << "set xlabel '" << stem << "'\n"
     << "plot for [i=2:" << cols << "] '" << stem << ".dat' using 1:i with linespoints\n";
  ctx.write(stem + ".dat", dat.str());
  ctx.write(stem + ".gp", gp.str());
  ctx.out() << "wrote " << stem << ".dat and " << stem << ".gp\n";
}

// ---- dispatch -----------------------------------------------------------------

std::vector<std::string> strip_out(const std::vector<std::string>& args) {
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--out" || args[i] == "-o") {
      ++i;
      continue;
    }
    if (args[i].rfind("--out=", 0) == 0) continue;
    kept.push_back(args[i]);
  }
  return kept;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

void cmd_rerun(const std::string& manifest_path, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const RunManifest m = RunManifest::from_json(read_input(manifest_path));
  std::vector<FileDigest> current;
  for (const auto& d : m.inputs) {
    if (!fs::exists(d.path)) throw ValidationError("input recorded in the manifest is missing: " + d.path);
    current.push_back({d.path, file_hash(d.path)});
  }
  if (combined_hash(m.command, m.args, current) != m.input_hash) {
    throw ValidationError("inputs changed since the manifest was written");
  }
  const std::string target = out_dir.empty() ? fs::path(manifest_path).parent_path().string() : out_dir;
  std::vector<std::string> args = m.args;
  args.push_back("--out");
  args.push_back(target.empty() ? "." : target);
  const int code = dispatch(args, out, err);
  if (code != kExitOk) throw Error("rerun failed with exit code " + std::to_string(code));
  std::size_t same = 0;
  for (const auto& o : m.outputs) {
    const fs::path p = fs::path(target) / o.path;
    if (!fs::exists(p) || file_hash(p) != o.hash) throw Error("rerun output differs: " + o.path);
    ++same;
  }
  out << "reproduced " << same << " output(s) byte for byte\n";
}

std::string default_out_dir() {
  const char* env = std::getenv(kOutDirEnv);
  return env && *env ? env : "vsched-out";
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"vsched: vertiport take-off scheduling, cost-function evolution, prompt evolution and a signature "
               "registry"};
  app.footer(std::string("Environment:\n  ") + kOutDirEnv +
             "  default output directory when --out is not given (fallback: ./vsched-out)\n"
             "Exit codes: 0 success, 2 usage error, 3 validation error, 4 runtime or numeric error.\n"
             "Every command writes manifest.json next to its outputs; `vsched rerun --manifest <file>` replays it.");
  app.require_subcommand(1);
  std::string out_dir;
  std::uint64_t seed_value = 0;
  auto add_out = [&](CLI::App* sub) {
    sub->add_option("--out,-o", out_dir, "output directory (default: $" + std::string(kOutDirEnv) + ")");
  };

  GenerateOpts gen;
  auto* g = app.add_subcommand("generate", "generate a scenario from a config or a preset");
  g->add_option("--config", gen.config, "scenario or generation spec (JSON)");
  g->add_option("--preset", gen.preset, "reference | planted (ignored with --config)")
      ->check(CLI::IsMember({"reference", "planted"}));
  auto* gseed = g->add_option("--seed", seed_value, "generation seed (consecutive seeds with --count)");
  g->add_option("--count", gen.count, "number of scenarios");
  g->add_option("--requests", gen.requests, "requests per planted scenario");
  add_out(g);

  ScheduleOpts sch;
  auto* s = app.add_subcommand("schedule", "run the Round-Robin or GA scheduler on a scenario");
  s->add_option("--scenario", sch.scenario, "scenario file (JSON)")->required();
  s->add_option("--algo", sch.algo, "rr | ga")->check(CLI::IsMember({"rr", "ga"}));
  s->add_option("--variant", sch.variant, "GA cost variant v1..v5 | custom");
  s->add_option("--weights", sch.weights, "cost weights file (JSON) applied over the variant preset");
  s->add_option("--params", sch.params, "GA parameter file (JSON)");
  auto* sseed = s->add_option("--seed", seed_value, "GA seed");
  s->add_option("--quantum", sch.quantum, "Round-Robin quantum in seconds");
  s->add_option("--user", sch.user, "user id recorded in the triplet");
  add_out(s);

  CompareOpts cmp;
  auto* c = app.add_subcommand("compare", "RR and GA variants side by side with improvement rows");
  c->add_option("--scenario", cmp.scenario, "scenario file (JSON)")->required();
  c->add_option("--variant,--variants", cmp.variants, "comma-separated GA variants; empty for RR only");
  c->add_option("--params", cmp.params, "GA parameter file (JSON)");
  auto* cseed = c->add_option("--seed", seed_value, "GA seed shared by all variants");
  c->add_option("--quantum", cmp.quantum, "Round-Robin quantum in seconds");
  add_out(c);

  BilevelOpts bl;
  auto* b = app.add_subcommand("bilevel", "evolve inner cost weights over a scenario directory");
  b->add_option("--scenarios", bl.scenarios, "directory of scenario files")->required();
  b->add_option("--params,--config", bl.params, "outer GA and relaxation parameters (JSON)");
  auto* bseed = b->add_option("--seed", seed_value, "outer GA and split seed");
  add_out(b);

  PromptOpts pe;
  auto* p = app.add_subcommand("prompt-evolve", "evolve prompts against the mock worker");
  p->add_option("--task", pe.task, "task file (JSON); default: planted alpha/beta/gamma task");
  p->add_option("--params,--config", pe.params, "fitness and GA parameters (JSON)");
  auto* pseed = p->add_option("--seed", seed_value, "GA seed");
  add_out(p);

  RegistryOpts ro;
  auto* r = app.add_subcommand("registry", "inspect or extend a signature registry");
  r->require_subcommand(1);
  auto add_dir = [&](CLI::App* sub) { sub->add_option("--dir", ro.dir, "registry directory")->required(); };
  auto* rl = r->add_subcommand("list", "list stored records");
  add_dir(rl);
  add_out(rl);
  auto* rq = r->add_subcommand("query", "nearest records by cosine similarity");
  add_dir(rq);
  rq->add_option("--prompt", ro.prompt, "query text, embedded like a prompt");
  rq->add_option("--vector", ro.vector, "query vector file (JSON array)");
  rq->add_option("--k", ro.k, "number of results");
  add_out(rq);
  auto* rd = r->add_subcommand("distill", "top triplets per domain with KU unions");
  add_dir(rd);
  rd->add_option("--top-k", ro.top_k, "triplets kept per domain");
  add_out(rd);
  auto* rs = r->add_subcommand("store", "append a triplet or signature");
  add_dir(rs);
  rs->add_option("--triplet", ro.triplet, "triplet file (JSON)");
  rs->add_option("--signature", ro.signature, "signature document (JSON; ellipsis lines tolerated)");
  add_out(rs);

  std::string plot_input;
  auto* pl = app.add_subcommand("plot", "convert a CSV table into gnuplot data and script");
  pl->add_option("--input", plot_input, "CSV file")->required();
  add_out(pl);

  std::string manifest;
  std::string rerun_out;
  auto* rr = app.add_subcommand("rerun", "replay a run from its manifest and verify identical outputs");
  rr->add_option("--manifest", manifest, "manifest.json of a previous run")->required();
  rr->add_option("--out,-o", rerun_out, "output directory (default: the manifest's directory)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  auto optional_seed = [&](CLI::Option* opt) -> std::optional<std::uint64_t> {
    if (opt->count() > 0) return seed_value;
    return std::nullopt;
  };
  if (rr->parsed()) {
    cmd_rerun(manifest, rerun_out, out, err);
    return kExitOk;
  }

  const std::vector<std::string> recorded = strip_out(args);
  const std::string target = out_dir.empty() ? default_out_dir() : out_dir;
  auto run = [&](const std::string& name, const std::function<void(RunContext&)>& body) {
    RunContext ctx(name, recorded, target, out);
    body(ctx);
    ctx.finish();
    return kExitOk;
  };

  if (g->parsed()) {
    gen.seed = optional_seed(gseed);
    return run("generate", [&](RunContext& ctx) { cmd_generate(gen, ctx); });
  }
  if (s->parsed()) {
    sch.seed = optional_seed(sseed);
    return run("schedule", [&](RunContext& ctx) { cmd_schedule(sch, ctx); });
  }
  if (c->parsed()) {
    cmp.seed = optional_seed(cseed);
    return run("compare", [&](RunContext& ctx) { cmd_compare(cmp, ctx); });
  }
  if (b->parsed()) {
    bl.seed = optional_seed(bseed);
    return run("bilevel", [&](RunContext& ctx) { cmd_bilevel(bl, ctx); });
  }
  if (p->parsed()) {
    pe.seed = optional_seed(pseed);
    return run("prompt-evolve", [&](RunContext& ctx) { cmd_prompt_evolve(pe, ctx); });
  }
  if (rl->parsed()) return run("registry list", [&](RunContext& ctx) { cmd_registry_list(ro, ctx); });
  if (rq->parsed()) return run("registry query", [&](RunContext& ctx) { cmd_registry_query(ro, ctx); });
  if (rd->parsed()) return run("registry distill", [&](RunContext& ctx) { cmd_registry_distill(ro, ctx); });
  if (rs->parsed()) return run("registry store", [&](RunContext& ctx) { cmd_registry_store(ro, ctx); });
  if (pl->parsed()) return run("plot", [&](RunContext& ctx) { cmd_plot(plot_input, ctx); });
  throw UsageError("no command given");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace vsched::cli
