#include "params.hpp"

#include <initializer_list>
#include <set>

#include "vsched/json_support.hpp"

namespace vsched::cli {

namespace {

class Reader {
 public:
  Reader(const JsonDocument& doc, std::string pointer, std::initializer_list<const char*> allowed)
      : doc_(doc), ptr_(std::move(pointer)) {
    const json& obj = ptr_.empty() ? doc.root() : doc.root().at(json::json_pointer(ptr_));
    if (!obj.is_object()) doc.fail(ptr_, "expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items()) {
      if (!ok.count(key)) doc.fail(ptr_ + "/" + key, "unknown key '" + key + "'");
    }
    obj_ = &obj;
  }

  bool has(const char* key) const { return obj_->contains(key); }
  void num(const char* key, double& into) const {
    if (has(key)) into = doc_.number(ptr_, key);
  }
  template <typename I>
  void integer(const char* key, I& into) const {
    if (has(key)) into = static_cast<I>(doc_.integer(ptr_, key));
  }
  std::string str(const char* key) const { return doc_.string(ptr_, key); }

 private:
  const JsonDocument& doc_;
  std::string ptr_;
  const json* obj_ = nullptr;
};

}  // namespace

GaParams parse_ga_params(const std::string& text, GaParams p) {
  const JsonDocument doc = JsonDocument::parse(text);
  const Reader r(doc, "",
                 {"pop_size", "generations", "crossover_prob", "mutation_prob", "elite_count", "tournament_size",
                  "seed"});
  r.integer("pop_size", p.pop_size);
  r.integer("generations", p.generations);
  r.num("crossover_prob", p.crossover_prob);
  r.num("mutation_prob", p.mutation_prob);
  r.integer("elite_count", p.elite_count);
  r.integer("tournament_size", p.tournament_size);
  r.integer("seed", p.seed);
  p.validate();
  return p;
}

CostWeights parse_cost_weights(const std::string& text, CostWeights w) {
  const JsonDocument doc = JsonDocument::parse(text);
  const Reader r(doc, "",
                 {"variant", "alpha1", "alpha2", "alpha3", "max_delay_coeff", "class1_penalty_scale"});
  if (r.has("variant")) w = CostWeights::preset(variant_from_string(r.str("variant")));
  r.num("alpha1", w.alpha1);
  r.num("alpha2", w.alpha2);
  r.num("alpha3", w.alpha3);
  r.num("max_delay_coeff", w.max_delay_coeff);
  r.num("class1_penalty_scale", w.class1_penalty_scale);
  w.validate();
  return w;
}

BilevelParams parse_bilevel_params(const std::string& text) {
  const JsonDocument doc = JsonDocument::parse(text);
  BilevelParams b;
  const Reader r(doc, "",
                 {"pop_size", "generations", "tournament_size", "crossover_prob", "mutation_prob", "kappa", "m_samp",
                  "elite", "eta", "seed", "relaxation"});
  OuterGaParams& o = b.outer;
  r.integer("pop_size", o.pop_size);
  r.integer("generations", o.generations);
  r.integer("tournament_size", o.tournament_size);
  r.num("crossover_prob", o.crossover_prob);
  r.num("mutation_prob", o.mutation_prob);
  r.num("kappa", o.kappa);
  r.integer("m_samp", o.m_samp);
  r.integer("elite", o.elite);
  r.num("eta", o.eta);
  r.integer("seed", o.seed);
  if (r.has("relaxation")) {
    const Reader x(doc, "/relaxation", {"u_max", "tau", "smooth_eps", "cvar_width", "hold_weight", "bin_width"});
    x.num("u_max", b.relax.u_max);
    x.num("tau", b.relax.tau);
    x.num("smooth_eps", b.relax.smooth_eps);
    x.num("cvar_width", b.relax.cvar_width);
    x.num("hold_weight", b.relax.hold_weight);
    x.integer("bin_width", b.relax.bin_width);
  }
  o.validate();
  return b;
}

PromptParams parse_prompt_params(const std::string& text) {
  const JsonDocument doc = JsonDocument::parse(text);
  PromptParams p;
  const Reader r(doc, "", {"fitness", "ga"});
  if (r.has("fitness")) {
    const Reader f(doc, "/fitness", {"metric_weights", "lambda_tok", "lambda_div", "lambda_exp", "delta"});
    if (f.has("metric_weights")) {
      const json& w = doc.require("/fitness", "metric_weights");
      if (!w.is_array()) doc.fail("/fitness/metric_weights", "expected an array of numbers");
      p.fitness.metric_weights.clear();
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (!w[i].is_number()) doc.fail("/fitness/metric_weights/" + std::to_string(i), "expected a number");
        p.fitness.metric_weights.push_back(w[i].get<double>());
      }
    }
    f.num("lambda_tok", p.fitness.lambda_tok);
    f.num("lambda_div", p.fitness.lambda_div);
    f.num("lambda_exp", p.fitness.lambda_exp);
    f.num("delta", p.fitness.delta);
  }
  if (r.has("ga")) {
    const Reader g(doc, "/ga",
                   {"generations", "pop_size", "crossover_prob", "mutation_prob", "elite", "max_tokens", "seed"});
    g.integer("generations", p.ga.generations);
    g.integer("pop_size", p.ga.pop_size);
    g.num("crossover_prob", p.ga.crossover_prob);
    g.num("mutation_prob", p.ga.mutation_prob);
    g.integer("elite", p.ga.elite);
    g.integer("max_tokens", p.ga.max_tokens);
    g.integer("seed", p.ga.seed);
  }
  p.fitness.validate();
  p.ga.validate();
  return p;
}

PromptTask default_prompt_task() {
  PromptTask t;
  t.name = "planted-alpha-beta-gamma";
  t.planted = {"alpha", "beta", "gamma"};
  t.vocabulary = {"alpha",  "beta",   "gamma",  "schedule", "queue",   "drone", "pad",     "fast",
                  "route",  "battery", "window", "slot",     "delay",   "fair",  "robust",  "summary",
                  "verbose", "poetic", "explain", "weather"};
  return t;
}

}  // namespace vsched::cli
