#pragma once

#include <string>

#include "vsched/bilevel.hpp"
#include "vsched/ga_scheduler.hpp"
#include "vsched/prompt_evo.hpp"

namespace vsched::cli {

// Parameter files are JSON objects; every key is optional and unknown keys
// are rejected with the offending line.

GaParams parse_ga_params(const std::string& text, GaParams base = {});
/// Overrides fields of `base`; a "variant" key replaces the base preset first.
CostWeights parse_cost_weights(const std::string& text, CostWeights base);

struct BilevelParams {
  OuterGaParams outer;
  RelaxationOptions relax;
};
BilevelParams parse_bilevel_params(const std::string& text);

struct PromptParams {
  PromptFitnessParams fitness;
  PromptGaParams ga;
};
PromptParams parse_prompt_params(const std::string& text);

/// The built-in planted task: target keywords alpha, beta, gamma among a
/// vocabulary of distractors.
PromptTask default_prompt_task();

}  // namespace vsched::cli
