#include "vsched/errors.hpp"

#include <utility>

namespace vsched {

SchemaError::SchemaError(std::string field, int line, const std::string& what)
    : ValidationError("field '" + field + "' (line " + std::to_string(line) + "): " + what),
      field_(std::move(field)),
      line_(line) {}

EvaluationError::EvaluationError(std::string prompt_id, const std::string& what)
    : Error("evaluation of prompt " + prompt_id + " failed: " + what),
      prompt_id_(std::move(prompt_id)) {}

}  // namespace vsched
