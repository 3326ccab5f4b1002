#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace vsched {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

/// Parsed JSON document that remembers the source line of every value, keyed
/// by JSON pointer ("/classes/0/rate"). Used to report schema errors by line.
class JsonDocument {
 public:
  /// Throws SchemaError (field "<document>") on malformed text.
  static JsonDocument parse(std::string_view text);

  const json& root() const noexcept { return root_; }
  /// Line of the value at `pointer`, or of its nearest ancestor.
  int line_of(const std::string& pointer) const;

  [[noreturn]] void fail(const std::string& pointer, const std::string& what) const;

  // Typed field access relative to an object at `pointer`. Missing required
  // fields and wrong types raise SchemaError naming the field and line.
  const json& require(const std::string& pointer, const char* key) const;
  double number(const std::string& pointer, const char* key) const;
  std::optional<double> optional_number(const std::string& pointer, const char* key) const;
  std::int64_t integer(const std::string& pointer, const char* key) const;
  std::optional<std::int64_t> optional_integer(const std::string& pointer, const char* key) const;
  std::string string(const std::string& pointer, const char* key) const;

 private:
  json root_;
  std::map<std::string, int> lines_;
};

/// Maps each JSON pointer in `text` to the 1-based line where its value starts.
/// Assumes `text` is syntactically valid JSON.
std::map<std::string, int> index_json_lines(std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

}  // namespace vsched
