#include "vsched/json_support.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "vsched/errors.hpp"

namespace vsched {

namespace {

std::string escape_pointer_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

int line_at_offset(std::string_view text, std::size_t offset) {
  int line = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

struct Frame {
  std::string pointer;
  bool is_array;
  int next_index;
  std::string pending_key;
};

}  // namespace

std::map<std::string, int> index_json_lines(std::string_view text) {
  std::map<std::string, int> lines;
  std::vector<Frame> stack;
  int line = 1;
  bool expect_key = false;

  auto value_pointer = [&]() -> std::string {
    if (stack.empty()) return "";
    Frame& top = stack.back();
    if (top.is_array) return top.pointer + "/" + std::to_string(top.next_index++);
    return top.pointer + "/" + escape_pointer_token(top.pending_key);
  };

  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r' || c == ',' || c == ':') {
      if (c == ',' && !stack.empty() && !stack.back().is_array) expect_key = true;
      ++i;
      continue;
    }
    if (c == '"') {
      std::string s;
      ++i;
      while (i < text.size() && text[i] != '"') {
        if (text[i] == '\\' && i + 1 < text.size()) {
          // Keys only need exact matching for simple escapes.
          const char e = text[i + 1];
          s += (e == 'n') ? '\n' : (e == 't') ? '\t' : e;
          i += 2;
          continue;
        }
        if (text[i] == '\n') ++line;
        s += text[i++];
      }
      ++i;
      if (expect_key) {
        stack.back().pending_key = s;
        expect_key = false;
      } else {
        lines[value_pointer()] = line;
      }
      continue;
    }
    if (c == '{' || c == '[') {
      const std::string ptr = value_pointer();
      lines[ptr] = line;
      stack.push_back(Frame{ptr, c == '[', 0, {}});
      expect_key = (c == '{');
      ++i;
      continue;
    }
    if (c == '}' || c == ']') {
      stack.pop_back();
      expect_key = false;
      ++i;
      continue;
    }
    // Scalar literal: number, true, false, null.
    lines[value_pointer()] = line;
    while (i < text.size() && text[i] != ',' && text[i] != '}' && text[i] != ']' &&
           text[i] != '\n' && text[i] != ' ' && text[i] != '\t' && text[i] != '\r') {
      ++i;
    }
  }
  return lines;
}

JsonDocument JsonDocument::parse(std::string_view text) {
  JsonDocument doc;
  try {
    doc.root_ = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw SchemaError("<document>", line_at_offset(text, e.byte), e.what());
  }
  doc.lines_ = index_json_lines(text);
  return doc;
}

int JsonDocument::line_of(const std::string& pointer) const {
  std::string p = pointer;
  while (true) {
    if (auto it = lines_.find(p); it != lines_.end()) return it->second;
    if (p.empty()) return 1;
    p = p.substr(0, p.rfind('/'));
  }
}

void JsonDocument::fail(const std::string& pointer, const std::string& what) const {
  throw SchemaError(pointer.empty() ? "/" : pointer, line_of(pointer), what);
}

const json& JsonDocument::require(const std::string& pointer, const char* key) const {
  const json& obj = root_.at(json::json_pointer(pointer));
  const std::string field = pointer + "/" + key;
  if (!obj.is_object()) fail(pointer, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(field, "missing required field");
  return *it;
}

double JsonDocument::number(const std::string& pointer, const char* key) const {
  const json& v = require(pointer, key);
  if (!v.is_number()) fail(pointer + "/" + key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(pointer + "/" + key, "expected a finite number");
  return d;
}

std::optional<double> JsonDocument::optional_number(const std::string& pointer,
                                                    const char* key) const {
  const json& obj = root_.at(json::json_pointer(pointer));
  if (!obj.contains(key)) return std::nullopt;
  return number(pointer, key);
}

std::int64_t JsonDocument::integer(const std::string& pointer, const char* key) const {
  const json& v = require(pointer, key);
  if (!v.is_number_integer()) fail(pointer + "/" + key, "expected an integer");
  return v.get<std::int64_t>();
}

std::optional<std::int64_t> JsonDocument::optional_integer(const std::string& pointer,
                                                           const char* key) const {
  const json& obj = root_.at(json::json_pointer(pointer));
  if (!obj.contains(key)) return std::nullopt;
  return integer(pointer, key);
}

std::string JsonDocument::string(const std::string& pointer, const char* key) const {
  const json& v = require(pointer, key);
  if (!v.is_string()) fail(pointer + "/" + key, "expected a string");
  return v.get<std::string>();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StorageError("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw StorageError("write failed: " + path);
}

}  // namespace vsched
