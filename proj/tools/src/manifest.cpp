#include "manifest.hpp"

#include <algorithm>

#include "vsched/errors.hpp"
#include "vsched/json_support.hpp"
#include "vsched/random.hpp"

namespace vsched::cli {

namespace fs = std::filesystem;

std::string file_hash(const fs::path& p) { return to_hex(fnv1a(read_text_file(p.string()))); }

std::vector<FileDigest> digest_inputs(const fs::path& p) {
  std::vector<FileDigest> out;
  if (fs::is_directory(p)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(p)) {
      if (e.is_regular_file() && e.path().filename() != ".lock") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back({f.generic_string(), file_hash(f)});
  } else if (fs::exists(p)) {
    out.push_back({p.generic_string(), file_hash(p)});
  }
  return out;
}

std::string combined_hash(const std::string& command, const std::vector<std::string>& args,
                          const std::vector<FileDigest>& inputs) {
  std::uint64_t h = fnv1a(command);
  for (const auto& a : args) h = fnv1a(a, fnv1a_u64(a.size(), h));
  for (const auto& d : inputs) h = fnv1a(d.hash, fnv1a(d.path, h));
  return to_hex(h);
}

std::string RunManifest::to_json() const {
  ordered_json j;
  j["command"] = command;
  j["args"] = args;
  auto digests = [](const std::vector<FileDigest>& v) {
    ordered_json a = ordered_json::array();
    for (const auto& d : v) a.push_back({{"path", d.path}, {"hash", d.hash}});
    return a;
  };
  j["inputs"] = digests(inputs);
  j["seeds"] = seeds;
  j["input_hash"] = input_hash;
  j["outputs"] = digests(outputs);
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  const JsonDocument doc = JsonDocument::parse(text);
  const json& j = doc.root();
  if (!j.is_object()) doc.fail("", "manifest must be an object");
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.args = j.at("args").get<std::vector<std::string>>();
    for (const auto& d : j.at("inputs")) m.inputs.push_back({d.at("path"), d.at("hash")});
    m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
    m.input_hash = j.at("input_hash").get<std::string>();
    for (const auto& d : j.at("outputs")) m.outputs.push_back({d.at("path"), d.at("hash")});
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

}  // namespace vsched::cli
