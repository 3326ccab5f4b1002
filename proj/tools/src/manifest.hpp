#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace vsched::cli {

struct FileDigest {
  std::string path;
  std::string hash;
};

/// Record of one command run, written as manifest.json in the output
/// directory. Contains no wall-clock data, so identical runs give identical
/// manifests.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;  // command line without --out
  std::vector<FileDigest> inputs;
  std::map<std::string, std::uint64_t> seeds;
  std::string input_hash;  // over command, args and input contents
  std::vector<FileDigest> outputs;  // paths relative to the output directory

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

/// Hex FNV-1a of a file's bytes.
std::string file_hash(const std::filesystem::path& p);

/// Digest entries for a file, or for every regular file below a directory in
/// sorted order.
std::vector<FileDigest> digest_inputs(const std::filesystem::path& p);

std::string combined_hash(const std::string& command, const std::vector<std::string>& args,
                          const std::vector<FileDigest>& inputs);

}  // namespace vsched::cli
