#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vsched/embedding.hpp"
#include "vsched/json_support.hpp"
#include "vsched/triplet.hpp"

namespace vsched {

struct TopPrompt {
  std::string prompt;
  std::string response;
  double score = 0.0;

  bool operator==(const TopPrompt&) const = default;
};

/// Per-user record. KU/KI entries are phrases and may contain spaces.
struct CognitiveSignature {
  std::string user;
  std::string domain;
  std::vector<std::string> ku;
  std::vector<std::string> ki;
  std::vector<TopPrompt> top_prompts;  // at most 5
  double rho = 1.0;                    // reliability in [0, 1]
  Embedding centroid;                  // unit vector, or empty when no top prompt has a token
  std::vector<std::string> behavior_tags;

  bool operator==(const CognitiveSignature&) const = default;
  void validate() const;
};

/// Normalized mean embedding of the top prompts; empty if none is embeddable.
Embedding signature_centroid(const std::vector<TopPrompt>& top, std::size_t dim = kEmbeddingDim);

ordered_json metrics_to_json(const MetricVector& m);
ordered_json triplet_to_json(const Triplet& t);
Triplet triplet_from_json(const json& j);
ordered_json signature_to_json(const CognitiveSignature& s);
/// Missing rho defaults to 1; a missing centroid is computed from the top prompts.
CognitiveSignature signature_from_json(const json& j);

/// Accepts hand-written signature documents: lines consisting only of an
/// ellipsis are dropped, as are trailing commas left behind.
CognitiveSignature parse_signature_document(std::string_view text);

enum class RecordKind { triplet, signature };

struct SimilarRecord {
  std::string id;
  RecordKind kind = RecordKind::triplet;
  double similarity = 0.0;
};

/// Append-only store in a directory holding triplets.jsonl and
/// signatures.jsonl. Any number of readers; writers serialize on an exclusive
/// lock of `.lock` and first catch up with lines appended by other processes.
class Registry {
 public:
  explicit Registry(std::filesystem::path dir);
  ~Registry();
  Registry(const Registry&) = delete;
  Registry& operator=(const Registry&) = delete;

  std::string store(const Triplet& t);
  std::string store(const CognitiveSignature& s);

  std::optional<Triplet> get_triplet(const std::string& id) const;
  std::optional<CognitiveSignature> get_signature(const std::string& id) const;

  /// Records in storage order, with their ids.
  const std::vector<std::pair<std::string, Triplet>>& triplets() const noexcept { return triplets_; }
  const std::vector<std::pair<std::string, CognitiveSignature>>& signatures() const noexcept { return signatures_; }
  std::size_t size() const noexcept { return triplets_.size() + signatures_.size(); }

  /// Picks up records appended since the last read.
  void refresh();

  /// Exact top-k by cosine over signature centroids and triplet prompt
  /// embeddings. Ties go to the smaller id.
  std::vector<SimilarRecord> query_similar(const Embedding& v, int k) const;

  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  struct Log {
    std::filesystem::path path;
    std::uintmax_t offset = 0;
  };
  template <typename F>
  void read_new(Log& log, F&& on_line);
  void append(const Log& log, const std::string& line);
  void catch_up();

  std::filesystem::path dir_;
  int lock_fd_ = -1;
  Log triplet_log_;
  Log signature_log_;
  std::vector<std::pair<std::string, Triplet>> triplets_;
  std::vector<std::pair<std::string, CognitiveSignature>> signatures_;
  std::map<std::string, std::size_t> triplet_index_;
  std::map<std::string, std::size_t> signature_index_;
  std::map<std::string, Embedding> triplet_vectors_;
};

struct SwarmWeights {
  std::vector<double> w;  // accuracy, creativity, generality, robustness by default

  static SwarmWeights uniform(std::size_t m);
  void validate() const;
};

struct SwarmScores {
  std::vector<double> scores;
  std::vector<std::size_t> ranking;  // agent indices, best first, ties by index
};

/// Rows are agents, columns metrics.
SwarmScores swarm_fitness(const std::vector<std::vector<double>>& metrics, const SwarmWeights& w);

inline constexpr double kKuBonus = 0.5;
inline constexpr double kKiPenalty = 0.5;

/// Fraction of the prompt's distinct tokens that occur in any of `phrases`.
double phrase_overlap(const Prompt& p, const std::vector<std::string>& phrases);

/// S(p, c) = max(0, max(0, cos(p, centroid)) + 0.5 KU overlap - 0.5 KI overlap).
double signature_score(const Prompt& p, const CognitiveSignature& s, EmbeddingBank& bank);

/// Reliability-weighted distribution over prompts. All-zero reliabilities
/// weight users uniformly; all-zero scores give the uniform distribution.
std::vector<double> aggregate_q(const std::vector<Prompt>& prompts, const std::vector<CognitiveSignature>& sigs);

struct PatternGroup {
  std::string domain;
  std::vector<std::pair<std::string, Triplet>> top;  // best first
  std::vector<std::string> ku_union;                 // sorted, from signatures of the domain
};

/// Top-k triplets per domain by merit, ties by earlier timestamp then smaller id.
std::vector<PatternGroup> distill(const Registry& reg, int top_k);

}  // namespace vsched
