#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vsched {

inline constexpr std::size_t kEmbeddingDim = 256;

using Embedding = std::vector<double>;

/// Whitespace tokenizer; tokens are lowercased and stripped of leading and
/// trailing punctuation. Empty tokens are dropped.
std::vector<std::string> tokenize(std::string_view text);

struct Prompt {
  std::vector<std::string> tokens;
  std::string id;  // hex FNV-1a of the space-joined tokens

  static Prompt from_tokens(std::vector<std::string> tokens);
  static Prompt from_text(std::string_view text);
  std::string text() const;

  bool operator==(const Prompt&) const = default;
};

/// Hashed bag of tokens: each token adds +-1 at a hashed index; the result is
/// L2-normalized. If the signs cancel to the zero vector, tokens are rehashed
/// with an increasing salt until they do not.
Embedding embed_tokens(const std::vector<std::string>& tokens, std::size_t dim = kEmbeddingDim);
inline Embedding embed(const Prompt& p, std::size_t dim = kEmbeddingDim) { return embed_tokens(p.tokens, dim); }

/// Index and sign a token hashes to under a salt (0 = unsalted).
std::pair<std::size_t, double> token_slot(std::string_view token, std::size_t dim, std::uint64_t salt = 0);

double cosine(const Embedding& a, const Embedding& b);
/// Unit vector in the direction of the mean of `vectors`; zero-sum input yields
/// an empty vector.
Embedding normalized_mean(const std::vector<Embedding>& vectors);

/// Prompt-id keyed cache of unit embeddings.
class EmbeddingBank {
 public:
  explicit EmbeddingBank(std::size_t dim = kEmbeddingDim) : dim_(dim) {}
  const Embedding& get(const Prompt& p);
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t dim() const noexcept { return dim_; }

 private:
  std::size_t dim_;
  std::map<std::string, Embedding> entries_;
};

}  // namespace vsched
