#include "vsched/embedding.hpp"

#include <cctype>
#include <cmath>

#include "vsched/errors.hpp"
#include "vsched/random.hpp"

namespace vsched {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    std::size_t b = 0;
    std::size_t e = cur.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(cur[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(cur[e - 1]))) --e;
    if (e > b) out.push_back(cur.substr(b, e - b));
    cur.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return out;
}

Prompt Prompt::from_tokens(std::vector<std::string> tokens) {
  std::vector<std::string> norm;
  for (const auto& t : tokens) {
    for (auto& piece : tokenize(t)) norm.push_back(std::move(piece));
  }
  if (norm.empty()) throw ValidationError("a prompt needs at least one token");
  Prompt p;
  p.tokens = std::move(norm);
  p.id = to_hex(fnv1a(p.text()));
  return p;
}

Prompt Prompt::from_text(std::string_view text) { return from_tokens(tokenize(text)); }

std::string Prompt::text() const {
  std::string s;
  for (const auto& t : tokens) {
    if (!s.empty()) s += ' ';
    s += t;
  }
  return s;
}

std::pair<std::size_t, double> token_slot(std::string_view token, std::size_t dim, std::uint64_t salt) {
  std::uint64_t h = fnv1a(token);
  if (salt != 0) h = fnv1a_u64(salt, h);
  return {static_cast<std::size_t>(h % dim), (h >> 63) ? -1.0 : 1.0};
}

Embedding embed_tokens(const std::vector<std::string>& tokens, std::size_t dim) {
  if (tokens.empty()) throw ValidationError("cannot embed an empty prompt");
  for (std::uint64_t salt = 0;; ++salt) {
    Embedding v(dim, 0.0);
    for (const auto& t : tokens) {
      const auto [i, s] = token_slot(t, dim, salt);
      v[i] += s;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm == 0.0) continue;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    return v;
  }
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) throw UsageError("embedding dimensions differ");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

Embedding normalized_mean(const std::vector<Embedding>& vectors) {
  if (vectors.empty()) return {};
  Embedding m(vectors.front().size(), 0.0);
  for (const auto& v : vectors) {
    if (v.size() != m.size()) throw UsageError("embedding dimensions differ");
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += v[i];
  }
  double norm = 0.0;
  for (double x : m) norm += x * x;
  if (norm == 0.0) return {};
  norm = std::sqrt(norm);
  for (double& x : m) x /= norm;
  return m;
}

const Embedding& EmbeddingBank::get(const Prompt& p) {
  auto it = entries_.find(p.id);
  if (it == entries_.end()) it = entries_.emplace(p.id, embed(p, dim_)).first;
  return it->second;
}

}  // namespace vsched
