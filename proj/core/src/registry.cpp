#include "vsched/registry.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "vsched/errors.hpp"

namespace vsched {

namespace {

constexpr std::size_t kMaxTopPrompts = 5;

std::string sense_name(ObjectiveSense s) { return s == ObjectiveSense::maximize ? "maximize" : "minimize"; }

ObjectiveSense sense_from(const std::string& s) {
  if (s == "minimize") return ObjectiveSense::minimize;
  if (s == "maximize") return ObjectiveSense::maximize;
  throw ValidationError("unknown objective sense '" + s + "'");
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw ValidationError(std::string("record is missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("record field '") + key + "': " + e.what());
  }
}

MetricVector metrics_from(const json& j) {
  MetricVector m;
  m.avg_wait = field<double>(j, "avg_wait");
  m.max_wait = field<double>(j, "max_wait");
  m.std_wait = field<double>(j, "std_wait");
  m.tail_95 = field<double>(j, "tail_95");
  m.pct_no_wait = field<double>(j, "pct_no_wait");
  m.pct_long_wait = field<double>(j, "pct_long_wait");
  m.penalty_total = field<double>(j, "penalty_total");
  m.throughput = field<double>(j, "throughput");
  m.total_wait = field<Seconds>(j, "total_wait");
  m.count = field<std::size_t>(j, "count");
  return m;
}

void validate_triplet(const Triplet& t) {
  if (!std::isfinite(t.fitness)) throw ValidationError("triplet fitness must be finite");
  if (t.prompt_id.empty()) throw ValidationError("triplet prompt_id must not be empty");
}

std::set<std::string> phrase_tokens(const std::vector<std::string>& phrases) {
  std::set<std::string> out;
  for (const auto& ph : phrases) {
    for (auto& t : tokenize(ph)) out.insert(std::move(t));
  }
  return out;
}

std::string make_id(char prefix, std::size_t n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c-%08zu", prefix, n);
  return buf;
}

std::optional<Embedding> prompt_vector(const std::string& text) {
  const auto tokens = tokenize(text);
  if (tokens.empty()) return std::nullopt;
  return embed_tokens(tokens);
}

class FileLock {
 public:
  explicit FileLock(int fd) : fd_(fd) {
    while (::flock(fd_, LOCK_EX) != 0) {
      if (errno != EINTR) throw StorageError(std::string("cannot lock registry: ") + std::strerror(errno));
    }
  }
  ~FileLock() { ::flock(fd_, LOCK_UN); }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_;
};

}  // namespace

ordered_json metrics_to_json(const MetricVector& m) {
  ordered_json j;
  j["avg_wait"] = m.avg_wait;
  j["max_wait"] = m.max_wait;
  j["std_wait"] = m.std_wait;
  j["tail_95"] = m.tail_95;
  j["pct_no_wait"] = m.pct_no_wait;
  j["pct_long_wait"] = m.pct_long_wait;
  j["penalty_total"] = m.penalty_total;
  j["throughput"] = m.throughput;
  j["total_wait"] = m.total_wait;
  j["count"] = m.count;
  return j;
}

void CognitiveSignature::validate() const {
  if (user.empty()) throw ValidationError("signature user must not be empty");
  if (top_prompts.size() > kMaxTopPrompts) throw ValidationError("signature holds more than 5 top prompts");
  for (const auto& tp : top_prompts) {
    if (!(tp.score >= 0.0 && tp.score <= 1.0)) throw ValidationError("top prompt score outside [0, 1]");
  }
  if (!(rho >= 0.0 && rho <= 1.0)) throw ValidationError("signature rho outside [0, 1]");
  if (!centroid.empty()) {
    double n2 = 0.0;
    for (double x : centroid) n2 += x * x;
    if (std::abs(std::sqrt(n2) - 1.0) > 1e-9) throw ValidationError("signature centroid is not unit-norm");
  }
}

Embedding signature_centroid(const std::vector<TopPrompt>& top, std::size_t dim) {
  std::vector<Embedding> vs;
  for (const auto& tp : top) {
    const auto tokens = tokenize(tp.prompt);
    if (!tokens.empty()) vs.push_back(embed_tokens(tokens, dim));
  }
  return normalized_mean(vs);
}

ordered_json triplet_to_json(const Triplet& t) {
  ordered_json j;
  j["prompt_id"] = t.prompt_id;
  j["prompt_text"] = t.prompt_text;
  j["fitness"] = t.fitness;
  j["sense"] = sense_name(t.sense);
  j["solution"] = {{"metrics", metrics_to_json(t.solution.metrics)}, {"schedule_digest", t.solution.schedule_digest}};
  j["timestamp"] = t.timestamp;
  j["user_id"] = t.user_id;
  j["domain"] = t.domain;
  return j;
}

Triplet triplet_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("triplet record must be an object");
  Triplet t;
  t.prompt_id = field<std::string>(j, "prompt_id");
  t.prompt_text = field<std::string>(j, "prompt_text");
  t.fitness = field<double>(j, "fitness");
  t.sense = sense_from(field<std::string>(j, "sense"));
  const json& sol = field<json>(j, "solution");
  t.solution.metrics = metrics_from(field<json>(sol, "metrics"));
  t.solution.schedule_digest = field<std::string>(sol, "schedule_digest");
  t.timestamp = field<std::int64_t>(j, "timestamp");
  t.user_id = field<std::string>(j, "user_id");
  t.domain = field<std::string>(j, "domain");
  validate_triplet(t);
  return t;
}

ordered_json signature_to_json(const CognitiveSignature& s) {
  ordered_json j;
  j["user"] = s.user;
  j["domain"] = s.domain;
  j["KU"] = s.ku;
  j["KI"] = s.ki;
  ordered_json top = ordered_json::array();
  for (const auto& tp : s.top_prompts) {
    ordered_json e;
    e["prompt"] = tp.prompt;
    e["response"] = tp.response;
    e["score"] = tp.score;
    top.push_back(std::move(e));
  }
  j["Top5_Prompts"] = std::move(top);
  j["rho"] = s.rho;
  j["centroid"] = s.centroid;
  j["behavior_tags"] = s.behavior_tags;
  return j;
}

CognitiveSignature signature_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("signature record must be an object");
  CognitiveSignature s;
  s.user = field<std::string>(j, "user");
  s.domain = field<std::string>(j, "domain");
  s.ku = field<std::vector<std::string>>(j, "KU");
  s.ki = field<std::vector<std::string>>(j, "KI");
  const json& top = field<json>(j, "Top5_Prompts");
  if (!top.is_array()) throw ValidationError("Top5_Prompts must be an array");
  for (const auto& e : top) {
    s.top_prompts.push_back(
        {field<std::string>(e, "prompt"), field<std::string>(e, "response"), field<double>(e, "score")});
  }
  if (j.contains("rho")) s.rho = field<double>(j, "rho");
  s.centroid = j.contains("centroid") ? field<Embedding>(j, "centroid") : signature_centroid(s.top_prompts);
  if (j.contains("behavior_tags")) s.behavior_tags = field<std::vector<std::string>>(j, "behavior_tags");
  s.validate();
  return s;
}

CognitiveSignature parse_signature_document(std::string_view text) {
  std::string cleaned;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    std::string trimmed = line;
    trimmed.erase(0, trimmed.find_first_not_of(" \t\r"));
    trimmed.erase(trimmed.find_last_not_of(" \t\r,") + 1);
    if (trimmed == "...") continue;
    cleaned += line;
    cleaned += '\n';
  }
  // Drop commas that now precede a closing bracket (outside string literals).
  std::string out;
  bool in_string = false;
  for (std::size_t i = 0; i < cleaned.size(); ++i) {
    if (in_string) {
      if (cleaned[i] == '\\') {
        out += cleaned[i++];
      } else if (cleaned[i] == '"') {
        in_string = false;
      }
      if (i < cleaned.size()) out += cleaned[i];
      continue;
    }
    if (cleaned[i] == '"') in_string = true;
    if (cleaned[i] == ',') {
      std::size_t k = i + 1;
      while (k < cleaned.size() && std::isspace(static_cast<unsigned char>(cleaned[k]))) ++k;
      if (k < cleaned.size() && (cleaned[k] == ']' || cleaned[k] == '}')) continue;
    }
    out += cleaned[i];
  }
  const JsonDocument doc = JsonDocument::parse(out);
  return signature_from_json(doc.root());
}

Registry::Registry(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw StorageError("cannot create registry directory " + dir_.string() + ": " + ec.message());
  const auto lock_path = dir_ / ".lock";
  lock_fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (lock_fd_ < 0) throw StorageError("cannot open " + lock_path.string() + ": " + std::strerror(errno));
  triplet_log_.path = dir_ / "triplets.jsonl";
  signature_log_.path = dir_ / "signatures.jsonl";
  refresh();
}

Registry::~Registry() {
  if (lock_fd_ >= 0) ::close(lock_fd_);
}

template <typename F>
void Registry::read_new(Log& log, F&& on_line) {
  std::ifstream in(log.path, std::ios::binary);
  if (!in) return;
  in.seekg(static_cast<std::streamoff>(log.offset));
  std::string line;
  while (std::getline(in, line)) {
    if (in.eof()) break;  // incomplete trailing line from a writer in progress
    log.offset += line.size() + 1;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw StorageError(log.path.string() + ": corrupt record: " + e.what());
    }
    on_line(j);
  }
}

void Registry::refresh() {
  read_new(triplet_log_, [&](const json& j) {
    const std::string id = field<std::string>(j, "id");
    if (triplet_index_.count(id)) throw StorageError("duplicate triplet id " + id);
    Triplet t = triplet_from_json(j.at("record"));
    if (auto v = prompt_vector(t.prompt_text)) triplet_vectors_.emplace(id, std::move(*v));
    triplet_index_.emplace(id, triplets_.size());
    triplets_.emplace_back(id, std::move(t));
  });
  read_new(signature_log_, [&](const json& j) {
    const std::string id = field<std::string>(j, "id");
    if (signature_index_.count(id)) throw StorageError("duplicate signature id " + id);
    signature_index_.emplace(id, signatures_.size());
    signatures_.emplace_back(id, signature_from_json(j.at("record")));
  });
}

void Registry::append(const Log& log, const std::string& line) {
  const int fd = ::open(log.path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw StorageError("cannot open " + log.path.string() + ": " + std::strerror(errno));
  std::size_t done = 0;
  while (done < line.size()) {
    const ssize_t w = ::write(fd, line.data() + done, line.size() - done);
    if (w < 0) {
      if (errno == EINTR) continue;
      const std::string why = std::strerror(errno);
      ::close(fd);
      throw StorageError("cannot write " + log.path.string() + ": " + why);
    }
    done += static_cast<std::size_t>(w);
  }
  if (::close(fd) != 0) throw StorageError("cannot close " + log.path.string() + ": " + std::strerror(errno));
}

std::string Registry::store(const Triplet& t) {
  validate_triplet(t);
  FileLock lock(lock_fd_);
  refresh();
  const std::string id = make_id('t', triplets_.size() + 1);
  ordered_json j;
  j["id"] = id;
  j["record"] = triplet_to_json(t);
  append(triplet_log_, j.dump() + "\n");
  refresh();
  return id;
}

std::string Registry::store(const CognitiveSignature& s) {
  s.validate();
  FileLock lock(lock_fd_);
  refresh();
  const std::string id = make_id('s', signatures_.size() + 1);
  ordered_json j;
  j["id"] = id;
  j["record"] = signature_to_json(s);
  append(signature_log_, j.dump() + "\n");
  refresh();
  return id;
}

std::optional<Triplet> Registry::get_triplet(const std::string& id) const {
  const auto it = triplet_index_.find(id);
  if (it == triplet_index_.end()) return std::nullopt;
  return triplets_[it->second].second;
}

std::optional<CognitiveSignature> Registry::get_signature(const std::string& id) const {
  const auto it = signature_index_.find(id);
  if (it == signature_index_.end()) return std::nullopt;
  return signatures_[it->second].second;
}

std::vector<SimilarRecord> Registry::query_similar(const Embedding& v, int k) const {
  if (k <= 0) throw UsageError("k must be positive");
  std::vector<SimilarRecord> all;
  for (const auto& [id, s] : signatures_) {
    if (!s.centroid.empty()) all.push_back({id, RecordKind::signature, cosine(v, s.centroid)});
  }
  for (const auto& [id, e] : triplet_vectors_) all.push_back({id, RecordKind::triplet, cosine(v, e)});
  std::sort(all.begin(), all.end(), [](const SimilarRecord& a, const SimilarRecord& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
  });
  if (all.size() > static_cast<std::size_t>(k)) all.resize(static_cast<std::size_t>(k));
  return all;
}

SwarmWeights SwarmWeights::uniform(std::size_t m) {
  if (m == 0) throw UsageError("swarm weights need at least one metric");
  return {std::vector<double>(m, 1.0 / static_cast<double>(m))};
}

void SwarmWeights::validate() const {
  if (w.empty()) throw ValidationError("swarm weights must not be empty");
  double sum = 0.0;
  for (double x : w) {
    if (!(x >= 0.0)) throw ValidationError("swarm weights must be nonnegative");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("swarm weights must sum to 1");
}

SwarmScores swarm_fitness(const std::vector<std::vector<double>>& metrics, const SwarmWeights& w) {
  w.validate();
  SwarmScores out;
  for (const auto& row : metrics) {
    if (row.size() != w.w.size()) {
      throw UsageError("agent has " + std::to_string(row.size()) + " metrics, weights have " +
                       std::to_string(w.w.size()));
    }
    double s = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) s += w.w[j] * row[j];
    out.scores.push_back(s);
  }
  out.ranking.resize(metrics.size());
  for (std::size_t i = 0; i < out.ranking.size(); ++i) out.ranking[i] = i;
  std::stable_sort(out.ranking.begin(), out.ranking.end(),
                   [&](std::size_t a, std::size_t b) { return out.scores[a] > out.scores[b]; });
  return out;
}

double phrase_overlap(const Prompt& p, const std::vector<std::string>& phrases) {
  const std::set<std::string> distinct(p.tokens.begin(), p.tokens.end());
  if (distinct.empty()) return 0.0;
  const auto vocab = phrase_tokens(phrases);
  std::size_t hit = 0;
  for (const auto& t : distinct) hit += vocab.count(t);
  return static_cast<double>(hit) / static_cast<double>(distinct.size());
}

double signature_score(const Prompt& p, const CognitiveSignature& s, EmbeddingBank& bank) {
  const double sim = s.centroid.empty() ? 0.0 : std::max(0.0, cosine(bank.get(p), s.centroid));
  return std::max(0.0, sim + kKuBonus * phrase_overlap(p, s.ku) - kKiPenalty * phrase_overlap(p, s.ki));
}

std::vector<double> aggregate_q(const std::vector<Prompt>& prompts, const std::vector<CognitiveSignature>& sigs) {
  if (prompts.empty() || sigs.empty()) throw UsageError("aggregate_q needs prompts and signatures");
  double rho_sum = 0.0;
  for (const auto& s : sigs) {
    if (!(s.rho >= 0.0)) throw ValidationError("signature rho must be nonnegative");
    rho_sum += s.rho;
  }
  std::vector<double> alpha;
  for (const auto& s : sigs) {
    alpha.push_back(rho_sum > 0.0 ? s.rho / rho_sum : 1.0 / static_cast<double>(sigs.size()));
  }
  EmbeddingBank bank;
  std::vector<double> q(prompts.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    for (std::size_t u = 0; u < sigs.size(); ++u) {
      if (alpha[u] > 0.0) q[i] += alpha[u] * signature_score(prompts[i], sigs[u], bank);
    }
    total += q[i];
  }
  if (total <= 0.0) return std::vector<double>(prompts.size(), 1.0 / static_cast<double>(prompts.size()));
  for (double& x : q) x /= total;
  return q;
}

std::vector<PatternGroup> distill(const Registry& reg, int top_k) {
  if (top_k <= 0) throw UsageError("top_k must be positive");
  if (reg.triplets().empty()) throw UsageError("registry holds no triplets");
  std::map<std::string, std::vector<std::pair<std::string, Triplet>>> by_domain;
  for (const auto& rec : reg.triplets()) by_domain[rec.second.domain].push_back(rec);
  std::vector<PatternGroup> out;
  for (auto& [domain, recs] : by_domain) {
    std::sort(recs.begin(), recs.end(), [](const auto& a, const auto& b) {
      if (a.second.merit() != b.second.merit()) return a.second.merit() > b.second.merit();
      if (a.second.timestamp != b.second.timestamp) return a.second.timestamp < b.second.timestamp;
      return a.first < b.first;
    });
    if (recs.size() > static_cast<std::size_t>(top_k)) recs.resize(static_cast<std::size_t>(top_k));
    std::set<std::string> ku;
    for (const auto& [id, s] : reg.signatures()) {
      if (s.domain == domain) ku.insert(s.ku.begin(), s.ku.end());
    }
    out.push_back({domain, std::move(recs), {ku.begin(), ku.end()}});
  }
  return out;
}

}  // namespace vsched
