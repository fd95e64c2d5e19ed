#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "kgqa/sha256.hpp"
#include "kgqa/text.hpp"

namespace kgqa {

struct LmError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GenCandidate {
  std::string text;
  double sum_logprob = 0.0;
  int token_count = 1;

  double normalized() const { return sum_logprob / std::max(1, token_count); }
};

struct GenParams {
  int beam_k = 5;
  int max_tokens = 64;
  std::vector<std::string> stop_sequences;
};

// Generation + fixed-completion scoring contract. Implementations must be
// safe to share across concurrent callers.
class LmBackend {
 public:
  virtual ~LmBackend() = default;
  virtual std::string id() const = 0;
  virtual std::vector<GenCandidate> generate(const std::string& prompt,
                                             const GenParams& params) = 0;
  virtual GenCandidate score(const std::string& prompt, const std::string& completion) = 0;

  // Order-preserving; element i equals score(prompt, completions[i]).
  virtual std::vector<GenCandidate> score_batch(const std::string& prompt,
                                                const std::vector<std::string>& completions) {
    std::vector<GenCandidate> out;
    out.reserve(completions.size());
    for (const auto& c : completions) out.push_back(score(prompt, c));
    return out;
  }
};

namespace detail {

// The last non-empty line of the prompt that is not a "### ..." header: the
// query the completion is judged against.
inline std::string final_query_line(const std::string& prompt) {
  auto lines = split_lines(prompt);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    std::string t = trim(*it);
    if (t.empty()) continue;
    if (t.rfind("###", 0) == 0) continue;
    return t;
  }
  return "";
}

}  // namespace detail

// Deterministic lexical-overlap scorer: ln(F1(completion, final query line) + eps),
// capped at 0. Serves as an LM-free oracle backend for pipeline tests.
class HeuristicLm : public LmBackend {
 public:
  static constexpr double kEps = 1e-6;

  std::string id() const override { return "heuristic"; }

  GenCandidate score(const std::string& prompt, const std::string& completion) override {
    auto query_tokens = stemmed_token_set(detail::final_query_line(prompt));
    auto completion_tokens = stemmed_token_set(completion);
    double f1 = lexical_f1(completion_tokens, query_tokens);
    double per_token = std::min(0.0, std::log(f1 + kEps));
    GenCandidate c;
    c.text = completion;
    c.token_count = std::max<int>(1, static_cast<int>(tokenize(completion).size()));
    c.sum_logprob = per_token * c.token_count;
    return c;
  }

  std::vector<GenCandidate> generate(const std::string& prompt,
                                     const GenParams& params) override {
    // Echo the final query line as a token soup; deterministic by construction.
    std::string q = detail::final_query_line(prompt);
    std::string text = join(tokenize(q), " ");
    if (text.empty()) text = "unknown";
    GenCandidate c = score(prompt, text);
    std::vector<GenCandidate> out{c};
    if (params.beam_k < 1) out.clear();
    return out;
  }
};

// Replays recorded scores from a JSONL file of
// {prompt_sha256, completion, sum_logprob, token_count}.
class FixtureLm : public LmBackend {
 public:
  explicit FixtureLm(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LmError("cannot open fixture file: " + path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty() || line[0] == '#') continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const std::exception& e) {
        throw LmError("fixture line " + std::to_string(line_no) + ": " + e.what());
      }
      GenCandidate c;
      c.text = j.at("completion").get<std::string>();
      c.sum_logprob = j.at("sum_logprob").get<double>();
      c.token_count = j.at("token_count").get<int>();
      std::string key = j.at("prompt_sha256").get<std::string>();
      by_prompt_[key].push_back(c);
    }
  }

  std::string id() const override { return "fixture"; }

  GenCandidate score(const std::string& prompt, const std::string& completion) override {
    auto it = by_prompt_.find(Sha256::hex(prompt));
    if (it != by_prompt_.end()) {
      for (const auto& c : it->second)
        if (c.text == completion) return c;
    }
    throw LmError("fixture miss for completion: " + completion);
  }

  std::vector<GenCandidate> generate(const std::string& prompt,
                                     const GenParams& params) override {
    auto it = by_prompt_.find(Sha256::hex(prompt));
    if (it == by_prompt_.end()) throw LmError("fixture miss for prompt");
    std::vector<GenCandidate> out = it->second;
    std::stable_sort(out.begin(), out.end(), [](const GenCandidate& a, const GenCandidate& b) {
      return a.normalized() > b.normalized();
    });
    if (out.size() > size_t(std::max(0, params.beam_k))) out.resize(params.beam_k);
    return out;
  }

 private:
  std::map<std::string, std::vector<GenCandidate>> by_prompt_;
};

// Re-sort candidates by the likelihood of `target` under the inverse task.
// Stable: ties keep the original order. The output is a permutation of the
// input.
inline std::vector<GenCandidate> inverse_rerank(
    LmBackend& backend, const std::vector<GenCandidate>& candidates,
    const std::function<std::string(const GenCandidate&)>& inverse_prompt_builder,
    const std::string& target) {
  if (candidates.empty()) throw LmError("inverse_rerank: empty candidate list");
  std::vector<std::pair<double, size_t>> keyed;
  keyed.reserve(candidates.size());
  for (size_t i = 0; i < candidates.size(); ++i) {
    GenCandidate inv = backend.score(inverse_prompt_builder(candidates[i]), target);
    keyed.push_back({inv.normalized(), i});
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    return a.first > b.first;
  });
  std::vector<GenCandidate> out;
  out.reserve(candidates.size());
  for (const auto& [_, i] : keyed) out.push_back(candidates[i]);
  return out;
}

// Domain-conditional PMI: log Pr(y|x) - log Pr(y|x_domain).
inline double pmi_dc_score(LmBackend& backend, const std::string& prompt,
                           const std::string& completion, const std::string& domain_prefix) {
  if (domain_prefix.empty()) throw LmError("pmi_dc_score: empty domain prefix");
  double joint = backend.score(prompt, completion).sum_logprob;
  double domain = backend.score(domain_prefix, completion).sum_logprob;
  return joint - domain;
}

// --- Embedding ---

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string id() const = 0;
  virtual int dim() const = 0;
  virtual std::vector<double> embed(const std::string& text) const = 0;
};

// Hashed bag of tokens: lowercase, split on non-alphanumerics, FNV-1a into
// d buckets, counts L2-normalized.
class HashedBagEmbedder : public Embedder {
 public:
  explicit HashedBagEmbedder(int d = 256) : d_(d) {}

  std::string id() const override { return "hashed-bag-" + std::to_string(d_); }
  int dim() const override { return d_; }

  std::vector<double> embed(const std::string& text) const override {
    std::vector<double> v(d_, 0.0);
    for (const auto& t : tokenize(text)) v[bucket(t)] += 1.0;
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (double& x : v) x /= norm;
    return v;
  }

  int bucket(const std::string& token) const {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : token) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return static_cast<int>(h % uint64_t(d_));
  }

 private:
  int d_;
};

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != v.size()) throw std::invalid_argument("cosine: dimension mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

// --- Remote completion backend (OpenAI-style wire protocol) ---

struct HttpLmConfig {
  std::string endpoint_host;          // e.g. "api.example.com"
  int endpoint_port = 443;
  std::string path = "/v1/completions";
  std::string model;
  std::string auth_env_var = "KGQA_LM_TOKEN";
  std::string cache_dir;              // empty disables the disk cache
  int max_retries = 3;
  int in_flight_limit = 4;
};

class HttpLm;  // defined in lm_http.hpp to keep httplib out of most TUs

}  // namespace kgqa
