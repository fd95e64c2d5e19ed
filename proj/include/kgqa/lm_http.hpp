#pragma once

#include <httplib.h>

#include "kgqa/lm.hpp"

namespace kgqa {

// OpenAI-style completions backend. Scoring uses prompt-echo mode: the server
// returns per-token log-probabilities for the concatenated prompt+completion
// and the completion's share is summed.
class HttpLm : public LmBackend {
 public:
  explicit HttpLm(HttpLmConfig cfg) : cfg_(std::move(cfg)) {
    if (const char* tok = std::getenv(cfg_.auth_env_var.c_str())) token_ = tok;
    if (!cfg_.cache_dir.empty()) std::filesystem::create_directories(cfg_.cache_dir);
  }

  std::string id() const override { return "http:" + cfg_.model; }

  std::vector<GenCandidate> generate(const std::string& prompt,
                                     const GenParams& params) override {
    nlohmann::json req{{"model", cfg_.model},
                       {"prompt", prompt},
                       {"max_tokens", params.max_tokens},
                       {"n", params.beam_k},
                       {"logprobs", 1},
                       {"temperature", 0.0}};
    if (!params.stop_sequences.empty()) req["stop"] = params.stop_sequences;
    nlohmann::json resp = request(req);
    std::vector<GenCandidate> out;
    for (const auto& choice : resp.at("choices")) {
      GenCandidate c;
      c.text = trim(choice.at("text").get<std::string>());
      const auto& lps = choice.at("logprobs").at("token_logprobs");
      c.token_count = std::max<int>(1, static_cast<int>(lps.size()));
      for (const auto& lp : lps)
        if (!lp.is_null()) c.sum_logprob += lp.get<double>();
      out.push_back(c);
    }
    std::stable_sort(out.begin(), out.end(), [](const GenCandidate& a, const GenCandidate& b) {
      return a.normalized() > b.normalized();
    });
    if (out.size() > size_t(std::max(0, params.beam_k))) out.resize(params.beam_k);
    return out;
  }

  GenCandidate score(const std::string& prompt, const std::string& completion) override {
    nlohmann::json req{{"model", cfg_.model},
                       {"prompt", prompt + completion},
                       {"max_tokens", 0},
                       {"echo", true},
                       {"logprobs", 1}};
    nlohmann::json resp = request(req);
    const auto& lp = resp.at("choices").at(0).at("logprobs");
    const auto& offsets = lp.at("text_offset");
    const auto& logprobs = lp.at("token_logprobs");
    GenCandidate c;
    c.text = completion;
    c.token_count = 0;
    size_t boundary = prompt.size();
    for (size_t i = 0; i < offsets.size(); ++i) {
      if (offsets[i].get<size_t>() < boundary) continue;
      ++c.token_count;
      if (!logprobs[i].is_null()) c.sum_logprob += logprobs[i].get<double>();
    }
    if (c.token_count == 0) throw LmError("completion tokenized to zero tokens");
    return c;
  }

 private:
  nlohmann::json request(const nlohmann::json& req) {
    std::string body = req.dump();
    std::string cache_key;
    if (!cfg_.cache_dir.empty()) {
      cache_key = Sha256::hex(id() + "\n" + body);
      auto path = std::filesystem::path(cfg_.cache_dir) / (cache_key + ".json");
      std::ifstream in(path);
      if (in) return nlohmann::json::parse(in);
    }

    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    std::string last_error;
    for (int attempt = 0; attempt < cfg_.max_retries; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(200 << attempt));
      std::string base = cfg_.endpoint_host;
      if (base.find("://") == std::string::npos)
        base = (cfg_.endpoint_port == 443 ? "https://" : "http://") + base + ":" +
               std::to_string(cfg_.endpoint_port);
      httplib::Client client(base);
      auto res = client.Post(cfg_.path, headers, body, "application/json");
      if (!res) {
        last_error = "transport error";
        continue;
      }
      if (res->status != 200) {
        last_error = "http status " + std::to_string(res->status);
        if (res->status >= 400 && res->status < 500 && res->status != 429) break;
        continue;
      }
      nlohmann::json resp = nlohmann::json::parse(res->body);
      if (!cache_key.empty()) {
        auto path = std::filesystem::path(cfg_.cache_dir) / (cache_key + ".json");
        std::ofstream out(path);
        out << resp.dump();
      }
      return resp;
    }
    throw LmError("lm request failed: " + last_error);
  }

  HttpLmConfig cfg_;
  std::string token_;
};

}  // namespace kgqa
