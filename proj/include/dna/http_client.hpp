#pragma once

// Minimal OpenAI-compatible client: chat completions, raw completions and
// embeddings, with retry on transport errors, HTTP 429 and 5xx.

#include <nlohmann/json.hpp>

#include <chrono>
#include <functional>
#include <string>
#include <vector>

namespace dna {

struct GenConfig;

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{250};
    std::chrono::milliseconds max_delay{8000};
    double jitter = 0.25;  // fraction of the delay added uniformly at random
    std::chrono::seconds timeout{120};
    // Replaced in tests to avoid real sleeping.
    std::function<void(std::chrono::milliseconds)> sleep;

    std::chrono::milliseconds delay_for(int attempt) const;  // attempt is 1-based
};

struct ParsedUrl {
    std::string scheme_host_port;  // "http://host:port"
    std::string path_prefix;       // "/v1" or ""
};

ParsedUrl parse_base_url(const std::string& base_url);

class OpenAiClient {
public:
    OpenAiClient(std::string base_url, std::string api_key, RetryPolicy policy = {});

    // POSTs `body` to base_url + path, retrying per the policy. Returns the parsed JSON response.
    nlohmann::json post_json(const std::string& path, const nlohmann::json& body) const;

    // Assistant text from /chat/completions. A returned reasoning trace is
    // prepended to the content.
    std::string chat(const std::string& model, const std::string& prompt, const GenConfig& cfg) const;
    // Completion text from /completions.
    std::string complete(const std::string& model, const std::string& prompt, const GenConfig& cfg) const;
    std::vector<double> embed(const std::string& model, const std::string& text) const;

    int attempts_last_call() const { return last_attempts_; }

private:
    ParsedUrl url_;
    std::string api_key_;
    RetryPolicy policy_;
    mutable int last_attempts_ = 0;
};

}  // namespace dna
