#include "dna/http_client.hpp"

#include "dna/errors.hpp"
#include "dna/model_io.hpp"

#include <httplib.h>

#include <algorithm>
#include <random>
#include <thread>

namespace dna {

using nlohmann::json;

std::chrono::milliseconds RetryPolicy::delay_for(int attempt) const {
    double base = static_cast<double>(base_delay.count());
    for (int i = 1; i < attempt; ++i) base *= 2.0;
    base = std::min(base, static_cast<double>(max_delay.count()));
    thread_local std::mt19937_64 rng{std::random_device{}()};
    std::uniform_real_distribution<double> u(0.0, jitter);
    return std::chrono::milliseconds(static_cast<long long>(base * (1.0 + u(rng))));
}

ParsedUrl parse_base_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) throw DomainError("base_url must start with http:// or https://: " + base_url);
    const std::string scheme = base_url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw DomainError("unsupported URL scheme in " + base_url);
    const auto host_begin = scheme_end + 3;
    const auto path_begin = base_url.find('/', host_begin);
    std::string host = base_url.substr(host_begin, path_begin == std::string::npos ? std::string::npos
                                                                                   : path_begin - host_begin);
    if (host.empty()) throw DomainError("base_url has no host: " + base_url);
    std::string prefix = path_begin == std::string::npos ? "" : base_url.substr(path_begin);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return ParsedUrl{scheme + "://" + host, prefix};
}

OpenAiClient::OpenAiClient(std::string base_url, std::string api_key, RetryPolicy policy)
    : url_(parse_base_url(base_url)), api_key_(std::move(api_key)), policy_(std::move(policy)) {
    if (policy_.max_attempts < 1) throw DomainError("max_attempts must be at least 1");
}

json OpenAiClient::post_json(const std::string& path, const json& body) const {
    httplib::Client cli(url_.scheme_host_port);
    cli.set_connection_timeout(policy_.timeout);
    cli.set_read_timeout(policy_.timeout);
    cli.set_write_timeout(policy_.timeout);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    const std::string full_path = url_.path_prefix + path;
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 1; attempt <= policy_.max_attempts; ++attempt) {
        last_attempts_ = attempt;
        auto res = cli.Post(full_path, headers, payload, "application/json");
        bool retriable = false;
        int status = 0;
        if (!res) {
            retriable = true;
            last_error = "transport failure: " + httplib::to_string(res.error());
        } else {
            status = res->status;
            if (status >= 200 && status < 300) {
                try {
                    return json::parse(res->body);
                } catch (const json::exception& e) {
                    throw RequestError(url_.scheme_host_port + full_path + " returned invalid JSON: " + e.what(),
                                       status, false);
                }
            }
            retriable = status == 429 || status >= 500;
            last_error = "HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200);
            if (!retriable)
                throw RequestError(url_.scheme_host_port + full_path + " failed with " + last_error, status, false);
        }
        if (attempt < policy_.max_attempts) {
            const auto delay = policy_.delay_for(attempt);
            if (policy_.sleep)
                policy_.sleep(delay);
            else
                std::this_thread::sleep_for(delay);
        } else {
            throw RequestError(url_.scheme_host_port + full_path + " failed after " + std::to_string(attempt) +
                                   " attempts: " + last_error,
                               status, retriable);
        }
    }
    throw RequestError("unreachable", 0, false);
}

std::string OpenAiClient::chat(const std::string& model, const std::string& prompt, const GenConfig& cfg) const {
    const json body = {
        {"model", model},
        {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
        {"max_tokens", cfg.max_length},
        {"temperature", cfg.temperature},
        {"top_p", cfg.top_p},
    };
    const json res = post_json("/chat/completions", body);
    try {
        const auto& msg = res.at("choices").at(0).at("message");
        std::string text;
        for (const char* field : {"reasoning_content", "reasoning"}) {
            if (msg.contains(field) && msg[field].is_string() && !msg[field].get<std::string>().empty()) {
                text = msg[field].get<std::string>() + "\n";
                break;
            }
        }
        if (msg.contains("content") && msg["content"].is_string()) text += msg["content"].get<std::string>();
        return text;
    } catch (const json::exception& e) {
        throw RequestError(std::string("malformed chat completion response: ") + e.what(), 200, false);
    }
}

std::string OpenAiClient::complete(const std::string& model, const std::string& prompt, const GenConfig& cfg) const {
    const json body = {
        {"model", model},
        {"prompt", prompt},
        {"max_tokens", cfg.max_length},
        {"temperature", cfg.temperature},
        {"top_p", cfg.top_p},
    };
    const json res = post_json("/completions", body);
    try {
        const auto& choice = res.at("choices").at(0);
        return choice.contains("text") && choice["text"].is_string() ? choice["text"].get<std::string>() : "";
    } catch (const json::exception& e) {
        throw RequestError(std::string("malformed completion response: ") + e.what(), 200, false);
    }
}

std::vector<double> OpenAiClient::embed(const std::string& model, const std::string& text) const {
    const json res = post_json("/embeddings", {{"model", model}, {"input", text}});
    try {
        return res.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw RequestError(std::string("malformed embedding response: ") + e.what(), 200, false);
    }
}

}  // namespace dna
