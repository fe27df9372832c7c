#pragma once

// Scripted OpenAI-compatible endpoint for end-to-end tests. Serves
// /chat/completions, /completions and /embeddings, with or without a /v1 prefix.
//
// Script JSON:
//   {"responses": {"<prompt>": "<reply>"},
//    "model_responses": {"<model>": {"<prompt>": "<reply>"}},
//    "default": "echo" | "fixed",   // unscripted prompts: echo them or reply fixed_response
//    "echo_model": false,           // echo as "<model>: <prompt>"
//    "fixed_response": "",
//    "embedding_dim": 64,
//    "latency_ms": 0,
//    "faults": [{"status": 429, "count": 1, "path": "chat"}]}  // path: chat|completions|embeddings|any
//
// Faults fire on the first `count` matching requests, in script order.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace dna {

struct MockFault {
    int status = 500;
    std::size_t count = 1;
    std::string path = "any";
};

struct MockScript {
    std::map<std::string, std::string> responses;
    std::map<std::string, std::map<std::string, std::string>> model_responses;
    std::string default_behavior = "echo";
    bool echo_model = false;
    std::string fixed_response;
    std::size_t embedding_dim = 64;
    int latency_ms = 0;
    std::vector<MockFault> faults;

    static MockScript from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    std::string reply(const std::string& model, const std::string& prompt) const;
};

// Hash-seeded Gaussian vector with entries N(0, 1/dim).
std::vector<double> mock_embedding(const std::string& text, std::size_t dim);

struct MockRequest {
    std::string path;  // chat | completions | embeddings
    std::string model;
    int status = 200;
};

class MockServer {
public:
    // Binds 127.0.0.1:port (0 picks a free port) and starts serving on a
    // background thread. Throws IoError if the port cannot be bound.
    explicit MockServer(MockScript script, int port = 0);
    ~MockServer();
    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    int port() const { return port_; }
    std::string base_url() const;  // "http://127.0.0.1:<port>/v1"
    std::vector<MockRequest> request_log() const;
    void clear_log();
    void stop();
    // Blocks until stop() is called from another thread or a signal handler.
    void wait();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

}  // namespace dna
