#include "dna/mock_server.hpp"

#include "dna/errors.hpp"
#include "dna/hashing.hpp"

#include <httplib.h>

#include <chrono>
#include <cmath>
#include <random>
#include <thread>

namespace dna {

MockScript MockScript::from_json(const nlohmann::json& j) {
    MockScript s;
    try {
        s.responses = j.value("responses", s.responses);
        s.model_responses = j.value("model_responses", s.model_responses);
        s.default_behavior = j.value("default", s.default_behavior);
        s.echo_model = j.value("echo_model", s.echo_model);
        s.fixed_response = j.value("fixed_response", s.fixed_response);
        s.embedding_dim = j.value("embedding_dim", s.embedding_dim);
        s.latency_ms = j.value("latency_ms", s.latency_ms);
        for (const auto& f : j.value("faults", nlohmann::json::array())) {
            MockFault mf;
            mf.status = f.value("status", mf.status);
            mf.count = f.value("count", mf.count);
            mf.path = f.value("path", mf.path);
            s.faults.push_back(mf);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("mock script: ") + e.what(), 0);
    }
    if (s.default_behavior != "echo" && s.default_behavior != "fixed")
        throw DomainError("mock script: default must be 'echo' or 'fixed'");
    if (s.embedding_dim == 0) throw DomainError("mock script: embedding_dim must be positive");
    return s;
}

nlohmann::json MockScript::to_json() const {
    nlohmann::json faults_json = nlohmann::json::array();
    for (const auto& f : faults) faults_json.push_back({{"status", f.status}, {"count", f.count}, {"path", f.path}});
    return {{"responses", responses},       {"model_responses", model_responses}, {"default", default_behavior},
            {"echo_model", echo_model},     {"fixed_response", fixed_response},   {"embedding_dim", embedding_dim},
            {"latency_ms", latency_ms},     {"faults", faults_json}};
}

std::string MockScript::reply(const std::string& model, const std::string& prompt) const {
    if (auto m = model_responses.find(model); m != model_responses.end())
        if (auto it = m->second.find(prompt); it != m->second.end()) return it->second;
    if (auto it = responses.find(prompt); it != responses.end()) return it->second;
    if (default_behavior == "fixed") return fixed_response;
    return echo_model ? model + ": " + prompt : prompt;
}

std::vector<double> mock_embedding(const std::string& text, std::size_t dim) {
    std::mt19937_64 rng(sha256_u64(text));
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
    std::vector<double> v(dim);
    for (double& x : v) x = normal(rng);
    return v;
}

struct MockServer::Impl {
    MockScript script;
    httplib::Server server;
    std::thread thread;
    mutable std::mutex mu;
    std::vector<MockRequest> log;
    std::vector<std::size_t> fault_used;

    // Returns the injected status for this request, or 0.
    int take_fault(const std::string& path) {
        for (std::size_t k = 0; k < script.faults.size(); ++k) {
            const auto& f = script.faults[k];
            if ((f.path == "any" || f.path == path) && fault_used[k] < f.count) {
                ++fault_used[k];
                return f.status;
            }
        }
        return 0;
    }

    void handle(const std::string& path, const httplib::Request& req, httplib::Response& res) {
        if (script.latency_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(script.latency_ms));
        nlohmann::json body;
        std::string model;
        try {
            body = nlohmann::json::parse(req.body);
            model = body.value("model", "");
        } catch (const nlohmann::json::exception&) {
            std::lock_guard lock(mu);
            log.push_back({path, "", 400});
            res.status = 400;
            res.set_content(R"({"error":{"message":"invalid JSON body"}})", "application/json");
            return;
        }
        int fault;
        {
            std::lock_guard lock(mu);
            fault = take_fault(path);
            log.push_back({path, model, fault ? fault : 200});
        }
        if (fault) {
            res.status = fault;
            res.set_content(nlohmann::json{{"error", {{"message", "injected fault"}, {"code", fault}}}}.dump(),
                            "application/json");
            return;
        }
        nlohmann::json out;
        if (path == "chat") {
            std::string prompt;
            for (const auto& m : body.value("messages", nlohmann::json::array()))
                if (m.value("role", "") == "user") prompt = m.value("content", "");
            out = {{"id", "mock"},
                   {"object", "chat.completion"},
                   {"model", model},
                   {"choices",
                    {{{"index", 0},
                      {"message", {{"role", "assistant"}, {"content", script.reply(model, prompt)}}},
                      {"finish_reason", "stop"}}}}};
        } else if (path == "completions") {
            const std::string prompt = body.value("prompt", "");
            out = {{"id", "mock"},
                   {"object", "text_completion"},
                   {"model", model},
                   {"choices", {{{"index", 0}, {"text", script.reply(model, prompt)}, {"finish_reason", "stop"}}}}};
        } else {
            std::vector<std::string> inputs;
            const auto in = body.value("input", nlohmann::json());
            if (in.is_string())
                inputs.push_back(in.get<std::string>());
            else if (in.is_array())
                for (const auto& s : in) inputs.push_back(s.get<std::string>());
            nlohmann::json data = nlohmann::json::array();
            for (std::size_t k = 0; k < inputs.size(); ++k)
                data.push_back({{"object", "embedding"}, {"index", k}, {"embedding", mock_embedding(inputs[k], script.embedding_dim)}});
            out = {{"object", "list"}, {"model", model}, {"data", data}};
        }
        res.status = 200;
        res.set_content(out.dump(), "application/json");
    }
};

MockServer::MockServer(MockScript script, int port) : impl_(std::make_unique<Impl>()) {
    impl_->script = std::move(script);
    impl_->fault_used.assign(impl_->script.faults.size(), 0);
    for (const std::string prefix : {"", "/v1"}) {
        for (const auto& [route, name] : std::vector<std::pair<std::string, std::string>>{
                 {"/chat/completions", "chat"}, {"/completions", "completions"}, {"/embeddings", "embeddings"}}) {
            impl_->server.Post(prefix + route, [this, name = name](const httplib::Request& req, httplib::Response& res) {
                impl_->handle(name, req, res);
            });
        }
    }
    if (port == 0) {
        port_ = impl_->server.bind_to_any_port("127.0.0.1");
        if (port_ <= 0) throw IoError("mock server: could not bind a free port");
    } else {
        if (!impl_->server.bind_to_port("127.0.0.1", port))
            throw IoError("mock server: port " + std::to_string(port) + " is in use or unavailable");
        port_ = port;
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

MockServer::~MockServer() { stop(); }

std::string MockServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

std::vector<MockRequest> MockServer::request_log() const {
    std::lock_guard lock(impl_->mu);
    return impl_->log;
}

void MockServer::clear_log() {
    std::lock_guard lock(impl_->mu);
    impl_->log.clear();
}

void MockServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

void MockServer::wait() {
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace dna
