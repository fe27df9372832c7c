#pragma once

// Prompt sampling, endpoint access and the on-disk response/embedding caches.
// All network effects of the library happen through ModelIo.

#include "dna/http_client.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace dna {

struct Prompt {
    std::string id;
    std::string dataset;
    std::string text;

    friend bool operator==(const Prompt&, const Prompt&) = default;
};

struct PromptSet {
    std::vector<Prompt> prompts;
    std::uint64_t seed = 0;
    std::string hash;

    // Validates ids/texts and computes the hash.
    static PromptSet from_prompts(std::vector<Prompt> prompts, std::uint64_t seed = 0);
    std::size_t size() const { return prompts.size(); }
};

// SHA-256 over the ordered (id, text) pairs.
std::string hash_prompts(const std::vector<Prompt>& prompts);

// A JSONL dataset to sample from. Records need `text_field`; `id_field` is
// optional (the line number is used when missing). `name` defaults to the file stem.
// Sampled prompt ids are "<name>:<id>".
struct DatasetSource {
    std::filesystem::path path;
    std::string name;
    std::string text_field = "text";
    std::string id_field = "id";
};

// Uniform sample without replacement of `per_dataset` records from each source,
// deterministic per seed. Order: dataset order, then sampled order.
PromptSet sample_prompts(const std::vector<DatasetSource>& sources, std::size_t per_dataset, std::uint64_t seed);

// Prompts file: JSONL of {"id","dataset","text"}.
PromptSet load_prompts(const std::filesystem::path& path, std::uint64_t seed = 0);
void save_prompts(const PromptSet& set, const std::filesystem::path& path);

struct GenConfig {
    int max_length = 1024;
    double temperature = 0.7;
    double top_p = 0.9;

    void validate() const;
    // 16 hex chars of SHA-256 over the canonical JSON of the three fields.
    std::string hash() const;
};

struct ModelEndpoint {
    std::string model_id;
    std::string base_url;
    std::string api_key_env;  // name of the env var holding the key; may be empty
    bool uses_chat_template = true;
    GenConfig gen_config;
    std::string api_model;  // name sent as "model" in requests; defaults to model_id

    const std::string& request_model() const { return api_model.empty() ? model_id : api_model; }
    void validate() const;
};

struct Roster {
    std::vector<ModelEndpoint> models;
    std::optional<ModelEndpoint> embedder;
};

// TOML roster: [[model]] tables (or [models.<name>] tables) with model_id,
// base_url, api_key_env, uses_chat_template, temperature, top_p, max_length,
// plus an optional [embedder] table.
Roster load_roster(const std::filesystem::path& path);
Roster parse_roster(const std::string& toml_text);

struct ResponseRecord {
    std::string model_id;
    std::string prompt_id;
    std::string text;
    std::string config_hash;
};

struct SourceKey {
    std::string model_id;
    std::string prompt_id;
    std::string config_hash;
};

struct EmbeddingVector {
    std::string embedder_id;
    SourceKey source;
    std::vector<double> values;
};

// Embedding cache key: "sha256:<hex of text>".
std::string embedding_cache_key(const std::string& text);

// File-safe form of a model or embedder id ("org/name" -> "org__name").
std::string cache_file_stem(const std::string& id);

// cache_dir/responses/<model>.jsonl, {"prompt_id","config_hash","text"} per line. Append-only.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path cache_dir);
    std::optional<std::string> get(const std::string& model_id, const std::string& prompt_id,
                                   const std::string& config_hash);
    // No-op if the key is already present.
    void put(const ResponseRecord& record);

private:
    using Table = std::map<std::pair<std::string, std::string>, std::string>;
    Table& table_for(const std::string& model_id);
    std::filesystem::path file_for(const std::string& model_id) const;

    std::filesystem::path dir_;
    std::mutex mu_;
    std::unordered_map<std::string, Table> tables_;
};

// cache_dir/embeddings/<embedder>.jsonl, {"key","values":[...]} per line. Append-only.
class EmbeddingCache {
public:
    explicit EmbeddingCache(std::filesystem::path cache_dir);
    std::optional<std::vector<double>> get(const std::string& embedder_id, const std::string& key);
    void put(const std::string& embedder_id, const std::string& key, const std::vector<double>& values);
    // Dimension of the first cached vector for this embedder, if any.
    std::optional<std::size_t> known_dimension(const std::string& embedder_id);

private:
    struct Table {
        std::unordered_map<std::string, std::vector<double>> entries;
        std::optional<std::size_t> dim;
    };
    Table& table_for(const std::string& embedder_id);
    std::filesystem::path file_for(const std::string& embedder_id) const;

    std::filesystem::path dir_;
    std::mutex mu_;
    std::unordered_map<std::string, Table> tables_;
};

struct IoOptions {
    std::filesystem::path cache_dir = ".dna-cache";
    RetryPolicy retry;
    std::size_t max_in_flight = 8;
    bool offline = false;  // cache misses become errors instead of HTTP calls
};

class ModelIo {
public:
    explicit ModelIo(IoOptions options);

    // Cache-first. Empty bodies are valid and stored as empty text.
    ResponseRecord generate_response(const ModelEndpoint& endpoint, const Prompt& prompt);

    // Cache-first, keyed by text content. The embedding dimension is learned
    // from the first vector seen for an embedder and enforced afterwards.
    EmbeddingVector embed_text(const ModelEndpoint& embedder, const SourceKey& key, const std::string& text);

    // Fan out over the prompt set with at most max_in_flight concurrent requests.
    // Results are in prompt order.
    std::vector<ResponseRecord> generate_all(const ModelEndpoint& endpoint, const PromptSet& prompts);
    std::vector<EmbeddingVector> embed_all(const ModelEndpoint& embedder, const std::vector<ResponseRecord>& responses);

    std::size_t http_calls() const { return http_calls_.load(); }
    const IoOptions& options() const { return options_; }

private:
    OpenAiClient client_for(const ModelEndpoint& endpoint) const;
    void check_dimension(const std::string& embedder_id, std::size_t dim);

    IoOptions options_;
    ResponseCache responses_;
    EmbeddingCache embeddings_;
    std::mutex dim_mu_;
    std::map<std::string, std::size_t> dims_;
    std::atomic<std::size_t> http_calls_{0};
};

}  // namespace dna
