#include "dna/model_io.hpp"

#include "dna/errors.hpp"
#include "dna/hashing.hpp"
#include "dna/jsonl.hpp"
#include "dna/parallel.hpp"

#include <toml.hpp>

#include <cmath>
#include <cstdlib>
#include <random>
#include <set>

namespace dna {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------- prompts

std::string hash_prompts(const std::vector<Prompt>& prompts) {
    json pairs = json::array();
    for (const auto& p : prompts) pairs.push_back(json::array({p.id, p.text}));
    return sha256_hex(pairs.dump());
}

PromptSet PromptSet::from_prompts(std::vector<Prompt> prompts, std::uint64_t seed) {
    std::set<std::string> seen;
    for (const auto& p : prompts) {
        if (p.id.empty()) throw DomainError("prompt with empty id in dataset '" + p.dataset + "'");
        if (p.text.empty()) throw DomainError("prompt '" + p.id + "' has empty text");
        if (!seen.insert(p.id).second) throw DomainError("duplicate prompt id '" + p.id + "'");
    }
    PromptSet set;
    set.hash = hash_prompts(prompts);
    set.prompts = std::move(prompts);
    set.seed = seed;
    return set;
}

namespace {

std::string json_scalar_to_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    return v.dump();
}

}  // namespace

PromptSet sample_prompts(const std::vector<DatasetSource>& sources, std::size_t per_dataset, std::uint64_t seed) {
    if (per_dataset == 0) throw DomainError("per_dataset must be at least 1");
    if (sources.empty()) throw DomainError("no dataset sources given");
    std::vector<Prompt> out;
    for (std::size_t di = 0; di < sources.size(); ++di) {
        const auto& src = sources[di];
        const std::string name = src.name.empty() ? src.path.stem().string() : src.name;
        std::vector<Prompt> pool;
        read_jsonl(src.path, [&](const json& rec, std::size_t lineno) {
            if (!rec.contains(src.text_field))
                throw ParseError(src.path.string() + ":" + std::to_string(lineno) + ": missing field '" +
                                     src.text_field + "'",
                                 lineno);
            Prompt p;
            p.dataset = name;
            p.text = json_scalar_to_string(rec.at(src.text_field));
            // Qualified by dataset so that ids shared across datasets stay distinct.
            p.id = name + ":" +
                   (rec.contains(src.id_field) ? json_scalar_to_string(rec.at(src.id_field)) : std::to_string(lineno));
            pool.push_back(std::move(p));
        });
        if (pool.size() < per_dataset)
            throw DomainError("dataset '" + name + "' has " + std::to_string(pool.size()) + " records, fewer than " +
                              std::to_string(per_dataset) + " requested");
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(di)};
        std::mt19937_64 rng(seq);
        // Partial Fisher-Yates: the first per_dataset slots are the sample, in draw order.
        for (std::size_t i = 0; i < per_dataset; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
            std::swap(pool[i], pool[pick(rng)]);
        }
        out.insert(out.end(), std::make_move_iterator(pool.begin()),
                   std::make_move_iterator(pool.begin() + static_cast<std::ptrdiff_t>(per_dataset)));
    }
    return PromptSet::from_prompts(std::move(out), seed);
}

PromptSet load_prompts(const fs::path& path, std::uint64_t seed) {
    std::vector<Prompt> prompts;
    read_jsonl(path, [&](const json& rec, std::size_t) {
        prompts.push_back(Prompt{json_scalar_to_string(rec.at("id")), rec.value("dataset", std::string{}),
                                 rec.at("text").get<std::string>()});
    });
    if (prompts.empty()) throw DomainError("prompts file " + path.string() + " is empty");
    return PromptSet::from_prompts(std::move(prompts), seed);
}

void save_prompts(const PromptSet& set, const fs::path& path) {
    std::string out;
    for (const auto& p : set.prompts) out += json{{"id", p.id}, {"dataset", p.dataset}, {"text", p.text}}.dump() + "\n";
    write_text_file(path, out);
}

// ---------------------------------------------------------------- endpoints

void GenConfig::validate() const {
    if (max_length < 1) throw DomainError("max_length must be positive");
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw DomainError("temperature must be non-negative");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw DomainError("top_p must lie in (0, 1]");
}

std::string GenConfig::hash() const {
    const json canonical = {{"max_length", max_length}, {"temperature", temperature}, {"top_p", top_p}};
    return sha256_hex(canonical.dump()).substr(0, 16);
}

void ModelEndpoint::validate() const {
    if (model_id.empty()) throw DomainError("model_id must not be empty");
    parse_base_url(base_url);
    gen_config.validate();
}

namespace {

ModelEndpoint endpoint_from_table(const toml::table& t, const std::string& fallback_id) {
    ModelEndpoint ep;
    ep.model_id = t["model_id"].value_or(fallback_id);
    ep.base_url = t["base_url"].value_or(std::string{});
    ep.api_key_env = t["api_key_env"].value_or(std::string{});
    ep.uses_chat_template = t["uses_chat_template"].value_or(true);
    ep.api_model = t["api_model"].value_or(std::string{});
    ep.gen_config.temperature = t["temperature"].value_or(ep.gen_config.temperature);
    ep.gen_config.top_p = t["top_p"].value_or(ep.gen_config.top_p);
    ep.gen_config.max_length = static_cast<int>(t["max_length"].value_or<std::int64_t>(ep.gen_config.max_length));
    return ep;
}

}  // namespace

Roster parse_roster(const std::string& toml_text) {
    toml::table root;
    try {
        root = toml::parse(toml_text);
    } catch (const toml::parse_error& e) {
        throw ParseError(std::string("roster: ") + std::string(e.description()),
                         static_cast<std::size_t>(e.source().begin.line));
    }
    Roster roster;
    if (auto* arr = root["model"].as_array()) {
        for (auto& node : *arr) {
            auto* t = node.as_table();
            if (!t) throw ParseError("roster: [[model]] entries must be tables", 0);
            roster.models.push_back(endpoint_from_table(*t, ""));
        }
    }
    if (auto* models = root["models"].as_table()) {
        for (auto& [key, node] : *models) {
            auto* t = node.as_table();
            if (!t) throw ParseError("roster: models." + std::string(key.str()) + " must be a table", 0);
            roster.models.push_back(endpoint_from_table(*t, std::string(key.str())));
        }
    }
    if (auto* emb = root["embedder"].as_table()) roster.embedder = endpoint_from_table(*emb, "");
    std::set<std::string> ids;
    for (const auto& m : roster.models) {
        m.validate();
        if (!ids.insert(m.model_id).second) throw DomainError("duplicate model_id '" + m.model_id + "' in roster");
    }
    return roster;
}

Roster load_roster(const fs::path& path) { return parse_roster(read_text_file(path)); }

// ---------------------------------------------------------------- caches

std::string embedding_cache_key(const std::string& text) { return "sha256:" + sha256_hex(text); }

std::string cache_file_stem(const std::string& id) {
    std::string out;
    for (char c : id) {
        if (c == '/')
            out += "__";
        else if (c == '\\' || c == ':' || c == '\0')
            out += '_';
        else
            out += c;
    }
    if (out.empty() || out == "." || out == "..") out = "_" + out;
    return out;
}

ResponseCache::ResponseCache(fs::path cache_dir) : dir_(std::move(cache_dir) / "responses") {}

fs::path ResponseCache::file_for(const std::string& model_id) const { return dir_ / (cache_file_stem(model_id) + ".jsonl"); }

ResponseCache::Table& ResponseCache::table_for(const std::string& model_id) {
    auto it = tables_.find(model_id);
    if (it != tables_.end()) return it->second;
    Table table;
    const auto file = file_for(model_id);
    if (fs::exists(file)) {
        read_jsonl(file, [&](const json& rec, std::size_t) {
            table.emplace(std::make_pair(rec.at("prompt_id").get<std::string>(), rec.at("config_hash").get<std::string>()),
                          rec.at("text").get<std::string>());
        });
    }
    return tables_.emplace(model_id, std::move(table)).first->second;
}

std::optional<std::string> ResponseCache::get(const std::string& model_id, const std::string& prompt_id,
                                              const std::string& config_hash) {
    std::lock_guard lock(mu_);
    auto& table = table_for(model_id);
    auto it = table.find({prompt_id, config_hash});
    if (it == table.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::put(const ResponseRecord& record) {
    std::lock_guard lock(mu_);
    auto& table = table_for(record.model_id);
    auto [it, inserted] = table.emplace(std::make_pair(record.prompt_id, record.config_hash), record.text);
    if (!inserted) return;
    fs::create_directories(dir_);
    append_jsonl(file_for(record.model_id),
                 json{{"prompt_id", record.prompt_id}, {"config_hash", record.config_hash}, {"text", record.text}});
}

EmbeddingCache::EmbeddingCache(fs::path cache_dir) : dir_(std::move(cache_dir) / "embeddings") {}

fs::path EmbeddingCache::file_for(const std::string& embedder_id) const {
    return dir_ / (cache_file_stem(embedder_id) + ".jsonl");
}

EmbeddingCache::Table& EmbeddingCache::table_for(const std::string& embedder_id) {
    auto it = tables_.find(embedder_id);
    if (it != tables_.end()) return it->second;
    Table table;
    const auto file = file_for(embedder_id);
    if (fs::exists(file)) {
        read_jsonl(file, [&](const json& rec, std::size_t lineno) {
            auto values = rec.at("values").get<std::vector<double>>();
            if (!table.dim) table.dim = values.size();
            if (*table.dim != values.size())
                throw ParseError(file.string() + ":" + std::to_string(lineno) + ": embedding dimension " +
                                     std::to_string(values.size()) + " differs from " + std::to_string(*table.dim),
                                 lineno);
            table.entries.emplace(rec.at("key").get<std::string>(), std::move(values));
        });
    }
    return tables_.emplace(embedder_id, std::move(table)).first->second;
}

std::optional<std::vector<double>> EmbeddingCache::get(const std::string& embedder_id, const std::string& key) {
    std::lock_guard lock(mu_);
    auto& table = table_for(embedder_id);
    auto it = table.entries.find(key);
    if (it == table.entries.end()) return std::nullopt;
    return it->second;
}

void EmbeddingCache::put(const std::string& embedder_id, const std::string& key, const std::vector<double>& values) {
    std::lock_guard lock(mu_);
    auto& table = table_for(embedder_id);
    if (!table.entries.emplace(key, values).second) return;
    if (!table.dim) table.dim = values.size();
    fs::create_directories(dir_);
    append_jsonl(file_for(embedder_id), json{{"key", key}, {"values", values}});
}

std::optional<std::size_t> EmbeddingCache::known_dimension(const std::string& embedder_id) {
    std::lock_guard lock(mu_);
    return table_for(embedder_id).dim;
}

// ---------------------------------------------------------------- ModelIo

ModelIo::ModelIo(IoOptions options)
    : options_(std::move(options)), responses_(options_.cache_dir), embeddings_(options_.cache_dir) {
    if (options_.max_in_flight == 0) options_.max_in_flight = 1;
}

OpenAiClient ModelIo::client_for(const ModelEndpoint& endpoint) const {
    std::string key;
    if (!endpoint.api_key_env.empty()) {
        if (const char* v = std::getenv(endpoint.api_key_env.c_str())) key = v;
    }
    return OpenAiClient(endpoint.base_url, key, options_.retry);
}

ResponseRecord ModelIo::generate_response(const ModelEndpoint& endpoint, const Prompt& prompt) {
    const std::string cfg_hash = endpoint.gen_config.hash();
    if (auto hit = responses_.get(endpoint.model_id, prompt.id, cfg_hash))
        return ResponseRecord{endpoint.model_id, prompt.id, *hit, cfg_hash};
    if (options_.offline)
        throw RequestError("offline: no cached response for model '" + endpoint.model_id + "', prompt '" + prompt.id +
                               "'",
                           0, false);
    const auto client = client_for(endpoint);
    ++http_calls_;
    std::string text = endpoint.uses_chat_template
                           ? client.chat(endpoint.request_model(), prompt.text, endpoint.gen_config)
                           : client.complete(endpoint.request_model(), prompt.text, endpoint.gen_config);
    ResponseRecord rec{endpoint.model_id, prompt.id, std::move(text), cfg_hash};
    responses_.put(rec);
    return rec;
}

void ModelIo::check_dimension(const std::string& embedder_id, std::size_t dim) {
    if (dim == 0) throw DimensionError("embedder '" + embedder_id + "' returned an empty vector");
    std::lock_guard lock(dim_mu_);
    auto [it, inserted] = dims_.emplace(embedder_id, dim);
    if (!inserted && it->second != dim)
        throw DimensionError("embedder '" + embedder_id + "' dimension drift: expected " + std::to_string(it->second) +
                             ", got " + std::to_string(dim));
}

EmbeddingVector ModelIo::embed_text(const ModelEndpoint& embedder, const SourceKey& key, const std::string& text) {
    const std::string& eid = embedder.model_id;
    if (auto known = embeddings_.known_dimension(eid)) check_dimension(eid, *known);
    const std::string cache_key = embedding_cache_key(text);
    if (auto hit = embeddings_.get(eid, cache_key)) {
        check_dimension(eid, hit->size());
        return EmbeddingVector{eid, key, std::move(*hit)};
    }
    if (options_.offline)
        throw RequestError("offline: no cached embedding for '" + key.model_id + "' / '" + key.prompt_id + "'", 0, false);
    const auto client = client_for(embedder);
    ++http_calls_;
    auto values = client.embed(embedder.request_model(), text);
    check_dimension(eid, values.size());
    for (double v : values)
        if (!std::isfinite(v)) throw DomainError("embedder '" + eid + "' returned NaN or Inf");
    embeddings_.put(eid, cache_key, values);
    return EmbeddingVector{eid, key, std::move(values)};
}

std::vector<ResponseRecord> ModelIo::generate_all(const ModelEndpoint& endpoint, const PromptSet& prompts) {
    std::vector<ResponseRecord> out(prompts.size());
    parallel_for(prompts.size(), options_.max_in_flight,
                 [&](std::size_t i) { out[i] = generate_response(endpoint, prompts.prompts[i]); });
    return out;
}

std::vector<EmbeddingVector> ModelIo::embed_all(const ModelEndpoint& embedder,
                                                const std::vector<ResponseRecord>& responses) {
    std::vector<EmbeddingVector> out(responses.size());
    parallel_for(responses.size(), options_.max_in_flight, [&](std::size_t i) {
        const auto& r = responses[i];
        out[i] = embed_text(embedder, SourceKey{r.model_id, r.prompt_id, r.config_hash}, r.text);
    });
    return out;
}

}  // namespace dna
