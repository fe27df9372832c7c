#include "dna/extraction.hpp"

#include "dna/errors.hpp"
#include "dna/jsonl.hpp"
#include "dna/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <ctime>
#include <map>

namespace dna {

using nlohmann::json;
namespace fs = std::filesystem;

bool StoreManifest::compatible_with(const StoreManifest& other) const {
    return projection == other.projection && alpha == other.alpha && embedder_id == other.embedder_id &&
           prompt_set_hash == other.prompt_set_hash;
}

void StoreManifest::validate_record(const DnaRecord& r) const {
    if (r.projection != projection)
        throw ProvenanceError("record '" + r.model_id + "' uses projection " + r.projection.fingerprint() +
                              ", store uses " + projection.fingerprint());
    if (r.alpha != alpha) throw ProvenanceError("record '" + r.model_id + "' uses a different alpha than the store");
    if (r.embedder_id != embedder_id)
        throw ProvenanceError("record '" + r.model_id + "' uses embedder '" + r.embedder_id + "', store uses '" +
                              embedder_id + "'");
    if (r.prompt_set_hash != prompt_set_hash)
        throw ProvenanceError("record '" + r.model_id + "' was extracted from a different prompt set");
    r.validate();
}

const DnaRecord* DnaStore::find(const std::string& model_id) const {
    for (const auto& r : records_)
        if (r.model_id == model_id) return &r;
    return nullptr;
}

void DnaStore::add(DnaRecord record) {
    manifest_.validate_record(record);
    if (contains(record.model_id)) throw DomainError("duplicate model_id '" + record.model_id + "' in store");
    records_.push_back(std::move(record));
}

void DnaStore::merge(const DnaStore& other) {
    if (!manifest_.compatible_with(other.manifest_))
        throw ProvenanceError("cannot merge DNA stores with different manifests (projection " +
                              manifest_.projection.fingerprint() + " vs " + other.manifest_.projection.fingerprint() +
                              ")");
    for (const auto& r : other.records_)
        if (contains(r.model_id)) throw DomainError("duplicate model_id '" + r.model_id + "' while merging stores");
    for (const auto& r : other.records_) records_.push_back(r);
}

namespace {

json manifest_to_json(const StoreManifest& m) {
    return json{{"projection",
                 {{"seed", m.projection.seed},
                  {"L", m.projection.L},
                  {"D", m.projection.D},
                  {"entry_std", m.projection.entry_std}}},
                {"alpha", m.alpha},
                {"embedder_id", m.embedder_id},
                {"prompt_set_hash", m.prompt_set_hash},
                {"version", m.version}};
}

StoreManifest manifest_from_json(const json& j) {
    StoreManifest m;
    const auto& p = j.at("projection");
    m.projection.seed = p.at("seed").get<std::uint64_t>();
    m.projection.L = p.at("L").get<std::size_t>();
    m.projection.D = p.at("D").get<std::size_t>();
    m.projection.entry_std = p.at("entry_std").get<double>();
    m.alpha = j.at("alpha").get<double>();
    m.embedder_id = j.at("embedder_id").get<std::string>();
    m.prompt_set_hash = j.at("prompt_set_hash").get<std::string>();
    m.version = j.value("version", std::string{});
    m.projection.validate();
    return m;
}

// Shortest round-trip float text for each entry.
std::string record_line(const DnaRecord& r) {
    std::string line = "{\"model_id\":" + json(r.model_id).dump() + ",\"vector\":[";
    char buf[32];
    for (std::size_t i = 0; i < r.vector.size(); ++i) {
        if (i) line += ',';
        auto res = std::to_chars(buf, buf + sizeof buf, static_cast<float>(r.vector[i]));
        line.append(buf, res.ptr);
    }
    line += "],\"created_at\":" + json(r.created_at).dump() + "}\n";
    return line;
}

}  // namespace

DnaStore load_store(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("DNA store directory not found: " + dir.string());
    const auto manifest_path = dir / "manifest.json";
    StoreManifest manifest;
    try {
        manifest = manifest_from_json(json::parse(read_text_file(manifest_path)));
    } catch (const json::exception& e) {
        throw ParseError(manifest_path.string() + ": " + e.what(), 0);
    }
    DnaStore store(manifest);
    const auto records_path = dir / "dna.jsonl";
    if (!fs::exists(records_path)) return store;
    read_jsonl(records_path, [&](const json& rec, std::size_t lineno) {
        DnaRecord r;
        r.model_id = rec.at("model_id").get<std::string>();
        r.vector = rec.at("vector").get<std::vector<double>>();
        round_to_storage_precision(r.vector);
        r.created_at = rec.value("created_at", std::string{});
        r.projection = manifest.projection;
        r.alpha = manifest.alpha;
        r.embedder_id = manifest.embedder_id;
        r.prompt_set_hash = manifest.prompt_set_hash;
        try {
            store.add(std::move(r));
        } catch (const Error& e) {
            throw ParseError(records_path.string() + ":" + std::to_string(lineno) + ": " + e.what(), lineno);
        }
    });
    return store;
}

void save_store(const DnaStore& store, const fs::path& dir) {
    fs::create_directories(dir);
    write_text_file(dir / "manifest.json", manifest_to_json(store.manifest()).dump(2) + "\n");
    std::string body;
    for (const auto& r : store.records()) body += record_line(r);
    write_text_file(dir / "dna.jsonl", body);
}

std::string current_timestamp() {
    std::time_t now = std::time(nullptr);
    if (const char* sde = std::getenv("SOURCE_DATE_EPOCH")) {
        char* end = nullptr;
        const long long v = std::strtoll(sde, &end, 10);
        if (end != sde && *end == '\0') now = static_cast<std::time_t>(v);
    }
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

FunctionalRepresentation build_representation(ModelIo& io, const ModelEndpoint& endpoint, const PromptSet& prompts,
                                              const ModelEndpoint& embedder) {
    if (prompts.size() == 0) throw DomainError("prompt set is empty");
    endpoint.validate();
    const auto responses = io.generate_all(endpoint, prompts);
    const auto embeddings = io.embed_all(embedder, responses);
    FunctionalRepresentation rep;
    rep.model_id = endpoint.model_id;
    rep.prompt_set_hash = prompts.hash;
    rep.t = prompts.size();
    rep.p = embeddings.front().values.size();
    rep.values.reserve(rep.p * rep.t);
    for (const auto& e : embeddings) {
        if (e.values.size() != rep.p) throw DimensionError("embedding dimension changed within one model");
        rep.values.insert(rep.values.end(), e.values.begin(), e.values.end());
    }
    rep.validate();
    return rep;
}

namespace {

DnaRecord finish(DnaRecord r, std::optional<std::string> created_at) {
    round_to_storage_precision(r.vector);
    r.created_at = created_at ? *created_at : current_timestamp();
    return r;
}

}  // namespace

DnaRecord extract_dna(ModelIo& io, const ModelEndpoint& endpoint, const PromptSet& prompts,
                      const ModelEndpoint& embedder, const ProjectionSpec& spec, double alpha,
                      std::optional<std::string> created_at) {
    spec.validate();
    const auto rep = build_representation(io, endpoint, prompts, embedder);
    return finish(project_streaming(rep, spec, alpha, embedder.model_id), std::move(created_at));
}

DnaRecord extract_dna(ModelIo& io, const ModelEndpoint& endpoint, const PromptSet& prompts,
                      const ModelEndpoint& embedder, const ProjectionMatrix& matrix, double alpha,
                      std::optional<std::string> created_at) {
    const auto rep = build_representation(io, endpoint, prompts, embedder);
    return finish(project(rep, matrix, alpha, embedder.model_id), std::move(created_at));
}

FleetResult extract_fleet(ModelIo& io, const std::vector<ModelEndpoint>& roster, const PromptSet& prompts,
                          const ModelEndpoint& embedder, const FleetOptions& options,
                          std::optional<DnaStore> existing) {
    if (prompts.size() == 0) throw DomainError("prompt set is empty");
    if (options.dim == 0) throw DomainError("DNA dimension must be positive");
    if (!(options.alpha > 0.0)) throw DomainError("alpha must be positive");
    if (existing) {
        const auto& m = existing->manifest();
        if (m.prompt_set_hash != prompts.hash)
            throw ProvenanceError("existing store was extracted from a different prompt set");
        if (m.embedder_id != embedder.model_id)
            throw ProvenanceError("existing store uses embedder '" + m.embedder_id + "', not '" + embedder.model_id +
                                  "'");
        if (m.projection.seed != options.seed || m.projection.L != options.dim)
            throw ProvenanceError("existing store uses projection seed " + std::to_string(m.projection.seed) +
                                  " and L=" + std::to_string(m.projection.L));
        if (m.alpha != options.alpha) throw ProvenanceError("existing store uses a different alpha");
    }

    FleetResult result;
    std::vector<const ModelEndpoint*> todo;
    for (const auto& ep : roster) {
        if (existing && existing->contains(ep.model_id))
            result.skipped.push_back(ep.model_id);
        else
            todo.push_back(&ep);
    }

    std::vector<std::optional<FunctionalRepresentation>> reps(todo.size());
    std::vector<std::string> errors(todo.size());
    parallel_for(todo.size(), options.parallel_models, [&](std::size_t i) {
        try {
            reps[i] = build_representation(io, *todo[i], prompts, embedder);
        } catch (const DimensionError&) {
            throw;
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    std::optional<ProjectionSpec> spec;
    if (existing) spec = existing->manifest().projection;
    for (std::size_t i = 0; i < todo.size(); ++i) {
        if (!reps[i]) {
            result.failures.push_back({todo[i]->model_id, errors[i]});
            continue;
        }
        const auto& rep = *reps[i];
        if (!spec) {
            spec = ProjectionSpec::standard(options.seed, options.dim, rep.values.size());
            if (options.entry_std) spec->entry_std = *options.entry_std;
            spec->validate();
        }
        if (rep.values.size() != spec->D)
            throw DimensionError("model '" + rep.model_id + "' has p*t = " + std::to_string(rep.values.size()) +
                                 " but the store fixes D = " + std::to_string(spec->D));
    }

    if (existing) {
        result.store = std::move(*existing);
    } else if (spec) {
        StoreManifest m;
        m.projection = *spec;
        m.alpha = options.alpha;
        m.embedder_id = embedder.model_id;
        m.prompt_set_hash = prompts.hash;
        result.store = DnaStore(m);
    }
    std::vector<const FunctionalRepresentation*> ok;
    for (std::size_t i = 0; i < todo.size(); ++i)
        if (reps[i]) ok.push_back(&*reps[i]);
    if (!ok.empty()) {
        auto records = project_streaming_many(ok, *spec, options.alpha, embedder.model_id);
        for (auto& rec : records) {
            result.extracted.push_back(rec.model_id);
            result.store.add(finish(std::move(rec), options.created_at));
        }
    }
    return result;
}

}  // namespace dna
