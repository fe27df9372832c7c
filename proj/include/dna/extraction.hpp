#pragma once

// End-to-end DNA extraction: responses -> embeddings -> concatenation ->
// projection, plus the on-disk DNA store.
//
// Store layout:
//   <dir>/manifest.json  {"projection":{"seed","L","D","entry_std"},"alpha",
//                         "embedder_id","prompt_set_hash","version"}
//   <dir>/dna.jsonl      {"model_id","vector":[f32...],"created_at"} per line

#include "dna/core.hpp"
#include "dna/model_io.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dna {

struct StoreManifest {
    ProjectionSpec projection;
    double alpha = 1.0;
    std::string embedder_id;
    std::string prompt_set_hash;
    std::string version = DNA_VERSION;

    // Equality on everything except the tool version.
    bool compatible_with(const StoreManifest& other) const;
    void validate_record(const DnaRecord& r) const;
};

class DnaStore {
public:
    DnaStore() = default;
    explicit DnaStore(StoreManifest manifest) : manifest_(std::move(manifest)) {}

    const StoreManifest& manifest() const { return manifest_; }
    // Records in insertion order.
    const std::vector<DnaRecord>& records() const { return records_; }
    const DnaRecord* find(const std::string& model_id) const;
    bool contains(const std::string& model_id) const { return find(model_id) != nullptr; }
    std::size_t size() const { return records_.size(); }

    // Throws ProvenanceError on manifest mismatch and DomainError on duplicate ids.
    void add(DnaRecord record);
    // Appends the other store's records; throws on manifest mismatch or duplicates.
    void merge(const DnaStore& other);

private:
    StoreManifest manifest_;
    std::vector<DnaRecord> records_;
};

DnaStore load_store(const std::filesystem::path& dir);
void save_store(const DnaStore& store, const std::filesystem::path& dir);

// UTC "YYYY-MM-DDTHH:MM:SSZ"; honours SOURCE_DATE_EPOCH when set.
std::string current_timestamp();

// Generates, embeds and concatenates in prompt order.
FunctionalRepresentation build_representation(ModelIo& io, const ModelEndpoint& endpoint, const PromptSet& prompts,
                                              const ModelEndpoint& embedder);

// Runs the whole pipeline for one model with the seeded Gaussian projection.
// The vector is rounded to storage (f32) precision.
DnaRecord extract_dna(ModelIo& io, const ModelEndpoint& endpoint, const PromptSet& prompts,
                      const ModelEndpoint& embedder, const ProjectionSpec& spec, double alpha,
                      std::optional<std::string> created_at = std::nullopt);

// Same, with an explicit projection matrix (e.g. identity for tests).
DnaRecord extract_dna(ModelIo& io, const ModelEndpoint& endpoint, const PromptSet& prompts,
                      const ModelEndpoint& embedder, const ProjectionMatrix& matrix, double alpha,
                      std::optional<std::string> created_at = std::nullopt);

struct FleetOptions {
    std::uint64_t seed = 0;
    std::size_t dim = 128;
    double alpha = 1.0;
    std::optional<double> entry_std;  // default 1/sqrt(dim)
    std::size_t parallel_models = 2;
    std::optional<std::string> created_at;
};

struct FleetFailure {
    std::string model_id;
    std::string reason;
};

struct FleetResult {
    DnaStore store;
    std::vector<std::string> extracted;  // newly added, roster order
    std::vector<std::string> skipped;    // already present in the existing store
    std::vector<FleetFailure> failures;
};

// Extracts every roster model not already in `existing`. The projection's D is
// fixed by the first successful model (p*t) unless the existing store pins it.
// A permanent per-model failure is reported and does not stop the fleet;
// dimension mismatches against the manifest are fatal.
FleetResult extract_fleet(ModelIo& io, const std::vector<ModelEndpoint>& roster, const PromptSet& prompts,
                          const ModelEndpoint& embedder, const FleetOptions& options,
                          std::optional<DnaStore> existing = std::nullopt);

}  // namespace dna
