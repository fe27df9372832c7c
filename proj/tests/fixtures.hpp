#pragma once

#include "dna/core.hpp"
#include "dna/extraction.hpp"
#include "dna/synth.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <unistd.h>

namespace fixture {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "dna") {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" +
                 std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

// Projects synthetic representations into a store with the standard seeded matrix.
inline dna::DnaStore store_from_reps(const std::vector<dna::FunctionalRepresentation>& reps, std::size_t L,
                                     std::uint64_t seed, double alpha = 1.0) {
    dna::StoreManifest mf;
    mf.projection = dna::ProjectionSpec::standard(seed, L, reps.front().values.size());
    mf.alpha = alpha;
    mf.embedder_id = "synthetic-embedder";
    mf.prompt_set_hash = reps.front().prompt_set_hash;
    dna::DnaStore store(mf);
    std::vector<const dna::FunctionalRepresentation*> ptrs;
    for (const auto& r : reps) ptrs.push_back(&r);
    for (auto rec : dna::project_streaming_many(ptrs, mf.projection, alpha, mf.embedder_id)) {
        dna::round_to_storage_precision(rec.vector);
        rec.created_at = "2026-01-01T00:00:00Z";
        store.add(std::move(rec));
    }
    return store;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace fixture
