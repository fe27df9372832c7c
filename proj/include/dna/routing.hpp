#pragma once

// Frozen-DNA router: a learned linear map W takes a query embedding into DNA
// space, each model scores sigma(dna_m . W x + b_m), and the query goes to the
// highest-scoring model. DNAs are never trained.

#include "dna/core.hpp"
#include "dna/extraction.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dna {

struct RoutingExample {
    std::string query_id;
    std::vector<double> embedding;
    std::map<std::string, int> outcomes;  // model id -> 1 if it answered correctly

    void validate() const;
};

std::vector<RoutingExample> load_routing_examples(const std::filesystem::path& path);
void save_routing_examples(const std::vector<RoutingExample>& examples, const std::filesystem::path& path);

struct RouterHyperparams {
    double learning_rate = 0.05;
    std::size_t epochs = 200;
    double l2 = 1e-4;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    bool use_bias = true;
    // Unit-normalise query embeddings before the map.
    bool normalize_queries = false;
    double init_std = 0.01;

    nlohmann::json to_json() const;
    static RouterHyperparams from_json(const nlohmann::json& j);
};

struct RouterModel {
    Matrix W;  // L x q
    std::vector<std::string> models;  // sorted
    std::vector<double> biases;       // aligned with models
    std::vector<std::vector<double>> dna_index;  // unit-normalised DNA, aligned with models
    RouterHyperparams hyperparams;
    std::string dna_provenance;
    std::vector<double> loss_history;  // full-data loss after each epoch
    bool diverged = false;

    std::size_t query_dim() const { return static_cast<std::size_t>(W.cols()); }
    // dna_m . W x + b_m for every model, in `models` order.
    std::vector<double> scores(const std::vector<double>& query_embedding) const;

    nlohmann::json to_json() const;
    static RouterModel from_json(const nlohmann::json& j);
};

void save_router(const RouterModel& router, const std::filesystem::path& path);
RouterModel load_router(const std::filesystem::path& path);

// Digest of the store manifest plus the DNA vectors the router was built on.
std::string dna_provenance_hash(const DnaStore& store);

// Initial router: DNA index from the store (models named in `train` outcomes),
// W drawn from N(0, init_std^2) with the hyperparameter seed, zero biases.
RouterModel init_router(const DnaStore& store, const std::vector<RoutingExample>& train, const RouterHyperparams& hp);

struct RouterGradient {
    double loss = 0.0;
    Matrix dW;
    std::vector<double> db;
};

// Mean binary cross-entropy over all (query, model) cells present in `batch`
// plus (l2/2)||W||^2, and its gradient with respect to W and the biases.
RouterGradient router_loss_and_gradient(const RouterModel& router, const std::vector<RoutingExample>& batch);

// Mini-batch gradient descent from init_router. Throws DomainError on unknown
// model ids; degenerate all-0/all-1 outcomes only produce a warning.
RouterModel train_router(const DnaStore& store, const std::vector<RoutingExample>& train, const RouterHyperparams& hp);

// Argmax score; ties go to the lexicographically smallest model id.
std::string route(const RouterModel& router, const std::vector<double>& query_embedding);

// Fraction of queries whose routed model answered correctly. A routed model
// missing from a query's outcomes counts as incorrect.
double routing_accuracy(const RouterModel& router, const std::vector<RoutingExample>& test);

// Best train-set model (ties lexicographic) evaluated on test.
struct SingleBest {
    std::string model_id;
    double accuracy = 0.0;
};
SingleBest single_best_baseline(const std::vector<RoutingExample>& train, const std::vector<RoutingExample>& test);

// Expected accuracy of picking uniformly among `models` for every query.
double random_baseline_accuracy(const std::vector<std::string>& models, const std::vector<RoutingExample>& test);
// One seeded draw of the random router.
double random_router_accuracy(const std::vector<std::string>& models, const std::vector<RoutingExample>& test,
                              std::uint64_t seed);

}  // namespace dna
