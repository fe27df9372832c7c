#pragma once

// Population analysis over DNA stores: distance matrices, the Mantel
// permutation test, pair featurisation, binary metrics and the relation
// detection baselines.

#include "dna/core.hpp"
#include "dna/extraction.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dna {

struct DistanceMatrix {
    std::vector<std::string> labels;
    Matrix m;

    std::size_t size() const { return labels.size(); }
    // Symmetric, zero diagonal, finite, non-negative, labels unique. Throws DomainError.
    void validate() const;
    std::size_t index_of(const std::string& label) const;
};

// Pairwise dna_distance over all records, labels sorted lexicographically.
DistanceMatrix distance_matrix(const DnaStore& store);
// Euclidean distances between raw vectors (no provenance checks).
DistanceMatrix distance_matrix(const std::vector<std::string>& labels, const std::vector<std::vector<double>>& vectors);

// CSV: header row "",label..., then one row per label; 9 significant digits.
std::string distance_matrix_to_csv(const DistanceMatrix& d);
DistanceMatrix distance_matrix_from_csv(const std::string& text);
DistanceMatrix load_distance_matrix(const std::filesystem::path& path);
void save_distance_matrix(const DistanceMatrix& d, const std::filesystem::path& path);

struct MantelResult {
    double r = 0.0;
    double p_value = 1.0;
    std::size_t permutations = 0;
    std::uint64_t seed = 0;
};

// Pearson correlation of the strict upper triangles.
double upper_triangle_pearson(const Matrix& a, const Matrix& b);

// One-sided Mantel test: p = (1 + #{r_perm >= r_obs}) / (P + 1), where each
// permutation relabels rows and columns of d2 together. d2 is aligned to d1's
// label order first; both must cover the same labels.
MantelResult mantel_test(const DistanceMatrix& d1, const DistanceMatrix& d2, std::size_t permutations,
                         std::uint64_t seed);

// |a - b| elementwise, followed by ||a - b||_2. Symmetric in its arguments.
std::vector<double> pair_features(const DnaRecord& a, const DnaRecord& b);

enum class Relation { Independent = 0, Correlated = 1 };

std::string to_string(Relation r);
Relation relation_from_string(const std::string& s);

struct RelationPair {
    std::string model_a;
    std::string model_b;
    std::string org_a;
    std::string org_b;
    Relation label = Relation::Independent;
};

// CSV with header model_a,model_b,org_a,org_b,label.
std::vector<RelationPair> load_relation_pairs(const std::filesystem::path& path);
std::vector<RelationPair> relation_pairs_from_csv(const std::string& text);
std::string relation_pairs_to_csv(const std::vector<RelationPair>& pairs);

// Correlated iff org_a == org_b. Throws DomainError when an org is missing.
Relation greedy_baseline(const RelationPair& pair);
// Fair coin derived from (seed, unordered pair); reproducible and order-invariant.
Relation random_baseline(const RelationPair& pair, std::uint64_t seed);

// Adds as many random independent pairs as there are correlated ones. Negatives
// are drawn uniformly from unordered model pairs not marked correlated.
// `orgs` maps every model in `models` to its organisation (may be empty strings).
std::vector<RelationPair> add_negative_pairs(const std::vector<RelationPair>& correlated,
                                             const std::vector<std::string>& models,
                                             const std::vector<std::string>& orgs, std::uint64_t seed);

struct RelationSplit {
    std::vector<RelationPair> train;
    std::vector<RelationPair> test;
};

// Stratified by label, seeded. train_fraction of each class (rounded) goes to train.
RelationSplit stratified_split(const std::vector<RelationPair>& pairs, double train_fraction, std::uint64_t seed);

struct BinaryMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::optional<double> auc;  // absent when truth contains one class only
};

// Rank-statistic AUC with average ranks for ties. Throws DomainError unless both classes occur.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& truth);

// predicted/truth are 1 (correlated) or 0. Precision or recall with an empty
// denominator is reported as 0.
BinaryMetrics evaluate_binary(const std::vector<double>& scores, const std::vector<int>& predicted,
                              const std::vector<int>& truth);

}  // namespace dna
