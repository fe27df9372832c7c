#pragma once

// Numerical core: JL planning, seeded Gaussian projections, functional and DNA
// distances, Hoeffding sample-size planning. Everything here is a pure function
// of its arguments and safe to call from multiple threads.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dna {

using Matrix = Eigen::MatrixXd;

// Concatenated response embeddings of one model over an ordered prompt set:
// values[j*p .. (j+1)*p) is the embedding of the response to prompt j.
struct FunctionalRepresentation {
    std::string model_id;
    std::string prompt_set_hash;
    std::size_t p = 0;  // embedding dimension
    std::size_t t = 0;  // prompt count
    std::vector<double> values;

    // DimensionError if values.size() != p*t; DomainError if p or t is 0 or an entry is not finite.
    void validate() const;
    std::span<const double> prompt_block(std::size_t j) const;
};

struct ProjectionSpec {
    std::uint64_t seed = 0;
    std::size_t L = 0;  // DNA dimension
    std::size_t D = 0;  // source dimension p*t
    double entry_std = 0.0;

    // entry_std = 1/sqrt(L), so that E||Ax||^2 == ||x||^2.
    static ProjectionSpec standard(std::uint64_t seed, std::size_t L, std::size_t D);

    void validate() const;
    // Short stable digest of (seed, L, D, entry_std).
    std::string fingerprint() const;

    friend bool operator==(const ProjectionSpec&, const ProjectionSpec&) = default;
};

struct ProjectionMatrix {
    ProjectionSpec spec;
    Matrix values;  // L x D
};

struct DnaRecord {
    std::string model_id;
    std::vector<double> vector;
    ProjectionSpec projection;
    double alpha = 1.0;
    std::string embedder_id;
    std::string prompt_set_hash;
    std::string created_at;

    void validate() const;
    // Throws ProvenanceError if the two records are not comparable.
    void check_comparable(const DnaRecord& other) const;
};

struct JlPlan {
    double c1 = 0.0;
    double c2 = 0.0;
    double epsilon = 0.0;
    double alpha = 0.0;
    std::size_t K = 0;
    std::size_t L = 0;
};

struct ConcentrationPlan {
    double epsilon = 0.0;
    double delta = 0.0;
    double c_max = 0.0;
    std::size_t t = 0;
};

// epsilon = (c2-c1)/(c2+c1), alpha = (c1+c2)/2, L = jl_dimension(epsilon, K).
JlPlan plan_from_constants(double c1, double c2, std::size_t K);

// ceil(4 ln K / (eps^2/2 - eps^3/3)).
std::size_t jl_dimension(double epsilon, std::size_t K);

// Entries are drawn column by column (column k, then rows 0..L-1) from one
// mt19937_64 stream seeded with spec.seed.
ProjectionMatrix sample_projection(const ProjectionSpec& spec);

// alpha * (matrix x rep.values). Accumulation order is column-major and matches
// project_streaming bit for bit.
DnaRecord project(const FunctionalRepresentation& rep, const ProjectionMatrix& matrix, double alpha,
                  const std::string& embedder_id = {});

// Same result as project(rep, sample_projection(spec), alpha) without
// materialising the L x D matrix.
DnaRecord project_streaming(const FunctionalRepresentation& rep, const ProjectionSpec& spec,
                            double alpha, const std::string& embedder_id = {});

// project_streaming for several representations in one pass over the stream.
// Each result is bit-identical to the single-representation call.
std::vector<DnaRecord> project_streaming_many(const std::vector<const FunctionalRepresentation*>& reps,
                                              const ProjectionSpec& spec, double alpha,
                                              const std::string& embedder_id = {});

// Euclidean distance between the concatenated vectors; requires equal p, t and prompt set.
double functional_distance(const FunctionalRepresentation& a, const FunctionalRepresentation& b);

double dna_distance(const DnaRecord& a, const DnaRecord& b);

// Smallest t with 2 exp(-2 t eps^2 / c_max^2) <= delta.
ConcentrationPlan hoeffding_sample_size(double epsilon, double delta, double c_max);

// min(1, 2 exp(-2 t eps^2 / c_max^2)).
double hoeffding_tail(std::size_t t, double epsilon, double c_max);

// Rounds every entry through float, which is the persisted precision of DNA vectors.
void round_to_storage_precision(std::vector<double>& v);

}  // namespace dna
