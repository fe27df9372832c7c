#pragma once

// Synthetic model families and the distortion experiment used to check the
// projection and concentration bounds without real models.

#include "dna/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dna {

struct SyntheticFamilySpec {
    std::uint64_t seed = 0;
    std::size_t n_families = 1;
    std::size_t per_family = 1;
    std::size_t dim = 16;
    double centroid_scale = 1.0;  // per-coordinate std of family centroids
    double within_noise = 0.1;    // per-coordinate std of members around their centroid
    bool separable = false;       // when set, within_noise < centroid_scale is enforced

    void validate() const;
};

struct SyntheticFamilies {
    std::vector<FunctionalRepresentation> reps;  // family-major order, ids "f<k>-m<j>"
    std::vector<std::string> families;           // "f<k>" per rep
    std::vector<std::vector<double>> centroids;
};

// One mt19937_64 stream: all centroids first, then members in order.
SyntheticFamilies make_family_representations(const SyntheticFamilySpec& spec);

// rep + N(0, sigma^2) per coordinate. The model id is kept.
FunctionalRepresentation perturb(const FunctionalRepresentation& rep, double sigma, std::uint64_t seed);

struct DistortionReport {
    std::vector<double> ratios;  // d_dna / d_functional per non-coincident pair, (i<j) order
    double min_ratio = 0.0;
    double max_ratio = 0.0;
    double mean_ratio = 0.0;
    std::size_t pairs = 0;
    std::size_t violations = 0;  // ratios outside [c1, c2]
    std::size_t coincident = 0;  // pairs with zero functional distance
};

DistortionReport distortion_report(const std::vector<FunctionalRepresentation>& reps, const ProjectionSpec& spec,
                                   double alpha, double c1, double c2);
// Same, with an explicit matrix.
DistortionReport distortion_report(const std::vector<FunctionalRepresentation>& reps, const ProjectionMatrix& matrix,
                                   double alpha, double c1, double c2);

struct BinomialInterval {
    double lo = 0.0;
    double hi = 1.0;
};

// Wilson score interval.
BinomialInterval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.96);

struct DistortionExperiment {
    std::size_t K = 0;
    std::size_t D = 0;
    double epsilon = 0.0;
    std::size_t L = 0;
    std::vector<std::size_t> violations_per_seed;
    std::vector<double> min_ratio_per_seed;
    std::vector<double> max_ratio_per_seed;
    std::size_t successes = 0;  // seeds with zero violations
    BinomialInterval success_interval;
};

// For seed s = base_seed + i: K Gaussian points in R^D (seed s), projected with
// the standard seeded matrix (seed s + 2^32), alpha = 1, bounds [1-eps, 1+eps].
// L defaults to jl_dimension(eps, K).
DistortionExperiment run_distortion_experiment(std::size_t K, std::size_t D, double epsilon, std::size_t seeds,
                                               std::uint64_t base_seed = 0, std::size_t L = 0);

}  // namespace dna
