#include "dna/synth.hpp"

#include "dna/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace dna {

void SyntheticFamilySpec::validate() const {
    if (n_families == 0 || per_family == 0 || dim == 0) throw DomainError("family counts and dim must be positive");
    if (!(centroid_scale > 0.0) || !std::isfinite(centroid_scale)) throw DomainError("centroid_scale must be positive");
    if (!(within_noise >= 0.0) || !std::isfinite(within_noise)) throw DomainError("within_noise must be non-negative");
    if (separable && !(within_noise < centroid_scale))
        throw DomainError("separable families need within_noise < centroid_scale");
}

SyntheticFamilies make_family_representations(const SyntheticFamilySpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    SyntheticFamilies out;
    out.centroids.resize(spec.n_families, std::vector<double>(spec.dim));
    for (auto& c : out.centroids)
        for (double& v : c) v = spec.centroid_scale * normal(rng);
    for (std::size_t f = 0; f < spec.n_families; ++f) {
        for (std::size_t j = 0; j < spec.per_family; ++j) {
            FunctionalRepresentation rep;
            rep.model_id = "f" + std::to_string(f) + "-m" + std::to_string(j);
            rep.prompt_set_hash = "synthetic";
            rep.p = spec.dim;
            rep.t = 1;
            rep.values = out.centroids[f];
            for (double& v : rep.values) v += spec.within_noise * normal(rng);
            out.reps.push_back(std::move(rep));
            out.families.push_back("f" + std::to_string(f));
        }
    }
    return out;
}

FunctionalRepresentation perturb(const FunctionalRepresentation& rep, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("sigma must be non-negative");
    FunctionalRepresentation out = rep;
    if (sigma == 0.0) return out;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sigma);
    for (double& v : out.values) v += normal(rng);
    return out;
}

namespace {

DistortionReport report_from(const std::vector<FunctionalRepresentation>& reps, const std::vector<DnaRecord>& dnas,
                             double c1, double c2) {
    DistortionReport r;
    r.min_ratio = std::numeric_limits<double>::infinity();
    r.max_ratio = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (std::size_t i = 0; i < reps.size(); ++i) {
        for (std::size_t j = i + 1; j < reps.size(); ++j) {
            ++r.pairs;
            const double dh = functional_distance(reps[i], reps[j]);
            if (dh == 0.0) {
                ++r.coincident;
                continue;
            }
            const double ratio = dna_distance(dnas[i], dnas[j]) / dh;
            r.ratios.push_back(ratio);
            r.min_ratio = std::min(r.min_ratio, ratio);
            r.max_ratio = std::max(r.max_ratio, ratio);
            sum += ratio;
            if (ratio < c1 || ratio > c2) ++r.violations;
        }
    }
    if (r.ratios.empty()) {
        r.min_ratio = r.max_ratio = 0.0;
    } else {
        r.mean_ratio = sum / static_cast<double>(r.ratios.size());
    }
    return r;
}

void check_inputs(const std::vector<FunctionalRepresentation>& reps, double c1, double c2) {
    if (reps.size() < 2) throw DomainError("distortion report needs at least two representations");
    if (!(c1 >= 0.0) || !(c2 >= c1)) throw DomainError("bounds must satisfy 0 <= c1 <= c2");
}

}  // namespace

DistortionReport distortion_report(const std::vector<FunctionalRepresentation>& reps, const ProjectionSpec& spec,
                                   double alpha, double c1, double c2) {
    check_inputs(reps, c1, c2);
    std::vector<const FunctionalRepresentation*> ptrs;
    for (const auto& r : reps) ptrs.push_back(&r);
    return report_from(reps, project_streaming_many(ptrs, spec, alpha), c1, c2);
}

DistortionReport distortion_report(const std::vector<FunctionalRepresentation>& reps, const ProjectionMatrix& matrix,
                                   double alpha, double c1, double c2) {
    check_inputs(reps, c1, c2);
    std::vector<DnaRecord> dnas;
    for (const auto& r : reps) dnas.push_back(project(r, matrix, alpha));
    return report_from(reps, dnas, c1, c2);
}

BinomialInterval wilson_interval(std::size_t successes, std::size_t trials, double z) {
    if (trials == 0) return {0.0, 1.0};
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
    const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

DistortionExperiment run_distortion_experiment(std::size_t K, std::size_t D, double epsilon, std::size_t seeds,
                                               std::uint64_t base_seed, std::size_t L) {
    if (K < 2 || D == 0 || seeds == 0) throw DomainError("experiment needs K >= 2, D >= 1 and at least one seed");
    DistortionExperiment ex;
    ex.K = K;
    ex.D = D;
    ex.epsilon = epsilon;
    ex.L = L ? L : jl_dimension(epsilon, K);
    if (ex.L > D) throw DomainError("target dimension " + std::to_string(ex.L) + " exceeds D=" + std::to_string(D));
    for (std::size_t i = 0; i < seeds; ++i) {
        const std::uint64_t s = base_seed + i;
        SyntheticFamilySpec fs;
        fs.seed = s;
        fs.n_families = K;
        fs.per_family = 1;
        fs.dim = D;
        fs.within_noise = 0.0;
        const auto fam = make_family_representations(fs);
        const auto rep = distortion_report(fam.reps, ProjectionSpec::standard(s + (std::uint64_t{1} << 32), ex.L, D), 1.0, 1.0 - epsilon,
                                           1.0 + epsilon);
        ex.violations_per_seed.push_back(rep.violations);
        ex.min_ratio_per_seed.push_back(rep.min_ratio);
        ex.max_ratio_per_seed.push_back(rep.max_ratio);
        if (rep.violations == 0) ++ex.successes;
    }
    ex.success_interval = wilson_interval(ex.successes, seeds);
    return ex;
}

}  // namespace dna
