#pragma once

// Soft-margin C-SVM with an RBF kernel, trained by SMO with maximal violating
// pair working-set selection.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace dna {

struct SvmParams {
    double C = 1.0;
    std::optional<double> gamma;  // nullopt: 1 / (n_features * Var(X)), the "scale" heuristic
    double tol = 1e-3;
    std::uint64_t seed = 0;        // permutes the training order seen by the solver
    std::size_t cache_rows = 2048;  // kernel rows kept in memory
    std::size_t max_iterations = 10'000'000;
};

struct SvmModel {
    std::vector<std::vector<double>> support_vectors;
    std::vector<double> dual_coef;            // alpha_i * y_i, |dual_coef| <= C
    std::vector<std::size_t> support_indices;  // into the training set, ascending
    double bias = 0.0;
    double gamma = 1.0;
    double C = 1.0;
    std::size_t n_features = 0;
    std::size_t iterations = 0;
    bool converged = true;
    double kkt_gap = 0.0;  // m(alpha) - M(alpha) at termination

    nlohmann::json to_json() const;
    static SvmModel from_json(const nlohmann::json& j);
};

struct SvmPrediction {
    int label = 1;  // +1 or -1; score 0 maps to +1
    double score = 0.0;
};

double gamma_scale(const std::vector<std::vector<double>>& features);
double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

// labels must be +1 / -1 with both classes present.
SvmModel svm_train(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                   const SvmParams& params = {});

SvmPrediction svm_predict(const SvmModel& model, std::span<const double> features);

}  // namespace dna
