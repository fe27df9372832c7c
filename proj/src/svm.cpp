#include "dna/svm.hpp"

#include "dna/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <numeric>
#include <random>
#include <unordered_map>

namespace dna {

namespace {

constexpr double kTau = 1e-12;

// LRU cache of rows of Q[i][j] = y_i y_j K(x_i, x_j).
class KernelRows {
public:
    KernelRows(const std::vector<const std::vector<double>*>& x, const std::vector<int>& y, double gamma,
               std::size_t capacity)
        : x_(x), y_(y), gamma_(gamma), capacity_(std::max<std::size_t>(capacity, 2)) {
        diag_.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) diag_[i] = 1.0;  // K(x, x) = 1 for RBF
    }

    const std::vector<double>& row(std::size_t i) {
        auto it = index_.find(i);
        if (it != index_.end()) {
            lru_.splice(lru_.begin(), lru_, it->second);
            return it->second->second;
        }
        if (lru_.size() >= capacity_) {
            index_.erase(lru_.back().first);
            lru_.pop_back();
        }
        std::vector<double> r(x_.size());
        for (std::size_t j = 0; j < x_.size(); ++j) r[j] = y_[i] * y_[j] * rbf_kernel(*x_[i], *x_[j], gamma_);
        lru_.emplace_front(i, std::move(r));
        index_[i] = lru_.begin();
        return lru_.front().second;
    }

    double diag(std::size_t i) const { return diag_[i]; }

private:
    using Entry = std::pair<std::size_t, std::vector<double>>;
    const std::vector<const std::vector<double>*>& x_;
    const std::vector<int>& y_;
    double gamma_;
    std::size_t capacity_;
    std::vector<double> diag_;
    std::list<Entry> lru_;
    std::unordered_map<std::size_t, std::list<Entry>::iterator> index_;
};

}  // namespace

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return std::exp(-gamma * s);
}

double gamma_scale(const std::vector<std::vector<double>>& features) {
    if (features.empty() || features[0].empty()) throw DomainError("cannot derive gamma from empty features");
    double sum = 0.0, sum_sq = 0.0;
    std::size_t count = 0;
    for (const auto& f : features)
        for (double v : f) {
            sum += v;
            sum_sq += v * v;
            ++count;
        }
    const double mean = sum / static_cast<double>(count);
    const double var = sum_sq / static_cast<double>(count) - mean * mean;
    if (!(var > 0.0)) return 1.0;
    return 1.0 / (static_cast<double>(features[0].size()) * var);
}

SvmModel svm_train(const std::vector<std::vector<double>>& features, const std::vector<int>& labels,
                   const SvmParams& params) {
    const std::size_t n = features.size();
    if (n != labels.size()) throw DimensionError("features and labels differ in count");
    if (n == 0) throw DomainError("no training examples");
    if (!(params.C > 0.0)) throw DomainError("C must be positive");
    if (!(params.tol > 0.0)) throw DomainError("tol must be positive");
    const std::size_t dim = features[0].size();
    if (dim == 0) throw DomainError("feature vectors are empty");
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (features[i].size() != dim) throw DimensionError("feature vectors differ in length");
        for (double v : features[i])
            if (!std::isfinite(v)) throw DomainError("non-finite feature value");
        if (labels[i] == 1)
            has_pos = true;
        else if (labels[i] == -1)
            has_neg = true;
        else
            throw DomainError("labels must be +1 or -1");
    }
    if (!has_pos || !has_neg) throw DomainError("SVM training needs examples of both classes");
    const double gamma = params.gamma ? *params.gamma : gamma_scale(features);
    if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
    const double C = params.C;

    // Solver works on a seeded permutation of the training set.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(params.seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<const std::vector<double>*> x(n);
    std::vector<int> y(n);
    for (std::size_t k = 0; k < n; ++k) {
        x[k] = &features[order[k]];
        y[k] = labels[order[k]];
    }

    KernelRows Q(x, y, gamma, params.cache_rows);
    std::vector<double> alpha(n, 0.0);
    std::vector<double> grad(n, -1.0);  // Q alpha - e

    const auto in_up = [&](std::size_t t) { return (y[t] == 1 && alpha[t] < C) || (y[t] == -1 && alpha[t] > 0.0); };
    const auto in_low = [&](std::size_t t) { return (y[t] == 1 && alpha[t] > 0.0) || (y[t] == -1 && alpha[t] < C); };

    SvmModel model;
    model.gamma = gamma;
    model.C = C;
    model.n_features = dim;
    model.converged = false;
    std::size_t iter = 0;
    for (; iter < params.max_iterations; ++iter) {
        double m_up = -std::numeric_limits<double>::infinity();
        double m_low = std::numeric_limits<double>::infinity();
        std::size_t i = n, j = n;
        for (std::size_t t = 0; t < n; ++t) {
            const double v = -y[t] * grad[t];
            if (in_up(t) && v > m_up) {
                m_up = v;
                i = t;
            }
            if (in_low(t) && v < m_low) {
                m_low = v;
                j = t;
            }
        }
        model.kkt_gap = m_up - m_low;
        if (i == n || j == n || m_up - m_low < params.tol) {
            model.converged = true;
            break;
        }

        const auto& Qi = Q.row(i);
        const auto& Qj = Q.row(j);
        const double old_ai = alpha[i];
        const double old_aj = alpha[j];
        if (y[i] != y[j]) {
            double quad = Q.diag(i) + Q.diag(j) + 2.0 * Qi[j];
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if (diff > 0.0) {
                if (alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = C - diff;
                }
            } else if (alpha[j] > C) {
                alpha[j] = C;
                alpha[i] = C + diff;
            }
        } else {
            double quad = Q.diag(i) + Q.diag(j) - 2.0 * Qi[j];
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > C) {
                if (alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = sum - C;
                }
            } else if (alpha[j] < 0.0) {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if (sum > C) {
                if (alpha[j] > C) {
                    alpha[j] = C;
                    alpha[i] = sum - C;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        const double dai = alpha[i] - old_ai;
        const double daj = alpha[j] - old_aj;
        // Qi and Qj may be evicted by each other only if capacity < 2, which the cache forbids.
        for (std::size_t t = 0; t < n; ++t) grad[t] += Qi[t] * dai + Qj[t] * daj;
    }
    model.iterations = iter;

    // rho: average of y_i G_i over free vectors, else midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * grad[t];
        if (alpha[t] >= C) {
            if (y[t] == -1)
                ub = std::min(ub, yg);
            else
                lb = std::max(lb, yg);
        } else if (alpha[t] <= 0.0) {
            if (y[t] == 1)
                ub = std::min(ub, yg);
            else
                lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
    model.bias = -rho;

    std::vector<std::size_t> sv;
    for (std::size_t t = 0; t < n; ++t)
        if (alpha[t] > 0.0) sv.push_back(t);
    std::sort(sv.begin(), sv.end(), [&](std::size_t a, std::size_t b) { return order[a] < order[b]; });
    for (std::size_t t : sv) {
        model.support_indices.push_back(order[t]);
        model.support_vectors.push_back(*x[t]);
        model.dual_coef.push_back(alpha[t] * y[t]);
    }
    return model;
}

SvmPrediction svm_predict(const SvmModel& model, std::span<const double> features) {
    if (features.size() != model.n_features)
        throw DimensionError("feature length " + std::to_string(features.size()) + " does not match the model's " +
                             std::to_string(model.n_features));
    double score = model.bias;
    for (std::size_t k = 0; k < model.support_vectors.size(); ++k)
        score += model.dual_coef[k] * rbf_kernel(model.support_vectors[k], features, model.gamma);
    return SvmPrediction{score >= 0.0 ? 1 : -1, score};
}

nlohmann::json SvmModel::to_json() const {
    return nlohmann::json{{"kernel", "rbf"},
                          {"gamma", gamma},
                          {"C", C},
                          {"bias", bias},
                          {"n_features", n_features},
                          {"iterations", iterations},
                          {"converged", converged},
                          {"kkt_gap", kkt_gap},
                          {"support_indices", support_indices},
                          {"dual_coef", dual_coef},
                          {"support_vectors", support_vectors}};
}

SvmModel SvmModel::from_json(const nlohmann::json& j) {
    SvmModel m;
    m.gamma = j.at("gamma").get<double>();
    m.C = j.at("C").get<double>();
    m.bias = j.at("bias").get<double>();
    m.n_features = j.at("n_features").get<std::size_t>();
    m.iterations = j.value("iterations", std::size_t{0});
    m.converged = j.value("converged", true);
    m.kkt_gap = j.value("kkt_gap", 0.0);
    m.support_indices = j.value("support_indices", std::vector<std::size_t>{});
    m.dual_coef = j.at("dual_coef").get<std::vector<double>>();
    m.support_vectors = j.at("support_vectors").get<std::vector<std::vector<double>>>();
    if (m.dual_coef.size() != m.support_vectors.size()) throw DomainError("SVM model: dual_coef/support_vectors mismatch");
    for (const auto& sv : m.support_vectors)
        if (sv.size() != m.n_features) throw DomainError("SVM model: support vector length mismatch");
    return m;
}

}  // namespace dna
