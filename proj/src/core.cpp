#include "dna/core.hpp"

#include "dna/errors.hpp"
#include "dna/hashing.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace dna {

namespace {

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// Shared by sample_projection and project_streaming so both walk the exact same stream.
class GaussianStream {
public:
    explicit GaussianStream(const ProjectionSpec& spec) : engine_(spec.seed), dist_(0.0, spec.entry_std) {}
    double next() { return dist_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> dist_;
};

DnaRecord make_record(const FunctionalRepresentation& rep, const ProjectionSpec& spec, double alpha,
                      const std::string& embedder_id, std::vector<double> acc) {
    for (double& x : acc) x *= alpha;
    DnaRecord r;
    r.model_id = rep.model_id;
    r.vector = std::move(acc);
    r.projection = spec;
    r.alpha = alpha;
    r.embedder_id = embedder_id;
    r.prompt_set_hash = rep.prompt_set_hash;
    r.validate();
    return r;
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("alpha must be a positive finite number");
}

}  // namespace

void FunctionalRepresentation::validate() const {
    if (p == 0 || t == 0) throw DomainError("functional representation of '" + model_id + "' needs p >= 1 and t >= 1");
    if (values.size() != p * t)
        throw DimensionError("functional representation of '" + model_id + "' has " + std::to_string(values.size()) +
                             " values, expected p*t = " + std::to_string(p * t));
    if (!all_finite(values)) throw DomainError("functional representation of '" + model_id + "' contains NaN or Inf");
}

std::span<const double> FunctionalRepresentation::prompt_block(std::size_t j) const {
    if (j >= t) throw DomainError("prompt index out of range");
    return std::span<const double>(values).subspan(j * p, p);
}

ProjectionSpec ProjectionSpec::standard(std::uint64_t seed, std::size_t L, std::size_t D) {
    ProjectionSpec s;
    s.seed = seed;
    s.L = L;
    s.D = D;
    s.entry_std = L > 0 ? 1.0 / std::sqrt(static_cast<double>(L)) : 0.0;
    return s;
}

void ProjectionSpec::validate() const {
    if (L == 0 || D == 0) throw DomainError("projection dimensions must be positive (L=" + std::to_string(L) +
                                            ", D=" + std::to_string(D) + ")");
    if (L > D)
        throw DomainError("projection must reduce dimension: L=" + std::to_string(L) + " > D=" + std::to_string(D));
    if (!(entry_std > 0.0) || !std::isfinite(entry_std)) throw DomainError("entry_std must be positive");
}

std::string ProjectionSpec::fingerprint() const {
    std::ostringstream os;
    os.precision(17);
    os << "gaussian-v1|" << seed << '|' << L << '|' << D << '|' << entry_std;
    return sha256_hex(os.str()).substr(0, 16);
}

void DnaRecord::validate() const {
    if (vector.size() != projection.L)
        throw DimensionError("DNA of '" + model_id + "' has length " + std::to_string(vector.size()) +
                             ", projection says L=" + std::to_string(projection.L));
    if (!all_finite(vector)) throw DomainError("DNA of '" + model_id + "' contains NaN or Inf");
}

void DnaRecord::check_comparable(const DnaRecord& other) const {
    if (projection != other.projection)
        throw ProvenanceError("DNA of '" + model_id + "' and '" + other.model_id + "' use different projections (" +
                              projection.fingerprint() + " vs " + other.projection.fingerprint() + ")");
    if (alpha != other.alpha)
        throw ProvenanceError("DNA of '" + model_id + "' and '" + other.model_id + "' use different alpha scaling");
    if (embedder_id != other.embedder_id)
        throw ProvenanceError("DNA of '" + model_id + "' and '" + other.model_id + "' use different embedders");
    if (prompt_set_hash != other.prompt_set_hash)
        throw ProvenanceError("DNA of '" + model_id + "' and '" + other.model_id + "' use different prompt sets");
}

std::size_t jl_dimension(double epsilon, std::size_t K) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("epsilon must lie in (0, 1)");
    if (K < 2) throw DomainError("K must be at least 2");
    const double denom = epsilon * epsilon / 2.0 - epsilon * epsilon * epsilon / 3.0;
    return static_cast<std::size_t>(std::ceil(4.0 * std::log(static_cast<double>(K)) / denom));
}

JlPlan plan_from_constants(double c1, double c2, std::size_t K) {
    if (!(c1 > 0.0) || !std::isfinite(c1)) throw DomainError("c1 must be positive");
    if (!(c2 > c1) || !std::isfinite(c2)) throw DomainError("c2 must exceed c1");
    if (K < 2) throw DomainError("K must be at least 2");
    JlPlan plan;
    plan.c1 = c1;
    plan.c2 = c2;
    plan.K = K;
    plan.epsilon = (c2 - c1) / (c2 + c1);
    plan.alpha = (c1 + c2) / 2.0;
    plan.L = jl_dimension(plan.epsilon, K);
    return plan;
}

ProjectionMatrix sample_projection(const ProjectionSpec& spec) {
    spec.validate();
    ProjectionMatrix m{spec, Matrix(spec.L, spec.D)};
    GaussianStream stream(spec);
    for (Eigen::Index k = 0; k < m.values.cols(); ++k)
        for (Eigen::Index j = 0; j < m.values.rows(); ++j) m.values(j, k) = stream.next();
    return m;
}

DnaRecord project(const FunctionalRepresentation& rep, const ProjectionMatrix& matrix, double alpha,
                  const std::string& embedder_id) {
    rep.validate();
    check_alpha(alpha);
    const auto L = static_cast<std::size_t>(matrix.values.rows());
    const auto D = static_cast<std::size_t>(matrix.values.cols());
    if (D != rep.values.size())
        throw DimensionError("projection expects D=" + std::to_string(D) + " but representation of '" +
                             rep.model_id + "' has " + std::to_string(rep.values.size()) + " values");
    std::vector<double> acc(L, 0.0);
    for (std::size_t k = 0; k < D; ++k) {
        const double x = rep.values[k];
        for (std::size_t j = 0; j < L; ++j) acc[j] += matrix.values(j, k) * x;
    }
    return make_record(rep, matrix.spec, alpha, embedder_id, std::move(acc));
}

DnaRecord project_streaming(const FunctionalRepresentation& rep, const ProjectionSpec& spec, double alpha,
                            const std::string& embedder_id) {
    rep.validate();
    spec.validate();
    check_alpha(alpha);
    if (spec.D != rep.values.size())
        throw DimensionError("projection expects D=" + std::to_string(spec.D) + " but representation of '" +
                             rep.model_id + "' has " + std::to_string(rep.values.size()) + " values");
    std::vector<double> acc(spec.L, 0.0);
    GaussianStream stream(spec);
    for (std::size_t k = 0; k < spec.D; ++k) {
        const double x = rep.values[k];
        for (std::size_t j = 0; j < spec.L; ++j) acc[j] += stream.next() * x;
    }
    return make_record(rep, spec, alpha, embedder_id, std::move(acc));
}

std::vector<DnaRecord> project_streaming_many(const std::vector<const FunctionalRepresentation*>& reps,
                                              const ProjectionSpec& spec, double alpha,
                                              const std::string& embedder_id) {
    spec.validate();
    check_alpha(alpha);
    for (const auto* rep : reps) {
        rep->validate();
        if (spec.D != rep->values.size())
            throw DimensionError("projection expects D=" + std::to_string(spec.D) + " but representation of '" +
                                 rep->model_id + "' has " + std::to_string(rep->values.size()) + " values");
    }
    std::vector<std::vector<double>> acc(reps.size(), std::vector<double>(spec.L, 0.0));
    std::vector<double> column(spec.L);
    GaussianStream stream(spec);
    for (std::size_t k = 0; k < spec.D; ++k) {
        for (std::size_t j = 0; j < spec.L; ++j) column[j] = stream.next();
        for (std::size_t r = 0; r < reps.size(); ++r) {
            const double x = reps[r]->values[k];
            auto& a = acc[r];
            for (std::size_t j = 0; j < spec.L; ++j) a[j] += column[j] * x;
        }
    }
    std::vector<DnaRecord> out;
    out.reserve(reps.size());
    for (std::size_t r = 0; r < reps.size(); ++r)
        out.push_back(make_record(*reps[r], spec, alpha, embedder_id, std::move(acc[r])));
    return out;
}

double functional_distance(const FunctionalRepresentation& a, const FunctionalRepresentation& b) {
    a.validate();
    b.validate();
    if (a.prompt_set_hash != b.prompt_set_hash)
        throw ProvenanceError("functional distance across different prompt sets is not defined ('" + a.model_id +
                              "' vs '" + b.model_id + "')");
    if (a.p != b.p || a.t != b.t) throw DimensionError("functional representations differ in p or t");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double dna_distance(const DnaRecord& a, const DnaRecord& b) {
    a.check_comparable(b);
    if (a.vector.size() != b.vector.size()) throw DimensionError("DNA vectors differ in length");
    double s = 0.0;
    for (std::size_t i = 0; i < a.vector.size(); ++i) {
        const double d = a.vector[i] - b.vector[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double hoeffding_tail(std::size_t t, double epsilon, double c_max) {
    if (t == 0) throw DomainError("t must be at least 1");
    if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
    if (!(c_max > 0.0)) throw DomainError("c_max must be positive");
    const double bound = 2.0 * std::exp(-2.0 * static_cast<double>(t) * epsilon * epsilon / (c_max * c_max));
    return std::min(1.0, bound);
}

ConcentrationPlan hoeffding_sample_size(double epsilon, double delta, double c_max) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw DomainError("epsilon must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
    if (!(c_max > 0.0) || !std::isfinite(c_max)) throw DomainError("c_max must be positive");
    const double raw = c_max * c_max * std::log(2.0 / delta) / (2.0 * epsilon * epsilon);
    auto t = static_cast<std::size_t>(std::max(1.0, std::ceil(raw)));
    // ceil() of a rounded quotient can land one off the true minimum.
    while (t > 1 && hoeffding_tail(t - 1, epsilon, c_max) <= delta) --t;
    while (hoeffding_tail(t, epsilon, c_max) > delta) ++t;
    return ConcentrationPlan{epsilon, delta, c_max, t};
}

void round_to_storage_precision(std::vector<double>& v) {
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
}

}  // namespace dna
