#include "dna/core.hpp"
#include "dna/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

using namespace dna;

namespace {

FunctionalRepresentation rep(std::string id, std::vector<double> v, std::size_t p = 0, std::string hash = "h") {
    FunctionalRepresentation r;
    r.model_id = std::move(id);
    r.prompt_set_hash = std::move(hash);
    r.p = p ? p : v.size();
    r.t = v.size() / r.p;
    r.values = std::move(v);
    return r;
}

std::vector<double> gaussian(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    std::vector<double> v(n);
    for (double& x : v) x = nd(rng);
    return v;
}

// Hand formula, evaluated separately from the library.
std::size_t hand_L(double eps, double K) {
    return static_cast<std::size_t>(std::ceil(4.0 * std::log(K) / (eps * eps / 2.0 - eps * eps * eps / 3.0)));
}

ProjectionMatrix identity(std::size_t n) {
    ProjectionMatrix m;
    m.spec = ProjectionSpec{0, n, n, 1.0};
    m.values = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    return m;
}

}  // namespace

TEST_CASE("plan_from_constants arithmetic") {
    auto p = plan_from_constants(1.0, 3.0, 2);
    CHECK(p.epsilon == doctest::Approx(0.5));
    CHECK(p.alpha == doctest::Approx(2.0));
    CHECK(p.L == hand_L(0.5, 2));

    p = plan_from_constants(0.9, 1.1, 10);
    CHECK(p.epsilon == doctest::Approx(0.1));
    CHECK(p.alpha == doctest::Approx(1.0));

    p = plan_from_constants(0.7, 1.3, 305);
    CHECK(p.epsilon == doctest::Approx(0.3));
    CHECK(p.L == 636);

    CHECK_THROWS_WITH_AS(plan_from_constants(2.0, 2.0, 10), doctest::Contains("c2 must exceed c1"), DomainError);
    CHECK_THROWS_AS(plan_from_constants(0.0, 1.0, 10), DomainError);
    CHECK_THROWS_AS(plan_from_constants(0.5, 1.0, 1), DomainError);
}

TEST_CASE("jl_dimension matches the hand formula") {
    CHECK(jl_dimension(0.5, 100) == 222);
    CHECK(jl_dimension(0.3, 305) == 636);
    CHECK(jl_dimension(0.3, 64) == 463);
    for (double eps : {0.05, 0.1, 0.2, 0.45, 0.7, 0.9})
        for (std::size_t K : {2, 10, 64, 1000}) CHECK(jl_dimension(eps, K) == hand_L(eps, double(K)));
    CHECK_THROWS_AS(jl_dimension(1.0, 10), DomainError);
    CHECK_THROWS_AS(jl_dimension(0.0, 10), DomainError);
    CHECK_THROWS_AS(jl_dimension(0.3, 1), DomainError);
}

TEST_CASE("sample_projection is deterministic and correctly scaled") {
    const auto spec = ProjectionSpec::standard(42, 128, 4096);
    CHECK(spec.entry_std == doctest::Approx(1.0 / std::sqrt(128.0)));
    const auto a = sample_projection(spec);
    const auto b = sample_projection(spec);
    CHECK(a.values.rows() == 128);
    CHECK(a.values.cols() == 4096);
    CHECK(std::memcmp(a.values.data(), b.values.data(), sizeof(double) * a.values.size()) == 0);

    const double mean = a.values.mean();
    const double var = (a.values.array() - mean).square().mean();
    CHECK(std::abs(mean) < 0.01);
    CHECK(var == doctest::Approx(1.0 / 128).epsilon(0.10));

    const auto c = sample_projection(ProjectionSpec::standard(43, 128, 4096));
    CHECK(c.values != a.values);

    CHECK_THROWS_AS(sample_projection(ProjectionSpec::standard(1, 128, 64)), DomainError);
    CHECK_THROWS_AS(sample_projection(ProjectionSpec{1, 0, 10, 1.0}), DomainError);
    CHECK_THROWS_AS(sample_projection(ProjectionSpec{1, 5, 0, 1.0}), DomainError);
}

TEST_CASE("fingerprint separates specs") {
    const auto a = ProjectionSpec::standard(1, 8, 16);
    CHECK(a.fingerprint() == ProjectionSpec::standard(1, 8, 16).fingerprint());
    CHECK(a.fingerprint() != ProjectionSpec::standard(2, 8, 16).fingerprint());
    CHECK(a.fingerprint() != ProjectionSpec::standard(1, 9, 16).fingerprint());
    CHECK(a.fingerprint() != ProjectionSpec::standard(1, 8, 17).fingerprint());
}

TEST_CASE("project: zeros, identity, linearity and the streaming path") {
    std::mt19937_64 rng(3);
    const auto spec = ProjectionSpec::standard(9, 16, 96);
    const auto mat = sample_projection(spec);

    const auto zero = project(rep("z", std::vector<double>(96, 0.0), 8), mat, 1.0);
    for (double v : zero.vector) CHECK(v == 0.0);

    const auto x = gaussian(12, rng);
    const auto id = project(rep("i", x, 4), identity(12), 1.0);
    CHECK(id.vector == x);

    // a*E1 + b*E2 evaluated both ways.
    const auto e1 = gaussian(96, rng), e2 = gaussian(96, rng);
    const double a = 0.7, b = -1.9;
    std::vector<double> mix(96);
    for (std::size_t i = 0; i < 96; ++i) mix[i] = a * e1[i] + b * e2[i];
    const auto pm = project(rep("m", mix, 8), mat, 1.3);
    const auto p1 = project(rep("1", e1, 8), mat, 1.3);
    const auto p2 = project(rep("2", e2, 8), mat, 1.3);
    for (std::size_t k = 0; k < 16; ++k) {
        const double rhs = a * p1.vector[k] + b * p2.vector[k];
        CHECK(std::abs(pm.vector[k] - rhs) <= 1e-9 * std::max(1.0, std::abs(rhs)));
    }

    // alpha * A x by a plain loop.
    for (std::size_t r = 0; r < 16; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 96; ++c) s += mat.values(r, c) * e1[c];
        CHECK(p1.vector[r] == doctest::Approx(1.3 * s).epsilon(1e-12));
    }

    // Streaming reproduces the materialised matrix bit for bit, singly and batched.
    const auto s1 = project_streaming(rep("1", e1, 8), spec, 1.3);
    CHECK(s1.vector == p1.vector);
    const auto r1 = rep("1", e1, 8), r2 = rep("2", e2, 8);
    const auto many = project_streaming_many({&r1, &r2}, spec, 1.3);
    REQUIRE(many.size() == 2);
    CHECK(many[0].vector == p1.vector);
    CHECK(many[1].vector == p2.vector);
    CHECK(many[1].projection == spec);

    CHECK_THROWS_AS(project(rep("bad", gaussian(95, rng), 5), mat, 1.0), DimensionError);
    CHECK_THROWS_AS(project(rep("1", e1, 8), mat, 0.0), DomainError);
}

TEST_CASE("norm preservation in expectation") {
    std::mt19937_64 rng(11);
    auto x = gaussian(64, rng);
    double n = 0.0;
    for (double v : x) n += v * v;
    for (double& v : x) v /= std::sqrt(n);
    const auto r = rep("u", x, 8);
    double mean = 0.0;
    const int trials = 1000;
    for (int s = 0; s < trials; ++s) {
        const auto d = project_streaming(r, ProjectionSpec::standard(static_cast<std::uint64_t>(s), 16, 64), 1.0);
        double sq = 0.0;
        for (double v : d.vector) sq += v * v;
        mean += sq / trials;
    }
    CHECK(mean == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("functional_distance") {
    const auto a = rep("a", {1.0, 0.0}, 2);
    const auto b = rep("b", {0.0, 1.0}, 2);
    CHECK(functional_distance(a, a) == 0.0);
    CHECK(functional_distance(a, b) == doctest::Approx(std::sqrt(2.0)));

    // Prompt-by-prompt summation oracle.
    std::mt19937_64 rng(5);
    const auto x = rep("x", gaussian(30, rng), 5), y = rep("y", gaussian(30, rng), 5);
    double total = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
        const auto bx = x.prompt_block(j), by = y.prompt_block(j);
        double s = 0.0;
        for (std::size_t k = 0; k < 5; ++k) s += (bx[k] - by[k]) * (bx[k] - by[k]);
        total += s;
    }
    CHECK(functional_distance(x, y) == doctest::Approx(std::sqrt(total)).epsilon(1e-12));

    CHECK_THROWS_AS(functional_distance(a, rep("c", {0.0, 1.0}, 2, "other")), ProvenanceError);
    CHECK_THROWS_AS(functional_distance(a, rep("c", {0.0, 1.0}, 1)), DimensionError);
}

TEST_CASE("FunctionalRepresentation validation") {
    CHECK_NOTHROW(rep("a", {1, 2, 3, 4}, 2).validate());
    auto r = rep("a", {1, 2, 3, 4}, 2);
    r.values.pop_back();
    CHECK_THROWS_AS(r.validate(), DimensionError);
    r = rep("a", {1, NAN}, 2);
    CHECK_THROWS_AS(r.validate(), DomainError);
    r = rep("a", {1, 2}, 2);
    r.t = 0;
    r.values.clear();
    CHECK_THROWS_AS(r.validate(), DomainError);
}

TEST_CASE("dna_distance") {
    DnaRecord a, b;
    a.model_id = "a";
    b.model_id = "b";
    a.projection = b.projection = ProjectionSpec{1, 4, 4, 0.5};
    a.vector = {3, 0, 0, 0};
    b.vector = {0, 4, 0, 0};
    CHECK(dna_distance(a, a) == 0.0);
    CHECK(dna_distance(a, b) == 5.0);

    std::mt19937_64 rng(8);
    for (int k = 0; k < 20; ++k) {
        a.vector = gaussian(4, rng);
        b.vector = gaussian(4, rng);
        CHECK(dna_distance(a, b) == dna_distance(b, a));
    }

    auto c = b;
    c.projection.seed = 2;
    CHECK_THROWS_AS(dna_distance(a, c), ProvenanceError);
    c = b;
    c.embedder_id = "other";
    CHECK_THROWS_AS(dna_distance(a, c), ProvenanceError);
    c = b;
    c.prompt_set_hash = "other";
    CHECK_THROWS_AS(dna_distance(a, c), ProvenanceError);
    c = b;
    c.alpha = 2.0;
    CHECK_THROWS_AS(dna_distance(a, c), ProvenanceError);
}

TEST_CASE("hoeffding planning") {
    auto p = hoeffding_sample_size(0.1, 0.05, 1.0);
    CHECK(p.t == 185);
    CHECK(hoeffding_tail(p.t, 0.1, 1.0) <= 0.05);
    CHECK(hoeffding_tail(p.t - 1, 0.1, 1.0) > 0.05);  // smallest such t
    CHECK(hoeffding_sample_size(0.1, 0.05, 2.0).t == 738);
    CHECK_THROWS_AS(hoeffding_sample_size(0.1, 2.0, 1.0), DomainError);
    CHECK_THROWS_AS(hoeffding_sample_size(0.1, 0.0, 1.0), DomainError);
    CHECK_THROWS_AS(hoeffding_sample_size(0.0, 0.5, 1.0), DomainError);

    double prev = 2.0;
    for (std::size_t t : {1, 10, 100, 1000, 10000, 100000}) {
        const double v = hoeffding_tail(t, 0.1, 1.0);
        CHECK(v <= prev);
        prev = v;
    }
    CHECK(prev < 1e-100);
    CHECK(hoeffding_tail(1, 1e-9, 1.0) == 1.0);
    CHECK_THROWS_AS(hoeffding_tail(0, 0.1, 1.0), DomainError);

    // The plan is the minimum over a brute-force scan.
    for (double eps : {0.02, 0.1, 0.3})
        for (double delta : {0.01, 0.1, 0.5})
            for (double cmax : {0.5, 1.0, 3.0}) {
                std::size_t t = 1;
                while (2.0 * std::exp(-2.0 * double(t) * eps * eps / (cmax * cmax)) > delta) ++t;
                CHECK(hoeffding_sample_size(eps, delta, cmax).t == t);
            }
}

TEST_CASE("round trip through storage precision") {
    std::mt19937_64 rng(1);
    auto v = gaussian(128, rng);
    const auto orig = v;
    round_to_storage_precision(v);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(v[i] == static_cast<double>(static_cast<float>(orig[i])));
        num += (v[i] - orig[i]) * (v[i] - orig[i]);
        den += orig[i] * orig[i];
    }
    CHECK(std::sqrt(num / den) < 1e-6);
}

TEST_CASE("upper Lipschitz bound under perturbation and the lower bound after a passed check") {
    // c1 = 1 - eps, c2 = 1 + eps with L from the JL formula; check both inequalities pair by pair.
    const double eps = 0.3;
    std::mt19937_64 rng(21);
    const std::size_t D = 2048, K = 16;
    const auto L = jl_dimension(eps, K);
    const auto spec = ProjectionSpec::standard(77, L, D);
    const auto base = rep("base", gaussian(D, rng), 64);
    std::vector<FunctionalRepresentation> reps{base};
    for (std::size_t k = 1; k < K; ++k) {
        auto r = base;
        r.model_id = "p" + std::to_string(k);
        std::normal_distribution<double> nd(0.0, 0.01 * double(k));
        for (double& v : r.values) v += nd(rng);
        reps.push_back(r);
    }
    std::vector<DnaRecord> dnas;
    for (const auto& r : reps) dnas.push_back(project_streaming(r, spec, 1.0));
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = i + 1; j < K; ++j) {
            const double dh = functional_distance(reps[i], reps[j]);
            const double dt = dna_distance(dnas[i], dnas[j]);
            CHECK(dt <= (1 + eps) * dh);
            CHECK(dh <= dt / (1 - eps));
        }
}
