#include "dna/errors.hpp"
#include "dna/routing.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace dna;

namespace {

DnaStore model_store(std::size_t n_models, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<FunctionalRepresentation> reps;
    for (std::size_t i = 0; i < n_models; ++i) {
        FunctionalRepresentation r;
        r.model_id = "model-" + std::string(1, char('a' + i));
        r.prompt_set_hash = "h";
        r.p = 8;
        r.t = 4;
        for (int k = 0; k < 32; ++k) r.values.push_back(nd(rng));
        reps.push_back(r);
    }
    return fixture::store_from_reps(reps, 6, seed + 1);
}

// Queries from two well separated clusters; model a is right on the first, b on the second.
std::vector<RoutingExample> two_clusters(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.3);
    std::vector<RoutingExample> out;
    for (std::size_t i = 0; i < n; ++i) {
        const bool first = i % 2 == 0;
        RoutingExample e;
        e.query_id = "q" + std::to_string(i);
        for (int k = 0; k < 5; ++k) e.embedding.push_back(nd(rng) + (k == 0 ? (first ? 2.0 : -2.0) : 0.0));
        e.outcomes["model-a"] = first;
        e.outcomes["model-b"] = !first;
        out.push_back(e);
    }
    return out;
}

}  // namespace

TEST_CASE("two clusters are routed correctly") {
    const auto store = model_store(2, 3);
    const auto train = two_clusters(200, 1), test = two_clusters(200, 2);
    RouterHyperparams hp;
    hp.seed = 4;
    const auto r = train_router(store, train, hp);
    CHECK(routing_accuracy(r, test) >= 0.95);
    CHECK(r.loss_history.size() == hp.epochs);
    CHECK(r.loss_history.back() < r.loss_history.front());
    CHECK_FALSE(r.diverged);
    CHECK(r.dna_provenance == dna_provenance_hash(store));

    // Seeded and reproducible.
    const auto r2 = train_router(store, train, hp);
    CHECK(r2.to_json() == r.to_json());

    // Baselines for comparison.
    const auto sb = single_best_baseline(train, test);
    CHECK(sb.accuracy == doctest::Approx(0.5));
    CHECK(random_baseline_accuracy(r.models, test) == doctest::Approx(0.5));
}

TEST_CASE("analytic gradient matches central differences") {
    const auto store = model_store(3, 7);
    auto train = two_clusters(20, 5);
    for (auto& e : train) e.outcomes["model-c"] = e.query_id.size() % 2;
    RouterHyperparams hp;
    hp.l2 = 0.1;
    hp.init_std = 0.5;
    auto r = init_router(store, train, hp);
    r.biases = {0.3, -0.2, 0.1};
    const auto g = router_loss_and_gradient(r, train);
    const double h = 1e-6;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < r.W.rows(); ++i)
        for (Eigen::Index j = 0; j < r.W.cols(); ++j) {
            auto p = r, m = r;
            p.W(i, j) += h;
            m.W(i, j) -= h;
            const double fd = (router_loss_and_gradient(p, train).loss - router_loss_and_gradient(m, train).loss) / (2 * h);
            worst = std::max(worst, std::abs(fd - g.dW(i, j)) / std::max(1e-8, std::abs(fd) + std::abs(g.dW(i, j))));
        }
    for (std::size_t k = 0; k < r.biases.size(); ++k) {
        auto p = r, m = r;
        p.biases[k] += h;
        m.biases[k] -= h;
        const double fd = (router_loss_and_gradient(p, train).loss - router_loss_and_gradient(m, train).loss) / (2 * h);
        worst = std::max(worst, std::abs(fd - g.db[k]) / std::max(1e-8, std::abs(fd) + std::abs(g.db[k])));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("loss matches a direct evaluation") {
    const auto store = model_store(2, 9);
    const auto train = two_clusters(10, 3);
    RouterHyperparams hp;
    hp.init_std = 0.3;
    hp.l2 = 0.05;
    const auto r = init_router(store, train, hp);
    double bce = 0.0;
    std::size_t cells = 0;
    for (const auto& e : train) {
        const auto s = r.scores(e.embedding);
        for (std::size_t m = 0; m < r.models.size(); ++m) {
            const double p = 1.0 / (1.0 + std::exp(-s[m]));
            const int y = e.outcomes.at(r.models[m]);
            bce -= y ? std::log(p) : std::log(1.0 - p);
            ++cells;
        }
        // Scores are DNA . W x + b, by hand.
        for (std::size_t m = 0; m < r.models.size(); ++m) {
            double v = r.biases[m];
            for (Eigen::Index i = 0; i < r.W.rows(); ++i)
                for (Eigen::Index j = 0; j < r.W.cols(); ++j) v += r.dna_index[m][i] * r.W(i, j) * e.embedding[j];
            CHECK(s[m] == doctest::Approx(v).epsilon(1e-12));
        }
    }
    const double expect = bce / double(cells) + 0.5 * hp.l2 * r.W.squaredNorm();
    CHECK(router_loss_and_gradient(r, train).loss == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("edge cases") {
    const auto store = model_store(2, 11);
    const auto train = two_clusters(30, 1);

    RouterHyperparams hp;
    hp.epochs = 0;
    const auto untrained = train_router(store, train, hp);
    CHECK(untrained.W == init_router(store, train, hp).W);
    CHECK(untrained.loss_history.empty());

    // One model: everything routes to it.
    std::vector<RoutingExample> solo = train;
    for (auto& e : solo) e.outcomes.erase("model-b");
    RouterHyperparams few;
    few.epochs = 5;
    const auto r1 = train_router(store, solo, few);
    REQUIRE(r1.models.size() == 1);
    for (const auto& e : solo) CHECK(route(r1, e.embedding) == "model-a");

    // Unknown model ids are rejected.
    auto bad = train;
    bad[0].outcomes["ghost"] = 1;
    CHECK_THROWS_AS(train_router(store, bad, few), DomainError);

    // Degenerate outcomes train without error.
    auto all_right = train;
    for (auto& e : all_right)
        for (auto& [m, y] : e.outcomes) y = 1;
    CHECK_NOTHROW(train_router(store, all_right, few));

    // Mismatched query dimensions.
    auto r = train_router(store, train, few);
    CHECK_THROWS(r.scores({1.0, 2.0}));
}

TEST_CASE("bias tracks a globally better model") {
    const auto store = model_store(2, 13);
    auto train = two_clusters(100, 6);
    for (auto& e : train) {
        e.outcomes["model-a"] = 1;
        e.outcomes["model-b"] = 0;
    }
    RouterHyperparams hp;
    hp.epochs = 50;
    const auto r = train_router(store, train, hp);
    CHECK(r.biases[0] > r.biases[1]);
    for (const auto& e : train) CHECK(route(r, e.embedding) == "model-a");
}

TEST_CASE("DNA stays frozen and the router round-trips") {
    const auto store = model_store(2, 17);
    const auto train = two_clusters(40, 2);
    RouterHyperparams hp;
    hp.epochs = 10;
    const auto init = init_router(store, train, hp);
    const auto r = train_router(store, train, hp);
    CHECK(r.dna_index == init.dna_index);
    for (const auto& v : r.dna_index) {
        double n = 0.0;
        for (double x : v) n += x * x;
        CHECK(n == doctest::Approx(1.0));
    }
    fixture::TempDir dir;
    save_router(r, dir / "router.json");
    const auto back = load_router(dir / "router.json");
    CHECK(back.W == r.W);
    CHECK(back.models == r.models);
    CHECK(back.biases == r.biases);
    CHECK(back.dna_provenance == r.dna_provenance);
    for (const auto& e : train) CHECK(route(back, e.embedding) == route(r, e.embedding));
}

TEST_CASE("ties route to the smallest id") {
    RouterModel r;
    r.models = {"a", "b"};
    r.biases = {0.0, 0.0};
    r.dna_index = {{1.0}, {1.0}};
    r.W = Matrix::Zero(1, 2);
    CHECK(route(r, {1.0, 1.0}) == "a");
}

TEST_CASE("single best baseline by brute force") {
    std::mt19937_64 rng(19);
    std::bernoulli_distribution coin(0.5);
    std::vector<RoutingExample> train, test;
    const std::vector<std::string> models{"m1", "m2", "m3", "m4"};
    for (int i = 0; i < 60; ++i) {
        RoutingExample e;
        e.query_id = std::to_string(i);
        e.embedding = {0.0};
        for (const auto& m : models) e.outcomes[m] = coin(rng) || (m == "m3" && coin(rng));
        (i < 40 ? train : test).push_back(e);
    }
    std::string best;
    double best_acc = -1;
    for (const auto& m : models) {
        double acc = 0;
        for (const auto& e : train) acc += e.outcomes.at(m);
        acc /= double(train.size());
        if (acc > best_acc) best_acc = acc, best = m;
    }
    double on_test = 0;
    for (const auto& e : test) on_test += e.outcomes.at(best);
    const auto sb = single_best_baseline(train, test);
    CHECK(sb.model_id == best);
    CHECK(sb.accuracy == doctest::Approx(on_test / double(test.size())));

    // The seeded random router averages to the analytic value.
    double mc = 0;
    for (std::uint64_t s = 0; s < 400; ++s) mc += random_router_accuracy(models, test, s) / 400.0;
    CHECK(mc == doctest::Approx(random_baseline_accuracy(models, test)).epsilon(0.03));
    CHECK(random_router_accuracy(models, test, 5) == random_router_accuracy(models, test, 5));
}

TEST_CASE("routing examples file round trip") {
    const auto ex = two_clusters(5, 8);
    fixture::TempDir dir;
    save_routing_examples(ex, dir / "ex.jsonl");
    const auto back = load_routing_examples(dir / "ex.jsonl");
    REQUIRE(back.size() == ex.size());
    for (std::size_t i = 0; i < ex.size(); ++i) {
        CHECK(back[i].query_id == ex[i].query_id);
        CHECK(back[i].embedding == ex[i].embedding);
        CHECK(back[i].outcomes == ex[i].outcomes);
    }
    RoutingExample bad;
    bad.query_id = "x";
    bad.embedding = {1.0};
    bad.outcomes["m"] = 2;
    CHECK_THROWS(bad.validate());
}
