#include "dna/routing.hpp"

#include "dna/errors.hpp"
#include "dna/hashing.hpp"
#include "dna/jsonl.hpp"
#include "dna/log.hpp"
#include "dna/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace dna {

namespace {

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

std::vector<double> prepared_query(const RouterModel& r, const std::vector<double>& x) {
    if (x.size() != r.query_dim())
        throw DimensionError("query embedding has length " + std::to_string(x.size()) + ", router expects " +
                             std::to_string(r.query_dim()));
    if (!r.hyperparams.normalize_queries) return x;
    double n = 0.0;
    for (double v : x) n += v * v;
    n = std::sqrt(n);
    if (n == 0.0) return x;
    std::vector<double> out(x);
    for (double& v : out) v /= n;
    return out;
}

Eigen::VectorXd mapped(const RouterModel& r, const std::vector<double>& x) {
    const auto q = prepared_query(r, x);
    return r.W * Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
}

double dot(const std::vector<double>& a, const Eigen::VectorXd& z) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * z[static_cast<Eigen::Index>(k)];
    return s;
}

std::size_t model_index(const RouterModel& r, const std::string& id) {
    auto it = std::lower_bound(r.models.begin(), r.models.end(), id);
    if (it == r.models.end() || *it != id) return r.models.size();
    return static_cast<std::size_t>(it - r.models.begin());
}

}  // namespace

void RoutingExample::validate() const {
    if (outcomes.empty()) throw DomainError("routing example '" + query_id + "' has no outcomes");
    if (embedding.empty()) throw DomainError("routing example '" + query_id + "' has an empty embedding");
    for (double v : embedding)
        if (!std::isfinite(v)) throw DomainError("routing example '" + query_id + "' has a non-finite embedding");
    for (const auto& [m, o] : outcomes)
        if (o != 0 && o != 1) throw DomainError("routing example '" + query_id + "': outcome for '" + m + "' is not 0/1");
}

std::vector<RoutingExample> load_routing_examples(const std::filesystem::path& path) {
    std::vector<RoutingExample> out;
    read_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
        try {
            RoutingExample ex;
            ex.query_id = j.at("query_id").get<std::string>();
            ex.embedding = j.at("embedding").get<std::vector<double>>();
            for (const auto& [m, v] : j.at("outcomes").items()) ex.outcomes[m] = v.is_boolean() ? int(v.get<bool>()) : v.get<int>();
            ex.validate();
            out.push_back(std::move(ex));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(line) + ": " + e.what(), line);
        } catch (const DomainError& e) {
            throw ParseError(path.string() + ":" + std::to_string(line) + ": " + e.what(), line);
        }
    });
    return out;
}

void save_routing_examples(const std::vector<RoutingExample>& examples, const std::filesystem::path& path) {
    std::string text;
    for (const auto& ex : examples)
        text += nlohmann::json{{"query_id", ex.query_id}, {"embedding", ex.embedding}, {"outcomes", ex.outcomes}}.dump() +
                "\n";
    write_text_file(path, text);
}

nlohmann::json RouterHyperparams::to_json() const {
    return {{"learning_rate", learning_rate}, {"epochs", epochs},     {"l2", l2},
            {"batch_size", batch_size},       {"seed", seed},         {"use_bias", use_bias},
            {"normalize_queries", normalize_queries}, {"init_std", init_std}};
}

RouterHyperparams RouterHyperparams::from_json(const nlohmann::json& j) {
    RouterHyperparams h;
    h.learning_rate = j.value("learning_rate", h.learning_rate);
    h.epochs = j.value("epochs", h.epochs);
    h.l2 = j.value("l2", h.l2);
    h.batch_size = j.value("batch_size", h.batch_size);
    h.seed = j.value("seed", h.seed);
    h.use_bias = j.value("use_bias", h.use_bias);
    h.normalize_queries = j.value("normalize_queries", h.normalize_queries);
    h.init_std = j.value("init_std", h.init_std);
    return h;
}

std::vector<double> RouterModel::scores(const std::vector<double>& query_embedding) const {
    const auto z = mapped(*this, query_embedding);
    std::vector<double> s(models.size());
    for (std::size_t m = 0; m < models.size(); ++m) s[m] = dot(dna_index[m], z) + biases[m];
    return s;
}

nlohmann::json RouterModel::to_json() const {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(W.size()));
    for (Eigen::Index r = 0; r < W.rows(); ++r)
        for (Eigen::Index c = 0; c < W.cols(); ++c) w.push_back(W(r, c));
    nlohmann::json biases_json = nlohmann::json::object();
    nlohmann::json index_json = nlohmann::json::object();
    for (std::size_t m = 0; m < models.size(); ++m) {
        biases_json[models[m]] = biases[m];
        index_json[models[m]] = dna_index[m];
    }
    return {{"W", {{"rows", W.rows()}, {"cols", W.cols()}, {"values", w}}},
            {"biases", biases_json},
            {"dna_index", index_json},
            {"hyperparams", hyperparams.to_json()},
            {"dna_provenance", dna_provenance},
            {"loss_history", loss_history}};
}

RouterModel RouterModel::from_json(const nlohmann::json& j) {
    RouterModel r;
    const auto& w = j.at("W");
    const auto rows = w.at("rows").get<Eigen::Index>();
    const auto cols = w.at("cols").get<Eigen::Index>();
    const auto values = w.at("values").get<std::vector<double>>();
    if (static_cast<std::size_t>(rows * cols) != values.size()) throw DomainError("router W has the wrong number of values");
    r.W.resize(rows, cols);
    for (Eigen::Index a = 0; a < rows; ++a)
        for (Eigen::Index b = 0; b < cols; ++b) r.W(a, b) = values[static_cast<std::size_t>(a * cols + b)];
    for (const auto& [m, v] : j.at("dna_index").items()) {
        r.models.push_back(m);
        auto vec = v.get<std::vector<double>>();
        if (static_cast<Eigen::Index>(vec.size()) != rows) throw DimensionError("router DNA for '" + m + "' has the wrong length");
        r.dna_index.push_back(std::move(vec));
        r.biases.push_back(j.at("biases").value(m, 0.0));
    }
    // nlohmann objects iterate in key order, so models are already sorted.
    r.hyperparams = RouterHyperparams::from_json(j.value("hyperparams", nlohmann::json::object()));
    r.dna_provenance = j.value("dna_provenance", "");
    r.loss_history = j.value("loss_history", std::vector<double>{});
    for (Eigen::Index k = 0; k < r.W.size(); ++k)
        if (!std::isfinite(r.W.data()[k])) throw DomainError("router W has non-finite entries");
    return r;
}

void save_router(const RouterModel& router, const std::filesystem::path& path) {
    write_text_file(path, router.to_json().dump(2) + "\n");
}

RouterModel load_router(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    try {
        return RouterModel::from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what(), 0);
    }
}

std::string dna_provenance_hash(const DnaStore& store) {
    const auto& mf = store.manifest();
    std::string blob = mf.projection.fingerprint() + "|" + std::to_string(mf.alpha) + "|" + mf.embedder_id + "|" +
                       mf.prompt_set_hash;
    std::vector<const DnaRecord*> recs;
    for (const auto& r : store.records()) recs.push_back(&r);
    std::sort(recs.begin(), recs.end(), [](auto a, auto b) { return a->model_id < b->model_id; });
    for (const auto* r : recs) {
        blob += "|" + r->model_id + ":";
        for (double v : r->vector) {
            const float f = static_cast<float>(v);
            blob.append(reinterpret_cast<const char*>(&f), sizeof f);
        }
    }
    return sha256_hex(blob).substr(0, 16);
}

RouterModel init_router(const DnaStore& store, const std::vector<RoutingExample>& train, const RouterHyperparams& hp) {
    if (train.empty()) throw DomainError("router training set is empty");
    if (hp.batch_size == 0) throw DomainError("batch size must be positive");
    if (!(hp.learning_rate > 0.0) || !(hp.l2 >= 0.0) || !(hp.init_std >= 0.0))
        throw DomainError("learning rate must be positive and l2, init_std non-negative");
    const std::size_t q = train.front().embedding.size();
    std::set<std::string> ids;
    for (const auto& ex : train) {
        ex.validate();
        if (ex.embedding.size() != q) throw DimensionError("query embeddings differ in length");
        for (const auto& [m, o] : ex.outcomes) ids.insert(m);
    }
    RouterModel r;
    r.hyperparams = hp;
    r.dna_provenance = dna_provenance_hash(store);
    std::size_t L = 0;
    for (const auto& id : ids) {
        const auto* rec = store.find(id);
        if (!rec) throw DomainError("model '" + id + "' in the routing data has no DNA in the store");
        std::vector<double> v = rec->vector;
        double n = 0.0;
        for (double x : v) n += x * x;
        n = std::sqrt(n);
        if (n > 0.0)
            for (double& x : v) x /= n;
        L = v.size();
        r.models.push_back(id);
        r.dna_index.push_back(std::move(v));
        r.biases.push_back(0.0);
    }
    std::mt19937_64 rng(hp.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    r.W.resize(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(q));
    for (Eigen::Index a = 0; a < r.W.rows(); ++a)
        for (Eigen::Index b = 0; b < r.W.cols(); ++b) r.W(a, b) = hp.init_std * normal(rng);
    return r;
}

RouterGradient router_loss_and_gradient(const RouterModel& router, const std::vector<RoutingExample>& batch) {
    RouterGradient g;
    g.dW = Matrix::Zero(router.W.rows(), router.W.cols());
    g.db.assign(router.models.size(), 0.0);
    std::size_t cells = 0;
    double loss = 0.0;
    for (const auto& ex : batch) {
        const auto x = prepared_query(router, ex.embedding);
        const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
        const Eigen::VectorXd z = router.W * xv;
        Eigen::VectorXd u = Eigen::VectorXd::Zero(router.W.rows());  // sum over models of (p - y) dna_m
        for (const auto& [id, y] : ex.outcomes) {
            const auto m = model_index(router, id);
            if (m == router.models.size()) throw DomainError("model '" + id + "' is not known to the router");
            const double s = dot(router.dna_index[m], z) + (router.hyperparams.use_bias ? router.biases[m] : 0.0);
            // BCE(sigma(s), y) = softplus(s) - y s
            loss += softplus(s) - y * s;
            const double r = sigmoid(s) - y;
            for (std::size_t k = 0; k < router.dna_index[m].size(); ++k)
                u[static_cast<Eigen::Index>(k)] += r * router.dna_index[m][k];
            if (router.hyperparams.use_bias) g.db[m] += r;
            ++cells;
        }
        g.dW.noalias() += u * xv.transpose();
    }
    if (cells == 0) throw DomainError("batch has no outcomes");
    const double inv = 1.0 / static_cast<double>(cells);
    g.dW *= inv;
    for (double& v : g.db) v *= inv;
    const double l2 = router.hyperparams.l2;
    g.loss = loss * inv + 0.5 * l2 * router.W.squaredNorm();
    g.dW += l2 * router.W;
    return g;
}

RouterModel train_router(const DnaStore& store, const std::vector<RoutingExample>& train, const RouterHyperparams& hp) {
    RouterModel r = init_router(store, train, hp);
    std::size_t pos = 0, total = 0;
    for (const auto& ex : train)
        for (const auto& [m, o] : ex.outcomes) {
            pos += static_cast<std::size_t>(o);
            ++total;
        }
    if (pos == 0 || pos == total)
        log::warn("routing outcomes are all " + std::string(pos == 0 ? "0" : "1") + "; the router cannot learn a preference");

    std::mt19937_64 rng(hp.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    double prev = router_loss_and_gradient(r, train).loss;
    for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
            std::vector<RoutingExample> batch;
            for (std::size_t k = start; k < std::min(order.size(), start + hp.batch_size); ++k)
                batch.push_back(train[order[k]]);
            const auto g = router_loss_and_gradient(r, batch);
            r.W -= hp.learning_rate * g.dW;
            for (std::size_t m = 0; m < r.biases.size(); ++m) r.biases[m] -= hp.learning_rate * g.db[m];
        }
        const double loss = router_loss_and_gradient(r, train).loss;
        if (!std::isfinite(loss)) throw DomainError("router training diverged (non-finite loss)");
        if (loss > prev + 1e-12 && !r.diverged) {
            r.diverged = true;
            log::warn("router loss rose at epoch " + std::to_string(epoch + 1) + "; consider a smaller learning rate");
        }
        r.loss_history.push_back(loss);
        prev = loss;
    }
    return r;
}

std::string route(const RouterModel& router, const std::vector<double>& query_embedding) {
    if (router.models.empty()) throw DomainError("router has no models");
    const auto s = router.scores(query_embedding);
    std::size_t best = 0;
    for (std::size_t m = 1; m < s.size(); ++m)
        if (s[m] > s[best]) best = m;  // models are sorted, so ties keep the smallest id
    return router.models[best];
}

double routing_accuracy(const RouterModel& router, const std::vector<RoutingExample>& test) {
    if (test.empty()) throw DomainError("routing test set is empty");
    std::vector<int> hit(test.size(), 0);
    parallel_for(test.size(), default_workers(), [&](std::size_t i) {
        const auto chosen = route(router, test[i].embedding);
        auto it = test[i].outcomes.find(chosen);
        hit[i] = it != test[i].outcomes.end() && it->second == 1;
    });
    return static_cast<double>(std::accumulate(hit.begin(), hit.end(), 0)) / static_cast<double>(test.size());
}

SingleBest single_best_baseline(const std::vector<RoutingExample>& train, const std::vector<RoutingExample>& test) {
    if (train.empty() || test.empty()) throw DomainError("single-best baseline needs non-empty train and test sets");
    std::map<std::string, double> correct;
    for (const auto& ex : train)
        for (const auto& [m, o] : ex.outcomes) correct[m] += o;
    SingleBest best;
    double best_rate = -1.0;
    for (const auto& [m, c] : correct) {
        // Missing outcomes count as wrong, so the denominator is the whole train set.
        const double rate = c / static_cast<double>(train.size());
        if (rate > best_rate) {
            best_rate = rate;
            best.model_id = m;
        }
    }
    double hits = 0.0;
    for (const auto& ex : test) {
        auto it = ex.outcomes.find(best.model_id);
        if (it != ex.outcomes.end()) hits += it->second;
    }
    best.accuracy = hits / static_cast<double>(test.size());
    return best;
}

double random_baseline_accuracy(const std::vector<std::string>& models, const std::vector<RoutingExample>& test) {
    if (models.empty() || test.empty()) throw DomainError("random baseline needs models and a test set");
    double total = 0.0;
    for (const auto& ex : test) {
        double c = 0.0;
        for (const auto& m : models) {
            auto it = ex.outcomes.find(m);
            if (it != ex.outcomes.end()) c += it->second;
        }
        total += c / static_cast<double>(models.size());
    }
    return total / static_cast<double>(test.size());
}

double random_router_accuracy(const std::vector<std::string>& models, const std::vector<RoutingExample>& test,
                              std::uint64_t seed) {
    if (models.empty() || test.empty()) throw DomainError("random router needs models and a test set");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, models.size() - 1);
    double hits = 0.0;
    for (const auto& ex : test) {
        auto it = ex.outcomes.find(models[pick(rng)]);
        if (it != ex.outcomes.end()) hits += it->second;
    }
    return hits / static_cast<double>(test.size());
}

}  // namespace dna
