#include "cli.hpp"

#include "dna/analysis.hpp"
#include "dna/csv.hpp"
#include "dna/errors.hpp"
#include "dna/extraction.hpp"
#include "dna/jsonl.hpp"
#include "dna/log.hpp"
#include "dna/mock_server.hpp"
#include "dna/phylo.hpp"
#include "dna/routing.hpp"
#include "dna/svm.hpp"
#include "dna/synth.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <thread>

namespace dna::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted.store(true); }

// Numbers shown to the user: 12 significant digits in both output modes, so
// text and JSON agree exactly.
json num(double v) {
    if (!std::isfinite(v)) return nullptr;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::stod(buf);
}

json nums(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

struct Globals {
    std::uint64_t seed = 0;
    std::string cache_dir = ".dna-cache";
    std::string log_level = "warning";
    std::string format = "text";
};

// Flat "key = value" rendering of a result document.
void render_text(const json& j, const std::string& prefix, std::ostream& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) render_text(v, prefix.empty() ? k : prefix + "." + k, out);
        return;
    }
    if (j.is_array() && !j.empty() && (j.front().is_object() || j.front().is_array())) {
        for (std::size_t i = 0; i < j.size(); ++i) render_text(j[i], prefix + "[" + std::to_string(i) + "]", out);
        return;
    }
    out << prefix << " = " << (j.is_string() ? j.get<std::string>() : j.dump()) << '\n';
}

struct Command {
    std::string name;
    json config;
    std::function<json()> run;
    // Optional raw artifact printed in text mode instead of the key/value dump
    // (Newick, CSV). Filled by run().
    std::optional<std::string> text_artifact;
};

void emit(const Globals& g, const Command& cmd, const json& result, std::ostream& out) {
    json cfg = cmd.config;
    cfg["seed"] = g.seed;
    cfg["cache_dir"] = g.cache_dir;
    cfg["log_level"] = g.log_level;
    cfg["format"] = g.format;
    if (g.format == "json") {
        out << json{{"command", cmd.name}, {"version", DNA_VERSION}, {"config", cfg}, {"result", result}}.dump(2) << '\n';
        return;
    }
    out << "# dna " << DNA_VERSION << " " << cmd.name << " " << cfg.dump() << '\n';
    if (cmd.text_artifact) {
        out << *cmd.text_artifact;
        return;
    }
    render_text(result, "", out);
}

std::vector<std::vector<double>> store_vectors(const DnaStore& store, std::vector<std::string>& labels) {
    std::vector<const DnaRecord*> recs;
    for (const auto& r : store.records()) recs.push_back(&r);
    std::sort(recs.begin(), recs.end(), [](auto a, auto b) { return a->model_id < b->model_id; });
    std::vector<std::vector<double>> v;
    labels.clear();
    for (const auto* r : recs) {
        labels.push_back(r->model_id);
        v.push_back(r->vector);
    }
    return v;
}

std::map<std::string, std::string> load_group_map(const fs::path& path) {
    const auto rows = parse_csv(read_text_file(path));
    std::map<std::string, std::string> out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (r == 0 && rows[r].size() >= 1 && rows[r][0] == "model_id") continue;
        if (rows[r].size() != 2)
            throw ParseError(path.string() + ": row " + std::to_string(r + 1) + " needs model_id,group", r + 1);
        out[rows[r][0]] = rows[r][1];
    }
    return out;
}

json metrics_json(const BinaryMetrics& m) {
    return {{"precision", num(m.precision)},
            {"recall", num(m.recall)},
            {"f1", num(m.f1)},
            {"auc", m.auc ? num(*m.auc) : json(nullptr)}};
}

struct RelationEval {
    json svm;
    json random;
    json greedy;
    std::size_t n = 0;
};

RelationEval evaluate_relations(const DnaStore& store, const SvmModel& model, const std::vector<RelationPair>& pairs,
                                std::uint64_t seed) {
    std::vector<double> svm_scores, rnd_scores, greedy_scores;
    std::vector<int> svm_pred, rnd_pred, greedy_pred, truth;
    bool greedy_ok = true;
    for (const auto& p : pairs) {
        const auto* a = store.find(p.model_a);
        const auto* b = store.find(p.model_b);
        if (!a || !b) throw DomainError("pair (" + p.model_a + ", " + p.model_b + ") names a model missing from the store");
        const auto pred = svm_predict(model, pair_features(*a, *b));
        svm_scores.push_back(pred.score);
        svm_pred.push_back(pred.label == 1);
        const int r = random_baseline(p, seed) == Relation::Correlated;
        rnd_scores.push_back(r);
        rnd_pred.push_back(r);
        if (p.org_a.empty() || p.org_b.empty()) greedy_ok = false;
        if (greedy_ok) {
            const int gr = greedy_baseline(p) == Relation::Correlated;
            greedy_scores.push_back(gr);
            greedy_pred.push_back(gr);
        }
        truth.push_back(p.label == Relation::Correlated);
    }
    RelationEval e;
    e.n = pairs.size();
    e.svm = metrics_json(evaluate_binary(svm_scores, svm_pred, truth));
    e.random = metrics_json(evaluate_binary(rnd_scores, rnd_pred, truth));
    e.greedy = greedy_ok ? metrics_json(evaluate_binary(greedy_scores, greedy_pred, truth)) : json(nullptr);
    return e;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Behavioural DNA extraction and analysis for text-generation models", "dna"};
    app.require_subcommand(1);
    app.set_version_flag("--version", DNA_VERSION);
    app.set_config("--config", "", "TOML config file (flags > env > config)");

    Globals g;
    app.add_option("--seed", g.seed, "Global seed")->capture_default_str();
    app.add_option("--cache-dir", g.cache_dir, "Response/embedding cache directory")
        ->envname("DNA_CACHE_DIR")
        ->capture_default_str();
    app.add_option("--log-level", g.log_level, "debug|info|warning|error")
        ->check(CLI::IsMember({"debug", "info", "warning", "error"}))
        ->capture_default_str();
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"text", "json"}))->capture_default_str();

    Command cmd;

    // plan
    double c1 = 0.7, c2 = 1.3;
    std::size_t K = 0;
    std::optional<double> h_eps, h_delta;
    double h_cmax = 1.0;
    auto* plan = app.add_subcommand("plan", "Projection and sample-size planning");
    plan->add_option("--c1", c1, "Lower bi-Lipschitz constant")->capture_default_str();
    plan->add_option("--c2", c2, "Upper bi-Lipschitz constant")->capture_default_str();
    plan->add_option("--k", K, "Number of models")->required();
    plan->add_option("--hoeffding-eps", h_eps, "Distance accuracy for the prompt-count plan");
    plan->add_option("--delta", h_delta, "Failure probability for the prompt-count plan");
    plan->add_option("--cmax", h_cmax, "Range bound of a single-prompt distance")->capture_default_str();
    plan->callback([&] {
        cmd.name = "plan";
        cmd.config = {{"c1", c1}, {"c2", c2}, {"k", K}};
        if (h_eps) cmd.config["hoeffding_eps"] = *h_eps;
        if (h_delta) cmd.config["delta"] = *h_delta;
        cmd.run = [&]() -> json {
            const auto p = plan_from_constants(c1, c2, K);
            json r{{"epsilon", num(p.epsilon)}, {"alpha", num(p.alpha)}, {"L", p.L}, {"K", p.K}};
            if (h_eps || h_delta) {
                const auto h = hoeffding_sample_size(h_eps.value_or(0.05), h_delta.value_or(0.05), h_cmax);
                r["prompts_t"] = h.t;
                r["hoeffding_tail"] = num(hoeffding_tail(h.t, h.epsilon, h.c_max));
            }
            return r;
        };
    });

    // extract
    std::string roster_path, prompts_path, out_dir, embedder_id, embedder_url, created_at;
    std::vector<std::string> datasets;
    std::size_t per_dataset = 0, dim = 128, parallel_models = 2, max_in_flight = 8;
    double alpha = 1.0;
    bool offline = false;
    auto* extract = app.add_subcommand("extract", "Extract DNA for every roster model into a store");
    extract->add_option("--roster", roster_path, "Roster TOML")->required()->check(CLI::ExistingFile);
    extract->add_option("--prompts", prompts_path, "Prompt set JSONL {id,text}");
    extract->add_option("--dataset", datasets, "Dataset JSONL to sample prompts from (repeatable)");
    extract->add_option("--per-dataset", per_dataset, "Prompts sampled per dataset");
    extract->add_option("--embedder-id", embedder_id, "Embedding model id (overrides the roster)");
    extract->add_option("--embedder-url", embedder_url, "Embedding endpoint base URL (overrides the roster)");
    extract->add_option("--dim", dim, "DNA dimension L")->capture_default_str();
    extract->add_option("--alpha", alpha, "Projection scale")->capture_default_str();
    extract->add_option("--out", out_dir, "Store directory (appended to if it exists)")->required();
    extract->add_option("--parallel-models", parallel_models, "Models extracted concurrently")->capture_default_str();
    extract->add_option("--max-in-flight", max_in_flight, "Concurrent requests per model")->capture_default_str();
    extract->add_option("--created-at", created_at, "Timestamp recorded on new records");
    extract->add_flag("--offline", offline, "Fail on cache misses instead of calling endpoints");
    extract->callback([&] {
        cmd.name = "extract";
        cmd.config = {{"roster", roster_path}, {"prompts", prompts_path},   {"datasets", datasets},
                      {"per_dataset", per_dataset}, {"embedder_id", embedder_id}, {"dim", dim},
                      {"alpha", alpha},        {"out", out_dir},            {"parallel_models", parallel_models},
                      {"max_in_flight", max_in_flight}, {"offline", offline}};
        cmd.run = [&]() -> json {
            if (prompts_path.empty() == datasets.empty())
                throw CLI::ValidationError("--prompts/--dataset", "give exactly one of --prompts or --dataset");
            auto roster = load_roster(roster_path);
            if (roster.models.empty()) throw DomainError("roster " + roster_path + " lists no models");
            ModelEndpoint embedder;
            if (roster.embedder) embedder = *roster.embedder;
            if (!embedder_id.empty()) embedder.model_id = embedder_id;
            if (!embedder_url.empty()) embedder.base_url = embedder_url;
            if (embedder.model_id.empty() || embedder.base_url.empty())
                throw DomainError("no embedder: add an [embedder] table to the roster or pass --embedder-id/--embedder-url");
            PromptSet prompts;
            if (!prompts_path.empty()) {
                prompts = load_prompts(prompts_path, g.seed);
            } else {
                if (per_dataset == 0) throw CLI::ValidationError("--per-dataset", "must be positive with --dataset");
                std::vector<DatasetSource> sources;
                for (const auto& d : datasets) sources.push_back(DatasetSource{d, fs::path(d).stem().string()});
                prompts = sample_prompts(sources, per_dataset, g.seed);
            }
            IoOptions io_opts;
            io_opts.cache_dir = g.cache_dir;
            io_opts.max_in_flight = max_in_flight;
            io_opts.offline = offline;
            ModelIo io(io_opts);
            FleetOptions fo;
            fo.seed = g.seed;
            fo.dim = dim;
            fo.alpha = alpha;
            fo.parallel_models = parallel_models;
            if (!created_at.empty()) fo.created_at = created_at;
            std::optional<DnaStore> existing;
            if (fs::exists(fs::path(out_dir) / "manifest.json")) existing = load_store(out_dir);
            auto result = extract_fleet(io, roster.models, prompts, embedder, fo, existing);
            json failures = json::array();
            for (const auto& f : result.failures) {
                failures.push_back({{"model_id", f.model_id}, {"reason", f.reason}});
                log::warn("model '" + f.model_id + "' failed: " + f.reason);
            }
            if (result.store.size() == 0) throw DomainError("no model was extracted successfully");
            save_store(result.store, out_dir);
            const auto& mf = result.store.manifest();
            return {{"store", out_dir},
                    {"prompt_set_hash", prompts.hash},
                    {"prompts", prompts.size()},
                    {"projection",
                     {{"seed", mf.projection.seed}, {"L", mf.projection.L}, {"D", mf.projection.D}}},
                    {"extracted", result.extracted},
                    {"skipped", result.skipped},
                    {"failures", failures},
                    {"records", result.store.size()},
                    {"http_calls", io.http_calls()}};
        };
    });

    // distances
    std::string dna_dir, out_path;
    auto* distances = app.add_subcommand("distances", "Pairwise DNA distance matrix as CSV");
    distances->add_option("--dna", dna_dir, "Store directory")->required();
    distances->add_option("--out", out_path, "CSV output path (stdout if omitted)");
    distances->callback([&] {
        cmd.name = "distances";
        cmd.config = {{"dna", dna_dir}, {"out", out_path}};
        cmd.run = [&]() -> json {
            const auto d = distance_matrix(load_store(dna_dir));
            const auto csv = distance_matrix_to_csv(d);
            if (!out_path.empty())
                save_distance_matrix(d, out_path);
            else
                cmd.text_artifact = csv;
            json rows = json::array();
            for (Eigen::Index i = 0; i < d.m.rows(); ++i) {
                json row = json::array();
                for (Eigen::Index j = 0; j < d.m.cols(); ++j) row.push_back(num(d.m(i, j)));
                rows.push_back(row);
            }
            json r{{"labels", d.labels}, {"n", d.size()}};
            if (out_path.empty())
                r["matrix"] = rows;
            else
                r["out"] = out_path;
            return r;
        };
    });

    // mantel
    std::string mat_a, mat_b;
    std::size_t perms = 9999;
    auto* mantel = app.add_subcommand("mantel", "Mantel permutation test between two distance matrices");
    mantel->add_option("--a", mat_a, "First distance matrix CSV")->required();
    mantel->add_option("--b", mat_b, "Second distance matrix CSV")->required();
    mantel->add_option("--perms", perms, "Permutations")->capture_default_str();
    mantel->callback([&] {
        cmd.name = "mantel";
        cmd.config = {{"a", mat_a}, {"b", mat_b}, {"perms", perms}};
        cmd.run = [&]() -> json {
            const auto a = load_distance_matrix(mat_a);
            auto b = load_distance_matrix(mat_b);
            if (a.labels != b.labels) {
                // Same label set in another order: realign b to a.
                if (std::set<std::string>(a.labels.begin(), a.labels.end()) !=
                    std::set<std::string>(b.labels.begin(), b.labels.end()))
                    throw DomainError("distance matrices have different labels");
                DistanceMatrix r{a.labels, Matrix(a.size(), a.size())};
                for (std::size_t i = 0; i < a.size(); ++i)
                    for (std::size_t j = 0; j < a.size(); ++j)
                        r.m(i, j) = b.m(b.index_of(a.labels[i]), b.index_of(a.labels[j]));
                b = std::move(r);
            }
            const auto m = mantel_test(a, b, perms, g.seed);
            return {{"r", num(m.r)}, {"p_value", num(m.p_value)}, {"permutations", m.permutations}, {"n", a.size()}};
        };
    });

    // relate
    std::string pairs_path, model_path;
    double svm_c = 1.0, train_fraction = 0.8;
    std::string gamma_str = "scale";
    auto* relate = app.add_subcommand("relate", "Relation detection between model pairs");
    relate->require_subcommand(1);
    auto* relate_train = relate->add_subcommand("train", "Train the RBF-SVM on a stratified split and report test metrics");
    relate_train->add_option("--dna", dna_dir, "Store directory")->required();
    relate_train->add_option("--pairs", pairs_path, "Relations CSV model_a,model_b,org_a,org_b,label")->required();
    relate_train->add_option("--c", svm_c, "Soft-margin C")->capture_default_str();
    relate_train->add_option("--gamma", gamma_str, "RBF gamma or 'scale'")->capture_default_str();
    relate_train->add_option("--train-fraction", train_fraction, "Fraction of each class used for training")
        ->capture_default_str();
    relate_train->add_option("--out", model_path, "Write the trained model JSON here");
    auto* relate_eval = relate->add_subcommand("eval", "Evaluate a trained model on labelled pairs");
    relate_eval->add_option("--dna", dna_dir, "Store directory")->required();
    relate_eval->add_option("--pairs", pairs_path, "Relations CSV")->required();
    relate_eval->add_option("--model", model_path, "Model JSON from relate train")->required();
    relate_train->callback([&] {
        cmd.name = "relate train";
        cmd.config = {{"dna", dna_dir}, {"pairs", pairs_path}, {"c", svm_c}, {"gamma", gamma_str},
                      {"train_fraction", train_fraction}, {"out", model_path}};
        cmd.run = [&]() -> json {
            const auto store = load_store(dna_dir);
            auto pairs = load_relation_pairs(pairs_path);
            const bool has_neg = std::any_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.label == Relation::Independent; });
            if (!has_neg) {
                std::map<std::string, std::string> org;
                for (const auto& p : pairs) {
                    org[p.model_a] = p.org_a;
                    org[p.model_b] = p.org_b;
                }
                std::vector<std::string> models, orgs;
                for (const auto& r : store.records()) {
                    models.push_back(r.model_id);
                    orgs.push_back(org.count(r.model_id) ? org[r.model_id] : "");
                }
                pairs = add_negative_pairs(pairs, models, orgs, g.seed);
                log::info("sampled " + std::to_string(pairs.size() / 2) + " independent pairs");
            }
            const auto split = stratified_split(pairs, train_fraction, g.seed);
            std::vector<std::vector<double>> X;
            std::vector<int> y;
            for (const auto& p : split.train) {
                const auto* a = store.find(p.model_a);
                const auto* b = store.find(p.model_b);
                if (!a || !b) throw DomainError("pair (" + p.model_a + ", " + p.model_b + ") names a model missing from the store");
                X.push_back(pair_features(*a, *b));
                y.push_back(p.label == Relation::Correlated ? 1 : -1);
            }
            SvmParams sp;
            sp.C = svm_c;
            sp.seed = g.seed;
            if (gamma_str != "scale") sp.gamma = std::stod(gamma_str);
            const auto model = svm_train(X, y, sp);
            if (!model.converged) log::warn("SMO stopped at the iteration limit before reaching tolerance");
            if (!model_path.empty())
                write_text_file(model_path, json{{"svm", model.to_json()}, {"dna_store", dna_dir}}.dump(2) + "\n");
            const auto e = evaluate_relations(store, model, split.test, g.seed);
            return {{"train_pairs", split.train.size()},
                    {"test_pairs", split.test.size()},
                    {"gamma", num(model.gamma)},
                    {"support_vectors", model.support_vectors.size()},
                    {"svm", e.svm},
                    {"random", e.random},
                    {"greedy", e.greedy}};
        };
    });
    relate_eval->callback([&] {
        cmd.name = "relate eval";
        cmd.config = {{"dna", dna_dir}, {"pairs", pairs_path}, {"model", model_path}};
        cmd.run = [&]() -> json {
            const auto store = load_store(dna_dir);
            const auto pairs = load_relation_pairs(pairs_path);
            json mj;
            try {
                mj = json::parse(read_text_file(model_path));
            } catch (const json::exception& e) {
                throw ParseError(model_path + ": " + e.what(), 0);
            }
            const auto model = SvmModel::from_json(mj.contains("svm") ? mj.at("svm") : mj);
            const auto e = evaluate_relations(store, model, pairs, g.seed);
            return {{"pairs", e.n}, {"svm", e.svm}, {"random", e.random}, {"greedy", e.greedy}};
        };
    });

    // tree
    std::string group_by;
    bool raw_lengths = false, unrooted_out = false;
    auto* tree = app.add_subcommand("tree", "Neighbor-Joining tree with midpoint rooting, as Newick");
    tree->add_option("--dna", dna_dir, "Store directory")->required();
    tree->add_option("--group-by", group_by, "CSV model_id,group: build the tree over group centroids");
    tree->add_option("--out", out_path, "Newick output path (stdout if omitted)");
    tree->add_flag("--raw-lengths", raw_lengths, "Write raw (possibly negative) branch lengths");
    tree->add_flag("--unrooted", unrooted_out, "Skip midpoint rooting");
    tree->callback([&] {
        cmd.name = "tree";
        cmd.config = {{"dna", dna_dir}, {"group_by", group_by}, {"out", out_path}, {"raw_lengths", raw_lengths},
                      {"unrooted", unrooted_out}};
        cmd.run = [&]() -> json {
            const auto store = load_store(dna_dir);
            std::vector<std::string> labels;
            auto vectors = store_vectors(store, labels);
            json meta{{"leaves", "models"}};
            if (!group_by.empty()) {
                const auto gm = load_group_map(group_by);
                std::vector<std::string> groups;
                for (const auto& l : labels) {
                    auto it = gm.find(l);
                    if (it == gm.end()) throw DomainError("model '" + l + "' has no group in " + group_by);
                    groups.push_back(it->second);
                }
                auto [glabels, centroids] = group_centroids(labels, vectors, groups);
                labels = std::move(glabels);
                vectors = std::move(centroids);
                meta = {{"leaves", "groups"}, {"aggregation", "centroid"}};
            }
            if (labels.size() < 2) throw DomainError("a tree needs at least two leaves");
            auto t = neighbor_joining(distance_matrix(labels, vectors));
            if (!unrooted_out) t = midpoint_root(t);
            NewickOptions no;
            no.raw_lengths = raw_lengths;
            const auto nwk = to_newick(t, no);
            if (!out_path.empty())
                write_text_file(out_path, nwk + "\n");
            else
                cmd.text_artifact = nwk + "\n";
            meta["n_leaves"] = labels.size();
            meta["rooted"] = t.rooted();
            if (!out_path.empty()) meta["out"] = out_path;
            else meta["newick"] = nwk;
            return meta;
        };
    });

    // route
    std::string data_path, router_path, train_path;
    RouterHyperparams hp;
    bool no_bias = false;
    auto* route_cmd = app.add_subcommand("route", "Frozen-DNA model routing");
    route_cmd->require_subcommand(1);
    auto* route_train = route_cmd->add_subcommand("train", "Train a router");
    route_train->add_option("--dna", dna_dir, "Store directory")->required();
    route_train->add_option("--data", data_path, "Routing JSONL {query_id,embedding,outcomes}")->required();
    route_train->add_option("--out", router_path, "Router JSON output")->required();
    route_train->add_option("--lr", hp.learning_rate, "Learning rate")->capture_default_str();
    route_train->add_option("--epochs", hp.epochs, "Epochs")->capture_default_str();
    route_train->add_option("--l2", hp.l2, "L2 penalty on W")->capture_default_str();
    route_train->add_option("--batch", hp.batch_size, "Mini-batch size (queries)")->capture_default_str();
    route_train->add_flag("--no-bias", no_bias, "Drop the per-model bias");
    route_train->add_flag("--normalize-queries", hp.normalize_queries, "Unit-normalise query embeddings");
    auto* route_eval = route_cmd->add_subcommand("eval", "Evaluate a router against baselines");
    route_eval->add_option("--router", router_path, "Router JSON")->required();
    route_eval->add_option("--data", data_path, "Test routing JSONL")->required();
    route_eval->add_option("--train", train_path, "Train JSONL for the single-best baseline (defaults to the test set)");
    route_train->callback([&] {
        cmd.name = "route train";
        hp.seed = g.seed;
        hp.use_bias = !no_bias;
        cmd.config = {{"dna", dna_dir}, {"data", data_path}, {"out", router_path}, {"hyperparams", hp.to_json()}};
        cmd.run = [&]() -> json {
            const auto store = load_store(dna_dir);
            const auto train = load_routing_examples(data_path);
            const auto r = train_router(store, train, hp);
            save_router(r, router_path);
            return {{"router", router_path},
                    {"models", r.models},
                    {"train_queries", train.size()},
                    {"final_loss", r.loss_history.empty() ? json(nullptr) : num(r.loss_history.back())},
                    {"monotone_loss", !r.diverged},
                    {"train_accuracy", num(routing_accuracy(r, train))}};
        };
    });
    route_eval->callback([&] {
        cmd.name = "route eval";
        cmd.config = {{"router", router_path}, {"data", data_path}, {"train", train_path}};
        cmd.run = [&]() -> json {
            const auto r = load_router(router_path);
            const auto test = load_routing_examples(data_path);
            const auto train = train_path.empty() ? test : load_routing_examples(train_path);
            const auto sb = single_best_baseline(train, test);
            return {{"queries", test.size()},
                    {"accuracy", num(routing_accuracy(r, test))},
                    {"single_best", {{"model_id", sb.model_id}, {"accuracy", num(sb.accuracy)}}},
                    {"random", num(random_baseline_accuracy(r.models, test))}};
        };
    });

    // synth
    auto* synth = app.add_subcommand("synth", "Synthetic oracle experiments and mock endpoints");
    synth->require_subcommand(1);
    std::size_t s_k = 64, s_dim = 4096, s_seeds = 20, s_L = 0;
    double s_eps = 0.3;
    auto* distortion = synth->add_subcommand("distortion", "Projection distortion over seeds");
    distortion->add_option("--k", s_k, "Points")->capture_default_str();
    distortion->add_option("--dim", s_dim, "Source dimension D")->capture_default_str();
    distortion->add_option("--eps", s_eps, "Distortion epsilon")->capture_default_str();
    distortion->add_option("--seeds", s_seeds, "Number of seeds")->capture_default_str();
    distortion->add_option("--L", s_L, "Target dimension (default: JL bound)");
    distortion->callback([&] {
        cmd.name = "synth distortion";
        cmd.config = {{"k", s_k}, {"dim", s_dim}, {"eps", s_eps}, {"seeds", s_seeds}, {"L", s_L}};
        cmd.run = [&]() -> json {
            const auto ex = run_distortion_experiment(s_k, s_dim, s_eps, s_seeds, g.seed, s_L);
            return {{"L", ex.L},
                    {"successes", ex.successes},
                    {"seeds", s_seeds},
                    {"success_rate", num(static_cast<double>(ex.successes) / static_cast<double>(s_seeds))},
                    {"success_ci95", {num(ex.success_interval.lo), num(ex.success_interval.hi)}},
                    {"violations_per_seed", ex.violations_per_seed},
                    {"min_ratio_per_seed", nums(ex.min_ratio_per_seed)},
                    {"max_ratio_per_seed", nums(ex.max_ratio_per_seed)}};
        };
    });
    std::string script_path;
    int port = 0;
    auto* mock = synth->add_subcommand("mock", "Serve a scripted OpenAI-compatible endpoint until interrupted");
    mock->add_option("--script", script_path, "Script JSON")->required();
    mock->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();
    mock->callback([&] {
        cmd.name = "synth mock";
        cmd.config = {{"script", script_path}, {"port", port}};
        cmd.run = [&]() -> json {
            json sj;
            try {
                sj = json::parse(read_text_file(script_path));
            } catch (const json::exception& e) {
                throw ParseError(script_path + ": " + e.what(), 0);
            }
            MockServer server(MockScript::from_json(sj), port);
            // The address is announced on stderr right away; stdout carries the
            // summary once the server stops.
            err << "serving " << server.base_url() << std::endl;
            g_interrupted.store(false);
            auto prev_int = std::signal(SIGINT, on_signal);
            auto prev_term = std::signal(SIGTERM, on_signal);
            while (!g_interrupted.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
            server.stop();
            std::signal(SIGINT, prev_int);
            std::signal(SIGTERM, prev_term);
            return {{"base_url", server.base_url()}, {"requests", server.request_log().size()}};
        };
    });

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    const std::map<std::string, log::Level> levels{
        {"debug", log::Level::Debug}, {"info", log::Level::Info}, {"warning", log::Level::Warn}, {"error", log::Level::Error}};
    log::set_level(levels.at(g.log_level));

    try {
        const json result = cmd.run();
        emit(g, cmd, result, out);
        return 0;
    } catch (const CLI::ValidationError& e) {
        err << "usage error: " << e.what() << "\nRun with --help for more information.\n";
        return 2;
    } catch (const dna::Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::invalid_argument& e) {
        err << "error: invalid number: " << e.what() << '\n';
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace dna::cli
