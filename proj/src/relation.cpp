#include "dna/analysis.hpp"
#include "dna/csv.hpp"
#include "dna/errors.hpp"
#include "dna/hashing.hpp"
#include "dna/jsonl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace dna {

std::vector<double> pair_features(const DnaRecord& a, const DnaRecord& b) {
    a.check_comparable(b);
    if (a.vector.size() != b.vector.size()) throw DimensionError("DNA vectors differ in length");
    std::vector<double> f(a.vector.size() + 1);
    double s = 0.0;
    for (std::size_t i = 0; i < a.vector.size(); ++i) {
        const double d = a.vector[i] - b.vector[i];
        f[i] = std::abs(d);
        s += d * d;
    }
    f.back() = std::sqrt(s);
    return f;
}

std::string to_string(Relation r) { return r == Relation::Correlated ? "correlated" : "independent"; }

Relation relation_from_string(const std::string& s) {
    if (s == "correlated" || s == "1" || s == "+1" || s == "true") return Relation::Correlated;
    if (s == "independent" || s == "0" || s == "-1" || s == "false") return Relation::Independent;
    throw DomainError("unknown relation label '" + s + "' (expected correlated|independent)");
}

std::vector<RelationPair> relation_pairs_from_csv(const std::string& text) {
    const auto rows = parse_csv(text);
    std::vector<RelationPair> out;
    std::size_t start = 0;
    if (!rows.empty() && !rows[0].empty() && rows[0][0] == "model_a") start = 1;
    for (std::size_t r = start; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != 5)
            throw ParseError("relations CSV row " + std::to_string(r + 1) + " needs 5 fields, has " +
                                 std::to_string(row.size()),
                             r + 1);
        RelationPair p{row[0], row[1], row[2], row[3], Relation::Independent};
        try {
            p.label = relation_from_string(row[4]);
        } catch (const DomainError& e) {
            throw ParseError("relations CSV row " + std::to_string(r + 1) + ": " + e.what(), r + 1);
        }
        if (p.model_a == p.model_b)
            throw ParseError("relations CSV row " + std::to_string(r + 1) + ": a model cannot pair with itself", r + 1);
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<RelationPair> load_relation_pairs(const std::filesystem::path& path) {
    return relation_pairs_from_csv(read_text_file(path));
}

std::string relation_pairs_to_csv(const std::vector<RelationPair>& pairs) {
    std::string out = "model_a,model_b,org_a,org_b,label\n";
    for (const auto& p : pairs)
        out += csv_field(p.model_a) + "," + csv_field(p.model_b) + "," + csv_field(p.org_a) + "," + csv_field(p.org_b) +
               "," + to_string(p.label) + "\n";
    return out;
}

Relation greedy_baseline(const RelationPair& pair) {
    if (pair.org_a.empty() || pair.org_b.empty())
        throw DomainError("greedy baseline needs organisations for '" + pair.model_a + "' and '" + pair.model_b + "'");
    return pair.org_a == pair.org_b ? Relation::Correlated : Relation::Independent;
}

Relation random_baseline(const RelationPair& pair, std::uint64_t seed) {
    const auto& lo = std::min(pair.model_a, pair.model_b);
    const auto& hi = std::max(pair.model_a, pair.model_b);
    const auto h = sha256_u64(std::to_string(seed) + '\0' + lo + '\0' + hi);
    return (h >> 63) ? Relation::Correlated : Relation::Independent;
}

std::vector<RelationPair> add_negative_pairs(const std::vector<RelationPair>& correlated,
                                             const std::vector<std::string>& models,
                                             const std::vector<std::string>& orgs, std::uint64_t seed) {
    if (models.size() != orgs.size()) throw DimensionError("models and orgs differ in count");
    std::set<std::pair<std::string, std::string>> taken;
    std::size_t n_pos = 0;
    for (const auto& p : correlated) {
        taken.insert(std::minmax(p.model_a, p.model_b));
        if (p.label == Relation::Correlated) ++n_pos;
    }
    std::vector<std::pair<std::size_t, std::size_t>> candidates;
    for (std::size_t i = 0; i < models.size(); ++i)
        for (std::size_t j = i + 1; j < models.size(); ++j)
            if (!taken.count(std::minmax(models[i], models[j]))) candidates.emplace_back(i, j);
    if (candidates.size() < n_pos)
        throw DomainError("not enough unrelated model pairs to sample " + std::to_string(n_pos) + " negatives");
    std::mt19937_64 rng(seed);
    std::shuffle(candidates.begin(), candidates.end(), rng);
    std::vector<RelationPair> out = correlated;
    for (std::size_t k = 0; k < n_pos; ++k) {
        const auto [i, j] = candidates[k];
        out.push_back(RelationPair{models[i], models[j], orgs[i], orgs[j], Relation::Independent});
    }
    return out;
}

RelationSplit stratified_split(const std::vector<RelationPair>& pairs, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DomainError("train_fraction must lie in (0, 1)");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < pairs.size(); ++i)
        (pairs[i].label == Relation::Correlated ? pos : neg).push_back(i);
    std::mt19937_64 rng(seed);
    RelationSplit split;
    for (auto* cls : {&pos, &neg}) {
        std::shuffle(cls->begin(), cls->end(), rng);
        const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(cls->size())));
        for (std::size_t k = 0; k < cls->size(); ++k)
            (k < n_train ? split.train : split.test).push_back(pairs[(*cls)[k]]);
    }
    return split;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& truth) {
    if (scores.size() != truth.size()) throw DimensionError("scores and truth differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
        i = j + 1;
    }
    double n_pos = 0.0, n_neg = 0.0, rank_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (truth[i] == 1) {
            n_pos += 1.0;
            rank_sum += rank[i];
        } else {
            n_neg += 1.0;
        }
    }
    if (n_pos == 0.0 || n_neg == 0.0) throw DomainError("AUC is undefined when truth contains a single class");
    return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

BinaryMetrics evaluate_binary(const std::vector<double>& scores, const std::vector<int>& predicted,
                              const std::vector<int>& truth) {
    if (truth.empty()) throw DomainError("cannot evaluate an empty prediction set");
    if (scores.size() != truth.size() || predicted.size() != truth.size())
        throw DimensionError("scores, predictions and truth differ in length");
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (predicted[i] == 1 && truth[i] == 1) ++tp;
        if (predicted[i] == 1 && truth[i] != 1) ++fp;
        if (predicted[i] != 1 && truth[i] == 1) ++fn;
    }
    BinaryMetrics m;
    m.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    m.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    try {
        m.auc = roc_auc(scores, truth);
    } catch (const DomainError&) {
        m.auc.reset();
    }
    return m;
}

}  // namespace dna
