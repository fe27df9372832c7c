#pragma once

// Reference computations written independently of the library, used as test
// oracles. Kept deliberately naive.

#include "dna/phylo.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace oracle {

// Plain adjacency-list tree.
struct Tree {
    std::vector<std::string> label;                          // empty for internal nodes
    std::vector<std::vector<std::pair<int, double>>> adj;    // (neighbour, length)

    int add(std::string l = {}) {
        label.push_back(std::move(l));
        adj.emplace_back();
        return static_cast<int>(label.size()) - 1;
    }
    void link(int a, int b, double w) {
        adj[a].push_back({b, w});
        adj[b].push_back({a, w});
    }
    std::vector<int> leaves() const {
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(label.size()); ++i)
            if (!label[i].empty()) out.push_back(i);
        std::sort(out.begin(), out.end(), [&](int a, int b) { return label[a] < label[b]; });
        return out;
    }
};

inline std::string leaf_name(int k) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "t%02d", k);
    return buf;
}

// Random unrooted binary tree: start with a 3-star and repeatedly graft a new
// leaf onto the middle of a uniformly chosen edge.
inline Tree random_binary_tree(int n, std::mt19937_64& rng, double lo = 0.1, double hi = 1.0) {
    std::uniform_real_distribution<double> len(lo, hi);
    Tree t;
    struct E { int a, b; double w; };
    std::vector<E> edges;
    const int centre = t.add();
    for (int k = 0; k < std::min(n, 3); ++k) edges.push_back({centre, t.add(leaf_name(k)), len(rng)});
    for (int k = 3; k < n; ++k) {
        std::uniform_int_distribution<std::size_t> pick(0, edges.size() - 1);
        const auto e = edges[pick(rng)];
        edges.erase(std::find_if(edges.begin(), edges.end(), [&](const E& x) { return x.a == e.a && x.b == e.b; }));
        const int mid = t.add();
        const int leaf = t.add(leaf_name(k));
        const double w1 = len(rng), w2 = len(rng);
        edges.push_back({e.a, mid, w1});
        edges.push_back({mid, e.b, w2});
        edges.push_back({mid, leaf, len(rng)});
    }
    for (const auto& e : edges) t.link(e.a, e.b, e.w);
    return t;
}

inline Tree from_phylo(const dna::PhyloTree& p) {
    Tree t;
    for (const auto& n : p.nodes()) t.add(n.label);
    for (const auto& e : p.edges()) t.link(static_cast<int>(e.a), static_cast<int>(e.b), e.raw_length);
    return t;
}

inline dna::PhyloTree to_phylo(const Tree& t) {
    dna::PhyloTree p;
    for (const auto& l : t.label) p.add_node(l);
    for (int a = 0; a < static_cast<int>(t.adj.size()); ++a)
        for (auto [b, w] : t.adj[a])
            if (a < b) p.add_edge(static_cast<std::size_t>(a), static_cast<std::size_t>(b), w);
    return p;
}

// All leaf-pair distances by DFS from every leaf, keyed by sorted label pair.
inline std::map<std::pair<std::string, std::string>, double> path_lengths(const Tree& t) {
    std::map<std::pair<std::string, std::string>, double> out;
    for (int s : t.leaves()) {
        std::vector<double> dist(t.label.size(), -1.0);
        std::vector<int> stack{s};
        dist[s] = 0.0;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (auto [v, w] : t.adj[u])
                if (dist[v] < 0.0) {
                    dist[v] = dist[u] + w;
                    stack.push_back(v);
                }
        }
        for (int o : t.leaves())
            if (t.label[s] < t.label[o]) out[{t.label[s], t.label[o]}] = dist[o];
    }
    return out;
}

// Non-trivial bipartitions, each as the side not containing the smallest label.
// Degree-2 nodes are transparent (they do not create splits on their own).
inline std::set<std::set<std::string>> splits(const Tree& t) {
    const auto lv = t.leaves();
    std::set<std::string> all;
    for (int l : lv) all.insert(t.label[l]);
    const std::string smallest = *all.begin();
    std::set<std::set<std::string>> out;
    for (int a = 0; a < static_cast<int>(t.adj.size()); ++a) {
        for (auto [b, w] : t.adj[a]) {
            // Leaves reachable from b without crossing (a, b).
            std::set<std::string> side;
            std::vector<std::pair<int, int>> stack{{b, a}};
            while (!stack.empty()) {
                auto [u, from] = stack.back();
                stack.pop_back();
                if (!t.label[u].empty()) side.insert(t.label[u]);
                for (auto [v, ww] : t.adj[u])
                    if (v != from) stack.push_back({v, u});
            }
            if (side.count(smallest)) {
                std::set<std::string> other;
                for (const auto& l : all)
                    if (!side.count(l)) other.insert(l);
                side = std::move(other);
            }
            if (side.size() >= 2 && side.size() <= all.size() - 2) out.insert(side);
        }
    }
    return out;
}

inline dna::DistanceMatrix distance_matrix(const Tree& t) {
    const auto pl = path_lengths(t);
    const auto lv = t.leaves();
    dna::DistanceMatrix d;
    for (int l : lv) d.labels.push_back(t.label[l]);
    d.m = dna::Matrix::Zero(static_cast<Eigen::Index>(lv.size()), static_cast<Eigen::Index>(lv.size()));
    for (std::size_t i = 0; i < lv.size(); ++i)
        for (std::size_t j = i + 1; j < lv.size(); ++j) {
            const double v = pl.at({d.labels[i], d.labels[j]});
            d.m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            d.m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
        }
    return d;
}

// O(n_pos * n_neg) AUC: P(score_pos > score_neg) + 0.5 P(tie).
inline double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (y[i] == 1 && y[j] != 1) {
                den += 1.0;
                num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
    return num / den;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i] / n;
        mb += b[i] / n;
    }
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace oracle
