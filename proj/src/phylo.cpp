#include "dna/phylo.hpp"

#include "dna/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace dna {

std::size_t PhyloTree::add_node(std::string label) {
    nodes_.push_back(PhyloNode{std::move(label)});
    adj_.emplace_back();
    return nodes_.size() - 1;
}

std::size_t PhyloTree::add_edge(std::size_t a, std::size_t b, double raw_length) {
    if (a >= nodes_.size() || b >= nodes_.size() || a == b) throw DomainError("invalid edge endpoints");
    if (!std::isfinite(raw_length)) throw DomainError("branch length must be finite");
    edges_.push_back(PhyloEdge{a, b, raw_length});
    const auto e = edges_.size() - 1;
    adj_[a].emplace_back(b, e);
    adj_[b].emplace_back(a, e);
    return e;
}

bool PhyloTree::is_leaf(std::size_t node) const {
    if (root_ && *root_ == node) return false;
    return adj_[node].size() <= 1;
}

std::vector<std::size_t> PhyloTree::leaves() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (is_leaf(i)) out.push_back(i);
    return out;
}

std::vector<std::string> PhyloTree::leaf_labels() const {
    std::vector<std::string> out;
    for (auto i : leaves()) out.push_back(nodes_[i].label);
    std::sort(out.begin(), out.end());
    return out;
}

void PhyloTree::validate() const {
    if (nodes_.empty()) throw DomainError("tree has no nodes");
    if (edges_.size() + 1 != nodes_.size()) throw DomainError("tree must have exactly nodes-1 edges");
    std::vector<char> seen(nodes_.size(), 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t visited = 1;
    while (!stack.empty()) {
        const auto u = stack.back();
        stack.pop_back();
        for (auto [v, e] : adj_[u]) {
            if (!seen[v]) {
                seen[v] = 1;
                ++visited;
                stack.push_back(v);
            }
        }
    }
    if (visited != nodes_.size()) throw DomainError("tree is not connected");
    std::set<std::string> labels;
    for (auto l : leaves()) {
        if (nodes_[l].label.empty()) throw DomainError("leaf without a label");
        if (!labels.insert(nodes_[l].label).second) throw DomainError("duplicate leaf label '" + nodes_[l].label + "'");
    }
    if (root_ && adj_[*root_].size() < 2) throw DomainError("root must have at least two children");
}

PhyloTree PhyloTree::unrooted() const {
    if (!root_ || adj_[*root_].size() != 2) {
        PhyloTree t = *this;
        t.root_.reset();
        return t;
    }
    const auto r = *root_;
    const auto [n1, e1] = adj_[r][0];
    const auto [n2, e2] = adj_[r][1];
    PhyloTree t;
    std::vector<std::size_t> remap(nodes_.size(), std::numeric_limits<std::size_t>::max());
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (i != r) remap[i] = t.add_node(nodes_[i].label);
    for (std::size_t e = 0; e < edges_.size(); ++e)
        if (e != e1 && e != e2) t.add_edge(remap[edges_[e].a], remap[edges_[e].b], edges_[e].raw_length);
    t.add_edge(remap[n1], remap[n2], edges_[e1].raw_length + edges_[e2].raw_length);
    return t;
}

namespace {

// Distances from `src` to every node along tree paths.
std::vector<double> distances_from(const PhyloTree& t, std::size_t src, bool raw,
                                   std::vector<std::size_t>* parent = nullptr) {
    const auto n = t.nodes().size();
    std::vector<double> dist(n, std::numeric_limits<double>::quiet_NaN());
    if (parent) parent->assign(n, std::numeric_limits<std::size_t>::max());
    std::vector<std::size_t> stack{src};
    dist[src] = 0.0;
    while (!stack.empty()) {
        const auto u = stack.back();
        stack.pop_back();
        for (auto [v, e] : t.neighbors(u)) {
            if (!std::isnan(dist[v])) continue;
            const auto& edge = t.edges()[e];
            dist[v] = dist[u] + (raw ? edge.raw_length : edge.length());
            if (parent) (*parent)[v] = u;
            stack.push_back(v);
        }
    }
    return dist;
}

std::size_t edge_between(const PhyloTree& t, std::size_t a, std::size_t b) {
    for (auto [v, e] : t.neighbors(a))
        if (v == b) return e;
    throw DomainError("nodes are not adjacent");
}

}  // namespace

DistanceMatrix PhyloTree::path_lengths(bool raw) const {
    auto lv = leaves();
    std::sort(lv.begin(), lv.end(), [&](auto a, auto b) { return nodes_[a].label < nodes_[b].label; });
    DistanceMatrix d;
    d.m = Matrix::Zero(lv.size(), lv.size());
    for (auto l : lv) d.labels.push_back(nodes_[l].label);
    for (std::size_t i = 0; i < lv.size(); ++i) {
        const auto dist = distances_from(*this, lv[i], raw);
        for (std::size_t j = 0; j < lv.size(); ++j) d.m(i, j) = dist[lv[j]];
    }
    // Path sums are accumulated from both ends; force exact symmetry.
    for (std::size_t i = 0; i < lv.size(); ++i)
        for (std::size_t j = i + 1; j < lv.size(); ++j) d.m(j, i) = d.m(i, j);
    return d;
}

std::vector<std::vector<std::string>> PhyloTree::splits() const {
    const PhyloTree t = unrooted();
    const auto all = t.leaf_labels();
    if (all.empty()) return {};
    const std::string& smallest = all.front();
    std::set<std::vector<std::string>> out;
    for (const auto& e : t.edges_) {
        if (t.is_leaf(e.a) || t.is_leaf(e.b)) continue;
        // Leaves reachable from e.b without crossing the edge.
        std::vector<std::string> side;
        std::vector<char> seen(t.nodes_.size(), 0);
        seen[e.a] = 1;
        seen[e.b] = 1;
        std::vector<std::size_t> stack{e.b};
        while (!stack.empty()) {
            const auto u = stack.back();
            stack.pop_back();
            if (t.is_leaf(u)) side.push_back(t.nodes_[u].label);
            for (auto [v, ei] : t.adj_[u]) {
                if (!seen[v]) {
                    seen[v] = 1;
                    stack.push_back(v);
                }
            }
        }
        std::sort(side.begin(), side.end());
        if (std::binary_search(side.begin(), side.end(), smallest)) {
            std::vector<std::string> other;
            std::set_difference(all.begin(), all.end(), side.begin(), side.end(), std::back_inserter(other));
            side = std::move(other);
        }
        if (side.size() >= 2 && side.size() + 2 <= all.size()) out.insert(std::move(side));
    }
    return {out.begin(), out.end()};
}

PhyloTree neighbor_joining(const DistanceMatrix& d) {
    d.validate();
    const std::size_t n = d.size();
    if (n < 2) throw DomainError("Neighbor-Joining needs at least 2 taxa");

    PhyloTree tree;
    struct Cluster {
        std::size_t node;
        std::string key;  // smallest leaf label inside
    };
    std::vector<Cluster> active;
    for (std::size_t i = 0; i < n; ++i) active.push_back({tree.add_node(d.labels[i]), d.labels[i]});
    std::vector<std::vector<double>> dist(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) dist[i][j] = d.m(i, j);

    while (active.size() > 2) {
        const std::size_t r = active.size();
        std::vector<double> row_sum(r, 0.0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t k = 0; k < r; ++k) row_sum[i] += dist[i][k];

        std::size_t bi = 0, bj = 1;
        double best = std::numeric_limits<double>::infinity();
        std::pair<std::string, std::string> best_key;
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = i + 1; j < r; ++j) {
                const double q = static_cast<double>(r - 2) * dist[i][j] - row_sum[i] - row_sum[j];
                auto key = std::minmax(active[i].key, active[j].key);
                std::pair<std::string, std::string> k{key.first, key.second};
                if (q < best || (q == best && k < best_key)) {
                    best = q;
                    bi = i;
                    bj = j;
                    best_key = std::move(k);
                }
            }
        }

        const double dij = dist[bi][bj];
        const double li = dij / 2.0 + (row_sum[bi] - row_sum[bj]) / (2.0 * static_cast<double>(r - 2));
        const double lj = dij - li;
        const auto u = tree.add_node();
        tree.add_edge(u, active[bi].node, li);
        tree.add_edge(u, active[bj].node, lj);

        std::vector<double> du(r);
        for (std::size_t k = 0; k < r; ++k) du[k] = (dist[bi][k] + dist[bj][k] - dij) / 2.0;
        // u takes slot bi; slot bj is removed.
        for (std::size_t k = 0; k < r; ++k) {
            dist[bi][k] = dist[k][bi] = du[k];
        }
        dist[bi][bi] = 0.0;
        active[bi] = {u, std::min(active[bi].key, active[bj].key)};
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
        dist.erase(dist.begin() + static_cast<std::ptrdiff_t>(bj));
        for (auto& row : dist) row.erase(row.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    tree.add_edge(active[0].node, active[1].node, dist[0][1]);
    return tree;
}

PhyloTree midpoint_root(const PhyloTree& tree) {
    if (tree.rooted()) throw DomainError("midpoint rooting needs an unrooted tree");
    tree.validate();
    auto lv = tree.leaves();
    if (lv.size() < 2) throw DomainError("midpoint rooting needs at least 2 leaves");
    std::sort(lv.begin(), lv.end(), [&](auto a, auto b) { return tree.nodes()[a].label < tree.nodes()[b].label; });

    // Longest path; iterating in label order with strict > keeps the lexicographically smallest pair.
    double longest = -1.0;
    std::size_t from = lv[0], to = lv[1];
    for (std::size_t i = 0; i < lv.size(); ++i) {
        const auto dist = distances_from(tree, lv[i], false);
        for (std::size_t j = i + 1; j < lv.size(); ++j) {
            if (dist[lv[j]] > longest) {
                longest = dist[lv[j]];
                from = lv[i];
                to = lv[j];
            }
        }
    }

    std::vector<std::size_t> parent;
    const auto dist = distances_from(tree, from, false, &parent);
    std::vector<std::size_t> path{to};  // to ... from
    while (path.back() != from) path.push_back(parent[path.back()]);
    std::reverse(path.begin(), path.end());

    const double half = longest / 2.0;
    const double eps = 1e-12 * std::max(1.0, longest);
    PhyloTree out = tree;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        const auto u = path[k];
        const auto v = path[k + 1];
        if (!(dist[u] <= half + eps && half - eps <= dist[v])) continue;
        if (std::abs(dist[u] - half) <= eps && !tree.is_leaf(u)) {
            out.set_root(u);
            return out;
        }
        if (std::abs(dist[v] - half) <= eps && !tree.is_leaf(v)) {
            out.set_root(v);
            return out;
        }
        // Split edge (u, v) at half - dist[u] from u.
        PhyloTree t;
        for (const auto& node : tree.nodes()) t.add_node(node.label);
        const auto split = edge_between(tree, u, v);
        for (std::size_t e = 0; e < tree.edges().size(); ++e)
            if (e != split) t.add_edge(tree.edges()[e].a, tree.edges()[e].b, tree.edges()[e].raw_length);
        const double edge_len = dist[v] - dist[u];
        const double left = std::clamp(half - dist[u], 0.0, edge_len);
        const auto root = t.add_node();
        t.add_edge(root, u, left);
        t.add_edge(root, v, edge_len - left);
        t.set_root(root);
        return t;
    }
    throw DomainError("failed to locate the midpoint of the longest path");
}

std::size_t robinson_foulds(const PhyloTree& a, const PhyloTree& b) {
    if (a.leaf_labels() != b.leaf_labels()) throw DomainError("Robinson-Foulds needs trees over the same leaf set");
    const auto sa = a.splits();
    const auto sb = b.splits();
    std::vector<std::vector<std::string>> diff;
    std::set_symmetric_difference(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(diff));
    return diff.size();
}

std::pair<std::vector<std::string>, std::vector<std::vector<double>>> group_centroids(
    const std::vector<std::string>& labels, const std::vector<std::vector<double>>& vectors,
    const std::vector<std::string>& groups) {
    if (labels.size() != vectors.size() || labels.size() != groups.size())
        throw DimensionError("labels, vectors and groups differ in count");
    std::map<std::string, std::pair<std::vector<double>, std::size_t>> acc;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& [sum, count] = acc[groups[i]];
        if (sum.empty()) sum.assign(vectors[i].size(), 0.0);
        if (sum.size() != vectors[i].size()) throw DimensionError("vectors differ in length");
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += vectors[i][k];
        ++count;
    }
    std::pair<std::vector<std::string>, std::vector<std::vector<double>>> out;
    for (auto& [g, sc] : acc) {
        auto& [sum, count] = sc;
        for (double& v : sum) v /= static_cast<double>(count);
        out.first.push_back(g);
        out.second.push_back(std::move(sum));
    }
    return out;
}

}  // namespace dna
