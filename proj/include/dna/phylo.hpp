#pragma once

// Trees from distance matrices: Neighbor-Joining, midpoint rooting,
// Robinson-Foulds distance and Newick interchange.

#include "dna/analysis.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dna {

struct PhyloEdge {
    std::size_t a = 0;
    std::size_t b = 0;
    double raw_length = 0.0;  // as estimated; may be negative after NJ

    double length() const { return raw_length > 0.0 ? raw_length : 0.0; }
};

struct PhyloNode {
    std::string label;  // model id for leaves; usually empty for internal nodes
};

class PhyloTree {
public:
    std::size_t add_node(std::string label = {});
    std::size_t add_edge(std::size_t a, std::size_t b, double raw_length);

    const std::vector<PhyloNode>& nodes() const { return nodes_; }
    const std::vector<PhyloEdge>& edges() const { return edges_; }
    std::optional<std::size_t> root() const { return root_; }
    bool rooted() const { return root_.has_value(); }
    void set_root(std::optional<std::size_t> r) { root_ = r; }
    void set_label(std::size_t node, std::string label) { nodes_[node].label = std::move(label); }

    // (neighbour, edge index) pairs.
    const std::vector<std::pair<std::size_t, std::size_t>>& neighbors(std::size_t node) const { return adj_[node]; }
    std::size_t degree(std::size_t node) const { return adj_[node].size(); }
    bool is_leaf(std::size_t node) const;
    std::vector<std::size_t> leaves() const;
    std::vector<std::string> leaf_labels() const;  // sorted
    std::size_t internal_count() const { return nodes_.size() - leaves().size(); }

    // Connected, acyclic, unique non-empty leaf labels; a rooted tree's root
    // is internal. Throws DomainError.
    void validate() const;

    // Drops the root; a degree-2 root is suppressed by merging its two edges.
    PhyloTree unrooted() const;

    // Leaf-to-leaf path lengths, labels sorted. Uses clamped lengths unless raw is set.
    DistanceMatrix path_lengths(bool raw = false) const;

    // Non-trivial splits as sorted leaf-label sets, each normalised to the side
    // without the smallest label. Computed on the unrooted form.
    std::vector<std::vector<std::string>> splits() const;

private:
    std::vector<PhyloNode> nodes_;
    std::vector<PhyloEdge> edges_;
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj_;
    std::optional<std::size_t> root_;
};

// Saitou-Nei Neighbor-Joining. Ties in the Q criterion go to the
// lexicographically smallest pair of cluster keys (smallest leaf label).
PhyloTree neighbor_joining(const DistanceMatrix& d);

// Roots at the midpoint of the longest leaf-to-leaf path (ties: lexicographic
// on the leaf label pair). Splits an edge unless the midpoint falls on a node.
PhyloTree midpoint_root(const PhyloTree& tree);

// Symmetric difference of the split sets. Both trees must share leaf labels.
std::size_t robinson_foulds(const PhyloTree& a, const PhyloTree& b);

// Averages vectors per group, returning (group labels sorted, centroids).
std::pair<std::vector<std::string>, std::vector<std::vector<double>>> group_centroids(
    const std::vector<std::string>& labels, const std::vector<std::vector<double>>& vectors,
    const std::vector<std::string>& groups);

struct NewickOptions {
    bool raw_lengths = false;  // print raw (possibly negative) lengths instead of clamped ones
    int precision = 6;         // significant digits
};

// Canonical Newick: children ordered by leaf count, then smallest leaf label.
// Unrooted trees are written from the internal node next to the smallest leaf.
std::string to_newick(const PhyloTree& tree, const NewickOptions& options = {});

// A bifurcating outermost group means a rooted tree; anything else is unrooted.
// Throws ParseError with a byte offset.
PhyloTree parse_newick(const std::string& text);

}  // namespace dna
