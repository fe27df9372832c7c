#include "dna/errors.hpp"
#include "dna/phylo.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <cstdio>
#include <cstdlib>
#include <functional>

namespace dna {

namespace {

constexpr const char* kMeta = "()[]':;,";

bool needs_quotes(const std::string& label) {
    if (label.empty()) return false;
    for (char c : label)
        if (std::strchr(kMeta, c) || std::isspace(static_cast<unsigned char>(c))) return true;
    return false;
}

std::string quote_label(const std::string& label) {
    if (!needs_quotes(label)) return label;
    std::string out = "'";
    for (char c : label) {
        if (c == '\'') out += '\'';
        out += c;
    }
    return out + "'";
}

std::string format_length(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    return buf;
}

struct Writer {
    const PhyloTree& tree;
    const NewickOptions& opt;
    std::vector<std::size_t> leaf_count;
    std::vector<std::string> min_label;

    // Fills leaf_count/min_label for the subtree of `u` hanging from `parent`.
    void summarise(std::size_t u, std::size_t parent) {
        if (tree.is_leaf(u) && parent != u) {
            leaf_count[u] = 1;
            min_label[u] = tree.nodes()[u].label;
            return;
        }
        leaf_count[u] = 0;
        min_label[u].clear();
        for (auto [v, e] : tree.neighbors(u)) {
            if (v == parent) continue;
            summarise(v, u);
            leaf_count[u] += leaf_count[v];
            if (min_label[u].empty() || min_label[v] < min_label[u]) min_label[u] = min_label[v];
        }
    }

    std::string write(std::size_t u, std::size_t parent) {
        std::vector<std::pair<std::size_t, std::size_t>> kids;
        for (auto [v, e] : tree.neighbors(u))
            if (v != parent) kids.emplace_back(v, e);
        std::string out;
        if (!kids.empty()) {
            std::sort(kids.begin(), kids.end(), [&](const auto& a, const auto& b) {
                if (leaf_count[a.first] != leaf_count[b.first]) return leaf_count[a.first] < leaf_count[b.first];
                return min_label[a.first] < min_label[b.first];
            });
            out += '(';
            for (std::size_t k = 0; k < kids.size(); ++k) {
                if (k) out += ',';
                const auto& edge = tree.edges()[kids[k].second];
                out += write(kids[k].first, u);
                out += ':' + format_length(opt.raw_lengths ? edge.raw_length : edge.length(), opt.precision);
            }
            out += ')';
        }
        out += quote_label(tree.nodes()[u].label);
        return out;
    }
};

class Parser {
public:
    explicit Parser(const std::string& s) : s_(s) {}

    PhyloTree parse() {
        skip();
        if (pos_ >= s_.size()) fail("empty Newick string");
        const auto root = subtree();
        skip();
        if (peek() == ':') {
            ++pos_;
            number();
            skip();
        }
        if (peek() != ';') fail("expected ';'");
        ++pos_;
        skip();
        if (pos_ != s_.size()) fail("unexpected text after ';'");
        if (tree_.degree(root) == 2) tree_.set_root(root);
        try {
            tree_.validate();
        } catch (const DomainError& e) {
            fail(e.what());
        }
        return std::move(tree_);
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("Newick parse error at offset " + std::to_string(pos_) + ": " + msg, pos_);
    }

    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

    void skip() {
        while (pos_ < s_.size()) {
            if (std::isspace(static_cast<unsigned char>(s_[pos_]))) {
                ++pos_;
            } else if (s_[pos_] == '[') {
                const auto end = s_.find(']', pos_);
                if (end == std::string::npos) fail("unterminated comment");
                pos_ = end + 1;
            } else {
                break;
            }
        }
    }

    std::string label() {
        skip();
        std::string out;
        if (peek() == '\'') {
            ++pos_;
            while (true) {
                if (pos_ >= s_.size()) fail("unterminated quoted label");
                if (s_[pos_] == '\'') {
                    if (pos_ + 1 < s_.size() && s_[pos_ + 1] == '\'') {
                        out += '\'';
                        pos_ += 2;
                        continue;
                    }
                    ++pos_;
                    break;
                }
                out += s_[pos_++];
            }
            return out;
        }
        while (pos_ < s_.size() && !std::strchr(kMeta, s_[pos_]) &&
               !std::isspace(static_cast<unsigned char>(s_[pos_])))
            out += s_[pos_++];
        return out;
    }

    double number() {
        skip();
        const char* begin = s_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("expected a branch length");
        if (!std::isfinite(v)) fail("branch length must be finite");
        pos_ += static_cast<std::size_t>(end - begin);
        return v;
    }

    std::size_t subtree() {
        skip();
        if (peek() == '(') {
            const auto start = pos_;
            ++pos_;
            const auto node = tree_.add_node();
            while (true) {
                const auto child = subtree();
                skip();
                double len = 0.0;
                if (peek() == ':') {
                    ++pos_;
                    len = number();
                    skip();
                }
                tree_.add_edge(node, child, len);
                if (peek() == ',') {
                    ++pos_;
                    continue;
                }
                if (peek() == ')') {
                    ++pos_;
                    break;
                }
                if (pos_ >= s_.size()) {
                    pos_ = start;
                    fail("unbalanced parenthesis");
                }
                fail("expected ',' or ')'");
            }
            auto name = label();
            if (!name.empty()) tree_.set_label(node, std::move(name));
            return node;
        }
        auto name = label();
        if (name.empty()) fail("expected a label or '('");
        return tree_.add_node(std::move(name));
    }

    const std::string& s_;
    std::size_t pos_ = 0;
    PhyloTree tree_;
};

}  // namespace

std::string to_newick(const PhyloTree& tree, const NewickOptions& options) {
    tree.validate();
    Writer w{tree, options, std::vector<std::size_t>(tree.nodes().size()),
             std::vector<std::string>(tree.nodes().size())};
    std::size_t start;
    if (tree.rooted()) {
        start = *tree.root();
    } else {
        auto lv = tree.leaves();
        std::sort(lv.begin(), lv.end(), [&](auto a, auto b) { return tree.nodes()[a].label < tree.nodes()[b].label; });
        if (tree.internal_count() == 0) {
            // Two leaves joined by one edge.
            const auto& e = tree.edges().front();
            const double len = options.raw_lengths ? e.raw_length : e.length();
            return "(" + quote_label(tree.nodes()[lv[0]].label) + ":" + format_length(len, options.precision) + "," +
                   quote_label(tree.nodes()[lv[1]].label) + ":0);";
        }
        start = tree.neighbors(lv.front()).front().first;
    }
    w.summarise(start, start);
    return w.write(start, start) + ";";
}

PhyloTree parse_newick(const std::string& text) { return Parser(text).parse(); }

}  // namespace dna
