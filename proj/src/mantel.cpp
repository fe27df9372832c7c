#include "dna/analysis.hpp"
#include "dna/errors.hpp"
#include "dna/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace dna {

namespace {

std::vector<double> upper_triangle(const Matrix& a) {
    const auto n = a.rows();
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) v.push_back(a(i, j));
    return v;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw DomainError("Pearson correlation undefined for constant distances");
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace

double upper_triangle_pearson(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols())
        throw DimensionError("matrices must be square and of equal size");
    if (a.rows() < 3) throw DomainError("need at least 3 labels for a correlation");
    return pearson(upper_triangle(a), upper_triangle(b));
}

MantelResult mantel_test(const DistanceMatrix& d1, const DistanceMatrix& d2, std::size_t permutations,
                         std::uint64_t seed) {
    d1.validate();
    d2.validate();
    const std::size_t n = d1.size();
    if (d2.size() != n) throw DomainError("Mantel test needs matrices over the same labels");
    // Bring d2 into d1's label order; index_of throws on a missing label.
    Matrix m2 = d2.m;
    if (d1.labels != d2.labels) {
        std::vector<std::size_t> at(n);
        for (std::size_t i = 0; i < n; ++i) at[i] = d2.index_of(d1.labels[i]);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                m2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    d2.m(static_cast<Eigen::Index>(at[i]), static_cast<Eigen::Index>(at[j]));
    }
    if (n < 4) throw DomainError("Mantel test needs at least 4 labels");
    if (permutations < 99) throw DomainError("Mantel test needs at least 99 permutations");

    const auto x = upper_triangle(d1.m);
    const double r_obs = pearson(x, upper_triangle(m2));

    // Permutations are drawn sequentially so the result does not depend on the worker count.
    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::size_t>> perms(permutations, std::vector<std::size_t>(n));
    for (auto& perm : perms) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
    }
    std::vector<char> hit(permutations, 0);
    parallel_for(permutations, default_workers(), [&](std::size_t k) {
        const auto& perm = perms[k];
        std::vector<double> y;
        y.reserve(x.size());
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) y.push_back(m2(perm[i], perm[j]));
        hit[k] = pearson(x, y) >= r_obs;
    });
    const auto count = static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));
    MantelResult res;
    res.r = r_obs;
    res.p_value = static_cast<double>(1 + count) / static_cast<double>(permutations + 1);
    res.permutations = permutations;
    res.seed = seed;
    return res;
}

}  // namespace dna
