#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "maxent/errors.hpp"

namespace maxent {

// Monomial exponent vector j = (j_1,...,j_d). Only |j| >= 1 indices enter
// the constraint system; the zeroth moment is handled by normalization.
struct MultiIndex {
    std::vector<int> exponents;

    int total_order() const {
        return std::accumulate(exponents.begin(), exponents.end(), 0);
    }

    bool operator==(const MultiIndex& other) const { return exponents == other.exponents; }
};

// Graded ordering, lexicographic (larger leading exponent first) within a grade.
inline bool graded_lex_less(const MultiIndex& a, const MultiIndex& b) {
    int oa = a.total_order();
    int ob = b.total_order();
    if (oa != ob) return oa < ob;
    return a.exponents > b.exponents;
}

// Ordered list of monomial constraint indices. The order is significant:
// the equation-by-equation solve path depends on it.
struct BasisSet {
    int dimension = 0;
    int max_order = 0;
    std::vector<MultiIndex> indices;

    std::size_t size() const { return indices.size(); }
};

inline constexpr int kMaxOrder = 16;

// Number of monomials of total order exactly j in d variables: C(j+d-1, d-1).
inline std::size_t monomial_count(int d, int j) {
    // Multiplicative binomial evaluation; values stay far below 2^63 for d<=10, j<=16.
    std::uint64_t num = 1, den = 1;
    for (int k = 1; k <= d - 1; ++k) {
        num *= static_cast<std::uint64_t>(j + k);
        den *= static_cast<std::uint64_t>(k);
    }
    return static_cast<std::size_t>(num / den);
}

// All multi-indices with 1 <= |j| <= p in graded-lex order.
inline BasisSet enumerate_multi_indices(int d, int p) {
    if (d < 1) throw DomainError("dimension must be >= 1");
    if (p < 1) throw DomainError("max order must be >= 1");
    if (p > kMaxOrder) throw DomainError("max order exceeds supported limit 16");

    BasisSet b;
    b.dimension = d;
    b.max_order = p;

    // Enumerate each grade by recursion over coordinates.
    std::vector<int> current(static_cast<std::size_t>(d), 0);
    auto emit_grade = [&](auto&& self, int coord, int remaining) -> void {
        if (coord == d - 1) {
            current[static_cast<std::size_t>(coord)] = remaining;
            b.indices.push_back(MultiIndex{current});
            return;
        }
        for (int e = remaining; e >= 0; --e) {
            current[static_cast<std::size_t>(coord)] = e;
            self(self, coord + 1, remaining - e);
        }
    };
    for (int grade = 1; grade <= p; ++grade) emit_grade(emit_grade, 0, grade);
    return b;
}

inline std::size_t basis_size(int d, int p) {
    std::size_t n = 0;
    for (int j = 1; j <= p; ++j) n += monomial_count(d, j);
    return n;
}

// Permutation moving the pure even-power indices of maximal order (x_k^p,
// p even) to the front; everything else keeps canonical order. Constraints
// placed early are least likely to be discarded, so the convexity anchors
// E[x_k^p] go first. Returns the permuted basis and the permutation
// (perm[new_pos] = old_pos) so reports can map back to user ordering.
inline std::pair<BasisSet, std::vector<std::size_t>> reorder_for_convexity(const BasisSet& b) {
    if (b.indices.empty()) throw DomainError("basis must be nonempty");

    auto is_anchor = [&](const MultiIndex& idx) {
        if (b.max_order % 2 != 0) return false;
        if (idx.total_order() != b.max_order) return false;
        int nonzero = 0;
        for (int e : idx.exponents) nonzero += (e != 0);
        return nonzero == 1;
    };

    std::vector<std::size_t> perm;
    perm.reserve(b.size());
    for (std::size_t i = 0; i < b.size(); ++i)
        if (is_anchor(b.indices[i])) perm.push_back(i);
    for (std::size_t i = 0; i < b.size(); ++i)
        if (!is_anchor(b.indices[i])) perm.push_back(i);

    BasisSet out;
    out.dimension = b.dimension;
    out.max_order = b.max_order;
    out.indices.reserve(b.size());
    for (std::size_t i : perm) out.indices.push_back(b.indices[i]);
    return {out, perm};
}

inline double eval_monomial(const MultiIndex& j, const double* x) {
    double v = 1.0;
    for (std::size_t k = 0; k < j.exponents.size(); ++k) {
        double p = 1.0;
        for (int e = 0; e < j.exponents[k]; ++e) p *= x[k];
        v *= p;
    }
    return v;
}

// Monomial basis evaluated at quadrature nodes as an N x n matrix. Built
// once per (rule, basis) pair and reused by all residual and Jacobian
// evaluations.
inline Eigen::MatrixXd eval_basis_matrix(const BasisSet& b,
                                         const std::vector<std::vector<double>>& nodes) {
    const auto n = b.size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(nodes.size()), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& x = nodes[i];
        if (static_cast<int>(x.size()) != b.dimension)
            throw DomainError("node dimension mismatch");
        for (double c : x)
            if (c < -1.0 || c > 1.0)
                throw DomainError("quadrature node outside [-1,1]^d");
        for (std::size_t j = 0; j < n; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                eval_monomial(b.indices[j], x.data());
    }
    return m;
}

} // namespace maxent
