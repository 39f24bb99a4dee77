#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "maxent/errors.hpp"

namespace maxent {

enum class QuadKind { sparse, uniform };

// Nodes and weights approximating integrals over [-1,1]^d. Immutable after
// construction.
struct QuadratureRule {
    int dimension = 0;
    int level = 0; // sparse level, or nodes-per-axis for uniform grids
    QuadKind kind = QuadKind::sparse;
    std::vector<std::vector<double>> nodes;
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }

    // One row per node: coordinates then weight.
    void to_csv(std::ostream& os) const {
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            for (double c : nodes[i]) os << c << ',';
            os << weights[i] << '\n';
        }
    }
};

inline constexpr std::size_t kDefaultNodeCap = 10'000'000;

namespace detail {

// Number of 1-D Clenshaw-Curtis nodes at level l: m_1 = 1, m_l = 2^(l-1)+1.
inline std::size_t cc_node_count(int level) {
    if (level < 1) throw DomainError("quadrature level must be >= 1");
    if (level == 1) return 1;
    return (std::size_t{1} << (level - 1)) + 1;
}

// In-place iterative radix-2 FFT; size must be a power of two.
inline void fft_pow2(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                auto u = a[i + j];
                auto v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

// cos(k*pi/n) computed from the reduced fraction k/n, so the same abscissa
// produced at different levels is bitwise identical (the nesting guarantee).
inline double cos_pi_frac(std::size_t k, std::size_t n) {
    std::size_t g = std::gcd(k, n);
    double kk = static_cast<double>(k / g);
    double nn = static_cast<double>(n / g);
    return std::cos(std::numbers::pi * kk / nn);
}

// Clenshaw-Curtis weights for n+1 nodes (n even >= 4) via a DCT-I evaluated
// with an even-extension FFT of length n. Classical cosine-sum formula:
//   w_k = (c_k/n) * (1 - sum_{j=1}^{n/2} b_j cos(2jk*pi/n) / (4j^2-1)).
inline std::vector<double> cc_weights(std::size_t n) {
    const std::size_t half = n / 2;
    std::vector<std::complex<double>> z(n, 0.0);
    for (std::size_t j = 1; j < half; ++j) {
        double u = 1.0 / (4.0 * static_cast<double>(j) * static_cast<double>(j) - 1.0);
        z[j] = u;
        z[n - j] = u;
    }
    z[half] = 1.0 / (4.0 * static_cast<double>(half) * static_cast<double>(half) - 1.0);
    fft_pow2(z);

    std::vector<double> w(n + 1);
    for (std::size_t k = 0; k <= half; ++k) {
        double ck = (k == 0) ? 1.0 : 2.0; // boundary node, c_0 = c_n = 1
        double wk = ck / static_cast<double>(n) * (1.0 - z[k].real());
        w[k] = wk;
        w[n - k] = wk;
    }
    return w;
}

} // namespace detail

// 1-D nested Clenshaw-Curtis rule: m_1 = 1 (midpoint, weight 2), otherwise
// m_l = 2^(l-1)+1 Chebyshev extrema cos(k*pi/(m-1)). Exact for polynomials
// of degree <= m_l - 1. Nodes returned in ascending order.
inline QuadratureRule clenshaw_curtis_1d(int level) {
    QuadratureRule r;
    r.dimension = 1;
    r.level = level;
    r.kind = QuadKind::sparse;

    const std::size_t m = detail::cc_node_count(level);
    if (m == 1) {
        r.nodes = {{0.0}};
        r.weights = {2.0};
        return r;
    }
    const std::size_t n = m - 1;
    std::vector<double> w;
    if (n == 2) {
        w = {1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0};
    } else {
        w = detail::cc_weights(n);
    }
    r.nodes.resize(m);
    r.weights.resize(m);
    // x_k = cos(k*pi/n) is descending in k; emit ascending. Mirror the
    // positive half so nodes and weights are exactly symmetric.
    for (std::size_t k = 0; k <= n; ++k) {
        double x;
        if (2 * k == n) x = 0.0;
        else if (2 * k < n) x = detail::cos_pi_frac(k, n);
        else x = -detail::cos_pi_frac(n - k, n);
        r.nodes[n - k] = {x};
        r.weights[n - k] = w[k];
    }
    return r;
}

namespace detail {

// New nodes introduced at level l relative to level l-1.
inline std::size_t cc_delta_count(int level) {
    if (level == 1) return 1;
    if (level == 2) return 2;
    return std::size_t{1} << (level - 2);
}

inline std::size_t predicted_sparse_count(int d, int level) {
    // Sum over all level multi-indices |i| <= level + d - 1 of the product
    // of per-axis new-node counts; exact because the 1-D rules are nested.
    std::vector<std::size_t> counts(static_cast<std::size_t>(level), 0);
    for (int l = 1; l <= level; ++l) counts[static_cast<std::size_t>(l - 1)] = cc_delta_count(l);
    // conv[s] = number of nodes contributed by indices with |i| - d = s
    std::vector<std::uint64_t> conv = {1};
    for (int axis = 0; axis < d; ++axis) {
        std::vector<std::uint64_t> next(conv.size() + static_cast<std::size_t>(level - 1), 0);
        for (std::size_t s = 0; s < conv.size(); ++s)
            for (int l = 1; l <= level; ++l)
                next[s + static_cast<std::size_t>(l - 1)] += conv[s] * counts[static_cast<std::size_t>(l - 1)];
        conv = std::move(next);
    }
    std::uint64_t total = 0;
    for (std::size_t s = 0; s < conv.size() && s <= static_cast<std::size_t>(level - 1); ++s)
        total += conv[s];
    return static_cast<std::size_t>(total);
}

inline std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    return r;
}

} // namespace detail

// Smolyak sparse grid combining the nested 1-D Clenshaw-Curtis rules over
// level multi-indices with |i| <= level + d - 1. Duplicate nodes are merged
// by exact coordinate match (safe because nested abscissae are bitwise
// reproducible across levels).
inline QuadratureRule smolyak_sparse_grid(int d, int level,
                                          std::size_t node_cap = kDefaultNodeCap) {
    if (d < 1) throw DomainError("dimension must be >= 1");
    if (level < 1) throw DomainError("quadrature level must be >= 1");
    if (detail::predicted_sparse_count(d, level) > node_cap)
        throw DomainError("sparse grid would exceed the node cap");

    if (d == 1) return clenshaw_curtis_1d(level);

    std::vector<QuadratureRule> rules1d;
    for (int l = 1; l <= level; ++l) rules1d.push_back(clenshaw_curtis_1d(l));

    const int upper = level + d - 1;
    const int lower = std::max(d, level);
    std::map<std::vector<double>, double> merged;

    // Enumerate level multi-indices i with lower <= |i| <= upper; the
    // combination coefficient is (-1)^(upper-|i|) C(d-1, upper-|i|).
    std::vector<int> idx(static_cast<std::size_t>(d), 1);
    auto recurse = [&](auto&& self, int axis, int remaining_max) -> void {
        if (axis == d - 1) {
            int lo = 1;
            int used = 0;
            for (int a = 0; a < d - 1; ++a) used += idx[static_cast<std::size_t>(a)];
            lo = std::max(1, lower - used);
            for (int l = lo; l <= remaining_max && l <= level; ++l) {
                idx[static_cast<std::size_t>(axis)] = l;
                int total = used + l;
                int q = upper - total;
                double coeff = ((q % 2) ? -1.0 : 1.0) *
                               static_cast<double>(detail::binomial(d - 1, q));
                // Tensor product of the selected 1-D rules.
                std::vector<std::size_t> pos(static_cast<std::size_t>(d), 0);
                std::vector<double> pt(static_cast<std::size_t>(d));
                bool done = false;
                while (!done) {
                    double w = coeff;
                    for (int a = 0; a < d; ++a) {
                        const auto& r1 = rules1d[static_cast<std::size_t>(idx[static_cast<std::size_t>(a)] - 1)];
                        pt[static_cast<std::size_t>(a)] = r1.nodes[pos[static_cast<std::size_t>(a)]][0];
                        w *= r1.weights[pos[static_cast<std::size_t>(a)]];
                    }
                    merged[pt] += w;
                    // odometer increment
                    int a = 0;
                    for (; a < d; ++a) {
                        const auto& r1 = rules1d[static_cast<std::size_t>(idx[static_cast<std::size_t>(a)] - 1)];
                        if (++pos[static_cast<std::size_t>(a)] < r1.size()) break;
                        pos[static_cast<std::size_t>(a)] = 0;
                    }
                    done = (a == d);
                }
            }
            return;
        }
        for (int l = 1; l <= remaining_max - (d - 1 - axis) && l <= level; ++l) {
            idx[static_cast<std::size_t>(axis)] = l;
            self(self, axis + 1, remaining_max - l);
        }
    };
    recurse(recurse, 0, upper);

    QuadratureRule r;
    r.dimension = d;
    r.level = level;
    r.kind = QuadKind::sparse;
    r.nodes.reserve(merged.size());
    r.weights.reserve(merged.size());
    for (auto& [pt, w] : merged) {
        r.nodes.push_back(pt);
        r.weights.push_back(w);
    }
    return r;
}

// Tensor grid of m equispaced points per axis with trapezoidal weights.
inline QuadratureRule uniform_grid(int d, int m, std::size_t node_cap = kDefaultNodeCap) {
    if (d < 1) throw DomainError("dimension must be >= 1");
    if (m < 2) throw DomainError("uniform grid needs at least 2 nodes per axis");
    double predicted = std::pow(static_cast<double>(m), d);
    if (predicted > static_cast<double>(node_cap))
        throw DomainError("uniform grid would exceed the node cap");

    const double h = 2.0 / static_cast<double>(m - 1);
    std::vector<double> x1(static_cast<std::size_t>(m)), w1(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
        x1[static_cast<std::size_t>(j)] = -1.0 + h * static_cast<double>(j);
        w1[static_cast<std::size_t>(j)] = (j == 0 || j == m - 1) ? h / 2.0 : h;
    }
    x1.front() = -1.0;
    x1.back() = 1.0;

    QuadratureRule r;
    r.dimension = d;
    r.level = m;
    r.kind = QuadKind::uniform;
    std::vector<std::size_t> pos(static_cast<std::size_t>(d), 0);
    std::vector<double> pt(static_cast<std::size_t>(d));
    bool done = false;
    while (!done) {
        double w = 1.0;
        for (int a = 0; a < d; ++a) {
            pt[static_cast<std::size_t>(a)] = x1[pos[static_cast<std::size_t>(a)]];
            w *= w1[pos[static_cast<std::size_t>(a)]];
        }
        r.nodes.push_back(pt);
        r.weights.push_back(w);
        int a = 0;
        for (; a < d; ++a) {
            if (++pos[static_cast<std::size_t>(a)] < static_cast<std::size_t>(m)) break;
            pos[static_cast<std::size_t>(a)] = 0;
        }
        done = (a == d);
    }
    return r;
}

// Quadrature sum; rejects non-finite integrand values naming the node.
inline double integrate(const QuadratureRule& rule,
                        const std::function<double(const std::vector<double>&)>& f) {
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
        double v = f(rule.nodes[i]);
        if (!std::isfinite(v))
            throw NumericalError("non-finite integrand at quadrature node " + std::to_string(i));
        sum += v * rule.weights[i];
    }
    return sum;
}

} // namespace maxent
