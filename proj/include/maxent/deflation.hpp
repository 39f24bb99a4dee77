#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <utility>

#include <Eigen/Dense>

#include "maxent/errors.hpp"
#include "maxent/problem.hpp"

namespace maxent {

// A head system F(head, t) = 0 tracked along a scalar parameter t. The EBE
// solver instantiates this for F_{1..i-1} with t = lambda_i; unit tests
// instantiate analytic toy models (e.g. the quadratic fold).
struct ParametricSystem {
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> residual;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)> jacobian_head;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> jacobian_param;
};

struct BifurcationPoint {
    Eigen::VectorXd head;
    double param = 0.0;
    Eigen::VectorXd null_vector;
    double augmented_residual_norm = 0.0;
};

namespace detail {

// Augmented residual G = [F; J v; xi^T v - 1].
inline Eigen::VectorXd deflated_residual(const ParametricSystem& sys, const Eigen::VectorXd& head,
                                         double t, const Eigen::VectorXd& v,
                                         const Eigen::VectorXd& xi) {
    Eigen::Index k = head.size();
    Eigen::VectorXd g(2 * k + 1);
    g.head(k) = sys.residual(head, t);
    g.segment(k, k) = sys.jacobian_head(head, t) * v;
    g[2 * k] = xi.dot(v) - 1.0;
    return g;
}

} // namespace detail

// Solves the deflated system G(head, t, v) = 0 by full Newton from the last
// tracking attempt, with v0 the least-singular-vector estimate of the head
// Jacobian. The (Jv) block's derivative is approximated by central finite
// differences on the Jacobian; the residual G itself is exact, so Newton
// still converges to the stated tolerance. The unit-norm vector xi rules
// out the trivial v = 0 solution.
inline BifurcationPoint deflate_bifurcation(const ParametricSystem& sys,
                                            const Eigen::VectorXd& head0, double t0,
                                            const Eigen::VectorXd& xi,
                                            double tol = 1e-12, int max_iters = 100) {
    const Eigen::Index k = head0.size();

    Eigen::MatrixXd j0 = sys.jacobian_head(head0, t0);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(j0, Eigen::ComputeFullV);
    Eigen::VectorXd v = svd.matrixV().col(k - 1);
    double xv = xi.dot(v);
    if (std::abs(xv) < 1e-12) v = -v, xv = -xv;
    v /= xv; // start on the normalization plane

    Eigen::VectorXd head = head0;
    double t = t0;

    for (int iter = 0; iter < max_iters; ++iter) {
        Eigen::VectorXd g = detail::deflated_residual(sys, head, t, v, xi);
        if (g.norm() < tol) break;

        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * k + 1, 2 * k + 1);
        Eigen::MatrixXd j = sys.jacobian_head(head, t);
        jac.block(0, 0, k, k) = j;
        jac.block(0, k, k, 1) = sys.jacobian_param(head, t);

        // d(Jv)/d(head_l) and d(Jv)/dt by central differences
        for (Eigen::Index l = 0; l <= k; ++l) {
            double h = 1e-6;
            Eigen::VectorXd hp = head, hm = head;
            double tp = t, tm = t;
            if (l < k) {
                h *= 1.0 + std::abs(head[l]);
                hp[l] += h;
                hm[l] -= h;
            } else {
                h *= 1.0 + std::abs(t);
                tp += h;
                tm -= h;
            }
            Eigen::VectorXd col =
                (sys.jacobian_head(hp, tp) * v - sys.jacobian_head(hm, tm) * v) / (2.0 * h);
            jac.block(k, l, k, 1) = col;
        }
        jac.block(k, k + 1, k, k) = j;
        jac.block(2 * k, k + 1, 1, k) = xi.transpose();

        Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
        Eigen::VectorXd dx = lu.solve(-g);
        if (!dx.allFinite())
            throw NoConvergenceError("deflated Newton produced non-finite step");
        head += dx.head(k);
        t += dx[k];
        v += dx.tail(k);
    }

    BifurcationPoint bp;
    bp.head = head;
    bp.param = t;
    bp.null_vector = v;
    bp.augmented_residual_norm = detail::deflated_residual(sys, head, t, v, xi).norm();
    if (bp.augmented_residual_norm > 1e-10)
        throw NoConvergenceError("deflated Newton did not reach tolerance");
    return bp;
}

// Unit-norm random direction from a seeded generator, for the xi vector of
// the deflated system.
inline Eigen::VectorXd random_unit_vector(Eigen::Index k, std::mt19937_64& gen) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd xi(k);
    for (Eigen::Index i = 0; i < k; ++i) xi[i] = normal(gen);
    double n = xi.norm();
    if (n == 0.0) xi[0] = 1.0, n = 1.0;
    return xi / n;
}

// Reflects the last pre-fold attempt through the bifurcation point, seeding
// Newton on the continuation branch.
inline std::pair<Eigen::VectorXd, double> richardson_jump(const BifurcationPoint& bp,
                                                          const Eigen::VectorXd& attempt_head,
                                                          double attempt_param) {
    return {2.0 * bp.head - attempt_head, 2.0 * bp.param - attempt_param};
}

} // namespace maxent
