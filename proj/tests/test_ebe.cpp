#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "maxent/ebe.hpp"
#include "maxent/newton.hpp"

using namespace maxent;

namespace {

MomentProblem cubic_problem(int level = 7) {
    auto b = enumerate_multi_indices(1, 3);
    auto rule = clenshaw_curtis_1d(level);
    LagrangeVector lam(3);
    lam << 1.0, 1.0, 1.0;
    auto f = moments_of_exponential_density(b, lam, rule);
    return MomentProblem(b, f, rule);
}

// Final lambda snapshot recorded while constraint i was being solved.
LagrangeVector last_trace_for(const SolveReport& rep, int outer) {
    LagrangeVector out;
    for (const auto& t : rep.trace)
        if (t.outer == outer) out = t.lambda;
    return out;
}

} // namespace

TEST_CASE("scalar Newton on the cubic problem first equation") {
    auto p = cubic_problem();
    LagrangeVector lam = LagrangeVector::Zero(3);
    EbeConfig cfg;
    std::vector<double> iterates;
    double root = EbeSolver::scalar_newton_solve(p, lam, 0, cfg.tol_predictor, cfg, &iterates);
    // first step 3*f_1 = 1.76, converging to 2.3078
    REQUIRE(iterates.size() >= 2);
    CHECK(iterates[0] == doctest::Approx(1.76).epsilon(0.01));
    CHECK(root == doctest::Approx(2.3078).epsilon(1e-3));
}

TEST_CASE("scalar Newton is a fixed point at a root") {
    // single even constraint with the uniform target: root at lambda = 0
    auto b = enumerate_multi_indices(1, 2);
    Eigen::VectorXd f(2);
    f << 0.0, 1.0 / 3.0;
    MomentProblem p(b, f, clenshaw_curtis_1d(6));
    EbeConfig cfg;
    LagrangeVector lam = LagrangeVector::Zero(2);
    double root = EbeSolver::scalar_newton_solve(p, lam, 1, cfg.tol_predictor, cfg);
    CHECK(std::abs(root) <= 1e-12);
}

TEST_CASE("EBE recovers the cubic density with known trajectory checkpoints") {
    auto p = cubic_problem();
    auto rep = ebe_solve(p);

    REQUIRE(rep.retained.size() == 3);
    CHECK(rep.discarded.empty());
    LagrangeVector exact(3);
    exact << 1.0, 1.0, 1.0;
    CHECK((rep.lambda - exact).norm() <= 1e-8);

    // checkpoints at the end of each outer step, 2 decimal places
    auto c1 = last_trace_for(rep, 0);
    CHECK(c1[0] == doctest::Approx(2.30).epsilon(0.005));
    CHECK(c1[1] == 0.0);
    CHECK(c1[2] == 0.0);
    auto c2 = last_trace_for(rep, 1);
    CHECK(c2[0] == doctest::Approx(1.58).epsilon(0.01));
    CHECK(c2[1] == doctest::Approx(1.43).epsilon(0.01));
    CHECK(c2[2] == 0.0);
    auto c3 = last_trace_for(rep, 2);
    CHECK(c3[0] == doctest::Approx(1.0).epsilon(0.01));
    CHECK(c3[1] == doctest::Approx(1.0).epsilon(0.01));
    CHECK(c3[2] == doctest::Approx(1.0).epsilon(0.01));

    // contraction diagnostics recorded
    CHECK(std::isfinite(rep.contraction_bound));
    CHECK(rep.smallest_head_singular_value > 0.0);
}

TEST_CASE("one tracked scalar-Newton step lands on a known trajectory point") {
    auto p = cubic_problem();
    // converged i=1 head, then one scalar Newton step on equation 2
    LagrangeVector lam = LagrangeVector::Zero(3);
    EbeConfig cfg;
    lam[0] = EbeSolver::scalar_newton_solve(p, lam, 0, cfg.tol_predictor, cfg);

    auto ev = p.eval_residuals(lam, {1});
    double dfi = p.eval_jacobian(lam, {1}, {1}, &ev.exp_weights)(0, 0);
    double l2_new = lam[1] - ev.residuals[0] / dfi;
    CHECK(l2_new == doctest::Approx(1.21).epsilon(0.01));

    // predictor + corrector for the head
    Eigen::MatrixXd j = p.eval_jacobian(lam, {0}, {0});
    Eigen::VectorXd col = p.eval_jacobian(lam, {0}, {1}).col(0);
    double predicted = lam[0] - solve_linear(j, col * (l2_new - lam[1]))[0];

    LagrangeVector corr = lam;
    corr[0] = predicted;
    corr[1] = l2_new;
    for (int it = 0; it < 20; ++it) {
        auto r = p.eval_residuals(corr, {0});
        if (std::abs(r.residuals[0]) < cfg.tol_predictor) break;
        double d = p.eval_jacobian(corr, {0}, {0}, &r.exp_weights)(0, 0);
        corr[0] -= r.residuals[0] / d;
    }
    CHECK(corr[0] == doctest::Approx(1.67).epsilon(0.01));
}

TEST_CASE("predictor with zero displacement returns the head unchanged") {
    auto p = cubic_problem();
    LagrangeVector lam(3);
    lam << 2.3, 0.0, 0.0;
    Eigen::MatrixXd j = p.eval_jacobian(lam, {0}, {0});
    Eigen::VectorXd col = p.eval_jacobian(lam, {0}, {1}).col(0);
    double predicted = lam[0] - solve_linear(j, col * 0.0)[0];
    CHECK(predicted == lam[0]);
}

TEST_CASE("predictor tangent matches the implicit-curve slope") {
    // head equation F_1(l1, l2) = 0 defines l1 = h(l2); the predictor slope
    // -J^{-1} F_{1,l2} must match a finite-difference slope of h.
    auto b = enumerate_multi_indices(1, 2);
    Eigen::VectorXd f(2);
    f << 0.1, 0.4;
    MomentProblem p(b, f, clenshaw_curtis_1d(7));
    EbeConfig cfg;

    auto solve_head = [&](double l2) {
        LagrangeVector lam(2);
        lam << 0.0, l2;
        return EbeSolver::scalar_newton_solve(p, lam, 0, 1e-13, cfg);
    };
    double l2_0 = 0.3;
    double h0 = solve_head(l2_0);

    LagrangeVector at(2);
    at << h0, l2_0;
    Eigen::MatrixXd j = p.eval_jacobian(at, {0}, {0});
    Eigen::VectorXd col = p.eval_jacobian(at, {0}, {1}).col(0);
    double slope = -solve_linear(j, col)[0];

    double dh = 1e-5;
    double fd = (solve_head(l2_0 + dh) - solve_head(l2_0 - dh)) / (2.0 * dh);
    CHECK(slope == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("corrector is exact on a linear system in one iteration") {
    // F(h) = A h - b through the ParametricSystem interface
    Eigen::MatrixXd A(2, 2);
    A << 2.0, 1.0, 0.5, 3.0;
    Eigen::VectorXd b(2);
    b << 1.0, -2.0;
    ParametricSystem sys{
        [&](const Eigen::VectorXd& h, double) { return Eigen::VectorXd(A * h - b); },
        [&](const Eigen::VectorXd&, double) { return A; },
        [&](const Eigen::VectorXd&, double) { return Eigen::VectorXd::Zero(2); }};
    Eigen::VectorXd h0(2);
    h0 << 5.0, -5.0;
    Eigen::VectorXd h1 = h0 + solve_linear(A, -(A * h0 - b));
    CHECK((A * h1 - b).norm() <= 1e-12);
}

TEST_CASE("adaptive tolerance ladder discards an infeasible constraint") {
    // No density on [-1,1] has mean 0.9 and second moment 0.1 (variance < 0).
    auto b = enumerate_multi_indices(1, 2);
    Eigen::VectorXd f(2);
    f << 0.9, 0.1;
    MomentProblem p(b, f, clenshaw_curtis_1d(7));
    auto rep = ebe_solve(p);
    CHECK(rep.discarded.size() == 1);
    CHECK(rep.retained.size() == 1);
    CHECK_FALSE(rep.all_retained);
    // whichever constraint survives is satisfied
    CHECK(p.moment_error(rep.lambda, rep.retained) <= 1e-8);
}

TEST_CASE("deflation on the quadratic fold model") {
    // F(l1, l2) = l1^2 - l2: fold at the origin with null vector v = 1.
    ParametricSystem fold{
        [](const Eigen::VectorXd& h, double t) {
            Eigen::VectorXd f(1);
            f[0] = h[0] * h[0] - t;
            return f;
        },
        [](const Eigen::VectorXd& h, double) {
            Eigen::MatrixXd j(1, 1);
            j(0, 0) = 2.0 * h[0];
            return j;
        },
        [](const Eigen::VectorXd&, double) {
            Eigen::VectorXd c(1);
            c[0] = -1.0;
            return c;
        }};

    Eigen::VectorXd xi(1);
    xi << 1.0;
    Eigen::VectorXd start(1);
    start << -0.2;
    auto bp = deflate_bifurcation(fold, start, 0.04, xi);
    CHECK(std::abs(bp.head[0]) <= 1e-10);
    CHECK(std::abs(bp.param) <= 1e-10);
    CHECK(bp.null_vector[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(bp.augmented_residual_norm <= 1e-10);

    // G(0, 0, 1) = 0 exactly for xi = (1)
    Eigen::VectorXd zero(1), one(1);
    zero << 0.0;
    one << 1.0;
    CHECK(detail::deflated_residual(fold, zero, 0.0, one, xi).norm() == 0.0);

    SUBCASE("Richardson jump reflects through the fold") {
        Eigen::VectorXd attempt(1);
        attempt << -0.2;
        auto [jh, jt] = richardson_jump(bp, attempt, 0.04);
        CHECK(jh[0] == doctest::Approx(0.2).epsilon(1e-8));
        CHECK(jt == doctest::Approx(-0.04).epsilon(1e-8));

        // degenerate reflection: attempt at the fold returns the fold
        auto [sh, st] = richardson_jump(bp, bp.head, bp.param);
        CHECK(sh[0] == doctest::Approx(bp.head[0]));
        CHECK(st == doctest::Approx(bp.param));

        // the jumped head seeds the mirror branch: Newton at t = 0.04 from
        // jh converges to +sqrt(t), the sign-flipped counterpart of start.
        double h = jh[0], t = 0.04;
        for (int it = 0; it < 50; ++it) {
            double f = h * h - t;
            if (std::abs(f) < 1e-12) break;
            h -= f / (2.0 * h);
        }
        CHECK(h > 0.0);
        CHECK(h == doctest::Approx(0.2).epsilon(1e-8));
    }
}

TEST_CASE("EBE invariants on the cubic problem") {
    auto p = cubic_problem();
    EbeConfig cfg;
    auto rep = ebe_solve(p, cfg);

    SUBCASE("fixed point: every retained residual below Tol_2 at termination") {
        for (Eigen::Index k : rep.retained)
            CHECK(std::abs(p.eval_residuals(rep.lambda, {k}).residuals[0]) <= cfg.tol_predictor);
    }
    SUBCASE("determinism: identical inputs and seed give identical reports") {
        auto rep2 = ebe_solve(p, cfg);
        CHECK(rep.lambda == rep2.lambda);
        CHECK(rep.z == rep2.z);
        REQUIRE(rep.trace.size() == rep2.trace.size());
        for (std::size_t t = 0; t < rep.trace.size(); ++t)
            CHECK(rep.trace[t].lambda == rep2.trace[t].lambda);
    }
    SUBCASE("tail freeze: lambda beyond the current outer step never moves") {
        for (const auto& t : rep.trace)
            for (Eigen::Index j = static_cast<Eigen::Index>(t.outer) + 1; j < 3; ++j)
                CHECK(t.lambda[j] == 0.0);
    }
    SUBCASE("monotone activation") {
        CHECK(rep.retained.size() + rep.discarded.size() == 3);
    }
}

TEST_CASE("full Newton baseline") {
    auto p = cubic_problem();
    SUBCASE("converges on the cubic problem from zero") {
        auto rep = newton_full_solve(p);
        REQUIRE(rep.converged);
        LagrangeVector exact(3);
        exact << 1.0, 1.0, 1.0;
        CHECK((rep.lambda - exact).norm() <= 1e-8);
    }
    SUBCASE("single uniform constraint converges immediately") {
        auto b = enumerate_multi_indices(1, 2);
        Eigen::VectorXd f(2);
        f << 0.0, 1.0 / 3.0;
        MomentProblem pu(b, f, clenshaw_curtis_1d(6));
        auto rep = newton_full_solve(pu);
        REQUIRE(rep.converged);
        CHECK(rep.iterations <= 3);
        CHECK(rep.lambda.norm() <= 1e-10);
    }
    SUBCASE("agrees with EBE where both converge") {
        auto ebe = ebe_solve(p);
        auto newt = newton_full_solve(p);
        REQUIRE(newt.converged);
        CHECK((ebe.lambda - newt.lambda).norm() <= 1e-6);
        CHECK(std::abs(p.moment_error(ebe.lambda) - newt.moment_error) <= 1e-8);
    }
}
