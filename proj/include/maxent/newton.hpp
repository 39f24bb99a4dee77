#pragma once

#include <chrono>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "maxent/errors.hpp"
#include "maxent/problem.hpp"

namespace maxent {

struct NewtonConfig {
    double tol = 1e-10;
    int max_iters = 200;
    double backtrack = 0.5;
    int max_halvings = 30;
    bool damped = true; // false reproduces the classical undamped baseline
};

struct NewtonReport {
    bool converged = false;
    LagrangeVector lambda;
    double residual_norm = 0.0;
    double moment_error = 0.0;
    double z = 0.0;
    int iterations = 0;
    double wall_seconds = 0.0;
    std::string diverged_reason;
};

// Classical full-system Newton on F_n(lambda) = 0, optionally damped with a
// backtracking line search that never accepts a step increasing ||F||.
inline NewtonReport newton_full_solve(const MomentProblem& p, const NewtonConfig& cfg = {},
                                      LagrangeVector start = {}) {
    auto t0 = std::chrono::steady_clock::now();
    NewtonReport rep;
    LagrangeVector lambda = (start.size() == p.size()) ? start : LagrangeVector::Zero(p.size());
    auto active = MomentProblem::full_index_set(p.size());

    auto finish = [&](bool ok, const std::string& why) {
        rep.converged = ok;
        rep.lambda = lambda;
        rep.diverged_reason = why;
        if (ok) {
            rep.moment_error = p.moment_error(lambda);
            rep.z = p.normalize(lambda).first;
        }
        rep.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return rep;
    };

    double fnorm;
    try {
        fnorm = p.eval_residuals(lambda, active).residuals.norm();
    } catch (const NumericalError& e) {
        return finish(false, e.what());
    }

    for (int it = 0; it < cfg.max_iters; ++it) {
        rep.iterations = it;
        rep.residual_norm = fnorm;
        if (fnorm < cfg.tol) return finish(true, "");

        Eigen::VectorXd step;
        try {
            auto ev = p.eval_residuals(lambda, active);
            Eigen::MatrixXd j = p.eval_jacobian(lambda, active, &ev.exp_weights);
            step = solve_linear(j, -ev.residuals);
        } catch (const NumericalError& e) {
            return finish(false, e.what());
        }

        if (!cfg.damped) {
            lambda += step;
            try {
                fnorm = p.eval_residuals(lambda, active).residuals.norm();
            } catch (const NumericalError& e) {
                return finish(false, e.what());
            }
            if (!std::isfinite(fnorm)) return finish(false, "residual became non-finite");
            continue;
        }

        double t = 1.0;
        bool accepted = false;
        for (int h = 0; h <= cfg.max_halvings; ++h) {
            LagrangeVector trial = lambda + t * step;
            try {
                double fn = p.eval_residuals(trial, active).residuals.norm();
                if (fn < fnorm) {
                    lambda = trial;
                    fnorm = fn;
                    accepted = true;
                    break;
                }
            } catch (const NumericalError&) {
                // overflow along the ray: keep backtracking
            }
            t *= cfg.backtrack;
        }
        if (!accepted) return finish(false, "backtracking failed to reduce the residual");
    }
    if (fnorm < cfg.tol) return finish(true, "");
    return finish(false, "iteration budget exhausted");
}

} // namespace maxent
