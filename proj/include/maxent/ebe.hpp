#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "maxent/deflation.hpp"
#include "maxent/errors.hpp"
#include "maxent/problem.hpp"

namespace maxent {

struct EbeConfig {
    double tol_newton = 1e-1;     // Tol_1, scalar-Newton working tolerance
    double tol_predictor = 1e-10; // Tol_2, corrector / acceptance tolerance
    double lambda_min = 1e-8;     // minimum tracking sub-step
    double tol_ladder_floor = 1e-15;
    double zero_derivative = 1e-14;
    int max_inner_iters = 200;
    int max_newton_iters = 50; // per corrector
    bool deflation_enabled = true;
    std::uint64_t seed = 0;
    std::optional<LagrangeVector> initial_alpha; // defaults to zeros
};

enum class ConstraintStatus { pending, solved, discarded };

struct TraceRecord {
    int outer = 0; // constraint index i (0-based)
    int inner = 0; // inner iterate m
    LagrangeVector lambda;
    double residual_i = 0.0;
    double working_tol = 0.0;
};

struct DiscardRecord {
    Eigen::Index index = 0;
    std::string reason;
};

struct SolveReport {
    LagrangeVector lambda;
    double z = 0.0;
    std::vector<Eigen::Index> retained;
    std::vector<DiscardRecord> discarded;
    double final_moment_error = 0.0;
    int total_inner_iterations = 0;
    double wall_seconds = 0.0;
    bool all_retained = false;
    std::vector<TraceRecord> trace;
    // Contraction diagnostics, recorded but not enforced. The spectral bound
    // uses singular values as a conservative proxy for the eigenvalue
    // ordering of the nonsymmetric head Jacobian.
    double contraction_bound = std::numeric_limits<double>::quiet_NaN();
    double smallest_head_singular_value = std::numeric_limits<double>::quiet_NaN();
};

class EbeSolver {
public:
    EbeSolver(const MomentProblem& problem, EbeConfig cfg)
        : p_(problem), cfg_(std::move(cfg)), rng_(cfg_.seed) {}

    SolveReport solve() {
        auto t0 = std::chrono::steady_clock::now();
        const Eigen::Index n = p_.size();

        lambda_ = cfg_.initial_alpha ? *cfg_.initial_alpha : LagrangeVector::Zero(n);
        if (lambda_.size() != n) throw DomainError("initial_alpha size mismatch");
        alpha_ = lambda_;
        status_.assign(static_cast<std::size_t>(n), ConstraintStatus::pending);
        head_.clear();

        SolveReport rep;
        for (Eigen::Index i = 0; i < n; ++i) {
            LagrangeVector snapshot = lambda_;
            std::string reason;
            if (solve_constraint(i, rep, reason)) {
                status_[static_cast<std::size_t>(i)] = ConstraintStatus::solved;
                head_.push_back(i);
                rep.retained.push_back(i);
            } else {
                // head unchanged: roll back everything this step touched
                lambda_ = snapshot;
                status_[static_cast<std::size_t>(i)] = ConstraintStatus::discarded;
                rep.discarded.push_back({i, reason});
            }
        }

        rep.lambda = lambda_;
        rep.z = p_.normalize(lambda_).first;
        rep.final_moment_error = p_.moment_error(lambda_, head_);
        rep.all_retained = rep.discarded.empty();
        fill_diagnostics(rep);
        rep.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return rep;
    }

    // One scalar Newton solve on equation i with the head frozen, down to
    // |F_i| < tol. Exposed for tests; the main loop interleaves single
    // steps with head tracking instead.
    static double scalar_newton_solve(const MomentProblem& p, LagrangeVector lambda,
                                      Eigen::Index i, double tol, const EbeConfig& cfg,
                                      std::vector<double>* iterates = nullptr) {
        for (int it = 0; it < cfg.max_newton_iters; ++it) {
            auto ev = p.eval_residuals(lambda, {i});
            double fi = ev.residuals[0];
            if (std::abs(fi) < tol) return lambda[i];
            double dfi = p.eval_jacobian(lambda, {i}, {i}, &ev.exp_weights)(0, 0);
            if (std::abs(dfi) < cfg.zero_derivative) throw ZeroDerivativeError(dfi);
            lambda[i] -= fi / dfi;
            if (iterates) iterates->push_back(lambda[i]);
        }
        throw NoConvergenceError("scalar Newton exhausted its iteration budget");
    }

private:
    const MomentProblem& p_;
    EbeConfig cfg_;
    std::mt19937_64 rng_;

    LagrangeVector lambda_;
    LagrangeVector alpha_;
    std::vector<ConstraintStatus> status_;
    IndexSet head_; // solved constraint indices, in solve order

    double residual_at(Eigen::Index i) const {
        return p_.eval_residuals(lambda_, {i}).residuals[0];
    }

    // Adaptive tolerance ladder: run the scalar-Newton/tracking cycle at
    // the working tolerance, dividing it by ten until Tol_2 is met or the
    // ladder underflows.
    bool solve_constraint(Eigen::Index i, SolveReport& rep, std::string& reason) {
        double tol = cfg_.tol_newton;
        while (true) {
            if (!newton_cycle(i, tol, rep, reason)) return false;
            double fi;
            try {
                fi = std::abs(residual_at(i));
            } catch (const NumericalError& e) {
                reason = e.what();
                return false;
            }
            if (fi < cfg_.tol_predictor) return true;
            tol /= 10.0;
            if (tol < cfg_.tol_ladder_floor) {
                reason = "tolerance ladder exhausted at |F_i| = " + std::to_string(fi);
                return false;
            }
        }
    }

    // Inner loop: one scalar Newton step on lambda_i, then homotopy
    // tracking of the solved head along the step, until |F_i| < tol.
    bool newton_cycle(Eigen::Index i, double tol, SolveReport& rep, std::string& reason) {
        for (int m = 0; m < cfg_.max_inner_iters; ++m) {
            double fi, dfi;
            try {
                auto ev = p_.eval_residuals(lambda_, {i});
                fi = ev.residuals[0];
                dfi = p_.eval_jacobian(lambda_, {i}, {i}, &ev.exp_weights)(0, 0);
            } catch (const NumericalError& e) {
                reason = e.what();
                return false;
            }
            rep.trace.push_back({static_cast<int>(i), m, lambda_, std::abs(fi), tol});
            if (std::abs(fi) < tol) return true;
            if (std::abs(dfi) < cfg_.zero_derivative) {
                reason = "scalar Newton derivative vanished";
                return false;
            }
            ++rep.total_inner_iterations;
            double step = -fi / dfi;
            if (!adaptive_track(i, step, reason)) return false;
        }
        reason = "inner iteration cap reached";
        return false;
    }

    ParametricSystem head_system(Eigen::Index i) {
        return ParametricSystem{
            [this, i](const Eigen::VectorXd& h, double t) {
                LagrangeVector lam = lambda_;
                for (std::size_t a = 0; a < head_.size(); ++a) lam[head_[a]] = h[static_cast<Eigen::Index>(a)];
                lam[i] = t;
                return p_.eval_residuals(lam, head_).residuals;
            },
            [this, i](const Eigen::VectorXd& h, double t) {
                LagrangeVector lam = lambda_;
                for (std::size_t a = 0; a < head_.size(); ++a) lam[head_[a]] = h[static_cast<Eigen::Index>(a)];
                lam[i] = t;
                return p_.eval_jacobian(lam, head_, head_);
            },
            [this, i](const Eigen::VectorXd& h, double t) {
                LagrangeVector lam = lambda_;
                for (std::size_t a = 0; a < head_.size(); ++a) lam[head_[a]] = h[static_cast<Eigen::Index>(a)];
                lam[i] = t;
                return Eigen::VectorXd(p_.eval_jacobian(lam, head_, {i}).col(0));
            }};
    }

    Eigen::VectorXd head_values() const {
        Eigen::VectorXd h(static_cast<Eigen::Index>(head_.size()));
        for (std::size_t a = 0; a < head_.size(); ++a) h[static_cast<Eigen::Index>(a)] = lambda_[head_[a]];
        return h;
    }

    void commit_head(const Eigen::VectorXd& h) {
        for (std::size_t a = 0; a < head_.size(); ++a) lambda_[head_[a]] = h[static_cast<Eigen::Index>(a)];
    }

    // Algorithm: track the head along lambda_i over the full step, halving
    // the sub-step on predictor-corrector failure; discard when the
    // sub-step underflows lambda_min. Deflation + Richardson jump handles
    // singular head Jacobians (fold points).
    bool adaptive_track(Eigen::Index i, double full_step, std::string& reason) {
        const double target = lambda_[i] + full_step;
        double step = full_step;
        int consecutive_failures = 0;
        int deflations = 0;

        while (true) {
            double remaining = target - lambda_[i];
            if (remaining == 0.0) return true;
            if (std::abs(step) > std::abs(remaining) || step * remaining < 0.0) step = remaining;

            double t_try = (step == remaining) ? target : lambda_[i] + step;
            bool singular = false;
            try {
                attempt_step(i, t_try);
                lambda_[i] = t_try;
                consecutive_failures = 0;
                continue;
            } catch (const SingularMatrixError&) {
                singular = true;
            } catch (const NumericalError&) {
                // overflow or corrector non-convergence: halve below
            }

            ++consecutive_failures;
            bool try_deflation = cfg_.deflation_enabled && !head_.empty() && deflations < 3 &&
                                 (singular || consecutive_failures >= 2);
            if (try_deflation && attempt_deflation_jump(i, t_try)) {
                ++deflations;
                consecutive_failures = 0;
                continue;
            }

            step /= 2.0;
            if (std::abs(step) < cfg_.lambda_min) {
                reason = "tracking step fell below lambda_min";
                return false;
            }
        }
    }

    // Predictor-corrector over one sub-step; commits the corrected head on
    // success, throws on failure.
    void attempt_step(Eigen::Index i, double t_try) {
        if (head_.empty()) {
            LagrangeVector lam = lambda_;
            lam[i] = t_try;
            p_.exp_weights(lam); // overflow check is the only failure mode
            return;
        }
        double dt = t_try - lambda_[i];
        auto ev = p_.eval_residuals(lambda_, head_);
        Eigen::MatrixXd j = p_.eval_jacobian(lambda_, head_, head_, &ev.exp_weights);
        Eigen::VectorXd col = p_.eval_jacobian(lambda_, head_, {i}, &ev.exp_weights).col(0);

        Eigen::VectorXd predicted = head_values() - solve_linear(j, col * dt);
        Eigen::VectorXd corrected = corrector(i, predicted, t_try);
        commit_head(corrected);
    }

    // Newton on the head system at fixed lambda_i, from the predicted head,
    // until ||F_head|| < Tol_2. A prediction already inside tolerance is
    // returned unchanged.
    Eigen::VectorXd corrector(Eigen::Index i, Eigen::VectorXd h, double t) {
        auto sys = head_system(i);
        for (int it = 0; it <= cfg_.max_newton_iters; ++it) {
            Eigen::VectorXd f = sys.residual(h, t);
            if (f.norm() < cfg_.tol_predictor) return h;
            if (it == cfg_.max_newton_iters) break;
            Eigen::MatrixXd j = sys.jacobian_head(h, t);
            h += solve_linear(j, -f);
        }
        throw NoConvergenceError("corrector Newton exhausted its iteration budget");
    }

    // Deflation at an estimated fold: solve the augmented system for the
    // bifurcation point, reflect the failed attempt through it, and
    // re-correct on the far side. Returns false when the pathway fails;
    // the caller falls back to step halving.
    bool attempt_deflation_jump(Eigen::Index i, double t_failed) {
        auto sys = head_system(i);
        Eigen::VectorXd attempt_head = head_values();
        for (int resample = 0; resample < 3; ++resample) {
            Eigen::VectorXd xi = random_unit_vector(static_cast<Eigen::Index>(head_.size()), rng_);
            try {
                BifurcationPoint bp = deflate_bifurcation(sys, attempt_head, t_failed, xi);
                auto [jump_head, jump_t] = richardson_jump(bp, attempt_head, t_failed);
                Eigen::VectorXd corrected = corrector(i, jump_head, jump_t);
                commit_head(corrected);
                lambda_[i] = jump_t;
                return true;
            } catch (const NumericalError&) {
                continue; // resample xi
            }
        }
        return false;
    }

    void fill_diagnostics(SolveReport& rep) const {
        if (head_.size() < 2) return;
        Eigen::Index i = head_.back();
        IndexSet prev(head_.begin(), head_.end() - 1);
        try {
            auto ev = p_.eval_residuals(lambda_, head_);
            Eigen::MatrixXd j_prev = p_.eval_jacobian(lambda_, prev, prev, &ev.exp_weights);
            Eigen::VectorXd col = p_.eval_jacobian(lambda_, prev, {i}, &ev.exp_weights).col(0);
            Eigen::VectorXd row = p_.eval_jacobian(lambda_, {i}, prev, &ev.exp_weights).row(0);
            double dfi = p_.eval_jacobian(lambda_, {i}, {i}, &ev.exp_weights)(0, 0);
            rep.contraction_bound = std::abs(col.dot(row) / dfi);
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(j_prev);
            rep.smallest_head_singular_value = svd.singularValues().tail(1)(0);
        } catch (const NumericalError&) {
            // leave diagnostics as NaN
        }
    }
};

inline SolveReport ebe_solve(const MomentProblem& p, const EbeConfig& cfg = {}) {
    return EbeSolver(p, cfg).solve();
}

} // namespace maxent
