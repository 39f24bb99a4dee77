#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "maxent/errors.hpp"
#include "maxent/multi_index.hpp"
#include "maxent/quadrature.hpp"

namespace maxent {

using LagrangeVector = Eigen::VectorXd;
using IndexSet = std::vector<Eigen::Index>;

inline constexpr double kExpOverflowLimit = 700.0;
inline constexpr double kPivotRatioThreshold = 1e-12;

// Per-axis affine map from original data coordinates onto [-1,1].
struct AffineRescale {
    std::vector<double> lo;
    std::vector<double> hi;

    double to_cube(double y, std::size_t axis) const {
        return -1.0 + 2.0 * (y - lo[axis]) / (hi[axis] - lo[axis]);
    }
    double from_cube(double x, std::size_t axis) const {
        return lo[axis] + (x + 1.0) * (hi[axis] - lo[axis]) / 2.0;
    }
    // d(cube)/d(original), the Jacobian factor per axis.
    double jacobian_factor(std::size_t axis) const { return 2.0 / (hi[axis] - lo[axis]); }
};

struct ResidualEvaluation {
    Eigen::VectorXd residuals;   // F_j over the active set
    Eigen::ArrayXd exp_weights;  // exp(sum_k lambda_k c_k(x_i)) over all nodes
};

// Dense solve with partial pivoting; fires SingularMatrixError when the
// pivot ratio min|U_ii|/max|U_ii| falls below the threshold. That signal
// is what triggers the deflation pathway in the EBE solver.
inline Eigen::VectorXd solve_linear(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    if (!A.allFinite()) throw NumericalError("linear system matrix has non-finite entries");
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    Eigen::VectorXd diag = lu.matrixLU().diagonal().cwiseAbs();
    double dmax = diag.maxCoeff();
    double dmin = diag.minCoeff();
    double ratio = (dmax > 0.0) ? dmin / dmax : 0.0;
    if (ratio < kPivotRatioThreshold)
        throw SingularMatrixError("near-singular linear system, pivot ratio " +
                                  std::to_string(ratio), ratio);
    return lu.solve(b);
}

// The moment problem: basis + target moments + quadrature rule. Owns the
// cached basis matrix used by all residual and Jacobian evaluations.
class MomentProblem {
public:
    MomentProblem(BasisSet basis, Eigen::VectorXd targets, QuadratureRule rule,
                  std::optional<AffineRescale> rescale = std::nullopt)
        : basis_(std::move(basis)), targets_(std::move(targets)), rule_(std::move(rule)),
          rescale_(std::move(rescale)) {
        if (static_cast<std::size_t>(targets_.size()) != basis_.size())
            throw DomainError("target vector length must match the basis size");
        if (!targets_.allFinite()) throw DomainError("targets must be finite");
        if (rule_.dimension != basis_.dimension)
            throw DomainError("quadrature dimension must match the basis dimension");
        for (std::size_t j = 0; j < basis_.size(); ++j) {
            const auto& idx = basis_.indices[j];
            bool pure_even = true;
            for (int e : idx.exponents)
                if (e % 2 != 0) { pure_even = false; break; }
            if (pure_even && targets_[static_cast<Eigen::Index>(j)] <= 0.0)
                throw DomainError("even-power moment target must be positive");
        }
        basis_matrix_ = eval_basis_matrix(basis_, rule_.nodes);
        weights_ = Eigen::Map<const Eigen::VectorXd>(rule_.weights.data(),
                                                     static_cast<Eigen::Index>(rule_.weights.size()));
    }

    const BasisSet& basis() const { return basis_; }
    const Eigen::VectorXd& targets() const { return targets_; }
    const QuadratureRule& rule() const { return rule_; }
    const std::optional<AffineRescale>& rescale() const { return rescale_; }
    const Eigen::MatrixXd& basis_matrix() const { return basis_matrix_; }
    Eigen::Index size() const { return targets_.size(); }

    static IndexSet full_index_set(Eigen::Index n) {
        IndexSet s(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] = i;
        return s;
    }

    // exp(sum_k lambda_k c_k(x_i)) over all nodes; the frozen tail entries
    // of lambda participate in the exponent.
    Eigen::ArrayXd exp_weights(const LagrangeVector& lambda) const {
        Eigen::ArrayXd t = (basis_matrix_ * lambda).array();
        for (Eigen::Index i = 0; i < t.size(); ++i)
            if (t[i] > kExpOverflowLimit)
                throw ExpOverflowError(static_cast<std::size_t>(i), t[i]);
        return t.exp();
    }

    // F_j(lambda) = sum_i (c_j(x_i) - f_j) exp(...) w_i over the active set.
    ResidualEvaluation eval_residuals(const LagrangeVector& lambda, const IndexSet& active) const {
        Eigen::ArrayXd e = exp_weights(lambda);
        Eigen::VectorXd ew = (e * weights_.array()).matrix();
        double mass = ew.sum();
        Eigen::VectorXd r(static_cast<Eigen::Index>(active.size()));
        for (std::size_t a = 0; a < active.size(); ++a) {
            Eigen::Index j = active[a];
            r[static_cast<Eigen::Index>(a)] = basis_matrix_.col(j).dot(ew) - targets_[j] * mass;
        }
        return {std::move(r), std::move(e)};
    }

    ResidualEvaluation eval_residuals(const LagrangeVector& lambda) const {
        return eval_residuals(lambda, full_index_set(size()));
    }

    // J(j,k) = sum_i (c_j(x_i) - f_j) c_k(x_i) exp(...) w_i over rows x cols.
    // Reuses exp_weights from a paired residual evaluation when given.
    Eigen::MatrixXd eval_jacobian(const LagrangeVector& lambda, const IndexSet& rows,
                                  const IndexSet& cols,
                                  const Eigen::ArrayXd* cached_exp = nullptr) const {
        Eigen::ArrayXd e = cached_exp ? *cached_exp : exp_weights(lambda);
        Eigen::VectorXd ew = (e * weights_.array()).matrix();
        auto Br = basis_matrix_(Eigen::all, rows);
        auto Bc = basis_matrix_(Eigen::all, cols);
        Eigen::MatrixXd m = Br.transpose() * ew.asDiagonal() * Bc;
        Eigen::VectorXd u = Bc.transpose() * ew;
        for (std::size_t a = 0; a < rows.size(); ++a)
            m.row(static_cast<Eigen::Index>(a)) -= targets_[rows[a]] * u.transpose();
        return m;
    }

    Eigen::MatrixXd eval_jacobian(const LagrangeVector& lambda, const IndexSet& active,
                                  const Eigen::ArrayXd* cached_exp = nullptr) const {
        return eval_jacobian(lambda, active, active, cached_exp);
    }

    // Directional second derivative: row j of d(J v)/d(lambda_l) for rows
    // j, direction v over `dir` columns, derivative columns `cols`. Used by
    // the deflated-system Newton.
    Eigen::MatrixXd eval_jacobian_action_derivative(const LagrangeVector& lambda,
                                                    const IndexSet& rows, const IndexSet& dir,
                                                    const IndexSet& cols,
                                                    const Eigen::VectorXd& v,
                                                    const Eigen::ArrayXd* cached_exp = nullptr) const {
        Eigen::ArrayXd e = cached_exp ? *cached_exp : exp_weights(lambda);
        Eigen::ArrayXd q = (basis_matrix_(Eigen::all, dir) * v).array(); // (C_dir v)_i
        Eigen::VectorXd ewq = (e * weights_.array() * q).matrix();
        auto Br = basis_matrix_(Eigen::all, rows);
        auto Bc = basis_matrix_(Eigen::all, cols);
        Eigen::MatrixXd m = Br.transpose() * ewq.asDiagonal() * Bc;
        Eigen::VectorXd u = Bc.transpose() * ewq;
        for (std::size_t a = 0; a < rows.size(); ++a)
            m.row(static_cast<Eigen::Index>(a)) -= targets_[rows[a]] * u.transpose();
        return m;
    }

    // Normalization factor and the normalized density on [-1,1]^d.
    std::pair<double, std::function<double(const std::vector<double>&)>>
    normalize(const LagrangeVector& lambda) const {
        Eigen::ArrayXd e = exp_weights(lambda);
        double z = (e * weights_.array()).sum();
        LagrangeVector lam = lambda;
        BasisSet b = basis_;
        auto density = [lam, b, z](const std::vector<double>& x) {
            double t = 0.0;
            for (std::size_t j = 0; j < b.size(); ++j)
                t += lam[static_cast<Eigen::Index>(j)] * eval_monomial(b.indices[j], x.data());
            return std::exp(t) / z;
        };
        return {z, density};
    }

    // Density in original data coordinates (affine Jacobian factor applied).
    std::function<double(const std::vector<double>&)>
    density_original(const LagrangeVector& lambda) const {
        if (!rescale_) throw DomainError("problem has no rescale record");
        auto [z, dens] = normalize(lambda);
        AffineRescale r = *rescale_;
        int d = basis_.dimension;
        return [dens, r, d](const std::vector<double>& y) {
            std::vector<double> x(static_cast<std::size_t>(d));
            double jac = 1.0;
            for (int k = 0; k < d; ++k) {
                x[static_cast<std::size_t>(k)] = r.to_cube(y[static_cast<std::size_t>(k)],
                                                           static_cast<std::size_t>(k));
                jac *= r.jacobian_factor(static_cast<std::size_t>(k));
            }
            return dens(x) * jac;
        };
    }

    // l2 norm of the normalized moment mismatch over the active set.
    double moment_error(const LagrangeVector& lambda, const IndexSet& active) const {
        Eigen::ArrayXd e = exp_weights(lambda);
        Eigen::VectorXd ew = (e * weights_.array()).matrix();
        double z = ew.sum();
        double sq = 0.0;
        for (Eigen::Index j : active) {
            double mj = basis_matrix_.col(j).dot(ew) / z;
            double dj = mj - targets_[j];
            sq += dj * dj;
        }
        return std::sqrt(sq);
    }

    double moment_error(const LagrangeVector& lambda) const {
        return moment_error(lambda, full_index_set(size()));
    }

private:
    BasisSet basis_;
    Eigen::VectorXd targets_;
    QuadratureRule rule_;
    std::optional<AffineRescale> rescale_;
    Eigen::MatrixXd basis_matrix_;
    Eigen::VectorXd weights_;
};

// Target moments of a density rho(x) = exp(sum lambda_j c_j(x)) / Z
// computed by quadrature: f_j = (int c_j rho) / (int rho).
inline Eigen::VectorXd moments_of_exponential_density(const BasisSet& basis,
                                                      const LagrangeVector& lambda,
                                                      const QuadratureRule& rule) {
    Eigen::MatrixXd c = eval_basis_matrix(basis, rule.nodes);
    Eigen::ArrayXd t = (c * lambda).array();
    double tmax = t.maxCoeff();
    Eigen::ArrayXd e = (t - tmax).exp(); // stable against overflow; tmax cancels
    Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(rule.weights.data(),
                                                          static_cast<Eigen::Index>(rule.weights.size()));
    Eigen::VectorXd ew = (e * w.array()).matrix();
    double z = ew.sum();
    return (c.transpose() * ew) / z;
}

} // namespace maxent
