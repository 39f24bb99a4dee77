#pragma once

#include <stdexcept>
#include <string>

namespace maxent {

// Base class for all numerical failures raised by this library. The EBE
// solver catches these to drive its step-halving / discard logic.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

class DomainError : public NumericalError {
public:
    explicit DomainError(const std::string& what) : NumericalError(what) {}
};

// A dense linear solve detected a pivot ratio below the singularity
// threshold. Carries the pivot-ratio indicator that fired.
class SingularMatrixError : public NumericalError {
public:
    SingularMatrixError(const std::string& what, double indicator)
        : NumericalError(what), indicator_(indicator) {}
    double indicator() const { return indicator_; }

private:
    double indicator_;
};

// The exponent of the density exceeded the double-precision exp() range.
// Carries the offending node index and exponent value.
class ExpOverflowError : public NumericalError {
public:
    ExpOverflowError(std::size_t node, double exponent)
        : NumericalError("exponent overflow at quadrature node " + std::to_string(node) +
                         ": " + std::to_string(exponent)),
          node_(node), exponent_(exponent) {}
    std::size_t node() const { return node_; }
    double exponent() const { return exponent_; }

private:
    std::size_t node_;
    double exponent_;
};

// Scalar Newton hit a derivative too close to zero.
class ZeroDerivativeError : public NumericalError {
public:
    explicit ZeroDerivativeError(double derivative)
        : NumericalError("scalar Newton derivative is numerically zero: " +
                         std::to_string(derivative)) {}
};

// An iterative solve exhausted its iteration budget.
class NoConvergenceError : public NumericalError {
public:
    explicit NoConvergenceError(const std::string& what) : NumericalError(what) {}
};

} // namespace maxent
