#pragma once

#include <stdexcept>
#include <string>

namespace itl {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (shape mismatch, bad index,
/// non-stochastic row, ...).
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Value iteration did not reach the requested residual.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double last_residual)
        : Error(what), last_residual_(last_residual) {}
    double last_residual() const noexcept { return last_residual_; }

private:
    double last_residual_;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Throws ContractViolation with `msg` unless `cond` holds.
inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractViolation(msg);
}

} // namespace itl
