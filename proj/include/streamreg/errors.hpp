#ifndef STREAMREG_ERRORS_HPP
#define STREAMREG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace streamreg {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside its admissible range (basis index, t outside T, bad config).
class DomainError : public Error {
public:
    using Error::Error;
};

/// The object is not in a state that supports the request (e.g. estimate before any data).
class StateError : public Error {
public:
    using Error::Error;
};

/// Quadrature or another numerical routine failed to converge.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Positive part of a density estimate integrates to zero.
class DegenerateDensityError : public Error {
public:
    using Error::Error;
};

/// Cholesky factorization of the penalized Gram system failed.
class IllConditionedError : public Error {
public:
    IllConditionedError(const std::string& what, double min_eigenvalue)
        : Error(what), min_eigenvalue_(min_eigenvalue) {}
    double min_eigenvalue() const noexcept { return min_eigenvalue_; }

private:
    double min_eigenvalue_;
};

/// Every grid point of a cross-validation search failed.
class NoFeasibleTuning : public Error {
public:
    using Error::Error;
};

/// Checkpoint or request payload is malformed.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace streamreg

#endif
