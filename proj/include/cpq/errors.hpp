#ifndef CPQ_ERRORS_HPP
#define CPQ_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cpq {

/// A circuit or truncation description violates one of its invariants.
class InvalidSpec : public std::runtime_error {
public:
    explicit InvalidSpec(const std::string& what) : std::runtime_error(what) {}
};

/// The reduced capacitance matrix cannot be inverted.
class SingularMatrix : public std::runtime_error {
public:
    explicit SingularMatrix(const std::string& what) : std::runtime_error(what) {}
};

/// The requested charge basis exceeds the configured dimension ceiling.
class DimensionOverflow : public std::runtime_error {
public:
    DimensionOverflow(const std::string& what, long dim, long ceiling)
        : std::runtime_error(what), dim(dim), ceiling(ceiling) {}
    long dim;
    long ceiling;
};

/// The iterative eigensolver ran out of basis before reaching its tolerance.
class NoConvergence : public std::runtime_error {
public:
    NoConvergence(const std::string& what, int iterations, double residual)
        : std::runtime_error(what), iterations(iterations), residual(residual) {}
    int iterations;
    double residual;
};

/// A band-structure fit has no usable information content (degenerate input).
class FitDegenerate : public std::runtime_error {
public:
    explicit FitDegenerate(const std::string& what) : std::runtime_error(what) {}
};

/// A configuration document failed validation; `key` names the offender.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& key, const std::string& what)
        : std::runtime_error(key + ": " + what), key(key) {}
    std::string key;
};

} // namespace cpq

#endif
