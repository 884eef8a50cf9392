#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cavio {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid input: malformed files, violated invariants, bad arguments.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Failures of a numerical procedure on otherwise valid input.
class NumericalError : public Error {
public:
    using Error::Error;
};

class SingularSystemError : public NumericalError {
public:
    SingularSystemError(const std::string& what, double pivot)
        : NumericalError(what), pivot_(pivot) {}
    double pivot_magnitude() const noexcept { return pivot_; }

private:
    double pivot_;
};

class DegeneratePhaseError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Antiresonance or phase-jump features could not be located/tracked.
class TrackingError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class RankDeficiencyError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NonFiniteResidualError : public NumericalError {
public:
    NonFiniteResidualError(const std::string& what, std::size_t sample)
        : NumericalError(what), sample_(sample) {}
    std::size_t sample() const noexcept { return sample_; }

private:
    std::size_t sample_;
};

}  // namespace cavio
