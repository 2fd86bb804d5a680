#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace cslab {

using complexd = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

// Error taxonomy shared by all modules.  The CLI maps these onto exit codes.
struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct InvalidState : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Requested target lies outside the physically attainable range (e.g. a mean
// energy at or beyond the spectral supremum).
struct InfeasibleTarget : std::domain_error {
    using std::domain_error::domain_error;
};
struct SolverFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Integration domain too small to hold the weight (boundary mass detected).
struct DomainTooSmall : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cslab
