#ifndef EVTACH_ERRORS_HPP
#define EVTACH_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace evtach {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file (bad row, bad header, bad JSON). Carries file/line context.
struct ParseError : Error {
    using Error::Error;
};

/// Structurally valid input that violates a documented invariant.
struct ValidationError : Error {
    using Error::Error;
};

/// Filesystem failure, message includes the offending path.
struct IoError : Error {
    using Error::Error;
};

/// An operation received an empty point/event set it cannot work on.
struct EmptyInput : Error {
    using Error::Error;
};

/// Heatmap has fewer candidate cells than requested centroids.
struct InsufficientCandidates : Error {
    using Error::Error;
};

/// Quantity is mathematically undefined for the given input (e.g. DBI at k=1).
struct Undefined : Error {
    using Error::Error;
};

/// No clustering candidate produced a usable partition.
struct ExtractionFailed : Error {
    using Error::Error;
};

/// Not enough events to detect the angle of rotational symmetry.
struct SymmetryUndetermined : Error {
    using Error::Error;
};

/// Covariance of the correspondence pairs has rank < 2; no rigid fit exists.
struct DegenerateGeometry : Error {
    using Error::Error;
};

/// A slice fell below the minimum event count required for registration.
struct TooFewEvents : Error {
    using Error::Error;
};

/// Every slice pair of a target failed to register.
struct EstimationFailed : Error {
    using Error::Error;
};

} // namespace evtach

#endif // EVTACH_ERRORS_HPP
