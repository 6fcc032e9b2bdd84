#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace chaoskit {

/// Base class for all numerical / dynamical failure modes of the library.
/// Contract violations (bad arguments) use std::invalid_argument instead.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A state vector contained NaN or infinity.
struct InvalidState : Error {
    using Error::Error;
};

/// alpha = 0 degenerates the fixed-point set to a whole line.
struct DegenerateParameter : Error {
    using Error::Error;
};

/// Trajectory left the divergence radius.
struct Diverged : Error {
    Diverged(const std::string& msg, double t) : Error(msg), time(t) {}
    double time;
};

/// Adaptive step size underflowed.
struct StiffnessFailure : Error {
    StiffnessFailure(const std::string& msg, double t) : Error(msg), time(t) {}
    double time;
};

/// Event function does not change sign over the searched segment.
struct NoEvent : Error {
    using Error::Error;
};

/// Event root found with near-zero time derivative of the event function.
struct TangentialCrossing : Error {
    using Error::Error;
};

/// Curvature requested at an equilibrium point.
struct UndefinedAtEquilibrium : Error {
    using Error::Error;
};

/// Torsion requested where velocity and acceleration are colinear.
struct UndefinedTorsion : Error {
    using Error::Error;
};

/// Degenerate sampling box.
struct InvalidBox : Error {
    using Error::Error;
};

/// Fewer section crossings than requested before the time budget ran out.
struct InsufficientCrossings : Error {
    InsufficientCrossings(const std::string& msg, std::size_t n) : Error(msg), found(n) {}
    std::size_t found;
};

/// Return map cannot resolve a single monotonic branch.
struct SparseMap : Error {
    using Error::Error;
};

/// Crossing counting hit a non-transversal projection; retried internally,
/// thrown only when perturbation attempts are exhausted.
struct NonGenericProjection : Error {
    using Error::Error;
};

/// Orbit pair comes from different systems or parameter values.
struct MismatchedOrbits : Error {
    using Error::Error;
};

/// Itinerary symbol not present in the template alphabet.
struct UnknownSymbol : Error {
    using Error::Error;
};

}  // namespace chaoskit
