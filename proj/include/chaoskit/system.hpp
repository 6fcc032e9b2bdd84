#pragma once

#include <concepts>
#include <vector>

#include "chaoskit/errors.hpp"
#include "chaoskit/linalg.hpp"

namespace chaoskit {

/// Any autonomous 3D vector field.
template <typename F>
concept FlowField = requires(const F& f, const Vec3& s) {
    { f.field(s) } -> std::convertible_to<Vec3>;
};

/// Vector field with closed-form Jacobian and Jacobian time derivative,
/// enough to evaluate derivatives of the flow up to third order.
template <typename F>
concept SmoothField = FlowField<F> && requires(const F& f, const Vec3& s) {
    { f.jacobian(s) } -> std::convertible_to<Mat3>;
    { f.jacobian_dot(s) } -> std::convertible_to<Mat3>;
};

/// Sign of the memristor nonlinearity in the z equation.
enum class Nonlinearity { Plus, Minus };

inline const char* to_string(Nonlinearity v) { return v == Nonlinearity::Plus ? "plus" : "minus"; }

// =============================================================================
// Memristive oscillator
// =============================================================================
//
//   xdot = y
//   ydot = -x/3 + y/2 - y z^2 / 2
//   zdot =  y - alpha z - y z     (Plus)
//   zdot = -y - alpha z + y z     (Minus)
//
// The two variants differ only by the sign of the y(1 - z) term; the Minus
// attractor is the Plus attractor rotated by pi in the x-y plane.
class SystemDef {
  public:
    explicit SystemDef(double alpha, Nonlinearity variant = Nonlinearity::Plus)
        : alpha_(alpha), variant_(variant) {
        if (!std::isfinite(alpha) || alpha < 0.0)
            throw std::invalid_argument("SystemDef: alpha must be finite and >= 0");
    }

    double alpha() const { return alpha_; }
    Nonlinearity variant() const { return variant_; }

    Vec3 field(const Vec3& s) const {
        const double sgn = variant_ == Nonlinearity::Plus ? 1.0 : -1.0;
        return {s.y, -s.x / 3.0 + s.y / 2.0 - s.y * s.z * s.z / 2.0,
                sgn * (s.y - s.y * s.z) - alpha_ * s.z};
    }

    Mat3 jacobian(const Vec3& s) const {
        const double sgn = variant_ == Nonlinearity::Plus ? 1.0 : -1.0;
        Mat3 j;
        j(0, 0) = 0.0;
        j(0, 1) = 1.0;
        j(0, 2) = 0.0;
        j(1, 0) = -1.0 / 3.0;
        j(1, 1) = 0.5 - s.z * s.z / 2.0;
        j(1, 2) = -s.y * s.z;
        j(2, 0) = 0.0;
        j(2, 1) = sgn * (1.0 - s.z);
        j(2, 2) = -alpha_ - sgn * s.y;
        return j;
    }

    /// dJ/dt along the flow: only entries depending on y or z move.
    Mat3 jacobian_dot(const Vec3& s) const {
        const double sgn = variant_ == Nonlinearity::Plus ? 1.0 : -1.0;
        const Vec3 f = field(s);
        Mat3 jd;
        jd(1, 1) = -s.z * f.z;
        jd(1, 2) = -(f.y * s.z + s.y * f.z);
        jd(2, 1) = -sgn * f.z;
        jd(2, 2) = -sgn * f.y;
        return jd;
    }

  private:
    double alpha_;
    Nonlinearity variant_;
};

/// Flow derivatives at a point: v1 = Xdot, v2 = Xddot, v3 = Xdddot, plus the
/// Jacobian and its time derivative they were assembled from. The closed
/// forms satisfy v2 = jac v1 and v3 = jac v2 + jac_dot v1 identically.
struct DerivativeBundle {
    Vec3 v1;
    Vec3 v2;
    Vec3 v3;
    Mat3 jac;
    Mat3 jac_dot;
};

template <FlowField F>
Vec3 eval_field(const F& sys, const Vec3& s) {
    if (!is_finite(s)) throw InvalidState("eval_field: non-finite state");
    return sys.field(s);
}

template <SmoothField F>
DerivativeBundle eval_bundle(const F& sys, const Vec3& s) {
    if (!is_finite(s)) throw InvalidState("eval_bundle: non-finite state");
    DerivativeBundle b;
    b.v1 = sys.field(s);
    b.jac = sys.jacobian(s);
    b.jac_dot = sys.jacobian_dot(s);
    b.v2 = b.jac * b.v1;
    b.v3 = b.jac * b.v2 + b.jac_dot * b.v1;
    return b;
}

/// Fixed points, solved analytically: xdot = 0 forces y = 0, then ydot = 0
/// forces x = 0 and zdot = 0 forces alpha z = 0. For alpha != 0 the origin is
/// the only solution; alpha = 0 leaves a whole line and is reported as an
/// error rather than enumerated.
inline std::vector<Vec3> find_fixed_points(const SystemDef& sys) {
    if (sys.alpha() == 0.0)
        throw DegenerateParameter("find_fixed_points: alpha = 0 gives a line of fixed points");
    return {Vec3{0.0, 0.0, 0.0}};
}

}  // namespace chaoskit
