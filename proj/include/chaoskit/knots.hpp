#pragma once

#include <cstddef>
#include <vector>

#include "chaoskit/linalg.hpp"

namespace chaoskit::knots {

enum class Plane { XY, XZ };

inline const char* to_string(Plane p) { return p == Plane::XY ? "xy" : "xz"; }

/// One transversal crossing of two projected polyline segments.
struct Crossing2D {
    double u = 0.0;        // projection-plane position
    double v = 0.0;
    std::size_t seg_a = 0;
    std::size_t seg_b = 0;
    int sign = 0;          // signed per the frozen orientation convention
    bool a_over = false;   // true when curve A has the larger third coordinate
};

/// Result of one crossing scan. When `generic` is false the projection hit a
/// degeneracy (parallel overlap, endpoint hit, depth tie) and the caller
/// should perturb and rescan.
struct CrossingScan {
    std::vector<Crossing2D> crossings;
    bool generic = true;
    const char* reason = "";

    int sign_sum() const {
        int s = 0;
        for (const auto& c : crossings) s += c.sign;
        return s;
    }
};

/// Crossings between two closed polylines in the given projection.
CrossingScan inter_crossings(const std::vector<Vec3>& a, const std::vector<Vec3>& b, Plane plane);

/// Self-crossings of one closed polyline (adjacent segments skipped); the
/// signed sum is the directional writhe of the projection.
CrossingScan self_crossings(const std::vector<Vec3>& a, Plane plane);

/// Rodrigues rotation of a whole polyline about a unit axis.
std::vector<Vec3> rotated(const std::vector<Vec3>& pts, const Vec3& axis, double angle);

/// Signed angle from a to b around unit axis n (both roughly orthogonal to n).
double signed_angle(const Vec3& a, const Vec3& b, const Vec3& n);

}  // namespace chaoskit::knots
