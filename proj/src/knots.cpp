#include "chaoskit/knots.hpp"

#include <algorithm>
#include <cmath>

namespace chaoskit::knots {

namespace {

// Global handedness of the crossing-sign convention. Fixed once against the
// reference orbit pair of the alpha = 0.98 attractor and never re-fit.
constexpr double kHandedness = 1.0;

struct Proj {
    Plane plane;
    double u(const Vec3& p) const { return p.x; }
    double v(const Vec3& p) const { return plane == Plane::XY ? p.y : p.z; }
    double depth(const Vec3& p) const { return plane == Plane::XY ? p.z : p.y; }
};

struct Seg {
    double u0, v0, du, dv, d0, dd;  // projected endpoints/extent and depth
    double ulo, uhi;
    std::size_t index;
};

std::vector<Seg> build_segments(const std::vector<Vec3>& pts, const Proj& pr) {
    std::vector<Seg> segs;
    segs.reserve(pts.size());
    const std::size_t n = pts.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& p = pts[i];
        const Vec3& q = pts[(i + 1) % n];
        Seg s;
        s.u0 = pr.u(p);
        s.v0 = pr.v(p);
        s.du = pr.u(q) - s.u0;
        s.dv = pr.v(q) - s.v0;
        s.d0 = pr.depth(p);
        s.dd = pr.depth(q) - s.d0;
        s.ulo = std::min(s.u0, s.u0 + s.du);
        s.uhi = std::max(s.u0, s.u0 + s.du);
        s.index = i;
        if (s.du * s.du + s.dv * s.dv < 1e-30) continue;  // degenerate sample
        segs.push_back(s);
    }
    return segs;
}

// Uniform bucket index over the u axis for broad-phase pruning.
struct Buckets {
    double lo = 0.0, inv = 0.0;
    int n = 1;
    std::vector<std::vector<std::size_t>> cells;

    Buckets(const std::vector<Seg>& segs, int cells_hint) {
        double hi = -1e300;
        lo = 1e300;
        for (const auto& s : segs) {
            lo = std::min(lo, s.ulo);
            hi = std::max(hi, s.uhi);
        }
        if (!(hi > lo)) hi = lo + 1.0;
        n = std::max(1, cells_hint);
        inv = n / (hi - lo);
        cells.resize(static_cast<std::size_t>(n));
        for (std::size_t k = 0; k < segs.size(); ++k) {
            auto [c0, c1] = range(segs[k].ulo, segs[k].uhi);
            for (int c = c0; c <= c1; ++c) cells[static_cast<std::size_t>(c)].push_back(k);
        }
    }

    std::pair<int, int> range(double ulo, double uhi) const {
        int c0 = static_cast<int>((ulo - lo) * inv);
        int c1 = static_cast<int>((uhi - lo) * inv);
        return {std::clamp(c0, 0, n - 1), std::clamp(c1, 0, n - 1)};
    }
};

// Intersect two projected segments; fills t (on a), w (on b). Returns 1 on a
// proper interior crossing, 0 on no crossing, -1 on a degeneracy.
int intersect(const Seg& a, const Seg& b, double& t, double& w) {
    const double denom = a.du * b.dv - a.dv * b.du;
    const double qpu = b.u0 - a.u0;
    const double qpv = b.v0 - a.v0;
    const double scale = std::sqrt((a.du * a.du + a.dv * a.dv) * (b.du * b.du + b.dv * b.dv));
    if (std::abs(denom) < 1e-12 * scale) {
        // Parallel in projection: degenerate only if the lines nearly coincide.
        const double la = std::sqrt(a.du * a.du + a.dv * a.dv);
        const double lb = std::sqrt(b.du * b.du + b.dv * b.dv);
        const double dist = std::abs(qpu * a.dv - qpv * a.du) / la;
        if (dist < 1e-9 * (la + lb) && a.uhi >= b.ulo && b.uhi >= a.ulo) return -1;
        return 0;
    }
    t = (qpu * b.dv - qpv * b.du) / denom;
    w = (qpu * a.dv - qpv * a.du) / denom;
    if (t < -1e-12 || t > 1.0 + 1e-12 || w < -1e-12 || w > 1.0 + 1e-12) return 0;
    const double margin = 1e-9;
    if (t < margin || t > 1.0 - margin || w < margin || w > 1.0 - margin) return -1;
    return 1;
}

CrossingScan scan(const std::vector<Seg>& sa, const std::vector<Seg>& sb, bool same_curve,
                  std::size_t n_points, double depth_scale) {
    CrossingScan out;
    if (sa.empty() || sb.empty()) return out;
    Buckets buckets(sb, static_cast<int>(std::max<std::size_t>(16, sb.size() / 8)));
    std::vector<std::size_t> stamp(sb.size(), static_cast<std::size_t>(-1));

    for (std::size_t ia = 0; ia < sa.size(); ++ia) {
        const Seg& a = sa[ia];
        auto [c0, c1] = buckets.range(a.ulo, a.uhi);
        for (int c = c0; c <= c1; ++c) {
            for (std::size_t ib : buckets.cells[static_cast<std::size_t>(c)]) {
                if (stamp[ib] == ia) continue;
                stamp[ib] = ia;
                const Seg& b = sb[ib];
                if (same_curve) {
                    if (b.index <= a.index + 1 && a.index <= b.index + 1) continue;
                    if (a.index == 0 && b.index == n_points - 1) continue;
                    if (b.index == 0 && a.index == n_points - 1) continue;
                    if (b.index < a.index) continue;  // count each pair once
                }
                if (b.uhi < a.ulo || a.uhi < b.ulo) continue;
                double t, w;
                const int hit = intersect(a, b, t, w);
                if (hit == 0) continue;
                if (hit < 0) {
                    out.generic = false;
                    out.reason = "segment intersection degeneracy";
                    return out;
                }
                const double da = a.d0 + t * a.dd;
                const double db = b.d0 + w * b.dd;
                if (std::abs(da - db) < 1e-9 * std::max(1.0, depth_scale)) {
                    out.generic = false;
                    out.reason = "depth tie at crossing";
                    return out;
                }
                Crossing2D cr;
                cr.u = a.u0 + t * a.du;
                cr.v = a.v0 + t * a.dv;
                cr.seg_a = a.index;
                cr.seg_b = b.index;
                cr.a_over = da > db;
                const double cross_ou = cr.a_over ? a.du * b.dv - a.dv * b.du
                                                  : b.du * a.dv - b.dv * a.du;
                cr.sign = cross_ou > 0.0 ? static_cast<int>(kHandedness)
                                         : -static_cast<int>(kHandedness);
                out.crossings.push_back(cr);
            }
        }
    }
    return out;
}

double depth_extent(const std::vector<Vec3>& pts, const Proj& pr) {
    double lo = 1e300, hi = -1e300;
    for (const auto& p : pts) {
        lo = std::min(lo, pr.depth(p));
        hi = std::max(hi, pr.depth(p));
    }
    return hi - lo;
}

}  // namespace

CrossingScan inter_crossings(const std::vector<Vec3>& a, const std::vector<Vec3>& b, Plane plane) {
    const Proj pr{plane};
    const auto sa = build_segments(a, pr);
    const auto sb = build_segments(b, pr);
    const double dscale = std::max(depth_extent(a, pr), depth_extent(b, pr));
    return scan(sa, sb, false, 0, dscale);
}

CrossingScan self_crossings(const std::vector<Vec3>& a, Plane plane) {
    const Proj pr{plane};
    const auto sa = build_segments(a, pr);
    return scan(sa, sa, true, a.size(), depth_extent(a, pr));
}

std::vector<Vec3> rotated(const std::vector<Vec3>& pts, const Vec3& axis, double angle) {
    const Vec3 n = normalized(axis);
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    std::vector<Vec3> out;
    out.reserve(pts.size());
    for (const auto& p : pts)
        out.push_back(c * p + s * cross(n, p) + (1.0 - c) * dot(n, p) * n);
    return out;
}

double signed_angle(const Vec3& a, const Vec3& b, const Vec3& n) {
    return std::atan2(dot(n, cross(a, b)), dot(a, b));
}

}  // namespace chaoskit::knots
