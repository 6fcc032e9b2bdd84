#pragma once

#include <array>
#include <future>
#include <string>
#include <vector>

#include "chaoskit/errors.hpp"
#include "chaoskit/system.hpp"

namespace chaoskit {

/// Curvature, torsion and flow-curvature values at one state.
struct CurvatureSample {
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    double phi = 0.0;
    double phi_c = 0.0;
    double phi_t = 0.0;
    Vec3 at;
};

/// Frenet curvature |v1 x v2| / |v1|^3. Undefined at equilibria.
template <SmoothField F>
double curvature_k1(const F& sys, const Vec3& s) {
    const DerivativeBundle b = eval_bundle(sys, s);
    const double speed = norm(b.v1);
    if (speed <= 1e-12) throw UndefinedAtEquilibrium("curvature_k1: |Xdot| <= 1e-12");
    return norm(cross(b.v1, b.v2)) / (speed * speed * speed);
}

/// Frenet torsion det(v1, v2, v3) / |v1 x v2|^2. Undefined when velocity and
/// acceleration are colinear (degenerate osculating plane).
template <SmoothField F>
double torsion_k2(const F& sys, const Vec3& s) {
    const DerivativeBundle b = eval_bundle(sys, s);
    const Vec3 c = cross(b.v1, b.v2);
    const double c2 = norm2(c);
    if (norm(c) <= 1e-12) throw UndefinedTorsion("torsion_k2: |Xdot ^ Xddot| <= 1e-12");
    return det3(b.v1, b.v2, b.v3) / c2;
}

struct FlowCurvature {
    double phi = 0.0;
    double phi_c = 0.0;
    double phi_t = 0.0;
};

/// Flow-curvature scalar phi = det(v1, v2, v3) and its split into the part
/// built from the Jacobian alone (phi_c) and the part carrying dJ/dt (phi_t).
/// phi = phi_c + phi_t holds identically for the closed forms.
template <SmoothField F>
FlowCurvature flow_curvature(const F& sys, const Vec3& s) {
    const DerivativeBundle b = eval_bundle(sys, s);
    FlowCurvature r;
    r.phi = det3(b.v1, b.v2, b.v3);
    r.phi_c = dot(b.v1, cross(b.jac * b.v1, b.jac * b.v2));
    r.phi_t = dot(b.v1, cross(b.v2, b.jac_dot * b.v1));
    return r;
}

template <SmoothField F>
CurvatureSample curvature_sample(const F& sys, const Vec3& s) {
    CurvatureSample cs;
    cs.at = s;
    cs.kappa1 = curvature_k1(sys, s);
    cs.kappa2 = torsion_k2(sys, s);
    const FlowCurvature fc = flow_curvature(sys, s);
    cs.phi = fc.phi;
    cs.phi_c = fc.phi_c;
    cs.phi_t = fc.phi_t;
    return cs;
}

enum class ManifoldField { Phi, PhiC, PhiT, K1 };

inline const char* to_string(ManifoldField f) {
    switch (f) {
        case ManifoldField::Phi: return "phi";
        case ManifoldField::PhiC: return "phic";
        case ManifoldField::PhiT: return "phit";
        case ManifoldField::K1: return "k1";
    }
    return "?";
}

struct GridSpec {
    Vec3 lo;
    Vec3 hi;
    std::array<int, 3> resolution{2, 2, 2};

    void validate() const {
        for (int a = 0; a < 3; ++a) {
            if (resolution[static_cast<std::size_t>(a)] < 2)
                throw InvalidBox("GridSpec: resolution must be >= 2 per axis");
            if (!(hi[a] > lo[a])) throw InvalidBox("GridSpec: degenerate box");
        }
    }

    Vec3 node(int i, int j, int k) const {
        auto coord = [&](int idx, int n) {
            return lo[idx] + (hi[idx] - lo[idx]) * static_cast<double>(n) /
                                 static_cast<double>(resolution[static_cast<std::size_t>(idx)] - 1);
        };
        return {coord(0, i), coord(1, j), coord(2, k)};
    }
};

/// Scalar samples over a regular grid, x-fastest storage order.
struct ScalarGrid {
    GridSpec spec;
    ManifoldField field = ManifoldField::Phi;
    std::vector<double> values;

    double at(int i, int j, int k) const {
        const auto [nx, ny, nz] = spec.resolution;
        (void)nz;
        return values[static_cast<std::size_t>(i) +
                      static_cast<std::size_t>(nx) *
                          (static_cast<std::size_t>(j) + static_cast<std::size_t>(ny) *
                                                             static_cast<std::size_t>(k))];
    }

    /// Trilinear interpolation; s must lie inside the box.
    double trilinear(const Vec3& s) const {
        const auto [nx, ny, nz] = spec.resolution;
        auto cell = [&](double v, double lo, double hi, int n, int& i0, double& f) {
            const double u = (v - lo) / (hi - lo) * (n - 1);
            i0 = std::clamp(static_cast<int>(std::floor(u)), 0, n - 2);
            f = u - i0;
        };
        int i0, j0, k0;
        double fx, fy, fz;
        cell(s.x, spec.lo.x, spec.hi.x, nx, i0, fx);
        cell(s.y, spec.lo.y, spec.hi.y, ny, j0, fy);
        cell(s.z, spec.lo.z, spec.hi.z, nz, k0, fz);
        double acc = 0.0;
        for (int dk = 0; dk < 2; ++dk)
            for (int dj = 0; dj < 2; ++dj)
                for (int di = 0; di < 2; ++di) {
                    const double w = (di ? fx : 1.0 - fx) * (dj ? fy : 1.0 - fy) *
                                     (dk ? fz : 1.0 - fz);
                    acc += w * at(i0 + di, j0 + dj, k0 + dk);
                }
        return acc;
    }
};

namespace detail {

template <SmoothField F>
double manifold_value(const F& sys, const Vec3& s, ManifoldField which) {
    const DerivativeBundle b = eval_bundle(sys, s);
    switch (which) {
        case ManifoldField::Phi: return det3(b.v1, b.v2, b.v3);
        case ManifoldField::PhiC: return dot(b.v1, cross(b.jac * b.v1, b.jac * b.v2));
        case ManifoldField::PhiT: return dot(b.v1, cross(b.v2, b.jac_dot * b.v1));
        case ManifoldField::K1: return norm(cross(b.v1, b.v2));
    }
    return 0.0;
}

}  // namespace detail

/// Sample one manifold field over a grid for external isosurface plotting.
/// K1 samples |Xdot ^ Xddot| whose zero set is the colinearity locus.
/// Parallel over z-slabs; output independent of the thread count.
template <SmoothField F>
ScalarGrid sample_manifold_grid(const F& sys, const GridSpec& spec, ManifoldField which,
                                int threads = 1) {
    spec.validate();
    ScalarGrid grid;
    grid.spec = spec;
    grid.field = which;
    const auto [nx, ny, nz] = spec.resolution;
    grid.values.assign(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) *
                           static_cast<std::size_t>(nz),
                       0.0);

    auto fill_slab = [&](int k_begin, int k_end) {
        for (int k = k_begin; k < k_end; ++k)
            for (int j = 0; j < ny; ++j)
                for (int i = 0; i < nx; ++i) {
                    const std::size_t idx =
                        static_cast<std::size_t>(i) +
                        static_cast<std::size_t>(nx) *
                            (static_cast<std::size_t>(j) +
                             static_cast<std::size_t>(ny) * static_cast<std::size_t>(k));
                    grid.values[idx] = detail::manifold_value(sys, spec.node(i, j, k), which);
                }
    };

    threads = std::max(1, threads);
    if (threads == 1 || nz < 2 * threads) {
        fill_slab(0, nz);
        return grid;
    }
    std::vector<std::future<void>> jobs;
    const int slab = (nz + threads - 1) / threads;
    for (int k0 = 0; k0 < nz; k0 += slab)
        jobs.push_back(std::async(std::launch::async, fill_slab, k0, std::min(nz, k0 + slab)));
    for (auto& j : jobs) j.get();
    return grid;
}

}  // namespace chaoskit
