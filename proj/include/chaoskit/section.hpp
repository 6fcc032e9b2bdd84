#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chaoskit/integrate.hpp"
#include "chaoskit/system.hpp"

namespace chaoskit {

// Poincare section: y = 0 crossed with ydot < 0. Crossing states are stored
// as (t, x, z) with y identically zero.

struct Crossing {
    double t = 0.0;
    double x = 0.0;
    double z = 0.0;
};

struct CrossingSeries {
    std::vector<Crossing> crossings;
    double alpha = 0.0;
    Nonlinearity variant = Nonlinearity::Plus;
    IntegratorConfig cfg;

    std::size_t size() const { return crossings.size(); }
    std::vector<double> xs() const {
        std::vector<double> v;
        v.reserve(crossings.size());
        for (const auto& c : crossings) v.push_back(c.x);
        return v;
    }
};

/// Integrate from s0 and collect exactly `count` refined section crossings
/// after the transient. Throws InsufficientCrossings when the time budget
/// (transient + max_time) runs out first.
CrossingSeries compute_crossings(const SystemDef& sys, const Vec3& s0, const IntegratorConfig& cfg,
                                 std::size_t count);

/// Same, but re-locating crossings on a stored trajectory.
CrossingSeries compute_crossings(const Trajectory& traj, std::size_t count);

/// One (x_n, x_{n+1}) pair of the first-return map, keeping the section z of
/// both crossings so orbit refinement and itinerary evaluation can be seeded
/// from map points.
struct MapPoint {
    double x = 0.0;
    double x_next = 0.0;
    double z = 0.0;
    double z_next = 0.0;
};

/// One monotonic branch of the first-return map.
struct Branch {
    std::size_t first = 0;   // index into ReturnMap::points (sorted by x)
    std::size_t count = 0;
    int slope_sign = 0;      // +1 increasing, -1 decreasing
    double x_lo = 0.0;
    double x_hi = 0.0;
};

struct ReturnMap {
    std::vector<MapPoint> points;        // sorted by x
    std::vector<double> critical_points; // extrema separating branches
    std::vector<Branch> branches;
    double alpha = 0.0;
    Nonlinearity variant = Nonlinearity::Plus;

    /// Branch index containing x (nearest branch when x falls in a gap).
    int branch_of(double x) const;

    /// Map value by linear interpolation on the sorted points.
    double eval(double x) const;

    double x_min() const { return points.front().x; }
    double x_max() const { return points.back().x; }
};

/// Build the first-return map from >= 500 crossings: consecutive pairs,
/// monotonic branch segmentation (5-point slope window, branches under 10
/// points absorbed) and critical points from 7-point parabola fits.
ReturnMap build_return_map(const CrossingSeries& cs);

struct AlphaSlice {
    double alpha = 0.0;
    std::vector<double> xs;      // post-transient crossing x values
    int period = 0;              // 0 = chaotic/unresolved, >0 detected period
    double extent = 0.0;         // max x - min x over crossings
    bool diverged = false;
    bool insufficient = false;
};

struct BifurcationDiagram {
    std::vector<AlphaSlice> slices;
    std::vector<double> crisis_alphas;  // x-extent jump > 50% between neighbors

    const AlphaSlice* slice_at(double alpha) const;
};

struct SweepOptions {
    std::size_t crossings_per_alpha = 200;
    int threads = 1;
    bool continuation = true;     // seed each alpha from the previous one
    Vec3 seed{0.1, 0.0, 0.0};
    std::size_t chunk = 16;       // continuation runs serially inside a chunk
    int max_period = 32;
    double period_tol = 1e-6;
    double crisis_jump = 0.5;
};

/// Bifurcation diagram over [alpha_lo, alpha_hi] with `resolution` grid
/// points. Divergence at some alpha is recorded per slice, never fatal.
BifurcationDiagram bifurcation_sweep(double alpha_lo, double alpha_hi, std::size_t resolution,
                                     const IntegratorConfig& cfg, Nonlinearity variant,
                                     const SweepOptions& opts);

/// Detected period of a crossing-x sequence (0 if none up to max_period).
int detect_period(const std::vector<double>& xs, int max_period, double tol);

struct AttractorClass {
    bool chaotic = false;
    int period = 0;
    std::vector<double> signature;  // sorted distinct crossing x values
    double x_lo = 0.0;
    double x_hi = 0.0;
    std::size_t n_seeds = 0;
};

struct SeedOutcome {
    Vec3 seed;
    int class_id = -1;  // -1 when ambiguous or diverged
    bool ambiguous = false;
    bool diverged = false;
};

struct BistabilityReport {
    std::vector<AttractorClass> classes;
    std::vector<SeedOutcome> seeds;
};

struct BistabilityOptions {
    std::size_t crossings = 128;
    int max_period = 32;
    double period_tol = 1e-6;
    double cluster_tol = 1e-3;
    double chaos_extent = 0.25;  // minimum x extent to call a class chaotic
    int threads = 1;
};

/// Classify the asymptotic attractor reached from each seed and cluster the
/// outcomes into distinct attractor classes.
BistabilityReport bistability_scan(const SystemDef& sys, const std::vector<Vec3>& seeds,
                                   const IntegratorConfig& cfg, const BistabilityOptions& opts);

/// First-return map as a function of section coordinates, evaluated by
/// integration. Used by the orbit refinement.
class SectionMap {
  public:
    SectionMap(const SystemDef& sys, const IntegratorConfig& cfg);

    struct Point {
        double x = 0.0;
        double z = 0.0;
        double t = 0.0;  // return time accumulated over the requested returns
    };

    /// Image of (x, z) under `returns` iterations of the first-return map.
    Point map(double x, double z, int returns = 1) const;

    const SystemDef& system() const { return sys_; }
    const IntegratorConfig& config() const { return cfg_; }

  private:
    SystemDef sys_;
    IntegratorConfig cfg_;
};

}  // namespace chaoskit
