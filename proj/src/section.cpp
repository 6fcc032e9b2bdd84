#include "chaoskit/section.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

namespace chaoskit {

namespace {

double section_fn(const Vec3& s) { return s.y; }

struct CollectResult {
    CrossingSeries series;
    Vec3 final_state;
};

// Shared crossing collector; when allow_fewer is false, running out of time
// budget raises InsufficientCrossings.
CollectResult collect_crossings(const SystemDef& sys, const Vec3& s0, const IntegratorConfig& cfg,
                                std::size_t count, bool allow_fewer) {
    cfg.validate();
    CollectResult out;
    out.series.alpha = sys.alpha();
    out.series.variant = sys.variant();
    out.series.cfg = cfg;
    out.final_state = s0;

    EventStream<SystemDef> stream(sys, s0, cfg, section_fn, -1);
    stream.skip_until(cfg.transient_time);
    const double t_end = cfg.transient_time + cfg.max_time;
    while (out.series.size() < count) {
        auto hit = stream.next(t_end);
        if (!hit) {
            if (allow_fewer) break;
            throw InsufficientCrossings("compute_crossings: time budget exhausted after " +
                                            std::to_string(out.series.size()) + " of " +
                                            std::to_string(count) + " crossings",
                                        out.series.size());
        }
        out.series.crossings.push_back({hit->t, hit->state.x, hit->state.z});
        out.final_state = {hit->state.x, 0.0, hit->state.z};
    }
    return out;
}

}  // namespace

CrossingSeries compute_crossings(const SystemDef& sys, const Vec3& s0, const IntegratorConfig& cfg,
                                 std::size_t count) {
    return collect_crossings(sys, s0, cfg, count, false).series;
}

CrossingSeries compute_crossings(const Trajectory& traj, std::size_t count) {
    if (!traj.sys)
        throw std::invalid_argument("compute_crossings: trajectory has no system attached");
    CrossingSeries out;
    out.alpha = traj.sys->alpha();
    out.variant = traj.sys->variant();
    for (std::size_t i = 0; i + 1 < traj.size() && out.size() < count; ++i) {
        HermiteSegment seg{traj.times[i], traj.times[i + 1] - traj.times[i], traj.states[i],
                           traj.states[i + 1], traj.sys->field(traj.states[i]),
                           traj.sys->field(traj.states[i + 1])};
        if (auto hit = detail::event_in_dense(seg, section_fn, -1))
            out.crossings.push_back({hit->t, hit->state.x, hit->state.z});
    }
    if (out.size() < count)
        throw InsufficientCrossings("compute_crossings: trajectory holds only " +
                                        std::to_string(out.size()) + " crossings",
                                    out.size());
    return out;
}

// =============================================================================
// Return map
// =============================================================================

int ReturnMap::branch_of(double x) const {
    int best = -1;
    double best_dist = 1e300;
    for (std::size_t b = 0; b < branches.size(); ++b) {
        const Branch& br = branches[b];
        if (x >= br.x_lo && x <= br.x_hi) return static_cast<int>(b);
        const double d = x < br.x_lo ? br.x_lo - x : x - br.x_hi;
        if (d < best_dist) {
            best_dist = d;
            best = static_cast<int>(b);
        }
    }
    return best;
}

double ReturnMap::eval(double x) const {
    if (points.empty()) throw SparseMap("ReturnMap::eval on empty map");
    if (x <= points.front().x) return points.front().x_next;
    if (x >= points.back().x) return points.back().x_next;
    auto it = std::lower_bound(points.begin(), points.end(), x,
                               [](const MapPoint& p, double v) { return p.x < v; });
    const MapPoint& hi = *it;
    const MapPoint& lo = *(it - 1);
    if (hi.x == lo.x) return 0.5 * (lo.x_next + hi.x_next);
    const double f = (x - lo.x) / (hi.x - lo.x);
    return lo.x_next + f * (hi.x_next - lo.x_next);
}

namespace {

struct Run {
    int sign;
    std::size_t count;
};

// Local slope sign at every sorted map point. The window is the wider of the
// 5 nearest points and a fixed fraction of the x range: layered (multi-sheet)
// regions of near-crisis maps flip fine-scale slopes while the sheet trend
// stays monotonic, so the window must span the sheets.
std::vector<int> window_slope_signs(const std::vector<MapPoint>& pts, double window_frac) {
    const std::size_t n = pts.size();
    const double w = window_frac * (pts.back().x - pts.front().x);
    // Prefix sums for O(1) least-squares slopes over [lo, hi].
    std::vector<double> sx(n + 1, 0), sy(n + 1, 0), sxx(n + 1, 0), sxy(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        sx[i + 1] = sx[i] + pts[i].x;
        sy[i + 1] = sy[i] + pts[i].x_next;
        sxx[i + 1] = sxx[i] + pts[i].x * pts[i].x;
        sxy[i + 1] = sxy[i] + pts[i].x * pts[i].x_next;
    }
    std::vector<int> sign(n, 1);
    std::size_t lo = 0, hi = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (lo < n && pts[lo].x < pts[i].x - w) ++lo;
        while (hi < n && pts[hi].x <= pts[i].x + w) ++hi;
        std::size_t a = lo, b = hi;  // [a, b)
        if (b - a < 5) {             // widen to at least 5 points
            a = i >= 2 ? i - 2 : 0;
            b = std::min(n, a + 5);
            a = b >= 5 ? b - 5 : 0;
        }
        const double m = static_cast<double>(b - a);
        const double dsx = sx[b] - sx[a];
        const double dsy = sy[b] - sy[a];
        const double dsxx = sxx[b] - sxx[a];
        const double dsxy = sxy[b] - sxy[a];
        const double denom = m * dsxx - dsx * dsx;
        const double slope = denom != 0.0 ? (m * dsxy - dsx * dsy) / denom : 0.0;
        sign[i] = slope >= 0.0 ? 1 : -1;
    }
    return sign;
}

// Collapse the per-point slope signs into alternating monotonic runs. Runs
// below the population floor or spanning less than min_extent in x are
// absorbed into their neighborhood, smallest first.
std::vector<Run> segment_runs(const std::vector<int>& signs, const std::vector<MapPoint>& pts,
                              std::size_t min_pop, double min_extent) {
    std::vector<Run> runs;
    for (int s : signs) {
        if (!runs.empty() && runs.back().sign == s)
            ++runs.back().count;
        else
            runs.push_back({s, 1});
    }
    auto merge_same_neighbors = [&]() {
        for (std::size_t i = 0; i + 1 < runs.size();) {
            if (runs[i].sign == runs[i + 1].sign) {
                runs[i].count += runs[i + 1].count;
                runs.erase(runs.begin() + static_cast<std::ptrdiff_t>(i) + 1);
            } else {
                ++i;
            }
        }
    };
    auto extent_of = [&](std::size_t r) {
        std::size_t first = 0;
        for (std::size_t i = 0; i < r; ++i) first += runs[i].count;
        return pts[first + runs[r].count - 1].x - pts[first].x;
    };
    while (runs.size() > 1) {
        std::size_t weakest = runs.size();
        for (std::size_t i = 0; i < runs.size(); ++i) {
            if (runs[i].count >= min_pop && extent_of(i) >= min_extent) continue;
            if (weakest == runs.size() || runs[i].count < runs[weakest].count) weakest = i;
        }
        if (weakest == runs.size()) break;
        if (weakest == 0) {
            runs[1].count += runs[0].count;
            runs.erase(runs.begin());
        } else {
            runs[weakest - 1].count += runs[weakest].count;
            runs.erase(runs.begin() + static_cast<std::ptrdiff_t>(weakest));
        }
        merge_same_neighbors();
    }
    return runs;
}

// Least-squares parabola through the 7 pairs nearest x_b; returns the vertex
// when it is consistent with an extremum between the two branches.
double fit_critical_point(const std::vector<MapPoint>& pts, double x_b, bool expect_max) {
    std::vector<std::size_t> idx(pts.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + std::min<std::size_t>(7, idx.size()), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          return std::abs(pts[a].x - x_b) < std::abs(pts[b].x - x_b);
                      });
    const std::size_t m = std::min<std::size_t>(7, idx.size());
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, t0 = 0, t1 = 0, t2 = 0;
    double span_lo = 1e300, span_hi = -1e300;
    for (std::size_t k = 0; k < m; ++k) {
        const double u = pts[idx[k]].x - x_b;
        const double y = pts[idx[k]].x_next;
        span_lo = std::min(span_lo, u);
        span_hi = std::max(span_hi, u);
        const double u2 = u * u;
        s0 += 1;
        s1 += u;
        s2 += u2;
        s3 += u2 * u;
        s4 += u2 * u2;
        t0 += y;
        t1 += u * y;
        t2 += u2 * y;
    }
    // Solve the 3x3 normal equations for y = c0 + c1 u + c2 u^2.
    const double a[3][3] = {{s0, s1, s2}, {s1, s2, s3}, {s2, s3, s4}};
    const double b[3] = {t0, t1, t2};
    const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                       a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                       a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    if (std::abs(det) < 1e-30) return x_b;
    auto cof = [&](int col) {
        double mat[3][3];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) mat[r][c] = c == col ? b[r] : a[r][c];
        return mat[0][0] * (mat[1][1] * mat[2][2] - mat[1][2] * mat[2][1]) -
               mat[0][1] * (mat[1][0] * mat[2][2] - mat[1][2] * mat[2][0]) +
               mat[0][2] * (mat[1][0] * mat[2][1] - mat[1][1] * mat[2][0]);
    };
    const double c1 = cof(1) / det;
    const double c2 = cof(2) / det;
    if (c2 == 0.0) return x_b;
    if (expect_max != (c2 < 0.0)) return x_b;
    const double vertex = -c1 / (2.0 * c2);
    const double span = span_hi - span_lo;
    if (vertex < span_lo - 0.5 * span || vertex > span_hi + 0.5 * span) return x_b;
    return x_b + vertex;
}

}  // namespace

ReturnMap build_return_map(const CrossingSeries& cs) {
    if (cs.size() < 500)
        throw SparseMap("build_return_map: need >= 500 crossings, got " +
                        std::to_string(cs.size()));
    ReturnMap rm;
    rm.alpha = cs.alpha;
    rm.variant = cs.variant;
    rm.points.reserve(cs.size() - 1);
    for (std::size_t i = 0; i + 1 < cs.size(); ++i)
        rm.points.push_back({cs.crossings[i].x, cs.crossings[i + 1].x, cs.crossings[i].z,
                             cs.crossings[i + 1].z});
    std::sort(rm.points.begin(), rm.points.end(),
              [](const MapPoint& a, const MapPoint& b) { return a.x < b.x; });

    const double extent = rm.points.back().x - rm.points.front().x;
    if (!(extent > 0.0)) throw SparseMap("build_return_map: degenerate x range");
    const std::vector<int> signs = window_slope_signs(rm.points, 0.03);
    std::vector<Run> runs = segment_runs(signs, rm.points, 10, 0.03 * extent);
    if (runs.empty() || (runs.size() == 1 && runs[0].count < 10))
        throw SparseMap("build_return_map: no monotonic branch resolvable");

    // Sheet handover inside a layered branch shows up as a sandwiched run of
    // opposite slope whose image interval is shallow; a genuine interior
    // branch spans a real fold depth. Absorb the shallowest run first so the
    // handover run goes before any wide sheet it interrupts.
    double f_lo = 1e300, f_hi = -1e300;
    for (const MapPoint& p : rm.points) {
        f_lo = std::min(f_lo, p.x_next);
        f_hi = std::max(f_hi, p.x_next);
    }
    const double f_range = f_hi - f_lo;
    while (runs.size() >= 3) {
        std::size_t best = runs.size();
        double best_extent = 1e300;
        std::size_t first = 0;
        for (std::size_t r = 0; r + 2 < runs.size(); ++r) {
            first += runs[r].count;
            const Run& mid = runs[r + 1];
            if (runs[r].sign != runs[r + 2].sign || mid.sign == runs[r].sign) continue;
            double m_lo = 1e300, m_hi = -1e300;
            for (std::size_t i = first; i < first + mid.count; ++i) {
                m_lo = std::min(m_lo, rm.points[i].x_next);
                m_hi = std::max(m_hi, rm.points[i].x_next);
            }
            if (m_hi - m_lo >= 0.08 * f_range) continue;
            const double x_extent = rm.points[first + mid.count - 1].x - rm.points[first].x;
            if (x_extent < best_extent) {
                best_extent = x_extent;
                best = r + 1;
            }
        }
        if (best == runs.size()) break;
        runs[best - 1].count += runs[best].count + runs[best + 1].count;
        runs.erase(runs.begin() + static_cast<std::ptrdiff_t>(best),
                   runs.begin() + static_cast<std::ptrdiff_t>(best) + 2);
    }

    std::size_t first = 0;
    for (const Run& r : runs) {
        Branch br;
        br.first = first;
        br.count = r.count;
        br.slope_sign = r.sign;
        br.x_lo = rm.points[first].x;
        br.x_hi = rm.points[first + r.count - 1].x;
        rm.branches.push_back(br);
        first += r.count;
    }
    for (std::size_t b = 0; b + 1 < rm.branches.size(); ++b) {
        const Branch& left = rm.branches[b];
        const Branch& right = rm.branches[b + 1];
        const double x_b = 0.5 * (left.x_hi + right.x_lo);
        const bool expect_max = left.slope_sign > 0;
        rm.critical_points.push_back(fit_critical_point(rm.points, x_b, expect_max));
    }
    return rm;
}

// =============================================================================
// Bifurcation sweep / bistability scan
// =============================================================================

int detect_period(const std::vector<double>& xs, int max_period, double tol) {
    const std::size_t n = xs.size();
    for (int p = 1; p <= max_period; ++p) {
        const std::size_t up = static_cast<std::size_t>(p);
        if (n < 3 * up) break;
        const std::size_t window = std::min(n - up, std::max<std::size_t>(2 * up, 64));
        bool ok = true;
        for (std::size_t i = n - up - window; i + up < n && ok; ++i)
            if (std::abs(xs[i + up] - xs[i]) > tol) ok = false;
        if (ok) return p;
    }
    return 0;
}

const AlphaSlice* BifurcationDiagram::slice_at(double alpha) const {
    const AlphaSlice* best = nullptr;
    double dist = 1e300;
    for (const auto& s : slices) {
        const double d = std::abs(s.alpha - alpha);
        if (d < dist) {
            dist = d;
            best = &s;
        }
    }
    return best;
}

BifurcationDiagram bifurcation_sweep(double alpha_lo, double alpha_hi, std::size_t resolution,
                                     const IntegratorConfig& cfg, Nonlinearity variant,
                                     const SweepOptions& opts) {
    if (!(alpha_lo > 0.0) || !(alpha_hi <= 1.5) || !(alpha_hi > alpha_lo))
        throw std::invalid_argument("bifurcation_sweep: range must lie in (0, 1.5]");
    if (resolution < 100) throw std::invalid_argument("bifurcation_sweep: resolution < 100");

    BifurcationDiagram diagram;
    diagram.slices.resize(resolution);
    const double da = resolution > 1 ? (alpha_hi - alpha_lo) / static_cast<double>(resolution - 1)
                                     : 0.0;

    const std::size_t chunk = std::max<std::size_t>(1, opts.chunk);
    const std::size_t n_chunks = (resolution + chunk - 1) / chunk;

    auto run_chunk = [&](std::size_t c) {
        Vec3 seed = opts.seed;
        const std::size_t i0 = c * chunk;
        const std::size_t i1 = std::min(resolution, i0 + chunk);
        for (std::size_t i = i0; i < i1; ++i) {
            AlphaSlice& slice = diagram.slices[i];
            slice.alpha = alpha_lo + static_cast<double>(i) * da;
            const SystemDef sys(slice.alpha, variant);
            try {
                CollectResult r =
                    collect_crossings(sys, seed, cfg, opts.crossings_per_alpha, false);
                slice.xs = r.series.xs();
                if (opts.continuation) seed = r.final_state;
            } catch (const Diverged&) {
                slice.diverged = true;
                seed = opts.seed;
                continue;
            } catch (const InsufficientCrossings&) {
                slice.insufficient = true;
                seed = opts.seed;
                continue;
            }
            slice.period = detect_period(slice.xs, opts.max_period, opts.period_tol);
            const auto [mn, mx] = std::minmax_element(slice.xs.begin(), slice.xs.end());
            slice.extent = *mx - *mn;
        }
    };

    const int threads = std::max(1, opts.threads);
    if (threads == 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
    } else {
        std::vector<std::future<void>> workers;
        for (int w = 0; w < threads; ++w)
            workers.push_back(std::async(std::launch::async, [&, w]() {
                for (std::size_t c = static_cast<std::size_t>(w); c < n_chunks;
                     c += static_cast<std::size_t>(threads))
                    run_chunk(c);
            }));
        for (auto& f : workers) f.get();
    }

    for (std::size_t i = 1; i < diagram.slices.size(); ++i) {
        const AlphaSlice& a = diagram.slices[i - 1];
        const AlphaSlice& b = diagram.slices[i];
        if (a.diverged || b.diverged || a.insufficient || b.insufficient) continue;
        const double lo = std::min(a.extent, b.extent);
        const double hi = std::max(a.extent, b.extent);
        if (hi > (1.0 + opts.crisis_jump) * std::max(lo, 1e-3))
            diagram.crisis_alphas.push_back(b.alpha);
    }
    return diagram;
}

namespace {

struct SeedClassification {
    bool diverged = false;
    bool ambiguous = false;
    int period = 0;
    std::vector<double> signature;
    double x_lo = 0.0, x_hi = 0.0;
};

SeedClassification classify_seed(const SystemDef& sys, const Vec3& seed,
                                 const IntegratorConfig& cfg, const BistabilityOptions& opts) {
    SeedClassification r;
    CollectResult collected;
    try {
        collected = collect_crossings(sys, seed, cfg, opts.crossings, false);
    } catch (const Diverged&) {
        r.diverged = true;
        return r;
    } catch (const InsufficientCrossings&) {
        r.ambiguous = true;
        return r;
    }
    const std::vector<double> xs = collected.series.xs();
    const auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
    r.x_lo = *mn;
    r.x_hi = *mx;
    r.period = detect_period(xs, opts.max_period, opts.period_tol);
    if (r.period > 0) {
        r.signature.assign(xs.end() - r.period, xs.end());
        std::sort(r.signature.begin(), r.signature.end());
        return r;
    }
    if (r.x_hi - r.x_lo >= opts.chaos_extent) return r;  // chaotic
    r.ambiguous = true;
    return r;
}

}  // namespace

BistabilityReport bistability_scan(const SystemDef& sys, const std::vector<Vec3>& seeds,
                                   const IntegratorConfig& cfg, const BistabilityOptions& opts) {
    if (seeds.size() < 2) throw std::invalid_argument("bistability_scan: need >= 2 seeds");

    std::vector<SeedClassification> classified(seeds.size());
    const int threads = std::max(1, opts.threads);
    if (threads == 1) {
        for (std::size_t i = 0; i < seeds.size(); ++i)
            classified[i] = classify_seed(sys, seeds[i], cfg, opts);
    } else {
        std::vector<std::future<void>> workers;
        for (int w = 0; w < threads; ++w)
            workers.push_back(std::async(std::launch::async, [&, w]() {
                for (std::size_t i = static_cast<std::size_t>(w); i < seeds.size();
                     i += static_cast<std::size_t>(threads))
                    classified[i] = classify_seed(sys, seeds[i], cfg, opts);
            }));
        for (auto& f : workers) f.get();
    }

    BistabilityReport report;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const SeedClassification& c = classified[i];
        SeedOutcome outcome;
        outcome.seed = seeds[i];
        outcome.diverged = c.diverged;
        outcome.ambiguous = c.ambiguous;
        if (c.diverged || c.ambiguous) {
            report.seeds.push_back(outcome);
            continue;
        }
        int match = -1;
        for (std::size_t k = 0; k < report.classes.size(); ++k) {
            AttractorClass& cls = report.classes[k];
            if (c.period > 0) {
                if (cls.period != c.period || cls.signature.size() != c.signature.size()) continue;
                double dev = 0.0;
                for (std::size_t j = 0; j < c.signature.size(); ++j)
                    dev = std::max(dev, std::abs(cls.signature[j] - c.signature[j]));
                if (dev <= opts.cluster_tol) match = static_cast<int>(k);
            } else {
                if (!cls.chaotic) continue;
                const double overlap =
                    std::min(cls.x_hi, c.x_hi) - std::max(cls.x_lo, c.x_lo);
                const double smaller = std::min(cls.x_hi - cls.x_lo, c.x_hi - c.x_lo);
                if (overlap > 0.5 * smaller) match = static_cast<int>(k);
            }
            if (match >= 0) break;
        }
        if (match < 0) {
            AttractorClass cls;
            cls.chaotic = c.period == 0;
            cls.period = c.period;
            cls.signature = c.signature;
            cls.x_lo = c.x_lo;
            cls.x_hi = c.x_hi;
            report.classes.push_back(cls);
            match = static_cast<int>(report.classes.size()) - 1;
        }
        ++report.classes[static_cast<std::size_t>(match)].n_seeds;
        outcome.class_id = match;
        report.seeds.push_back(outcome);
    }
    return report;
}

// =============================================================================
// SectionMap
// =============================================================================

SectionMap::SectionMap(const SystemDef& sys, const IntegratorConfig& cfg) : sys_(sys), cfg_(cfg) {
    cfg_.transient_time = 0.0;  // mapping starts on the section
    cfg_.validate();
}

SectionMap::Point SectionMap::map(double x, double z, int returns) const {
    if (returns < 1) throw std::invalid_argument("SectionMap::map: returns < 1");
    Vec3 s{x, 0.0, z};
    double t_total = 0.0;
    const double budget = std::min(cfg_.max_time, 1000.0);
    for (int r = 0; r < returns; ++r) {
        EventStream<SystemDef> stream(sys_, s, cfg_, section_fn, -1);
        auto hit = stream.next(budget);
        if (!hit) throw NoEvent("SectionMap: no return within time budget");
        s = {hit->state.x, 0.0, hit->state.z};
        t_total += hit->t;
    }
    return {s.x, s.z, t_total};
}

}  // namespace chaoskit
