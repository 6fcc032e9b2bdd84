#include "chaoskit/orbits.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <set>

#include "chaoskit/knots.hpp"

namespace chaoskit {

// =============================================================================
// Alphabet / Itinerary
// =============================================================================

int Alphabet::branch_of_symbol(int symbol) const {
    for (std::size_t b = 0; b < symbols.size(); ++b)
        if (symbols[b].symbol == symbol) return static_cast<int>(b);
    throw UnknownSymbol("symbol " + std::to_string(symbol) + " not in alphabet");
}

std::string Itinerary::word() const {
    std::string w;
    w.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i)
        w.push_back(ambiguous[i] ? '?' : static_cast<char>('0' + symbols[i]));
    return w;
}

bool Itinerary::has_ambiguity() const {
    return std::any_of(ambiguous.begin(), ambiguous.end(), [](bool b) { return b; });
}

Itinerary encode(const std::vector<double>& xs, const Alphabet& alphabet) {
    if (alphabet.symbols.empty()) throw std::invalid_argument("encode: empty alphabet");
    Itinerary it;
    it.alphabet = alphabet;
    it.symbols.reserve(xs.size());
    it.ambiguous.reserve(xs.size());
    for (double x : xs) {
        std::size_t idx = 0;
        bool amb = false;
        for (double c : alphabet.critical_points) {
            if (x > c) ++idx;
            if (std::abs(x - c) < kSymbolAmbiguityTol) amb = true;
        }
        it.symbols.push_back(alphabet.symbols[idx].symbol);
        it.ambiguous.push_back(amb);
    }
    return it;
}

Itinerary encode(const CrossingSeries& cs, const Alphabet& alphabet) {
    return encode(cs.xs(), alphabet);
}

std::size_t canonical_rotation(const std::vector<int>& word) {
    const std::size_t p = word.size();
    std::size_t best = 0;
    for (std::size_t r = 1; r < p; ++r) {
        for (std::size_t k = 0; k < p; ++k) {
            const int a = word[(r + k) % p];
            const int b = word[(best + k) % p];
            if (a != b) {
                if (a < b) best = r;
                break;
            }
        }
    }
    return best;
}

// =============================================================================
// Local torsion of a closed orbit
// =============================================================================

namespace {

// Evolve the tangent vector v by vdot = J(x(t)) v over one loop of the
// sampled curve (RK4, Jacobian at interpolated states). When record != null,
// stores the flow-orthogonal unit direction at every sample plus the closure.
Vec3 transport_loop(const SystemDef& sys, const std::vector<Vec3>& curve,
                    const std::vector<double>& times, double period, Vec3 v,
                    std::vector<Vec3>* record) {
    const std::size_t n = curve.size();
    auto record_at = [&](const Vec3& state, const Vec3& vec) {
        if (!record) return;
        const Vec3 t_hat = normalized(sys.field(state));
        record->push_back(normalized(vec - dot(vec, t_hat) * t_hat));
    };
    record_at(curve[0], v);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3& a = curve[i];
        const Vec3& b = curve[(i + 1) % n];
        const double h = (i + 1 < n ? times[i + 1] : period) - times[i];
        const Vec3 mid = 0.5 * (a + b);
        const Mat3 ja = sys.jacobian(a);
        const Mat3 jm = sys.jacobian(mid);
        const Mat3 jb = sys.jacobian(b);
        const Vec3 k1 = ja * v;
        const Vec3 k2 = jm * (v + (0.5 * h) * k1);
        const Vec3 k3 = jm * (v + (0.5 * h) * k2);
        const Vec3 k4 = jb * (v + h * k3);
        v += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        record_at(b, v);
    }
    return v;
}

}  // namespace

int measure_local_torsion(const SystemDef& sys, const std::vector<Vec3>& curve,
                          const std::vector<double>& times, double* raw_out) {
    if (curve.size() < 64 || curve.size() != times.size())
        throw std::invalid_argument("measure_local_torsion: bad curve sampling");
    const double period = times.back() + (times[1] - times[0]);

    // Power-iterate the one-loop transport to line up with the unstable
    // direction; a flipping sign means an orientation-reversing loop.
    Vec3 v{0.17, 0.83, 0.41};
    bool converged = false;
    for (int loop = 0; loop < 40; ++loop) {
        const Vec3 w = transport_loop(sys, curve, times, period, v, nullptr);
        const double growth = norm(w);
        if (growth < 1e-12) throw Error("measure_local_torsion: transported vector collapsed");
        const Vec3 d = w / growth;
        if (loop > 1 && std::abs(dot(d, v)) > 1.0 - 1e-5) {
            v = d;
            converged = true;
            break;
        }
        v = d;
    }
    if (!converged) throw Error("measure_local_torsion: unstable direction did not converge");

    std::vector<Vec3> u;
    u.reserve(curve.size() + 1);
    transport_loop(sys, curve, times, period, v, &u);
    const double closure = std::abs(dot(u.front(), u.back()));
    if (closure < 0.95)
        throw Error("measure_local_torsion: direction field does not close up");

    // Writhe of the projection, perturbing away from degenerate projections.
    std::vector<Vec3> pts = curve;
    std::vector<Vec3> dirs = u;
    std::vector<Vec3> tangents(curve.size());
    for (std::size_t i = 0; i < curve.size(); ++i) tangents[i] = normalized(sys.field(curve[i]));
    int writhe = 0;
    bool generic = false;
    for (int attempt = 0; attempt < 10; ++attempt) {
        if (attempt > 0) {
            const Vec3 axis{0.37, 0.61 + 0.05 * attempt, 0.19};
            const double angle = 1e-3 * attempt;
            pts = knots::rotated(pts, axis, angle);
            dirs = knots::rotated(dirs, axis, angle);
            tangents = knots::rotated(tangents, axis, angle);
        }
        const auto scan = knots::self_crossings(pts, knots::Plane::XY);
        if (!scan.generic) continue;
        writhe = scan.sign_sum();
        generic = true;
        break;
    }
    if (!generic) throw NonGenericProjection("measure_local_torsion: writhe scan not generic");

    // Rotation of the direction field relative to the vertical reference
    // framing, accumulated around the loop.
    const Vec3 z_hat{0.0, 0.0, 1.0};
    double theta = 0.0;
    double prev_phi = 0.0;
    for (std::size_t i = 0; i <= curve.size(); ++i) {
        const std::size_t ci = i % curve.size();
        const Vec3& t_hat = tangents[ci];
        Vec3 ref = z_hat - dot(z_hat, t_hat) * t_hat;
        const double rn = norm(ref);
        if (rn < 1e-6) throw Error("measure_local_torsion: flow parallel to z axis");
        ref = ref / rn;
        const Vec3 e = cross(t_hat, ref);
        const Vec3& ui = dirs[i];
        const double phi = std::atan2(dot(ui, e), dot(ui, ref));
        if (i > 0) {
            double d = phi - prev_phi;
            while (d > M_PI / 2) d -= M_PI;   // direction field: angle defined mod pi
            while (d < -M_PI / 2) d += M_PI;
            theta += d;
        }
        prev_phi = phi;
    }

    const double raw = 2.0 * writhe + theta / M_PI;
    if (raw_out) *raw_out = raw;
    const int n = static_cast<int>(std::lround(raw));
    if (std::abs(raw - n) > 0.2)
        throw Error("measure_local_torsion: half-twist count not integral (raw " +
                    std::to_string(raw) + ")");
    return n;
}

// =============================================================================
// Orbit refinement
// =============================================================================

namespace {

// Dense uniform sampling of one closed orbit over [0, period).
void sample_curve(const SystemDef& sys, const IntegratorConfig& cfg, const Vec3& s0, double period,
                  std::size_t n, std::vector<Vec3>& pts, std::vector<double>& times) {
    IntegratorConfig c = cfg;
    c.transient_time = 0.0;
    DenseStepper<SystemDef> stepper(sys, c, 0.0, s0);
    pts.clear();
    times.clear();
    pts.reserve(n);
    times.reserve(n);
    pts.push_back(s0);
    times.push_back(0.0);
    std::size_t k = 1;
    while (k < n && stepper.time() < period) {
        stepper.advance(period);
        const DenseStep& d = stepper.last_step();
        while (k < n) {
            const double tk = period * static_cast<double>(k) / static_cast<double>(n);
            if (tk > d.t1() + 1e-12) break;
            pts.push_back(d.eval((tk - d.t0) / d.h));
            times.push_back(tk);
            ++k;
        }
    }
    while (k < n) {
        pts.push_back(stepper.state());
        times.push_back(period * static_cast<double>(k) / static_cast<double>(n));
        ++k;
    }
}

}  // namespace

std::optional<PeriodicOrbit> refine_periodic_point(const SectionMap& smap, double x, double z,
                                                   int period, const UpoOptions& opts,
                                                   std::vector<std::string>* log) {
    auto note = [&](const std::string& s) {
        if (log) log->push_back(s);
    };
    auto residual_of = [&](double cx, double cz, double& gx, double& gz) {
        const SectionMap::Point p = smap.map(cx, cz, period);
        gx = p.x - cx;
        gz = p.z - cz;
        return std::hypot(gx, gz);
    };

    double cx = x, cz = z;
    double gx, gz, res;
    try {
        res = residual_of(cx, cz, gx, gz);
    } catch (const Error& e) {
        note(std::string("candidate dropped before refinement: ") + e.what());
        return std::nullopt;
    }

    bool ok = false;
    for (int iter = 0; iter < opts.newton_max_iter; ++iter) {
        if (res < 0.5 * opts.residual_tol) {
            ok = true;
            break;
        }
        const double hx = 1e-6 * std::max(1.0, std::abs(cx));
        const double hz = 1e-6 * std::max(1.0, std::abs(cz));
        double a00, a01, a10, a11;
        try {
            double gxp, gzp, gxm, gzm;
            residual_of(cx + hx, cz, gxp, gzp);
            residual_of(cx - hx, cz, gxm, gzm);
            a00 = (gxp - gxm) / (2.0 * hx);
            a10 = (gzp - gzm) / (2.0 * hx);
            residual_of(cx, cz + hz, gxp, gzp);
            residual_of(cx, cz - hz, gxm, gzm);
            a01 = (gxp - gxm) / (2.0 * hz);
            a11 = (gzp - gzm) / (2.0 * hz);
        } catch (const Error& e) {
            note(std::string("candidate dropped during jacobian: ") + e.what());
            return std::nullopt;
        }
        double dx, dz;
        if (!solve2x2(a00, a01, a10, a11, -gx, -gz, dx, dz)) {
            note("candidate dropped: singular newton system");
            return std::nullopt;
        }
        bool improved = false;
        for (double lam = 1.0; lam > 1.0 / 64.0; lam *= 0.5) {
            try {
                double ngx, ngz;
                const double nres = residual_of(cx + lam * dx, cz + lam * dz, ngx, ngz);
                if (nres < res) {
                    cx += lam * dx;
                    cz += lam * dz;
                    gx = ngx;
                    gz = ngz;
                    res = nres;
                    improved = true;
                    break;
                }
            } catch (const Error&) {
                // step left the basin; shorten
            }
        }
        if (!improved) {
            note("candidate dropped: newton stalled at residual " + std::to_string(res));
            return std::nullopt;
        }
    }
    if (!ok && res >= opts.residual_tol) {
        note("candidate dropped: no convergence in " + std::to_string(opts.newton_max_iter) +
             " iterations (residual " + std::to_string(res) + ")");
        return std::nullopt;
    }

    PeriodicOrbit orbit;
    orbit.alpha = smap.system().alpha();
    orbit.variant = smap.system().variant();
    orbit.period = period;
    orbit.residual = res;

    double px = cx, pz = cz, t_acc = 0.0;
    orbit.section_points.push_back({0.0, cx, cz});
    try {
        for (int i = 0; i < period; ++i) {
            const SectionMap::Point p = smap.map(px, pz, 1);
            t_acc += p.t;
            px = p.x;
            pz = p.z;
            if (i + 1 < period) orbit.section_points.push_back({t_acc, px, pz});
        }
    } catch (const Error& e) {
        note(std::string("candidate dropped while closing orbit: ") + e.what());
        return std::nullopt;
    }
    orbit.period_time = t_acc;
    orbit.residual = std::hypot(px - cx, pz - cz);
    if (orbit.residual > opts.residual_tol) {
        note("candidate dropped: closure residual " + std::to_string(orbit.residual));
        return std::nullopt;
    }

    const std::size_t n_samples =
        std::max(opts.min_samples, opts.samples_per_return * static_cast<std::size_t>(period));
    sample_curve(smap.system(), smap.config(), {cx, 0.0, cz}, orbit.period_time, n_samples,
                 orbit.curve, orbit.curve_times);
    return orbit;
}

// =============================================================================
// Alphabet derivation
// =============================================================================

// Seed for the period-1 orbit of one branch: bisect f(x) - x on the
// interpolated branch, or start from a branch end that comes close to the
// bisecting line (the orbit can sit just outside the attractor edge near a
// crisis). Returns false when the branch stays far from the line.
bool branch_period1_seed(const ReturnMap& rm, const Branch& br, double& x_seed, double& z_seed) {
    const double span = rm.x_max() - rm.x_min();
    double lo = br.x_lo, hi = br.x_hi;
    double g_lo = rm.eval(lo) - lo;
    const double g_hi = rm.eval(hi) - hi;
    if ((g_lo > 0.0) != (g_hi > 0.0)) {
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double gm = rm.eval(mid) - mid;
            if ((gm > 0.0) == (g_lo > 0.0)) {
                lo = mid;
                g_lo = gm;
            } else {
                hi = mid;
            }
        }
        x_seed = 0.5 * (lo + hi);
    } else if (std::min(std::abs(g_lo), std::abs(g_hi)) < 0.05 * span) {
        x_seed = std::abs(g_lo) < std::abs(g_hi) ? br.x_lo : br.x_hi;
    } else {
        return false;
    }
    std::size_t best = br.first;
    for (std::size_t i = br.first; i < br.first + br.count; ++i)
        if (std::abs(rm.points[i].x - x_seed) < std::abs(rm.points[best].x - x_seed)) best = i;
    z_seed = rm.points[best].z;
    return true;
}

Alphabet derive_alphabet(const SystemDef& sys, const ReturnMap& rm, const IntegratorConfig& cfg,
                         std::vector<std::string>* log) {
    Alphabet ab;
    ab.critical_points = rm.critical_points;
    const double span = rm.x_max() - rm.x_min();

    UpoOptions opts;
    opts.residual_tol = 1e-9;

    SectionMap smap(sys, cfg);
    std::vector<int> torsion(rm.branches.size(), 0);
    std::vector<bool> measured(rm.branches.size(), false);

    for (std::size_t b = 0; b < rm.branches.size(); ++b) {
        const Branch& br = rm.branches[b];
        double x_seed, z_seed;
        if (!branch_period1_seed(rm, br, x_seed, z_seed)) continue;
        auto orbit = refine_periodic_point(smap, x_seed, z_seed, 1, opts, log);
        if (!orbit) continue;
        const double ox = orbit->section_points.front().x;
        if (ox < br.x_lo - 0.05 * span || ox > br.x_hi + 0.05 * span) continue;
        if (rm.branch_of(ox) != static_cast<int>(b)) continue;
        try {
            double raw = 0.0;
            const int n = measure_local_torsion(sys, orbit->curve, orbit->curve_times, &raw);
            const bool odd_expected = br.slope_sign < 0;
            int mag = std::abs(n);
            if ((mag % 2 == 1) != odd_expected) {
                // Round the raw value to the nearest parity-consistent integer.
                const int lo = static_cast<int>(std::floor(std::abs(raw)));
                mag = ((lo % 2 == 1) == odd_expected) ? lo : lo + 1;
                if (log)
                    log->push_back("branch " + std::to_string(b) +
                                   ": torsion parity adjusted (raw " + std::to_string(raw) + ")");
            }
            torsion[b] = mag;
            measured[b] = true;
        } catch (const Error& e) {
            if (log) log->push_back("branch " + std::to_string(b) + ": " + e.what());
        }
    }

    if (std::none_of(measured.begin(), measured.end(), [](bool m) { return m; }))
        throw Error("derive_alphabet: no branch torsion measurable");

    // Unmeasured branches inherit unit increments from the nearest measured
    // branch (torsion magnitude grows with x across the branch line).
    for (std::size_t b = 0; b < rm.branches.size(); ++b) {
        if (measured[b]) continue;
        std::size_t nearest = rm.branches.size();
        for (std::size_t j = 0; j < rm.branches.size(); ++j) {
            if (!measured[j]) continue;
            if (nearest == rm.branches.size() ||
                std::abs(static_cast<int>(j) - static_cast<int>(b)) <
                    std::abs(static_cast<int>(nearest) - static_cast<int>(b)))
                nearest = j;
        }
        int mag = torsion[nearest] + (static_cast<int>(b) - static_cast<int>(nearest));
        while (mag < 0) mag += 2;
        torsion[b] = mag;
        if (log)
            log->push_back("branch " + std::to_string(b) + ": torsion " + std::to_string(mag) +
                           " filled from branch " + std::to_string(nearest));
    }

    for (std::size_t b = 0; b < rm.branches.size(); ++b) {
        const Branch& br = rm.branches[b];
        SymbolInfo si;
        si.symbol = torsion[b];
        si.odd = br.slope_sign < 0;
        si.x_lo = br.x_lo;
        si.x_hi = br.x_hi;
        si.measured = measured[b];
        ab.symbols.push_back(si);
    }
    return ab;
}

// =============================================================================
// Symbolic completeness (kneading admissibility)
// =============================================================================

namespace {

// Signed itinerary order: lexicographic with the comparison sense flipped
// after every orientation-reversing symbol. Sequences hold branch indices.
int itinerary_cmp(const std::vector<int>& a, const std::vector<int>& b, const Alphabet& ab) {
    int eps = 1;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t k = 0; k < n; ++k) {
        if (a[k] != b[k]) return a[k] < b[k] ? -eps : eps;
        eps *= ab.orientation(a[k]);
    }
    return 0;
}

int partition_branch(const Alphabet& ab, double x) {
    int idx = 0;
    for (double c : ab.critical_points)
        if (x > c) ++idx;
    return idx;
}

// Itinerary of a map value under the interpolated map (synthetic fallback).
std::vector<int> value_itinerary(const ReturnMap& rm, const Alphabet& ab, double x,
                                 std::size_t len) {
    std::vector<int> out;
    out.reserve(len);
    for (std::size_t k = 0; k < len; ++k) {
        out.push_back(partition_branch(ab, x));
        x = rm.eval(x);
    }
    return out;
}

// Itinerary of a section state under the true dynamics; layered maps make
// interpolated iteration unreliable, so the flow itself is consulted.
std::vector<int> state_itinerary(const SectionMap& smap, const Alphabet& ab, double x, double z,
                                 std::size_t len) {
    std::vector<int> out;
    out.reserve(len);
    for (std::size_t k = 0; k < len; ++k) {
        out.push_back(partition_branch(ab, x));
        const SectionMap::Point p = smap.map(x, z, 1);
        x = p.x;
        z = p.z;
    }
    return out;
}

std::string word_of(const std::vector<int>& branches, const Alphabet& ab) {
    std::string w;
    for (int b : branches)
        w.push_back(static_cast<char>('0' + ab.symbols[static_cast<std::size_t>(b)].symbol));
    return w;
}

bool is_primitive(const std::vector<int>& w) {
    const std::size_t p = w.size();
    for (std::size_t q = 1; q < p; ++q) {
        if (p % q != 0) continue;
        bool rep = true;
        for (std::size_t k = 0; k < p && rep; ++k)
            if (w[k] != w[k % q]) rep = false;
        if (rep) return false;
    }
    return true;
}

}  // namespace

std::size_t CompletenessReport::realized_count(std::size_t len) const {
    std::size_t n = 0;
    for (const auto& w : words)
        if (w.word.size() == len && w.realized) ++n;
    return n;
}

std::size_t CompletenessReport::word_count(std::size_t len) const {
    std::size_t n = 0;
    for (const auto& w : words)
        if (w.word.size() == len) ++n;
    return n;
}

bool CompletenessReport::is_realized(const std::string& word) const {
    for (const auto& w : words)
        if (w.word == word) return w.realized;
    return false;
}

CompletenessReport symbolic_completeness(const ReturnMap& rm, const Alphabet& ab, int max_len,
                                         const SystemDef* sys, const IntegratorConfig* cfg) {
    if (rm.branches.size() < 2)
        throw std::invalid_argument("symbolic_completeness: need >= 2 branches");
    if (max_len < 1) throw std::invalid_argument("symbolic_completeness: max_len < 1");

    CompletenessReport report;
    const std::size_t tail_len = static_cast<std::size_t>(max_len) + 8;

    std::optional<SectionMap> smap;
    if (sys) {
        IntegratorConfig c = cfg ? *cfg : IntegratorConfig{};
        smap.emplace(*sys, c);
    }

    // Branch image intervals and their itineraries.
    std::vector<std::vector<int>> lo_itin, hi_itin;
    for (const Branch& br : rm.branches) {
        std::size_t i_lo = br.first, i_hi = br.first;
        for (std::size_t i = br.first; i < br.first + br.count; ++i) {
            if (rm.points[i].x_next < rm.points[i_lo].x_next) i_lo = i;
            if (rm.points[i].x_next > rm.points[i_hi].x_next) i_hi = i;
        }
        if (smap) {
            lo_itin.push_back(state_itinerary(*smap, ab, rm.points[i_lo].x_next,
                                              rm.points[i_lo].z_next, tail_len));
            hi_itin.push_back(state_itinerary(*smap, ab, rm.points[i_hi].x_next,
                                              rm.points[i_hi].z_next, tail_len));
        } else {
            lo_itin.push_back(value_itinerary(rm, ab, rm.points[i_lo].x_next, tail_len));
            hi_itin.push_back(value_itinerary(rm, ab, rm.points[i_hi].x_next, tail_len));
        }
    }
    for (std::size_t b = 0; b < lo_itin.size(); ++b) {
        report.kneading_low.push_back(word_of(lo_itin[b], ab));
        report.kneading_high.push_back(word_of(hi_itin[b], ab));
    }

    // Geometric completeness: a branch endpoint on the bisecting line.
    double gap = 1e300;
    for (const Branch& br : rm.branches) {
        const MapPoint& a = rm.points[br.first];
        const MapPoint& b = rm.points[br.first + br.count - 1];
        gap = std::min({gap, std::abs(a.x_next - a.x), std::abs(b.x_next - b.x)});
    }
    report.bisect_gap = gap;
    report.complete = gap < 0.01 * (rm.x_max() - rm.x_min());

    const int m = static_cast<int>(rm.branches.size());
    std::set<std::vector<int>> seen;
    std::vector<std::vector<int>> canon_words;
    for (int len = 1; len <= max_len; ++len) {
        std::vector<int> w(static_cast<std::size_t>(len), 0);
        while (true) {
            if (is_primitive(w)) {
                std::vector<int> rot = w;
                std::rotate(rot.begin(), rot.begin() + static_cast<std::ptrdiff_t>(
                                                           canonical_rotation(w)),
                            rot.end());
                if (seen.insert(rot).second) canon_words.push_back(rot);
            }
            int k = len - 1;
            while (k >= 0 && w[static_cast<std::size_t>(k)] == m - 1) {
                w[static_cast<std::size_t>(k)] = 0;
                --k;
            }
            if (k < 0) break;
            ++w[static_cast<std::size_t>(k)];
        }
    }

    for (const auto& w : canon_words) {
        const std::size_t p = w.size();
        bool ok = true;
        for (std::size_t k = 0; k < p && ok; ++k) {
            const int b = w[k];
            std::vector<int> tail(tail_len);
            for (std::size_t i = 0; i < tail_len; ++i) tail[i] = w[(k + 1 + i) % p];
            if (itinerary_cmp(lo_itin[static_cast<std::size_t>(b)], tail, ab) > 0 ||
                itinerary_cmp(tail, hi_itin[static_cast<std::size_t>(b)], ab) > 0)
                ok = false;
        }
        report.words.push_back({word_of(w, ab), ok});
    }
    return report;
}

// =============================================================================
// UPO extraction
// =============================================================================

UpoResult find_upos(const SystemDef& sys, const IntegratorConfig& cfg, const UpoOptions& opts) {
    UpoResult out;
    IntegratorConfig tight = cfg;
    tight.rel_tol = std::min(cfg.rel_tol, 1e-11);
    tight.abs_tol = std::min(cfg.abs_tol, 1e-13);

    const CrossingSeries cs = compute_crossings(sys, opts.seed, cfg, opts.scan_crossings);
    out.map = build_return_map(cs);
    out.alphabet = derive_alphabet(sys, out.map, tight, &out.log);
    const Itinerary stream = encode(cs, out.alphabet);

    struct Cand {
        int p;
        std::string word;
        double x, z, d;
    };
    std::vector<Cand> candidates;
    const std::size_t n = cs.size();
    for (int p = 1; p <= opts.max_period; ++p) {
        const std::size_t up = static_cast<std::size_t>(p);
        for (std::size_t i = 0; i + up < n; ++i) {
            const double d = std::hypot(cs.crossings[i].x - cs.crossings[i + up].x,
                                        cs.crossings[i].z - cs.crossings[i + up].z);
            if (d > opts.close_return_eps) continue;
            bool amb = false;
            std::vector<int> w(up);
            for (std::size_t k = 0; k < up; ++k) {
                if (stream.ambiguous[i + k]) amb = true;
                w[k] = stream.symbols[i + k];
            }
            if (amb) continue;
            std::vector<int> rot = w;
            std::rotate(rot.begin(),
                        rot.begin() + static_cast<std::ptrdiff_t>(canonical_rotation(w)),
                        rot.end());
            std::string key;
            for (int s : rot) key.push_back(static_cast<char>('0' + s));
            candidates.push_back({p, key, cs.crossings[i].x, cs.crossings[i].z, d});
        }
    }
    // Close returns only sample the attractor itself; the period-1 orbit of a
    // branch can bound it from just outside near a crisis, so each branch is
    // also seeded directly at its diagonal point.
    for (std::size_t b = 0; b < out.map.branches.size(); ++b) {
        double xs_b, zs_b;
        if (!branch_period1_seed(out.map, out.map.branches[b], xs_b, zs_b)) continue;
        const std::string key(1, static_cast<char>('0' + out.alphabet.symbols[b].symbol));
        candidates.push_back({1, key, xs_b, zs_b, 0.0});
    }

    std::stable_sort(candidates.begin(), candidates.end(), [](const Cand& a, const Cand& b) {
        if (a.p != b.p) return a.p < b.p;
        if (a.word != b.word) return a.word < b.word;
        return a.d < b.d;
    });
    std::vector<Cand> picked;
    std::map<std::pair<int, std::string>, std::size_t> per_word;
    for (const Cand& c : candidates) {
        auto& count = per_word[{c.p, c.word}];
        if (count >= opts.candidates_per_word) continue;
        ++count;
        picked.push_back(c);
    }

    const SectionMap smap(sys, tight);
    std::vector<std::optional<PeriodicOrbit>> refined(picked.size());
    std::vector<std::vector<std::string>> logs(picked.size());
    const int threads = std::max(1, opts.threads);
    auto refine_range = [&](std::size_t w0) {
        for (std::size_t i = w0; i < picked.size(); i += static_cast<std::size_t>(threads))
            refined[i] =
                refine_periodic_point(smap, picked[i].x, picked[i].z, picked[i].p, opts, &logs[i]);
    };
    if (threads == 1) {
        refine_range(0);
    } else {
        std::vector<std::future<void>> workers;
        for (int w = 0; w < threads; ++w)
            workers.push_back(std::async(std::launch::async, refine_range,
                                         static_cast<std::size_t>(w)));
        for (auto& f : workers) f.get();
    }
    for (auto& l : logs) out.log.insert(out.log.end(), l.begin(), l.end());

    const double x_margin = 0.5 * (out.map.x_max() - out.map.x_min());
    for (std::size_t i = 0; i < refined.size(); ++i) {
        if (!refined[i]) continue;
        PeriodicOrbit orbit = std::move(*refined[i]);
        const int p = orbit.period;

        // Reject orbits that escaped the attractor region.
        bool in_range = true;
        for (const Crossing& c : orbit.section_points)
            if (c.x < out.map.x_min() - x_margin || c.x > out.map.x_max() + x_margin)
                in_range = false;
        if (!in_range) {
            out.log.push_back("refined orbit left the map range; dropped");
            continue;
        }

        // Reduce orbits that are repetitions of a shorter period.
        bool reducible = false;
        for (int q = 1; q < p && !reducible; ++q) {
            if (p % q != 0) continue;
            bool rep = true;
            for (int k = 0; k < p && rep; ++k) {
                const Crossing& a = orbit.section_points[static_cast<std::size_t>(k)];
                const Crossing& b =
                    orbit.section_points[static_cast<std::size_t>((k + q) % p)];
                if (std::hypot(a.x - b.x, a.z - b.z) > 1e-6) rep = false;
            }
            if (rep) reducible = true;
        }
        if (reducible) continue;  // the shorter orbit is found on its own

        std::vector<double> xs;
        for (const Crossing& c : orbit.section_points) xs.push_back(c.x);
        orbit.itinerary = encode(xs, out.alphabet);
        if (orbit.itinerary.has_ambiguity())
            out.log.push_back("orbit at period " + std::to_string(p) +
                              " has an ambiguous symbol");

        // Canonical rotation of word and section points together.
        const std::size_t r = canonical_rotation(orbit.itinerary.symbols);
        std::rotate(orbit.itinerary.symbols.begin(),
                    orbit.itinerary.symbols.begin() + static_cast<std::ptrdiff_t>(r),
                    orbit.itinerary.symbols.end());
        std::rotate(orbit.itinerary.ambiguous.begin(),
                    orbit.itinerary.ambiguous.begin() + static_cast<std::ptrdiff_t>(r),
                    orbit.itinerary.ambiguous.end());
        std::rotate(orbit.section_points.begin(),
                    orbit.section_points.begin() + static_cast<std::ptrdiff_t>(r),
                    orbit.section_points.end());

        // Deduplicate by itinerary, then by section state distance.
        bool dup = false;
        for (PeriodicOrbit& kept : out.orbits) {
            if (kept.period != p || kept.name() != orbit.name()) continue;
            double dist = 1e300;
            for (int rot = 0; rot < p; ++rot) {
                double worst = 0.0;
                for (int k = 0; k < p; ++k) {
                    const Crossing& a = kept.section_points[static_cast<std::size_t>(k)];
                    const Crossing& b =
                        orbit.section_points[static_cast<std::size_t>((k + rot) % p)];
                    worst = std::max(worst, std::hypot(a.x - b.x, a.z - b.z));
                }
                dist = std::min(dist, worst);
            }
            if (dist < opts.state_dedup_tol) {
                if (orbit.residual < kept.residual) kept = orbit;
                dup = true;
                break;
            }
        }
        if (!dup) out.orbits.push_back(std::move(orbit));
    }

    std::sort(out.orbits.begin(), out.orbits.end(),
              [](const PeriodicOrbit& a, const PeriodicOrbit& b) {
                  if (a.period != b.period) return a.period < b.period;
                  return a.name() < b.name();
              });

    // Admissible words with no extracted orbit.
    try {
        const CompletenessReport rep = symbolic_completeness(out.map, out.alphabet,
                                                             opts.max_period);
        for (const auto& w : rep.words) {
            if (!w.realized) continue;
            const bool found = std::any_of(out.orbits.begin(), out.orbits.end(),
                                           [&](const PeriodicOrbit& o) { return o.name() == w.word; });
            if (!found) out.missing_words.push_back(w.word);
        }
    } catch (const std::exception& e) {
        out.log.push_back(std::string("completeness check skipped: ") + e.what());
    }
    return out;
}

}  // namespace chaoskit
