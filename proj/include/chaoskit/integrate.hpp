#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "chaoskit/errors.hpp"
#include "chaoskit/system.hpp"

namespace chaoskit {

struct IntegratorConfig {
    double step_size = 0.01;       // fixed-mode step, also initial adaptive guess
    bool adaptive = true;
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    double transient_time = 1000.0;
    double max_time = 1e6;         // time budget counted after the transient
    double divergence_radius = 1e3;

    void validate() const {
        if (!(step_size > 0.0)) throw std::invalid_argument("IntegratorConfig: step_size <= 0");
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
            throw std::invalid_argument("IntegratorConfig: tolerances must be positive");
        if (!(transient_time >= 0.0))
            throw std::invalid_argument("IntegratorConfig: transient_time < 0");
        if (!(max_time > 0.0)) throw std::invalid_argument("IntegratorConfig: max_time <= 0");
        if (!(divergence_radius > 0.0))
            throw std::invalid_argument("IntegratorConfig: divergence_radius <= 0");
    }
};

/// Time-ordered states of one integrated solution, transient already removed.
struct Trajectory {
    std::vector<double> times;
    std::vector<Vec3> states;
    std::optional<SystemDef> sys;

    std::size_t size() const { return times.size(); }
};

namespace detail {

// Dormand-Prince 5(4) coefficients.
inline constexpr double kA21 = 1.0 / 5.0;
inline constexpr double kA31 = 3.0 / 40.0, kA32 = 9.0 / 40.0;
inline constexpr double kA41 = 44.0 / 45.0, kA42 = -56.0 / 15.0, kA43 = 32.0 / 9.0;
inline constexpr double kA51 = 19372.0 / 6561.0, kA52 = -25360.0 / 2187.0,
                        kA53 = 64448.0 / 6561.0, kA54 = -212.0 / 729.0;
inline constexpr double kA61 = 9017.0 / 3168.0, kA62 = -355.0 / 33.0, kA63 = 46732.0 / 5247.0,
                        kA64 = 49.0 / 176.0, kA65 = -5103.0 / 18656.0;
inline constexpr double kA71 = 35.0 / 384.0, kA73 = 500.0 / 1113.0, kA74 = 125.0 / 192.0,
                        kA75 = -2187.0 / 6784.0, kA76 = 11.0 / 84.0;
inline constexpr double kC2 = 1.0 / 5.0, kC3 = 3.0 / 10.0, kC4 = 4.0 / 5.0, kC5 = 8.0 / 9.0;
// Error weights b - bhat.
inline constexpr double kE1 = 71.0 / 57600.0, kE3 = -71.0 / 16695.0, kE4 = 71.0 / 1920.0,
                        kE5 = -17253.0 / 339200.0, kE6 = 22.0 / 525.0, kE7 = -1.0 / 40.0;
// Dense-output weights.
inline constexpr double kD1 = -12715105075.0 / 11282082432.0;
inline constexpr double kD3 = 87487479700.0 / 32700410799.0;
inline constexpr double kD4 = -10690763975.0 / 1880347072.0;
inline constexpr double kD5 = 701980252875.0 / 199316789632.0;
inline constexpr double kD6 = -1453857185.0 / 822651844.0;
inline constexpr double kD7 = 69997945.0 / 29380423.0;

}  // namespace detail

/// Continuous extension of one accepted step: a quartic interpolant exact at
/// both endpoints and 4th-order accurate inside.
struct DenseStep {
    double t0 = 0.0;
    double h = 0.0;
    Vec3 rc1, rc2, rc3, rc4, rc5;

    double t1() const { return t0 + h; }

    Vec3 eval(double theta) const {
        const double th1 = 1.0 - theta;
        return rc1 + theta * (rc2 + th1 * (rc3 + theta * (rc4 + th1 * rc5)));
    }

    /// d/dtheta of the interpolant (state change per unit theta).
    Vec3 eval_derivative(double theta) const {
        const double th1 = 1.0 - theta;
        // d/dtheta of rc1 + th(rc2 + th1(rc3 + th(rc4 + th1 rc5)))
        const Vec3 inner = rc4 + th1 * rc5;
        const Vec3 d_inner = rc5 * -1.0;
        const Vec3 mid = rc3 + theta * inner;
        const Vec3 d_mid = inner + theta * d_inner;
        return rc2 + th1 * mid + theta * (th1 * d_mid - mid);
    }
};

/// Dormand-Prince 5(4) stepper with dense output. Fixed or adaptive step per
/// config; deterministic for identical inputs.
template <FlowField F>
class DenseStepper {
  public:
    DenseStepper(const F& sys, const IntegratorConfig& cfg, double t0, const Vec3& y0)
        : sys_(sys), cfg_(cfg), t_(t0), y_(y0), h_(cfg.step_size) {
        cfg_.validate();
        if (!is_finite(y0)) throw InvalidState("DenseStepper: non-finite initial state");
        k1_ = sys_.field(y_);
    }

    double time() const { return t_; }
    const Vec3& state() const { return y_; }
    const DenseStep& last_step() const { return dense_; }

    /// Advance by one accepted step, at most to t_limit. Fills dense output.
    void advance(double t_limit) {
        for (int attempt = 0; attempt < 64; ++attempt) {
            double h = h_;
            bool clipped = false;
            if (t_ + h >= t_limit) {
                h = t_limit - t_;
                clipped = true;
            }
            if (!(h > 0.0)) throw std::invalid_argument("DenseStepper: no room to advance");

            const Vec3 y = y_;
            const Vec3 k1 = k1_;
            const Vec3 k2 = sys_.field(y + h * (detail::kA21 * k1));
            const Vec3 k3 = sys_.field(y + h * (detail::kA31 * k1 + detail::kA32 * k2));
            const Vec3 k4 =
                sys_.field(y + h * (detail::kA41 * k1 + detail::kA42 * k2 + detail::kA43 * k3));
            const Vec3 k5 = sys_.field(y + h * (detail::kA51 * k1 + detail::kA52 * k2 +
                                                detail::kA53 * k3 + detail::kA54 * k4));
            const Vec3 k6 = sys_.field(y + h * (detail::kA61 * k1 + detail::kA62 * k2 +
                                                detail::kA63 * k3 + detail::kA64 * k4 +
                                                detail::kA65 * k5));
            const Vec3 ynew = y + h * (detail::kA71 * k1 + detail::kA73 * k3 + detail::kA74 * k4 +
                                       detail::kA75 * k5 + detail::kA76 * k6);
            const Vec3 k7 = sys_.field(ynew);

            if (cfg_.adaptive) {
                const Vec3 errv = h * (detail::kE1 * k1 + detail::kE3 * k3 + detail::kE4 * k4 +
                                       detail::kE5 * k5 + detail::kE6 * k6 + detail::kE7 * k7);
                double err = 0.0;
                for (int i = 0; i < 3; ++i) {
                    const double sk =
                        cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
                    const double e = errv[i] / sk;
                    err += e * e;
                }
                err = std::sqrt(err / 3.0);
                if (!std::isfinite(err)) err = 1e10;

                double factor = 0.9 * std::pow(std::max(err, 1e-16), -0.2);
                factor = std::clamp(factor, 0.2, 10.0);
                const double h_taken = h;
                if (!clipped || err > 1.0) h_ = h * factor;
                if (h_ < 1e-13 * std::max(1.0, std::abs(t_)))
                    throw StiffnessFailure("step size underflow", t_);

                if (err > 1.0) continue;  // reject, retry with smaller h
                accept(h_taken, y, ynew, k1, k3, k4, k5, k6, k7);
                return;
            }
            accept(h, y, ynew, k1, k3, k4, k5, k6, k7);
            return;
        }
        throw StiffnessFailure("step repeatedly rejected", t_);
    }

  private:
    void accept(double h, const Vec3& y, const Vec3& ynew, const Vec3& k1, const Vec3& k3,
                const Vec3& k4, const Vec3& k5, const Vec3& k6, const Vec3& k7) {
        const Vec3 dy = ynew - y;
        dense_.t0 = t_;
        dense_.h = h;
        dense_.rc1 = y;
        dense_.rc2 = dy;
        dense_.rc3 = h * k1 - dy;
        dense_.rc4 = dy - h * k7 - dense_.rc3;
        dense_.rc5 = h * (detail::kD1 * k1 + detail::kD3 * k3 + detail::kD4 * k4 +
                          detail::kD5 * k5 + detail::kD6 * k6 + detail::kD7 * k7);
        t_ += h;
        y_ = ynew;
        k1_ = k7;  // FSAL
        if (!is_finite(y_)) throw Diverged("state became non-finite", t_);
        if (norm(y_) > cfg_.divergence_radius) throw Diverged("divergence radius exceeded", t_);
    }

    const F& sys_;
    IntegratorConfig cfg_;
    double t_;
    Vec3 y_;
    double h_;
    Vec3 k1_;
    DenseStep dense_;
};

/// Integrate and record every accepted step over [transient, transient + max_time].
template <FlowField F>
Trajectory integrate(const F& sys, const Vec3& s0, const IntegratorConfig& cfg) {
    cfg.validate();
    DenseStepper<F> stepper(sys, cfg, 0.0, s0);
    while (stepper.time() < cfg.transient_time) stepper.advance(cfg.transient_time);

    Trajectory traj;
    if constexpr (std::is_same_v<F, SystemDef>) traj.sys = sys;
    const double t_end = cfg.transient_time + cfg.max_time;
    traj.times.push_back(stepper.time());
    traj.states.push_back(stepper.state());
    while (stepper.time() < t_end) {
        stepper.advance(t_end);
        traj.times.push_back(stepper.time());
        traj.states.push_back(stepper.state());
    }
    return traj;
}

struct EventPoint {
    double t = 0.0;
    Vec3 state;
};

using EventFn = std::function<double(const Vec3&)>;

namespace detail {

/// Root of g(eval(theta)) in [lo, hi] given a sign change; bisection with a
/// final secant polish. Returns theta.
template <class Dense, class G>
double refine_event(const Dense& dense, const G& g, double lo, double hi, double glo) {
    for (int i = 0; i < 90; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(dense.eval(mid));
        if (gm == 0.0) return mid;
        if ((gm > 0.0) == (glo > 0.0)) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
        if (hi - lo < 1e-16) break;
    }
    return 0.5 * (lo + hi);
}

template <class Dense, class G>
std::optional<EventPoint> event_in_dense(const Dense& dense, const G& g, int direction) {
    const double g0 = g(dense.eval(0.0));
    const double g1 = g(dense.eval(1.0));
    const bool falling = g0 > 0.0 && g1 <= 0.0;
    const bool rising = g0 < 0.0 && g1 >= 0.0;
    if (!((direction <= 0 && falling) || (direction >= 0 && rising))) return std::nullopt;

    const double theta = refine_event(dense, g, 0.0, 1.0, g0);
    const Vec3 s = dense.eval(theta);

    // Transversality: dg/dt estimated from the interpolant.
    const double delta = 1e-6;
    const double tl = std::max(0.0, theta - delta);
    const double tr = std::min(1.0, theta + delta);
    const double dgdt = (g(dense.eval(tr)) - g(dense.eval(tl))) / ((tr - tl) * dense.h);
    if (std::abs(dgdt) < 1e-8)
        throw TangentialCrossing("event crossing is tangential (|dg/dt| < 1e-8)");
    return EventPoint{dense.t0 + theta * dense.h, s};
}

}  // namespace detail

/// Cubic Hermite interpolant over one recorded trajectory segment, used when
/// the dense stepper output is no longer available.
struct HermiteSegment {
    double t0 = 0.0;
    double h = 0.0;
    Vec3 y0, y1, f0, f1;

    Vec3 eval(double theta) const {
        const double th2 = theta * theta;
        const double th3 = th2 * theta;
        const double h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
        const double h10 = th3 - 2.0 * th2 + theta;
        const double h01 = -2.0 * th3 + 3.0 * th2;
        const double h11 = th3 - th2;
        return h00 * y0 + (h10 * h) * f0 + h01 * y1 + (h11 * h) * f1;
    }
};

/// Locate an event inside one segment [t0, t1] of a flow of `sys`. Error if
/// no sign change with the requested direction (-1 falling, +1 rising, 0 any).
template <FlowField F, class G>
EventPoint locate_event(const F& sys, double t0, const Vec3& s0, double t1, const Vec3& s1,
                        const G& event_fn, int direction) {
    HermiteSegment seg{t0, t1 - t0, s0, s1, sys.field(s0), sys.field(s1)};
    auto hit = detail::event_in_dense(seg, event_fn, direction);
    if (!hit) throw NoEvent("locate_event: no sign change over segment");
    return *hit;
}

/// First event along a recorded trajectory.
template <class G>
EventPoint locate_event(const Trajectory& traj, const G& event_fn, int direction) {
    if (!traj.sys) throw std::invalid_argument("locate_event: trajectory has no system attached");
    if (traj.size() < 2) throw NoEvent("locate_event: trajectory too short");
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
        HermiteSegment seg{traj.times[i], traj.times[i + 1] - traj.times[i], traj.states[i],
                           traj.states[i + 1], traj.sys->field(traj.states[i]),
                           traj.sys->field(traj.states[i + 1])};
        try {
            if (auto hit = detail::event_in_dense(seg, event_fn, direction)) return *hit;
        } catch (const TangentialCrossing&) {
            throw;
        }
    }
    throw NoEvent("locate_event: no sign change along trajectory");
}

/// Streams successive event crossings of a flow, refined on the dense output
/// of each accepted integration step.
template <FlowField F>
class EventStream {
  public:
    EventStream(const F& sys, const Vec3& s0, const IntegratorConfig& cfg, EventFn event_fn,
                int direction)
        : stepper_(sys, cfg, 0.0, s0), fn_(std::move(event_fn)), direction_(direction) {}

    /// Advance the transient without reporting events.
    void skip_until(double t) {
        while (stepper_.time() < t) stepper_.advance(t);
    }

    /// Next event strictly before t_max, or nullopt when the budget runs out.
    std::optional<EventPoint> next(double t_max) {
        while (stepper_.time() < t_max) {
            stepper_.advance(t_max);
            if (auto hit = detail::event_in_dense(stepper_.last_step(), fn_, direction_))
                return hit;
        }
        return std::nullopt;
    }

    double time() const { return stepper_.time(); }
    const Vec3& state() const { return stepper_.state(); }

  private:
    DenseStepper<F> stepper_;
    EventFn fn_;
    int direction_;
};

}  // namespace chaoskit
