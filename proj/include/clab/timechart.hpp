#pragma once

#include <cmath>
#include <optional>

#include "clab/core.hpp"

// Per-interval flow-time charts.  On an interval (lo, hi) between two fixed
// points of a circle map f, a chart T with T(f(x)) = T(x) + 1 linearizes the
// dynamics into a unit translation.  We build T in closed form from the end
// data: a hyperbolic end with log-multiplier m contributes (1/m) log u, a
// parabolic end with quadratic speed coefficient q contributes -dir/(q u),
// where u is the distance to the end.  The associated vector field is
// v = 1/T' and the time-1 map of v has exactly the prescribed multipliers.
//
// Points are carried as offset pairs (u, w) with u + w = len (distances to
// the two ends); keeping both avoids catastrophic cancellation deep in the
// hyperbolic/parabolic tails.

namespace clab {

struct EndSpec {
    // log-multiplier of the map at the fixed point; 0 means parabolic.
    double m = 0.0;
    // quadratic speed coefficient for parabolic ends (|v| ~ q u^2), q > 0.
    double q = 1.0;
    bool parabolic() const { return m == 0.0; }
};

struct OffsetPair {
    double u = 0.0;  // distance from lo
    double w = 0.0;  // distance from hi (u + w = len)
};

class IntervalTimeChart {
  public:
    // Interval (lo, lo+len) in lift coordinates, 0 < len <= 1.  dir = +1 if
    // the flow moves from lo toward hi, -1 otherwise.  Consistency between
    // dir and the end multipliers is the caller's responsibility.
    IntervalTimeChart(double lo, double len, EndSpec end_lo, EndSpec end_hi, int dir)
        : lo_(lo), len_(len), elo_(end_lo), ehi_(end_hi), dir_(dir) {
        if (!(len_ > 0.0 && len_ <= 1.0)) throw error("IntervalTimeChart: bad length");
        if (dir_ != 1 && dir_ != -1) throw error("IntervalTimeChart: dir must be +-1");
    }

    double lo() const { return lo_; }
    double hi() const { return lo_ + len_; }
    double length() const { return len_; }
    int dir() const { return dir_; }
    const EndSpec& end_lo() const { return elo_; }
    const EndSpec& end_hi() const { return ehi_; }

    double offset(double theta) const { return wrap(theta - lo_); }
    OffsetPair offsets(double theta) const {
        double u = offset(theta);
        return {u, len_ - u};
    }
    bool contains(double theta) const {
        double u = wrap(theta - lo_);
        return u > 0.0 && u < len_;
    }

    double time_uw(const OffsetPair& p) const { return lo_term(p.u) + hi_term(p.w); }
    double time_u(double u) const { return time_uw({u, len_ - u}); }
    double time(double theta) const { return time_uw(offsets(theta)); }

    // dT/du; has constant sign equal to dir on the whole interval.
    double dtime_uw(const OffsetPair& p) const {
        double s = 0.0;
        s += elo_.parabolic() ? dir_ / (elo_.q * p.u * p.u) : 1.0 / (elo_.m * p.u);
        s += ehi_.parabolic() ? dir_ / (ehi_.q * p.w * p.w) : -1.0 / (ehi_.m * p.w);
        return s;
    }
    double dtime_u(double u) const { return dtime_uw({u, len_ - u}); }
    double dtime(double theta) const { return dtime_uw(offsets(theta)); }
    // Signed speed of the flow, v = 1/T'.
    double speed(double theta) const { return 1.0 / dtime(theta); }

    // Inverse chart with both end distances resolved accurately.
    OffsetPair solve_time(double t) const {
        auto g = [&](double u) { return dir_ * time_u(u); };
        double gt = dir_ * t;
        double ulo = len_ * 0.5, uhi = len_ * 0.5;
        for (int it = 0; it < 4200 && g(ulo) > gt; ++it) {
            ulo *= 0.5;
            if (ulo < len_ * 1e-290) break;
        }
        for (int it = 0; it < 4200 && g(uhi) < gt; ++it) {
            double w = (len_ - uhi) * 0.5;
            if (w < len_ * 1e-290) break;
            uhi = len_ - w;
        }
        double x = 0.5 * (ulo + uhi);
        for (int it = 0; it < 100; ++it) {
            double gx = g(x) - gt;
            if (gx > 0.0) uhi = x; else ulo = x;
            double d = dir_ * dtime_u(x);
            double xn = x - gx / d;
            if (!(xn > ulo && xn < uhi)) xn = 0.5 * (ulo + uhi);
            if (std::fabs(xn - x) <= 1e-15 * x + 1e-300) { x = xn; break; }
            x = xn;
        }
        OffsetPair out{x, len_ - x};
        if (out.u > 0.5 * len_) {
            // polish the hi-end distance in its own variable
            double w = out.w;
            for (int it = 0; it < 60; ++it) {
                if (!(w > 0.0)) { w = len_ * 1e-300; break; }
                double f = time_uw({len_ - w, w}) - t;
                double dfdw = -dtime_uw({len_ - w, w});
                double wn = w - f / dfdw;
                if (!(wn > 0.0 && wn < len_)) break;
                if (std::fabs(wn - w) <= 1e-15 * w) { w = wn; break; }
                w = wn;
            }
            out.w = w;
            out.u = len_ - w;
        }
        return out;
    }

    double offset_at_time(double t) const { return solve_time(t).u; }

    // Flow by time dt in offset coordinates.
    OffsetPair flow_pair(const OffsetPair& p, double dt) const {
        if (p.u <= 0.0 || p.w <= 0.0) return p;  // fixed point
        const double tiny = 1e-11 * len_;
        if (p.u < tiny) {
            double unew = end_advance(elo_, p.u, dt, false);
            if (unew >= 0.0) return {unew, len_ - unew};
        }
        if (p.w < tiny) {
            double wnew = end_advance(ehi_, p.w, dt, true);
            if (wnew >= 0.0) return {len_ - wnew, wnew};
        }
        return solve_time(time_uw(p) + dt);
    }

    double flow_offset(double u, double dt) const { return flow_pair({u, len_ - u}, dt).u; }

    // Flow by time dt: theta -> T^{-1}(T(theta) + dt).  The time-1 map is the
    // restriction of the underlying circle map to this interval.
    double flow(double theta, double dt) const { return wrap(lo_ + flow_pair(offsets(theta), dt).u); }

    // Derivative of the time-dt flow map: T'(p)/T'(p'), with both evaluations
    // in offset coordinates.
    double flow_derivative_pair(const OffsetPair& p, double dt) const {
        const double tiny = 1e-11 * len_;
        if (p.u < tiny || p.w < tiny) {
            const EndSpec& e = (p.u < tiny) ? elo_ : ehi_;
            if (e.parabolic()) return 1.0;
            return std::exp(e.m * dt);
        }
        OffsetPair p2 = flow_pair(p, dt);
        return dtime_uw(p) / dtime_uw(p2);
    }
    double flow_derivative_offset(double u, double dt) const {
        return flow_derivative_pair({u, len_ - u}, dt);
    }
    double flow_derivative(double theta, double dt) const {
        return flow_derivative_pair(offsets(theta), dt);
    }

    // Subleading constant of T at an end: T = (1/m) log u + c + O(u) for a
    // hyperbolic end (resp. -dir/(q u) + c + O(u) parabolic).  Needed when
    // matching densities across fixed-point lines.
    double end_constant_lo() const { return hi_term(len_); }
    double end_constant_hi() const { return lo_term(len_); }

  private:
    double lo_term(double u) const {
        if (elo_.parabolic()) return -dir_ / (elo_.q * u);
        return std::log(u) / elo_.m;
    }
    double hi_term(double w) const {
        if (ehi_.parabolic()) return dir_ / (ehi_.q * w);
        return std::log(w) / ehi_.m;
    }

    // Advance the distance to an end by time dt using the local model; valid
    // for tiny distances only.  Returns a negative number when the local
    // model would leave its validity range.
    double end_advance(const EndSpec& e, double w, double dt, bool is_hi) const {
        if (e.parabolic()) {
            double sgn = is_hi ? 1.0 : -1.0;
            double den = 1.0 + sgn * dir_ * e.q * w * dt;
            if (den <= 0.5) return -1.0;
            return w / den;
        }
        // lo end: u' = u e^{m dt}; hi end: w' = w e^{m dt} (same formula).
        double wn = w * std::exp(e.m * dt);
        if (wn > 1e-8 * len_) return -1.0;
        return wn;
    }

    double lo_, len_;
    EndSpec elo_, ehi_;
    int dir_;
};

}  // namespace clab
