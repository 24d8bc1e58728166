#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "clab/monotone.hpp"

// Volume fields on M_h = S^1 x S^1 \ G(h): densities w(x,y) dx dy with the
// invariance identity f'(x) g'(y) = w(x,y) / w(f x, g y).  All work happens
// in log-density, which keeps positivity automatic and turns the identity
// into an additive cocycle.

namespace clab {

class VolumeField {
  public:
    virtual ~VolumeField() = default;
    virtual double log_density(double x, double y) const = 0;
    double density(double x, double y) const { return std::exp(log_density(x, y)); }
};

class LambdaField final : public VolumeField {
  public:
    explicit LambdaField(std::function<double(double, double)> logd) : logd_(std::move(logd)) {}
    double log_density(double x, double y) const override { return logd_(x, y); }

  private:
    std::function<double(double, double)> logd_;
};

class Omega0Field final : public VolumeField {
  public:
    double log_density(double x, double y) const override { return log_omega0(x, y); }
};

// -------------------------------------------------------------- invariance

struct SamplePoint {
    double x = 0.0, y = 0.0;
};

struct InvarianceReport {
    double max_log_residual = 0.0;
    size_t samples_used = 0;
};

// max over samples of |log(w(f x, g y) f'(x) g'(y)) - log w(x,y)|.  When h is
// given, a sample whose image lands on G(h) within eps_fix is an error.
inline InvarianceReport invariance_residual(const VolumeField& w, const CircleMap& f, const CircleMap& g,
                                            const std::vector<SamplePoint>& samples,
                                            const MonotoneDegreeOneMap* h = nullptr, double eps_fix = 1e-10) {
    InvarianceReport rep;
    for (const auto& s : samples) {
        double fx = f.apply(s.x), gy = g.apply(s.y);
        if (h && !h->in_Mh(fx, gy, eps_fix)) throw error("invariance_residual: sample escapes M_h");
        double lhs = w.log_density(fx, gy) + std::log(f.deriv(s.x)) + std::log(g.deriv(s.y));
        double rhs = w.log_density(s.x, s.y);
        rep.max_log_residual = std::max(rep.max_log_residual, std::fabs(lhs - rhs));
        ++rep.samples_used;
    }
    return rep;
}

// Samples drawn uniformly in M_h, rejecting a margin around G(h).
inline std::vector<SamplePoint> sample_Mh(const MonotoneDegreeOneMap& h, size_t n, Rng& rng,
                                          double margin = 1e-4) {
    std::vector<SamplePoint> out;
    size_t guard = 0;
    while (out.size() < n && guard < 200 * n + 1000) {
        ++guard;
        double x = rng.uniform(), y = rng.uniform();
        double l = h.hl(x), r = h.hr(x);
        double v = wrap(r - l), u = wrap(y - l);
        if (u <= v + margin || u >= 1.0 - margin) continue;
        out.push_back({x, y});
    }
    return out;
}

// --------------------------------------------------------------- geodesics

// Maximal solution of x'(t) = 1/density(x(t)), x(0) = a, stopped at
// x = a + stop_ahead (lift coordinates) or at time T.  Adaptive classic RK4
// with step doubling and cubic dense output.
class GeodesicSolution {
  public:
    GeodesicSolution(std::function<double(double)> density_at, double a, double stop_ahead, double T,
                     double tol = 1e-12)
        : a_(a), dens_(std::move(density_at)) {
        auto speed = [&](double x) { return 1.0 / dens_(x); };
        double t = 0.0, x = a;
        double x_stop = a + stop_ahead;
        double dt = std::min(0.01, T * 0.1);
        push(t, x, speed(x));
        const int max_steps = 400000;
        for (int it = 0; it < max_steps && t < T - 1e-15; ++it) {
            dt = std::min(dt, T - t);
            double x_mid = rk4(speed, x, dt / 2);
            double x_full = rk4(speed, x, dt);
            double x_half = rk4(speed, x_mid, dt / 2);
            double err = std::fabs(x_full - x_half) / 15.0;
            if (err > tol && dt > 1e-13) {
                dt *= 0.5;
                continue;
            }
            double x_new = x_half + (x_half - x_full) / 15.0;
            if (x_new >= x_stop - 1e-13) {
                dt *= 0.5;
                if (dt < 1e-13) {
                    left_domain_ = true;
                    exit_time_ = t;
                    break;
                }
                continue;
            }
            // keep the midpoint too: halves the dense-output interval
            push(t + dt / 2, x_mid, speed(x_mid));
            t += dt;
            x = x_new;
            push(t, x, speed(x));
            if (err < tol / 32.0) dt *= 2.0;
        }
        if (!left_domain_ && t < T - 1e-9) {
            left_domain_ = true;
            exit_time_ = t;
        }
    }

    bool left_domain() const { return left_domain_; }
    double exit_time() const { return exit_time_; }
    double t_max() const { return ts_.back(); }
    double x_max() const { return xs_.back(); }
    double start() const { return a_; }

    double x_at(double t) const {
        if (t <= ts_.front()) return xs_.front();
        if (t >= ts_.back()) return xs_.back();
        size_t lo = 0, hi = ts_.size() - 1;
        while (hi - lo > 1) {
            size_t mid = (lo + hi) / 2;
            if (t < ts_[mid]) hi = mid; else lo = mid;
        }
        double h01 = ts_[lo + 1] - ts_[lo];
        double s = (t - ts_[lo]) / h01;
        double s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * xs_[lo] + (s3 - 2 * s2 + s) * h01 * vs_[lo] +
               (-2 * s3 + 3 * s2) * xs_[lo + 1] + (s3 - s2) * h01 * vs_[lo + 1];
    }

    // t(x) = ts[i] + integral of the density from xs[i] to x (local
    // Gauss-Legendre; dt/dx = density along the slice)
    double t_at(double x) const {
        if (x <= xs_.front()) return ts_.front();
        if (x >= xs_.back()) return ts_.back();
        size_t lo = 0, hi = xs_.size() - 1;
        while (hi - lo > 1) {
            size_t mid = (lo + hi) / 2;
            if (x < xs_[mid]) hi = mid; else lo = mid;
        }
        static const double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                     0.5384693101056831, 0.9061798459386640};
        static const double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                     0.4786286704993665, 0.2369268850561891};
        double a = xs_[lo], b = x;
        double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        double integral = 0.0;
        for (int i = 0; i < 5; ++i) integral += gw[i] * dens_(mid + half * gx[i]);
        return ts_[lo] + integral * half;
    }

  private:
    void push(double t, double x, double v) {
        ts_.push_back(t);
        xs_.push_back(x);
        vs_.push_back(v);
    }
    template <typename F>
    static double rk4(F&& f, double x, double dt) {
        double k1 = f(x);
        double k2 = f(x + 0.5 * dt * k1);
        double k3 = f(x + 0.5 * dt * k2);
        double k4 = f(x + dt * k3);
        return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }

    double a_;
    std::function<double(double)> dens_;
    std::vector<double> ts_, xs_, vs_;
    bool left_domain_ = false;
    double exit_time_ = 0.0;
};

// Horizontal isotropic geodesic through (a, y0) in M_h.
inline GeodesicSolution isotropic_geodesic(const VolumeField& w, const MonotoneDegreeOneMap& h, double y0,
                                           double a, double T, double tol = 1e-10) {
    if (!h.in_Mh(a, y0)) throw error("isotropic_geodesic: start not in M_h");
    double stop_ahead = 2.0;  // unbounded (no wall): cap at two turns
    try {
        CyclicInterval wall = h.graph_preimage(y0);
        stop_ahead = wrap(wall.lo - wrap(a));
        if (stop_ahead == 0.0) stop_ahead = 1.0;
    } catch (const error&) {
    }
    auto dens = [&w, y0](double x) { return w.density(wrap(x), y0); };
    return GeodesicSolution(dens, wrap(a), stop_ahead, T, tol);
}

// Two-sided chart along the slice at level y0: t(theta) with t(a) = 0,
// t' = w(theta, y0).
class SliceChart {
  public:
    SliceChart(const VolumeField& w, const MonotoneDegreeOneMap& h, double y0, double a, double T,
               double tol = 1e-10)
        : fwd_(make_fwd(w, h, y0, a, T, tol)), bwd_(make_bwd(w, h, y0, a, T, tol)), a_(wrap(a)) {}

    double t_min() const { return -bwd_.t_max(); }
    double t_max() const { return fwd_.t_max(); }

    double x_of_t(double t) const {
        if (t >= 0.0) return wrap(fwd_.x_at(t));
        return wrap(-bwd_.x_at(-t));
    }

    double t_of_x(double theta) const {
        double ahead = wrap(wrap(theta) - a_);
        double fwd_span = fwd_.x_max() - fwd_.start();
        if (ahead <= fwd_span) return fwd_.t_at(fwd_.start() + ahead);
        double behind = wrap(a_ - wrap(theta));
        double bwd_span = bwd_.x_max() - bwd_.start();
        if (behind <= bwd_span) return -bwd_.t_at(bwd_.start() + behind);
        throw error("slice_chart: point outside the charted slice");
    }

  private:
    static GeodesicSolution make_fwd(const VolumeField& w, const MonotoneDegreeOneMap& h, double y0,
                                     double a, double T, double tol) {
        return isotropic_geodesic(w, h, y0, a, T, tol);
    }
    static GeodesicSolution make_bwd(const VolumeField& w, const MonotoneDegreeOneMap& h, double y0,
                                     double a, double T, double tol) {
        // x(-t) = -xi(t) where xi' = 1/w(-xi, y0)
        double stop_ahead = 2.0;
        try {
            CyclicInterval wall = h.graph_preimage(y0);
            stop_ahead = wrap(wrap(a) - wall.hi);
            if (stop_ahead == 0.0) stop_ahead = 1.0;
        } catch (const error&) {
        }
        auto dens = [&w, y0](double xi) { return w.density(wrap(-xi), y0); };
        return GeodesicSolution(dens, -wrap(a), stop_ahead, T, tol);
    }

    GeodesicSolution fwd_, bwd_;
    double a_;
};

// --------------------------------------------------- stabilizer affine chart

struct AffineChartEntry {
    double slope = 1.0;        // expected slope 1/g'(b)
    double intercept = 0.0;    // measured alpha(0)
    double slope_dev = 0.0;    // max |measured slope - expected|
    MobiusElement as_mobius;   // the affine map in the chart (fixes infinity)
};

struct StabilizerChartResult {
    std::vector<AffineChartEntry> entries;
    MonotoneDegreeOneMap psi;
    double b = 0.0;
};

// Chart from the horizontal geodesic at level b = h(x0); each pair (f, g)
// fixing (x0, b) acts affinely in the chart with slope 1/g'(b).  psi is the
// induced degree-one semi-conjugacy, constant (the point at infinity) on the
// closure of h^{-1}(b).
inline StabilizerChartResult stabilizer_affine_chart(const VolumeField& w, const MonotoneDegreeOneMap& h,
                                                     double x0,
                                                     const std::vector<std::pair<CircleMap, CircleMap>>& pairs,
                                                     double T = 200.0) {
    double b = h.value(x0);
    // base point: the middle of the slice, as far from the wall as possible
    CyclicInterval wall0{wrap(x0), wrap(x0), true, true};
    try {
        wall0 = h.graph_preimage(b);
    } catch (const error&) {
    }
    double a = wrap(wall0.hi + 0.5 * (1.0 - wall0.length()));
    if (!h.in_Mh(a, b, 1e-12)) throw error("stabilizer_affine_chart: no base point in the slice");
    for (const auto& [f, g] : pairs) {
        if (circ_dist(f.apply(x0), x0) > 1e-9 || circ_dist(g.apply(b), b) > 1e-9)
            throw error("stabilizer_affine_chart: pair not in stabilizer");
    }

    SliceChart chart(w, h, b, a, T);

    std::vector<AffineChartEntry> entries;
    for (const auto& [f, g] : pairs) {
        double expected = 1.0 / g.deriv(b);
        double alpha0 = chart.t_of_x(f.apply(chart.x_of_t(0.0)));
        // shrink the probe window until all images stay charted
        double t_lo = 0.85 * chart.t_min(), t_hi = 0.85 * chart.t_max();
        auto probe_ok = [&](double t) {
            try {
                chart.t_of_x(f.apply(chart.x_of_t(t)));
                return true;
            } catch (const error&) {
                return false;
            }
        };
        for (int it = 0; it < 80 && !probe_ok(t_lo); ++it) t_lo *= 0.5;
        for (int it = 0; it < 80 && !probe_ok(t_hi); ++it) t_hi *= 0.5;
        double dev = 0.0;
        int m = 32;
        double prev_t = t_lo, prev_a = chart.t_of_x(f.apply(chart.x_of_t(t_lo)));
        for (int i = 1; i <= m; ++i) {
            double t = t_lo + (t_hi - t_lo) * i / m;
            double at = chart.t_of_x(f.apply(chart.x_of_t(t)));
            double slope = (at - prev_a) / (t - prev_t);
            dev = std::max(dev, std::fabs(slope - expected));
            prev_t = t;
            prev_a = at;
        }
        AffineChartEntry e;
        e.slope = expected;
        e.intercept = alpha0;
        e.slope_dev = dev;
        double p = expected;
        e.as_mobius = MobiusElement(std::sqrt(p), alpha0 / std::sqrt(p), 0.0, 1.0 / std::sqrt(p));
        entries.push_back(e);
    }

    // psi: atan-compactified chart; the wall maps to theta = 1/2 + base shift
    CyclicInterval wall{wrap(x0), wrap(x0), true, true};
    try {
        wall = h.graph_preimage(b);
    } catch (const error&) {
    }
    const double theta_inf = 0.5;  // the affine maps fix x = infinity, i.e. theta = 1/2
    double slice_lo = wall.hi;
    double slice_len = 1.0 - wall.length();
    std::vector<MonotonePiece> pp;
    MonotonePiece smooth;
    smooth.x0 = slice_lo;
    smooth.x1 = slice_lo + slice_len;
    double tmin = chart.t_min(), tmax = chart.t_max();
    smooth.fn = [chart, theta_inf, tmin, tmax, slice_lo, slice_len](double x) {
        double t;
        double u = x - slice_lo;
        if (u <= 0.0) t = tmin;
        else if (u >= slice_len) t = tmax;
        else {
            try {
                t = chart.t_of_x(wrap(x));
            } catch (const error&) {
                t = (u < slice_len / 2) ? tmin : tmax;
            }
        }
        return theta_inf + 0.5 + std::atan(t) / kPi;
    };
    pp.push_back(smooth);
    if (wall.length() > 1e-15) {
        MonotonePiece cw;
        cw.x0 = smooth.x1;
        cw.x1 = slice_lo + 1.0;
        cw.constant = true;
        cw.value = theta_inf + 1.0;
        pp.push_back(cw);
    } else {
        // widen the smooth piece to the full period (isolated wall point)
        pp.back().x1 = slice_lo + 1.0;
    }
    MonotoneDegreeOneMap psi(std::move(pp));
    return StabilizerChartResult{std::move(entries), std::move(psi), b};
}

}  // namespace clab
