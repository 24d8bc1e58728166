#pragma once

#include "clab/volume.hpp"

// The triple-space picture of the geodesic flow: ordered boundary triples
// (x_-, x_0, x_+), the flow moving the middle coordinate, hyperbolicity
// diagnostics along word axes, and the cocycle/coboundary solver
// sigma(p) = -int_0^T alpha(psi^t p) dt used to build flow-invariant
// densities on the stable/unstable sets.

namespace clab {

struct TriplePoint {
    double xm = 0.0, x0 = 0.25, xp = 0.5;
    bool ordered() const { return cyclic_between(xm, x0, xp); }
};

// log of the flow-invariant triple density (square root of the pairwise
// two-point density product)
inline double triple_liouville_log(const TriplePoint& p) {
    return 0.5 * (log_omega0(p.xm, p.x0) + log_omega0(p.x0, p.xp) + log_omega0(p.xm, p.xp));
}

// speed of the middle coordinate: the projective field vanishing at xm, xp,
// normalized to derivative 1 at xm (matches the e^t chart scaling)
inline double flow_speed(const TriplePoint& p) {
    double s1 = std::sin(kPi * wrap_sym(p.x0 - p.xm));
    double s2 = std::sin(kPi * wrap_sym(p.x0 - p.xp));
    double s3 = std::sin(kPi * wrap_sym(p.xm - p.xp));
    return s1 * s2 / (kPi * s3);
}

// Mobius element normalizing (xm, xp) to (theta=0, theta=1/2)
inline MobiusElement triple_frame(double xm, double xp) {
    // frame F with F e2 = p(xm), F e1 = p(xp); the normalizer is F^{-1}
    double fa = std::sin(kPi * xp), fc = std::cos(kPi * xp);
    double fb = std::sin(kPi * xm), fd = std::cos(kPi * xm);
    double det = fa * fd - fb * fc;
    if (det < 0) {
        fa = -fa;
        fc = -fc;
        det = -det;
    }
    return MobiusElement(fd / det, -fb / det, -fc / det, fa / det);
}

// flow by time t: normalize (xm, xp) to (0, infinity), scale the middle
// chart coordinate by e^t, map back
inline TriplePoint flow_step(const TriplePoint& p, double t) {
    if (!p.ordered()) throw error("flow_step: triple not cyclically ordered");
    MobiusElement M = triple_frame(p.xm, p.xp);
    MobiusElement S(std::exp(t / 2.0), 0.0, 0.0, std::exp(-t / 2.0));
    MobiusElement back = M.inverse() * S * M;
    return TriplePoint{p.xm, back.apply(p.x0), p.xp};
}

// --------------------------------------------------------- nonwandering set

inline double dist_to_cloud(double x, const std::vector<double>& sorted_cloud) {
    if (sorted_cloud.empty()) return 1.0;
    auto it = std::lower_bound(sorted_cloud.begin(), sorted_cloud.end(), wrap(x));
    double best = 1.0;
    auto consider = [&](std::vector<double>::const_iterator jt) {
        if (jt >= sorted_cloud.begin() && jt < sorted_cloud.end())
            best = std::min(best, circ_dist(x, *jt));
    };
    consider(it);
    consider(it == sorted_cloud.begin() ? sorted_cloud.end() - 1 : it - 1);
    if (it == sorted_cloud.end()) consider(sorted_cloud.begin());
    return best;
}

inline bool nonwandering_test(const TriplePoint& p, const std::vector<double>& sorted_cloud, double tol) {
    return dist_to_cloud(p.xm, sorted_cloud) <= tol && dist_to_cloud(p.xp, sorted_cloud) <= tol;
}

// ------------------------------------------------- hyperbolicity diagnostic

struct HyperbolicityFit {
    double C = 0.0, lambda = 0.0, r2 = 0.0;
    std::vector<double> ts, log_devs;
};

// Contraction rate along the stable direction of a periodic (word-axis)
// orbit: perturb x_+, flow one period, renormalize by the word, repeat.
inline HyperbolicityFit hyperbolicity_diagnostic(const MobiusElement& word, int periods = 8,
                                                 double eps = 1e-6, bool unstable = false) {
    if (word.classify() != MobiusClass::Hyperbolic)
        throw error("hyperbolicity_diagnostic: need a hyperbolic word");
    auto fp = word.fixed_points();
    double att = fp[0], rep = fp[1];
    double tr = std::fabs(word.trace());
    double lam = (tr + std::sqrt(tr * tr - 4.0)) / 2.0;
    double period = 2.0 * std::log(lam);

    MobiusElement w = unstable ? word.inverse() : word;
    // stable direction: perturb xp; unstable: perturb xm (equivalently run
    // the inverse word on the swapped triple)
    TriplePoint base{unstable ? att : rep, 0.0, unstable ? rep : att};
    base.x0 = wrap(base.xm + 0.5 * wrap(base.xp - base.xm));

    HyperbolicityFit fit;
    double dev = eps;
    TriplePoint q = base;
    if (!unstable) q.xp = wrap(q.xp + eps);
    else q.xm = wrap(q.xm + eps);
    for (int k = 0; k < periods; ++k) {
        // one period of the flow followed by the renormalizing word
        q = flow_step(q, period);
        q = TriplePoint{w.inverse().apply(q.xm), w.inverse().apply(q.x0), w.inverse().apply(q.xp)};
        dev = unstable ? circ_dist(q.xm, base.xm) : circ_dist(q.xp, base.xp);
        if (dev <= 0.0) break;
        fit.ts.push_back((k + 1) * period);
        fit.log_devs.push_back(std::log(dev / eps));
    }
    // least squares fit log dev = log C - lambda t
    size_t n = fit.ts.size();
    if (n < 3) throw error("hyperbolicity_diagnostic: fit rejected (too few points)");
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        sx += fit.ts[i];
        sy += fit.log_devs[i];
        sxx += fit.ts[i] * fit.ts[i];
        sxy += fit.ts[i] * fit.log_devs[i];
        syy += fit.log_devs[i] * fit.log_devs[i];
    }
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    double inter = (sy - slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    for (size_t i = 0; i < n; ++i) {
        double pred = inter + slope * fit.ts[i];
        ss_res += (fit.log_devs[i] - pred) * (fit.log_devs[i] - pred);
        ss_tot += (fit.log_devs[i] - sy / n) * (fit.log_devs[i] - sy / n);
    }
    fit.lambda = -slope;
    fit.C = std::exp(inter);
    fit.r2 = (ss_tot > 0) ? 1.0 - ss_res / ss_tot : 1.0;
    if (fit.r2 < 0.99) throw error("hyperbolicity_diagnostic: fit rejected (R^2 < 0.99)");
    return fit;
}

// ------------------------------------------------------ cocycle / coboundary

using TripleField = std::function<double(const TriplePoint&)>;  // log density

// alpha(p) = dA/dt|_0 for psi^{t*} w0 = e^{-A} w0, by central differences in
// t (the flow moves only the middle slot; the Jacobian is d x0(t)/d x0).
inline double flow_cocycle_alpha(const TripleField& logw, const TriplePoint& p, double dt = 1e-4) {
    auto at = [&](double t) {
        TriplePoint q = flow_step(p, t);
        double e = 1e-6;
        TriplePoint pp = p, pm = p;
        pp.x0 = wrap(p.x0 + e);
        pm.x0 = wrap(p.x0 - e);
        double jac = wrap_sym(flow_step(pp, t).x0 - flow_step(pm, t).x0) / (2.0 * e);
        return logw(q) + std::log(std::fabs(jac));
    };
    return (at(dt) - at(-dt)) / (2.0 * dt);
}

struct CocycleSample {
    TriplePoint point;
    double alpha = 0.0;
    double sigma = 0.0;
    double truncation_T = 0.0;
    double tail_C = 0.0, tail_lambda = 0.0;  // fitted |alpha| ~ C e^{-lambda t}
    double residual1 = 0.0, residual2 = 0.0; // cocycle residual at s = 1, 2
};

// sigma(p) = -int_0^T alpha(psi^t p) dt (negative T integrates backwards,
// the unstable-side convention).
inline double coboundary_integral(const TripleField& logw, const TriplePoint& p, double T,
                                  int base_steps = 64) {
    // adaptive composite Simpson by interval halving
    double sign = (T >= 0) ? 1.0 : -1.0;
    double len = std::fabs(T);
    auto f = [&](double t) { return flow_cocycle_alpha(logw, flow_step(p, sign * t)); };
    auto simpson = [&](int n) {
        double h = len / n, s = f(0.0) + f(len);
        for (int i = 1; i < n; ++i) s += f(i * h) * ((i % 2) ? 4.0 : 2.0);
        return s * h / 3.0;
    };
    double prev = simpson(base_steps), cur = simpson(2 * base_steps);
    for (int n = 4 * base_steps; n <= 16 * base_steps && std::fabs(cur - prev) > 1e-9; n *= 2) {
        prev = cur;
        cur = simpson(n);
    }
    return -sign * cur;
}

inline CocycleSample coboundary_solve(const TripleField& logw, const TriplePoint& p, double T,
                                      bool unstable_side = false) {
    double sgn = unstable_side ? -1.0 : 1.0;
    CocycleSample out;
    out.point = p;
    out.truncation_T = T;
    out.alpha = flow_cocycle_alpha(logw, p);
    out.sigma = coboundary_integral(logw, p, sgn * T);

    // cocycle residual |sigma(psi^s p) - sigma(p) - int_0^s alpha|; the
    // truncation tail int_T^{T+s} |alpha| is exactly what it measures
    for (double s : {1.0, 2.0}) {
        TriplePoint ps = flow_step(p, sgn * s);
        double sig_s = coboundary_integral(logw, ps, sgn * T);
        double seg = -coboundary_integral(logw, p, sgn * s);
        double res = std::fabs(sig_s - out.sigma - seg);
        if (s == 1.0) out.residual1 = res;
        else out.residual2 = res;
    }

    // tail fit: |alpha| along the orbit at dyadic times
    std::vector<double> ts, la;
    bool decreasing = true;
    double prev_mag = std::fabs(flow_cocycle_alpha(logw, flow_step(p, sgn * 0.5)));
    for (double t = 1.0; t <= T; t *= 2.0) {
        double mag = std::fabs(flow_cocycle_alpha(logw, flow_step(p, sgn * t)));
        if (mag > 1e-300) {
            ts.push_back(t);
            la.push_back(std::log(mag));
        }
        if (mag > prev_mag * 1.1 + 1e-12) decreasing = false;
        prev_mag = mag;
    }
    if (!decreasing) throw error("coboundary_solve: orbit does not approach the nonwandering set");
    if (ts.size() >= 3) {
        size_t n = ts.size();
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (size_t i = 0; i < n; ++i) {
            sx += ts[i];
            sy += la[i];
            sxx += ts[i] * ts[i];
            sxy += ts[i] * la[i];
        }
        double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        out.tail_lambda = -slope;
        out.tail_C = std::exp((sy - slope * sx) / n);
    }
    return out;
}

// --------------------------------------------------------- section projection

// w2(x, y) = (transverse density of the flow-invariant field) evaluated at
// the section point (x, i0(x,y), y): the contraction of the 3-form with the
// flow field, which is constant along the middle slot for invariant fields.
inline double project_to_Mh_log(const TripleField& logw1, const TriplePoint& p) {
    return logw1(p) + std::log(std::fabs(flow_speed(p)));
}

// default section: the chart midpoint of the middle slot
inline double midpoint_section(double xm, double xp) {
    TriplePoint p{xm, wrap(xm + 0.5 * wrap(xp - xm)), xp};
    return flow_step(p, 0.0).x0;
}

}  // namespace clab
