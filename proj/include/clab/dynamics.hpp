#pragma once

#include <algorithm>
#include <vector>

#include "clab/circlemap.hpp"

// Rotation numbers, fixed-point detection, Koenigs linearization, and the
// prescribed-fixed-point / Denjoy builders.

namespace clab {

// ----------------------------------------------------------- rotation number

struct RotationNumberResult {
    double value = 0.0;
    double error_bound = 0.0;  // Birkhoff bound 1/n (0 for exact translations)
    bool exact = false;
    long iterations = 0;
};

inline RotationNumberResult rotation_number(const CircleMap& f, long n_iter = 100000) {
    if (n_iter < 1) throw error("rotation_number: n_iter >= 1 required");
    if (auto t = f.exact_translation()) return {wrap(*t), 0.0, true, 0};
    double x = 0.0, total = 0.0;
    for (long i = 0; i < n_iter; ++i) {
        double y = f.lift(x);
        total += y - x;
        x = wrap(y);
    }
    return {wrap(total / static_cast<double>(n_iter)), 1.0 / static_cast<double>(n_iter), false, n_iter};
}

// -------------------------------------------------------------- fixed points

// All fixed points of f, located to eps_fix.  Tangential (parabolic) zeros
// of the displacement are resolved through the derivative; a near-zero that
// can be certified neither as a crossing nor as a touch raises an error.
inline std::vector<FixedPointRecord> find_fixed_points(const CircleMap& f, int grid_n = 4096,
                                                       double eps_fix = 1e-10, double eps_par = 1e-6) {
    if (grid_n < 64) throw error("find_fixed_points: grid_n >= 64 required");
    auto disp = [&](double theta) { return wrap_sym(f.lift(wrap(theta)) - wrap(theta)); };

    int n = grid_n;
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) g[i] = disp(static_cast<double>(i) / n);

    std::vector<double> roots;
    auto push_root = [&](double p) {
        for (double r : roots)
            if (circ_dist(r, p) < 64.0 * std::max(eps_fix, 1e-14)) return;
        roots.push_back(p);
    };

    double h = 1.0 / n;
    // Crossings, scanned for f and for f^{-1}: a steep repelling point whose
    // negative displacement lobe falls below grid resolution (and aliases
    // through the wrap) is a mild attracting crossing of the inverse.
    CircleMap finv = f.inverse();
    for (int pass = 0; pass < 2; ++pass) {
        const CircleMap& m = (pass == 0) ? f : finv;
        auto dm = [&](double theta) { return wrap_sym(m.lift(wrap(theta)) - wrap(theta)); };
        for (int i = 0; i < n; ++i) {
            double a = (pass == 0) ? g[i] : dm(static_cast<double>(i) / n);
            double b = (pass == 0) ? g[(i + 1) % n] : dm(static_cast<double>(i + 1) / n);
            if (std::fabs(a) > 0.25 || std::fabs(b) > 0.25) continue;
            if (a == 0.0) { push_root(static_cast<double>(i) / n); continue; }
            if (a * b < 0.0) {
                double lo = static_cast<double>(i) / n, hi = lo + h;
                for (int it = 0; it < 80 && hi - lo > eps_fix * 0.25; ++it) {
                    double mid = 0.5 * (lo + hi);
                    if (dm(lo) * dm(mid) <= 0.0) hi = mid; else lo = mid;
                }
                push_root(wrap(0.5 * (lo + hi)));
            }
        }
    }
    // Tangencies: local minima of |g| that dip near zero without crossing.
    for (int i = 0; i < n; ++i) {
        double gm = g[(i - 1 + n) % n], g0 = g[i], gp = g[(i + 1) % n];
        if (gm * g0 < 0.0 || g0 * gp < 0.0) continue;  // a crossing owns this window
        double tm = std::fabs(gm), t0 = std::fabs(g0), tp = std::fabs(gp);
        if (!(t0 < tm && t0 <= tp)) continue;
        double curv = std::fabs(g[(i + 1) % n] - 2.0 * g[i] + g[(i - 1 + n) % n]);
        double margin = std::max(1e2 * eps_fix, 4.0 * curv);
        if (t0 > margin) continue;
        double lo = static_cast<double>(i - 1) / n, hi = static_cast<double>(i + 1) / n;
        double p;
        double dlo = f.deriv(wrap(lo)) - 1.0, dhi = f.deriv(wrap(hi)) - 1.0;
        if (dlo * dhi < 0.0) {
            for (int it = 0; it < 80 && hi - lo > eps_fix * 0.25; ++it) {
                double mid = 0.5 * (lo + hi);
                double dm = f.deriv(wrap(mid)) - 1.0;
                if (dlo * dm <= 0.0) { hi = mid; } else { lo = mid; dlo = dm; }
            }
            p = wrap(0.5 * (lo + hi));
        } else {
            // golden-section minimum of |disp|
            double a = lo, b = hi;
            const double gr = 0.6180339887498949;
            double c = b - gr * (b - a), d = a + gr * (b - a);
            for (int it = 0; it < 200 && b - a > eps_fix * 0.25; ++it) {
                if (std::fabs(disp(c)) < std::fabs(disp(d))) { b = d; d = c; c = b - gr * (b - a); }
                else { a = c; c = d; d = a + gr * (b - a); }
            }
            p = wrap(0.5 * (a + b));
        }
        bool already = false;
        for (double r : roots)
            if (circ_dist(r, p) < 4.0 * h) already = true;
        if (already) continue;
        double dp = std::fabs(disp(p));
        if (dp < eps_fix) push_root(p);
        else if (dp < margin) throw error("find_fixed_points: unresolved tangency near theta=" + std::to_string(p));
    }

    // Newton polish against f (stable away from parabolic points), then a
    // final merge: the two scan passes can land at slightly different spots
    // around strongly hyperbolic points.
    for (double& p : roots) {
        for (int it = 0; it < 40; ++it) {
            double d = f.deriv(p) - 1.0;
            if (std::fabs(d) < 0.1) break;
            double step = disp(p) / d;
            if (!(std::fabs(step) < 1e-3)) break;
            p = wrap(p - step);
            if (std::fabs(step) < 1e-15) break;
        }
    }
    std::sort(roots.begin(), roots.end());
    std::vector<double> merged;
    for (double p : roots) {
        bool dup = false;
        for (double q : merged)
            if (circ_dist(p, q) < 1e-7) dup = true;
        if (!dup) merged.push_back(p);
    }
    std::vector<FixedPointRecord> out;
    for (double p : merged) {
        double mult = f.deriv(p);
        out.push_back({p, mult, kind_from_multiplier(mult, eps_par)});
    }
    return out;
}

// ------------------------------------------------------ Koenigs linearization

// Iterative Koenigs chart at a hyperbolic fixed point: tau(p) = 0,
// tau o f o tau^{-1} = multiplier * id on the given domain, computed as the
// limit lambda^{-n}(f^n(x) - p) (inverse iteration for repelling points).
class KoenigsChart {
  public:
    KoenigsChart(const CircleMap& f, const FixedPointRecord& p, CyclicInterval domain,
                 double eps_par = 1e-6, double stop_radius = 1e-6)
        : p_(p.location), lambda_(p.multiplier), domain_(domain), stop_(stop_radius) {
        if (std::fabs(lambda_ - 1.0) <= eps_par) throw error("koenigs_chart: not hyperbolic");
        attracting_ = lambda_ < 1.0;
        iter_ = attracting_ ? f : f.inverse();
        step_mult_ = attracting_ ? lambda_ : 1.0 / lambda_;
        if (!domain_.contains(p_)) throw error("koenigs_chart: domain must contain the fixed point");
        // The domain may not cross another fixed point: displacement of f
        // must vanish only at p inside it.
        for (int i = 1; i < 256; ++i) {
            double x = wrap(domain_.lo + domain_.length() * i / 256.0);
            if (circ_dist(x, p_) < 1e-6) continue;
            if (std::fabs(wrap_sym(f.lift(x) - x)) < 1e-12) throw error("koenigs_chart: domain crosses fixed point");
        }
        // Quadratic coefficient of the iterated map at p, for the second-order
        // Koenigs correction tau(s) ~ s + c2 s^2 near the fixed point.
        const double d = 1e-4;
        auto disp = [&](double s) { return wrap_sym(iter_.lift(wrap(p_ + s)) - wrap(p_ + s)); };
        double a = (disp(d) + disp(-d)) / (2.0 * d * d);
        c2_ = a / (step_mult_ - step_mult_ * step_mult_);
    }

    double value(double theta) const {
        double v, d;
        eval(theta, v, d, false);
        return v;
    }
    double deriv(double theta) const {
        double v, d;
        eval(theta, v, d, true);
        return d;
    }
    double multiplier() const { return lambda_; }

    // Monotone inversion of tau on the domain.
    double inverse(double t) const {
        double len = domain_.length();
        auto fs = [&](double s) { return value(wrap(domain_.lo + s)); };
        double slo = 1e-9 * len, shi = len * (1.0 - 1e-9);
        double s = invert_monotone_bisect(fs, t, slo, shi, 1e-15);
        return wrap(domain_.lo + s);
    }

    // |tau(f(x)) - lambda tau(x)| probe.
    double conj_residual(const CircleMap& f, double theta) const {
        return std::fabs(value(f.apply(theta)) - lambda_ * value(theta));
    }

  private:
    // tau(x) = lim mu^{-n} s_n with the O(s^2) truncation corrected through
    // the expansion tau(s) = s + c2 s^2 + O(s^3) of the limit chart.
    void eval(double theta, double& val, double& der, bool want_der) const {
        if (!domain_.contains(wrap(theta))) throw error("koenigs_chart: point outside domain");
        double x = wrap(theta);
        double logscale = 0.0;
        double d = 1.0;
        int n = 0;
        const int max_n = 200000;
        while (std::fabs(wrap_sym(x - p_)) > stop_ && n < max_n) {
            if (want_der) d *= iter_.deriv(x);
            x = iter_.apply(x);
            logscale -= std::log(step_mult_);
            ++n;
        }
        double s = wrap_sym(x - p_);
        val = (s + c2_ * s * s) * std::exp(logscale);
        der = want_der ? (1.0 + 2.0 * c2_ * s) * d * std::exp(logscale) : 0.0;
    }

    double p_, lambda_;
    CyclicInterval domain_;
    double stop_;
    bool attracting_ = true;
    CircleMap iter_;
    double step_mult_ = 1.0;
    double c2_ = 0.0;
};

// ------------------------------------------------------ prescribed builder

struct PrescribedPoint {
    double location = 0.0;
    double multiplier = 1.0;  // exactly 1 marks a parabolic point
};

struct PrescribedProfile {
    double q = 16.0;          // quadratic speed coefficient at parabolic points
    int parabolic_dir = +1;   // displacement sign when nothing else decides it
};

// C^1 circle map whose fixed-point set is exactly the prescribed one, built
// as the time-1 map of closed-form per-interval charts.  Multipliers are
// exact by construction.
inline CircleMap build_prescribed(std::vector<PrescribedPoint> spec, PrescribedProfile profile = {}) {
    if (spec.empty()) throw error("build_prescribed: empty spec");
    for (auto& s : spec) {
        s.location = wrap(s.location);
        if (!(s.multiplier > 0.0)) throw error("build_prescribed: multipliers must be positive");
    }
    std::sort(spec.begin(), spec.end(), [](auto& a, auto& b) { return a.location < b.location; });
    size_t k = spec.size();
    for (size_t i = 0; i + 1 < k; ++i)
        if (spec[i + 1].location - spec[i].location < 1e-12) throw error("build_prescribed: coincident points");

    std::vector<int> para_sign(k, 0);  // displacement sign at parabolic points
    std::vector<int> dir(k, 0);        // flow direction on interval (p_i, p_{i+1})
    auto is_par = [&](size_t i) { return std::fabs(spec[i].multiplier - 1.0) < 1e-14; };

    // Hyperbolic constraints first, then propagate through parabolic points.
    for (size_t i = 0; i < k; ++i) {
        int right = is_par(i) ? 0 : (spec[i].multiplier > 1.0 ? +1 : -1);
        int left = -right;
        if (right != 0) {
            size_t il = (i + k - 1) % k;
            if (dir[i] != 0 && dir[i] != right) throw error("build_prescribed: inconsistent dynamics");
            dir[i] = right;
            if (dir[il] != 0 && dir[il] != left) throw error("build_prescribed: inconsistent dynamics");
            dir[il] = left;
        }
    }
    for (int round = 0; round < static_cast<int>(2 * k + 2); ++round) {
        for (size_t i = 0; i < k; ++i) {
            if (!is_par(i)) continue;
            size_t il = (i + k - 1) % k;
            int s = para_sign[i];
            if (s == 0) s = dir[i] != 0 ? dir[i] : (dir[il] != 0 ? dir[il] : 0);
            if (s == 0) continue;
            if ((dir[i] != 0 && dir[i] != s) || (dir[il] != 0 && dir[il] != s))
                throw error("build_prescribed: inconsistent dynamics");
            para_sign[i] = s;
            dir[i] = s;
            dir[il] = s;
        }
    }
    for (size_t i = 0; i < k; ++i) {
        if (dir[i] != 0) continue;
        // fully free interval (isolated parabolic configuration)
        dir[i] = profile.parabolic_dir;
        size_t ir = (i + 1) % k;
        if (is_par(i) && para_sign[i] == 0) para_sign[i] = dir[i];
        if (is_par(ir) && para_sign[ir] == 0) para_sign[ir] = dir[i];
    }
    for (size_t i = 0; i < k; ++i) {
        size_t il = (i + k - 1) % k;
        if (is_par(i) && dir[i] != dir[il]) throw error("build_prescribed: inconsistent dynamics");
    }

    std::vector<double> pts(k);
    std::vector<EndSpec> ends(k);
    std::vector<int> dirs(k);
    std::vector<FixedPointRecord> meta;
    for (size_t i = 0; i < k; ++i) {
        pts[i] = spec[i].location;
        if (is_par(i)) ends[i] = EndSpec{0.0, profile.q};
        else ends[i] = EndSpec{std::log(spec[i].multiplier), 1.0};
        dirs[i] = dir[i];
        meta.push_back({spec[i].location, spec[i].multiplier,
                        is_par(i) ? FixedPointKind::Parabolic
                                  : kind_from_multiplier(spec[i].multiplier)});
    }
    auto lift = std::make_shared<FlowChartLift>(std::move(pts), std::move(ends), std::move(dirs));
    return CircleMap(lift).with_metadata(std::move(meta));
}

// ------------------------------------------------------------------- Denjoy

struct DenjoyResult {
    CircleMap map;
    double alpha = 0.0;
    double inserted_mass = 0.0;
    // wandering interval of orbit index n = indices[i] is intervals[i];
    // map sends intervals[i] onto the interval of index n+1 exactly for
    // n < max index.
    std::vector<int> indices;
    std::vector<CyclicInterval> intervals;
};

namespace detail {

// Monotone cubic Hermite piece [x0,x1] -> [y0,y1] with endpoint derivatives
// d0, d1 (Fritsch-Carlson clamped).
inline LiftPiece hermite_piece(double x0, double x1, double y0, double y1, double d0, double d1) {
    double h = x1 - x0, sec = (y1 - y0) / h;
    if (!(sec > 0.0)) throw error("hermite_piece: non-increasing data");
    d0 = std::min(d0, 3.0 * sec);
    d1 = std::min(d1, 3.0 * sec);
    d0 = std::max(d0, 1e-12);
    d1 = std::max(d1, 1e-12);
    LiftPiece p;
    p.x0 = x0;
    p.x1 = x1;
    p.val = [=](double x) {
        double t = (x - x0) / h, t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * d0 + (-2 * t3 + 3 * t2) * y1 +
               (t3 - t2) * h * d1;
    };
    p.dval = [=](double x) {
        double t = (x - x0) / h;
        return (6 * t * t - 6 * t) * y0 / h + (3 * t * t - 4 * t + 1) * d0 + (-6 * t * t + 6 * t) * y1 / h +
               (3 * t * t - 2 * t) * d1;
    };
    return p;
}

inline LiftPiece affine_piece(double x0, double x1, double y0) {
    LiftPiece p;
    p.x0 = x0;
    p.x1 = x1;
    double off = y0 - x0;
    p.val = [off](double x) { return x + off; };
    p.dval = [](double) { return 1.0; };
    return p;
}

}  // namespace detail

// C^1 circle map semi-conjugate to the rotation R_alpha whose wandering
// intervals at the truncated orbit positions t0 + n alpha (|n| <= N) have
// the prescribed lengths.  lengths has odd size 2N+1 and lengths[N + n] is
// the length of the interval at orbit index n.  The unallocated mass is
// spread uniformly over the complement, which makes the complement pieces
// exact unit-slope translations in the stretched coordinate.
inline DenjoyResult denjoy_map(double alpha, const std::vector<double>& lengths, double t0 = 0.0) {
    if (lengths.empty()) {
        DenjoyResult r;
        r.map = CircleMap::rotation(alpha);
        r.alpha = alpha;
        return r;
    }
    if (lengths.size() % 2 != 1) throw error("denjoy_map: lengths must have odd size 2N+1");
    int N = static_cast<int>(lengths.size() / 2);
    double s = 0.0;
    for (double l : lengths) {
        if (!(l > 0.0)) throw error("denjoy_map: lengths must be positive");
        s += l;
    }
    if (s >= 1.0) throw error("denjoy_map: mass exceeds circle");

    struct Ins {
        double t;   // rotation coordinate
        int n;      // orbit index
        double len;
        double a;   // left endpoint in map coordinates
    };
    std::vector<Ins> ins;
    for (int n = -N; n <= N; ++n) {
        double t = wrap(t0 + n * alpha);
        ins.push_back({t, n, lengths[static_cast<size_t>(n + N)], 0.0});
    }
    std::sort(ins.begin(), ins.end(), [](const Ins& u, const Ins& v) { return u.t < v.t; });
    for (size_t i = 0; i + 1 < ins.size(); ++i)
        if (ins[i + 1].t - ins[i].t < 1e-12) throw error("denjoy_map: orbit collision at truncation depth");

    double scale = 1.0 - s;
    // x(t) = scale * t + inserted mass strictly below t
    double acc = 0.0;
    std::vector<double> a_of_n(2 * N + 1), len_of_n(2 * N + 1);
    for (auto& e : ins) {
        e.a = scale * e.t + acc;
        acc += e.len;
        a_of_n[static_cast<size_t>(e.n + N)] = e.a;
        len_of_n[static_cast<size_t>(e.n + N)] = e.len;
    }
    auto x_of_t = [&](double t) {
        double x = scale * t;
        for (const auto& e : ins)
            if (e.t < t) x += e.len;
        return x;
    };

    // Two truncation-edge locations.  The hole: the image offset jumps by
    // l_{-N} where t crosses t_{-N} - alpha (nothing maps onto I_{-N} from
    // the orbit side); a local stretch absorbs it.  The carve: I_N has no
    // successor interval, so its image is carved out of the arc starting at
    // the orbit position t_{N+1}.
    double t_hole = wrap(t0 - (N + 1) * alpha);
    double x_hole = x_of_t(t_hole);
    double t_next = wrap(t0 + (N + 1) * alpha);
    double x_next = x_of_t(t_next);

    std::vector<LiftPiece> pieces;
    size_t m = ins.size();
    struct Seg {
        double x0, x1;
        int type;  // 0 = inserted interval (orbit index n), 1 = complement arc
        int n = 0;
    };
    std::vector<Seg> segs;
    for (size_t i = 0; i < m; ++i) {
        const auto& e = ins[i];
        double b = e.a + e.len;
        segs.push_back({e.a, b, 0, e.n});
        double next_a = (i + 1 < m) ? ins[i + 1].a : ins[0].a + 1.0;
        if (next_a - b > 1e-15) segs.push_back({b, next_a, 1, 0});
    }

    double room = 0.0;  // arc room available for the carved image
    {
        double best = 2.0;
        for (const auto& e : ins) {
            double d = wrap(e.t - t_next);
            if (d > 1e-15 && d < best) best = d;
        }
        room = scale * best;
    }
    double carve = std::min(len_of_n.back(), room / 2.0);

    double y = (segs[0].n < N) ? a_of_n[static_cast<size_t>(segs[0].n + 1 + N)] : x_next;

    for (const auto& sg : segs) {
        double xl = sg.x0, xr = sg.x1;
        if (sg.type == 0) {
            double l_img = (sg.n < N) ? len_of_n[static_cast<size_t>(sg.n + 1 + N)] : carve;
            double d_right = (sg.n < N) ? 1.0 : std::min(1.0, carve / (xr - xl));
            pieces.push_back(detail::hermite_piece(xl, xr, y, y + l_img, 1.0, d_right));
            y += l_img;
        } else {
            bool has_hole = cyclic_between(wrap(xl), x_hole, wrap(xr));
            const Seg* prev = (&sg == segs.data()) ? &segs.back() : (&sg - 1);
            bool carved = (prev->type == 0 && prev->n == N);
            double arc_len = xr - xl;
            double lhole = len_of_n.front();
            if (!has_hole && !carved) {
                pieces.push_back(detail::affine_piece(xl, xr, y));
                y += arc_len;
            } else if (carved) {
                // squeezed start (and stretched hole if it happens to share
                // the arc); one monotone Hermite over the whole arc
                double extra = has_hole ? lhole : 0.0;
                double d_left = std::min(1.0, carve / (prev->x1 - prev->x0));
                pieces.push_back(detail::hermite_piece(xl, xr, y, y + arc_len - carve + extra, d_left, 1.0));
                y += arc_len - carve + extra;
            } else {
                double xh = xl + wrap(x_hole - wrap(xl));
                if (xh >= xr) xh = 0.5 * (xl + xr);  // numerical safety
                double win_lo = std::max(xl, xh - std::max(8.0 * lhole, 0.125 * (xh - xl)));
                if (win_lo > xl + 1e-15) pieces.push_back(detail::affine_piece(xl, win_lo, y));
                double y0 = y + (win_lo - xl);
                pieces.push_back(detail::hermite_piece(win_lo, xh, y0, y0 + (xh - win_lo) + lhole, 1.0, 1.0));
                double y1 = y0 + (xh - win_lo) + lhole;
                if (xr > xh + 1e-15) pieces.push_back(detail::affine_piece(xh, xr, y1));
                y += arc_len + lhole;
            }
        }
    }

    DenjoyResult out;
    out.map = CircleMap(std::make_shared<PiecewiseLift>(std::move(pieces)));
    out.alpha = alpha;
    out.inserted_mass = s;
    for (int n = -N; n <= N; ++n) {
        out.indices.push_back(n);
        double a = a_of_n[static_cast<size_t>(n + N)];
        out.intervals.push_back({wrap(a), wrap(a + len_of_n[static_cast<size_t>(n + N)]), false, false});
    }
    return out;
}

}  // namespace clab
