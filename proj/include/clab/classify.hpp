#pragma once

#include "clab/monotone.hpp"

// The taxonomy of area-preserving pair elements and the convergence-property
// probe.  Classification follows the fixed-point counting tree: fixed points
// of f with multiplier checks, the exclusion "at most one fixed point of g
// pairs with a given fixed point of f inside M_h", and the rotation-number
// branch for fixed-point-free maps.

namespace clab {

enum class ElementTag {
    Psl2Hyperbolic,
    Psl2Parabolic,
    Psl2Rotation,   // irrational rotation class
    FiniteOrder,
    DoubleCoverParabolic,
    ThreeFixed,
    FourFixed,
    DenjoyExcluded,
};

inline const char* to_string(ElementTag t) {
    switch (t) {
        case ElementTag::Psl2Hyperbolic: return "psl2-hyperbolic";
        case ElementTag::Psl2Parabolic: return "psl2-parabolic";
        case ElementTag::Psl2Rotation: return "psl2-rotation";
        case ElementTag::FiniteOrder: return "finite-order";
        case ElementTag::DoubleCoverParabolic: return "double-cover-parabolic";
        case ElementTag::ThreeFixed: return "three-fixed";
        case ElementTag::FourFixed: return "four-fixed";
        case ElementTag::DenjoyExcluded: return "denjoy-excluded";
    }
    return "?";
}

struct ElementClass {
    ElementTag tag = ElementTag::Psl2Hyperbolic;
    std::vector<FixedPointRecord> f_fixed, g_fixed;
    double rotation_number = 0.0;
    int order = 0;  // for finite-order elements
    std::string note;
};

namespace detail {

inline std::vector<FixedPointRecord> fixed_data(const CircleMap& f, int grid_n, double eps_par) {
    if (!f.metadata().empty()) return f.metadata();  // trust exact builder data
    return find_fixed_points(f, grid_n, 1e-10, eps_par);
}

inline bool near_rational(double rho, int max_q, double tol, int& p_out, int& q_out) {
    for (int q = 1; q <= max_q; ++q) {
        double pq = rho * q;
        double p = std::round(pq);
        if (std::fabs(pq - p) < tol * q) {
            p_out = static_cast<int>(p) % q;
            q_out = q;
            return true;
        }
    }
    return false;
}

}  // namespace detail

inline ElementClass classify_element(const CircleMap& f, const CircleMap& g, const MonotoneDegreeOneMap& h,
                                     double eps_par = 1e-6, int grid_n = 4096, long rot_iters = 200000) {
    ElementClass out;
    out.f_fixed = detail::fixed_data(f, grid_n, eps_par);
    out.g_fixed = detail::fixed_data(g, grid_n, eps_par);

    auto count_par = [&](const std::vector<FixedPointRecord>& v) {
        int c = 0;
        for (const auto& r : v)
            if (r.kind == FixedPointKind::Parabolic) ++c;
        return c;
    };
    // ambiguous multipliers without construction metadata
    if (f.metadata().empty()) {
        for (const auto& r : out.f_fixed) {
            double d = std::fabs(r.multiplier - 1.0);
            if (d > eps_par * 0.1 && d < eps_par * 10.0)
                throw error("classify_element: ambiguous multiplier at theta=" + std::to_string(r.location));
        }
    }

    size_t nf = out.f_fixed.size();
    if (nf > 0) {
        // the exclusion check: each fixed point of f admits at most one
        // fixed point of g with the pair inside M_h
        for (const auto& rf : out.f_fixed) {
            int inside = 0;
            for (const auto& rg : out.g_fixed)
                if (h.in_Mh(rf.location, rg.location, 1e-9)) ++inside;
            if (inside > 1)
                throw error("classify_element: exclusion violated (two g-fixed points pair with one f-fixed "
                            "point in M_h)");
        }
        if (nf == 1) {
            out.tag = ElementTag::Psl2Parabolic;
            return out;
        }
        if (nf == 2) {
            int np = count_par(out.f_fixed);
            if (np == 0) {
                out.tag = ElementTag::Psl2Hyperbolic;
                return out;
            }
            // two parabolic points: the opened-parabolic shape of the
            // one-fixed-point class
            out.tag = ElementTag::Psl2Parabolic;
            out.note = "two parabolic fixed points (opened parabolic fixed point)";
            return out;
        }
        if (nf == 3) {
            if (count_par(out.f_fixed) != 1)
                throw error("classify_element: three fixed points need exactly one parabolic multiplier");
            out.tag = ElementTag::ThreeFixed;
            return out;
        }
        if (nf == 4) {
            if (count_par(out.f_fixed) != 2)
                throw error("classify_element: four fixed points need exactly two parabolic multipliers");
            out.tag = ElementTag::FourFixed;
            return out;
        }
        throw error("classify_element: unexpected fixed point count " + std::to_string(nf));
    }

    // fixed-point free: rotation number branch
    auto rn = rotation_number(f, rot_iters);
    out.rotation_number = rn.value;
    int p = 0, q = 0;
    double rat_tol = rn.exact ? 1e-12 : std::max(4.0 * rn.error_bound, 1e-7);
    if (detail::near_rational(rn.value, 64, rat_tol, p, q)) {
        // rational: finite order or the double-cover parabolic class via f^q
        CircleMap fq = f;
        for (int i = 1; i < q; ++i) fq = compose(fq, f);
        double sup = 0.0;
        for (int i = 0; i < 256; ++i) {
            double x = (i + 0.5) / 256.0;
            sup = std::max(sup, circ_dist(fq.apply(x), x));
        }
        if (sup < 1e-7) {
            out.tag = ElementTag::FiniteOrder;
            out.order = q;
            return out;
        }
        if (q == 2) {
            auto f2 = detail::fixed_data(fq, grid_n, eps_par);
            if (f2.size() == 2 && count_par(f2) == 2) {
                out.tag = ElementTag::DoubleCoverParabolic;
                return out;
            }
        }
        throw error("classify_element: rational rotation number with no admissible square structure");
    }
    // irrational: rotation class, unless a wandering gap is detected
    auto probe = minimal_set_probe({f}, {0.123}, 48);
    if (probe.kind == MinimalSetKind::CantorLike) {
        out.tag = ElementTag::DenjoyExcluded;
        out.note = "wandering gap detected (excluded for area-preserving pairs)";
        return out;
    }
    out.tag = ElementTag::Psl2Rotation;
    return out;
}

// --------------------------------------------------------- convergence probe

enum class ConvergenceVerdict { Equicontinuous, NorthSouth, FailsConvergence };

struct ConvergenceReport {
    ConvergenceVerdict verdict = ConvergenceVerdict::Equicontinuous;
    double a = 0.0, b = 0.0;  // north/south data
    int clusters = 0;
    double top_mass = 0.0;
};

// Pointwise limit clustering of a map sequence on a grid.  Equicontinuity is
// detected through the maximal grid-cell stretch; otherwise late values are
// clustered and north/south requires a single macroscopic cluster absorbing
// more than 99% of the grid.
inline ConvergenceReport convergence_probe(const std::vector<CircleMap>& seq, int grid_n = 1024) {
    if (seq.size() < 8) throw error("convergence_probe: need at least 8 maps");
    size_t n = seq.size();
    size_t tail_start = n - n / 4 - 1;

    double max_stretch = 0.0;
    for (size_t k = tail_start; k < n; ++k) {
        for (int i = 0; i < grid_n; ++i) {
            double v0 = seq[k].apply(static_cast<double>(i) / grid_n);
            double v1 = seq[k].apply(static_cast<double>(i + 1) / grid_n);
            max_stretch = std::max(max_stretch, wrap(v1 - v0));
        }
    }
    ConvergenceReport rep;
    if (max_stretch <= 20.0 / grid_n) {
        rep.verdict = ConvergenceVerdict::Equicontinuous;
        return rep;
    }

    // late values of every grid point
    std::vector<double> values;
    for (size_t k = tail_start; k < n; ++k)
        for (int i = 0; i < grid_n; ++i) values.push_back(seq[k].apply(static_cast<double>(i) / grid_n));
    std::sort(values.begin(), values.end());
    double sep = 10.0 / grid_n;
    struct Cluster {
        double lo, hi;
        size_t count;
    };
    std::vector<Cluster> clusters;
    for (double v : values) {
        if (!clusters.empty() && v - clusters.back().hi < sep) {
            clusters.back().hi = v;
            ++clusters.back().count;
        } else {
            clusters.push_back({v, v, 1});
        }
    }
    // cyclic merge of the first/last clusters
    if (clusters.size() > 1 && (clusters.front().lo + 1.0 - clusters.back().hi) < sep) {
        clusters.front().lo = clusters.back().lo - 1.0;
        clusters.front().count += clusters.back().count;
        clusters.pop_back();
    }
    size_t total = values.size();
    std::sort(clusters.begin(), clusters.end(), [](auto& u, auto& v) { return u.count > v.count; });
    int macro = 0;
    for (const auto& c : clusters)
        if (c.count > total / 100) ++macro;
    rep.clusters = macro;
    rep.top_mass = static_cast<double>(clusters.front().count) / total;

    if (macro == 1 && rep.top_mass > 0.99) {
        rep.verdict = ConvergenceVerdict::NorthSouth;
        rep.b = wrap(0.5 * (clusters.front().lo + clusters.front().hi));
        // the exceptional point: fixed point of the late maps within the
        // non-converged arc (bisection on the displacement of the last map)
        const CircleMap& last = seq.back();
        double best = 0.0, best_d = -1.0;
        for (int i = 0; i < grid_n; ++i) {
            double x = static_cast<double>(i) / grid_n;
            double d = circ_dist(last.apply(x), rep.b);
            if (d > best_d) {
                best_d = d;
                best = x;
            }
        }
        // refine: fixed point of `last` near the slowest grid point
        double lo = best - 2.0 / grid_n, hi = best + 2.0 / grid_n;
        auto disp = [&](double x) { return wrap_sym(last.lift(wrap(x)) - wrap(x)); };
        if (disp(lo) * disp(hi) < 0) {
            for (int it = 0; it < 60; ++it) {
                double mid = 0.5 * (lo + hi);
                if (disp(lo) * disp(mid) <= 0) hi = mid; else lo = mid;
            }
            rep.a = wrap(0.5 * (lo + hi));
        } else {
            rep.a = wrap(best);
        }
        return rep;
    }
    rep.verdict = ConvergenceVerdict::FailsConvergence;
    return rep;
}

// convenience: the iterate sequence f, f^2, ..., f^n
inline std::vector<CircleMap> iterate_sequence(const CircleMap& f, int n) {
    std::vector<CircleMap> out;
    CircleMap cur = f;
    for (int i = 0; i < n; ++i) {
        out.push_back(cur);
        cur = refit(compose(cur, f), 1e-10);
    }
    return out;
}

// conjugate a monotone degree-one map: c2 o h o c1^{-1}
inline MonotoneDegreeOneMap conjugate_monotone(const MonotoneDegreeOneMap& h, const CircleMap& c1,
                                               const CircleMap& c2) {
    CircleMap c1inv = c1.inverse();
    std::vector<MonotonePiece> out;
    for (const auto& p : h.pieces()) {
        MonotonePiece np;
        np.x0 = c1.lift(p.x0);
        np.x1 = c1.lift(p.x1);
        if (p.constant) {
            np.constant = true;
            np.value = c2.lift(p.value);
        } else {
            auto fn = p.fn;
            CircleMap cc1 = c1inv, cc2 = c2;
            np.fn = [fn, cc1, cc2](double z) { return cc2.lift(fn(cc1.lift(z))); };
        }
        out.push_back(np);
    }
    return MonotoneDegreeOneMap(std::move(out));
}

}  // namespace clab
