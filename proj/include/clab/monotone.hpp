#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "clab/dynamics.hpp"

// Non-decreasing degree-one maps h with exact piece/jump bookkeeping, their
// filled graphs G(h), the complement M_h, the generalized (Ghys) inverse,
// semi-conjugacy residuals, and the collapse / orbit-opening constructions.
//
// The canonical object is the graph, not the pointwise values: equality of
// semi-conjugacies means equality of G(h) as a point set, and values at
// jumps follow the right-continuous convention.

namespace clab {

struct MonotonePiece {
    double x0 = 0.0, x1 = 1.0;  // [x0, x1) in lift coordinates
    bool constant = false;
    double value = 0.0;                    // constant pieces
    std::function<double(double)> fn;      // smooth pieces: nondecreasing lift values
    std::function<double(double)> fn_inv;  // optional exact inverse

    double at(double x) const { return constant ? value : fn(x); }
    double v0() const { return constant ? value : fn(x0); }
    double v1() const { return constant ? value : fn(x1); }
};

class MonotoneDegreeOneMap {
  public:
    explicit MonotoneDegreeOneMap(std::vector<MonotonePiece> pieces) : pieces_(std::move(pieces)) {
        if (pieces_.empty()) throw error("MonotoneDegreeOneMap: no pieces");
        base_ = pieces_.front().x0;
        double prev = pieces_.front().v0();
        bool nonconst = false;
        for (size_t i = 0; i < pieces_.size(); ++i) {
            const auto& p = pieces_[i];
            if (p.x1 - p.x0 < 0.0) throw error("MonotoneDegreeOneMap: inverted piece");
            if (i + 1 < pieces_.size() && std::fabs(p.x1 - pieces_[i + 1].x0) > 1e-12)
                throw error("MonotoneDegreeOneMap: pieces do not tile the period");
            if (p.v0() < prev - 1e-9) throw error("MonotoneDegreeOneMap: decreasing values");
            if (p.v1() < p.v0() - 1e-9) throw error("MonotoneDegreeOneMap: decreasing piece");
            prev = p.v1();
            if (!p.constant) nonconst = true;
            if (p.constant) nonconst = nonconst;  // constants alone are fine piecewise
        }
        if (std::fabs(pieces_.back().x1 - (base_ + 1.0)) > 1e-12)
            throw error("MonotoneDegreeOneMap: pieces must span one period");
        if (pieces_.front().v0() + 1.0 < prev - 1e-9)
            throw error("MonotoneDegreeOneMap: degree-one closure violated");
        double span = pieces_.back().v1() - pieces_.front().v0();
        if (span > 1.0 + 1e-9) throw error("MonotoneDegreeOneMap: total rise exceeds one");
        (void)nonconst;
    }

    static MonotoneDegreeOneMap identity() {
        MonotonePiece p;
        p.x0 = 0.0;
        p.x1 = 1.0;
        p.fn = [](double x) { return x; };
        p.fn_inv = [](double v) { return v; };
        return MonotoneDegreeOneMap({p});
    }

    // Step map: h == values[i] on [breaks[i], breaks[i+1]) (cyclic).
    static MonotoneDegreeOneMap step(const std::vector<double>& breaks, const std::vector<double>& values) {
        if (breaks.size() != values.size() || breaks.size() < 1) throw error("step: bad data");
        std::vector<MonotonePiece> ps;
        double carry = 0.0;
        for (size_t i = 0; i < breaks.size(); ++i) {
            MonotonePiece p;
            p.x0 = breaks[i];
            p.x1 = (i + 1 < breaks.size()) ? breaks[i + 1] : breaks[0] + 1.0;
            p.constant = true;
            double v = values[i] + carry;
            if (i > 0 && v < ps.back().value) {
                v += 1.0;
                carry += 1.0;
            }
            p.value = v;
            ps.push_back(p);
        }
        return MonotoneDegreeOneMap(std::move(ps));
    }

    const std::vector<MonotonePiece>& pieces() const { return pieces_; }

    // Right-continuous lift value at any real x.
    double lift_value(double x) const {
        double k = std::floor(x - base_);
        const MonotonePiece& p = piece_at(x - k);
        return p.at(x - k) + k;
    }

    // Circle values and one-sided limits.
    double value(double x) const { return wrap(lift_value(wrap(x))); }
    double hr(double x) const { return value(x); }
    double hl(double x) const {
        double xf = wrap(x);
        double k = std::floor(xf - base_);
        double xe = xf - k;
        size_t i = index_at(xe);
        if (std::fabs(xe - pieces_[i].x0) < 1e-15) {
            // left limit through the previous piece
            double v = (i == 0) ? pieces_.back().v1() - 1.0 : pieces_[i - 1].v1();
            return wrap(v + k);
        }
        return wrap(pieces_[i].at(xe) + k);
    }

    // Filled-graph fiber {x} x [h_l(x), h_r(x)].
    CyclicInterval fiber(double x) const {
        double l = hl(x), r = hr(x);
        return CyclicInterval{l, r, true, true};
    }

    bool in_graph(double x, double y, double tol = 1e-12) const {
        double l = hl(x), r = hr(x);
        double v = wrap(r - l), u = wrap(wrap(y) - l);
        return u <= v + tol || u >= 1.0 - tol;
    }
    bool in_Mh(double x, double y, double tol = 1e-12) const { return !in_graph(x, y, tol); }

    // Generalized preimage {x : c in fiber(x)}, a closed cyclic interval
    // (single point for regular values).  Monotonicity makes the hits a
    // cyclically contiguous run over the piece scan.
    CyclicInterval graph_preimage(double c) const {
        c = wrap(c);
        const double tol = 1e-12;
        size_t n = pieces_.size();
        // scan slots: one per actual jump, one per piece (empty jumps are
        // skipped so they do not break a contiguous run of hits)
        struct Hit {
            bool yes = false;
            double a = 0.0, b = 0.0;
        };
        std::vector<Hit> hits;
        for (size_t i = 0; i < n; ++i) {
            const auto& p = pieces_[i];
            double v0 = p.v0(), v1 = p.v1();
            double prev = (i == 0) ? pieces_.back().v1() - 1.0 : pieces_[i - 1].v1();
            if (v0 - prev > tol) {
                double kj = std::ceil(prev - c - tol);
                double cj = c + kj;
                Hit h;
                if (cj <= v0 + tol && cj >= prev - tol) h = {true, wrap(p.x0), wrap(p.x0)};
                hits.push_back(h);
            }
            Hit h;
            double k = std::ceil(v0 - c - tol);
            double cl = c + k;
            if (cl <= v1 + tol && cl >= v0 - tol) {
                if (p.constant || v1 - v0 < tol) {
                    h = {true, wrap(p.x0), wrap(p.x1)};
                } else {
                    double target = std::min(std::max(cl, v0), v1);
                    double x = p.fn_inv ? p.fn_inv(target)
                                        : invert_monotone_bisect([&](double t) { return p.fn(t); }, target,
                                                                 p.x0, p.x1);
                    h = {true, wrap(x), wrap(x)};
                }
            }
            hits.push_back(h);
        }
        // locate the contiguous run of hits (cyclically)
        size_t m = hits.size();
        size_t start = m;  // first hit preceded by a miss
        for (size_t i = 0; i < m; ++i) {
            if (hits[i].yes && !hits[(i + m - 1) % m].yes) {
                start = i;
                break;
            }
        }
        if (start == m) {
            // all-or-nothing
            for (size_t i = 0; i < m; ++i)
                if (hits[i].yes) return CyclicInterval{0.0, 0.0, true, true};  // everything
            throw error("graph_preimage: value not attained");
        }
        double lo = hits[start].a, hi = hits[start].b;
        for (size_t i = 1; i < m; ++i) {
            const Hit& h = hits[(start + i) % m];
            if (!h.yes) break;
            hi = h.b;
        }
        return CyclicInterval{lo, hi, true, true};
    }

    // Ghys inverse h*: sup{x : lift(x) <= y} as exact piece surgery; the
    // involution G(h**) = G(h) holds at the level of the piece structure.
    MonotoneDegreeOneMap ghys_inverse() const {
        std::vector<MonotonePiece> out;
        const double tol = 1e-12;
        for (size_t i = 0; i < pieces_.size(); ++i) {
            const auto& p = pieces_[i];
            // jump before piece i becomes a constant piece of h*
            double prev = (i == 0) ? pieces_.back().v1() - 1.0 : pieces_[i - 1].v1();
            double v0 = p.v0();
            if (v0 - prev > tol) {
                MonotonePiece cp;
                cp.x0 = prev;
                cp.x1 = v0;
                cp.constant = true;
                cp.value = p.x0;
                out.push_back(cp);
            }
            if (p.constant || p.v1() - v0 < tol) continue;  // contributes a jump of h*
            MonotonePiece sp;
            sp.x0 = v0;
            sp.x1 = p.v1();
            if (p.fn_inv) {
                sp.fn = p.fn_inv;
            } else {
                auto fn = p.fn;
                double a = p.x0, b = p.x1;
                sp.fn = [fn, a, b](double v) {
                    return invert_monotone_bisect([&](double t) { return fn(t); }, v, a, b);
                };
            }
            auto base_fn = sp.fn;
            double lo = v0, hi = p.v1(), xa = p.x0, xb = p.x1;
            sp.fn = [base_fn, lo, hi, xa, xb](double v) {
                if (v <= lo) return xa;
                if (v >= hi) return xb;
                return base_fn(v);
            };
            {
                auto orig = p.fn;
                sp.fn_inv = orig;
            }
            out.push_back(sp);
        }
        if (out.empty()) throw error("ghys_inverse: h constant on full measure");
        // normalize x1 of the last piece to first.x0 + 1
        double want = out.front().x0 + 1.0;
        if (std::fabs(out.back().x1 - want) > 1e-9) throw error("ghys_inverse: inverse pieces do not close");
        out.back().x1 = want;
        return MonotoneDegreeOneMap(std::move(out));
    }

    // Sample of G(h): graph points plus subdivided jump segments.
    std::vector<std::pair<double, double>> sample_graph(int n) const {
        std::vector<std::pair<double, double>> pts;
        for (int i = 0; i < n; ++i) {
            double x = static_cast<double>(i) / n;
            pts.emplace_back(wrap(x), value(x));
        }
        for (const auto& p : pieces_) {
            double l = hl(wrap(p.x0)), r = hr(wrap(p.x0));
            double jump = wrap(r - l);
            if (jump > 1e-12 && jump < 1.0 - 1e-12) {
                for (int j = 0; j <= 8; ++j) pts.emplace_back(wrap(p.x0), wrap(l + jump * j / 8.0));
            }
        }
        return pts;
    }

    std::vector<double> jump_points() const {
        std::vector<double> out;
        for (const auto& p : pieces_) {
            double l = hl(wrap(p.x0)), r = hr(wrap(p.x0));
            if (circ_dist(l, r) > 1e-12 || wrap(r - l) > 0.5) out.push_back(wrap(p.x0));
        }
        return out;
    }

  private:
    const MonotonePiece& piece_at(double xe) const { return pieces_[index_at(xe)]; }
    size_t index_at(double xe) const {
        size_t lo = 0, hi = pieces_.size();
        while (hi - lo > 1) {
            size_t mid = (lo + hi) / 2;
            if (xe < pieces_[mid].x0) hi = mid; else lo = mid;
        }
        return lo;
    }

    std::vector<MonotonePiece> pieces_;
    double base_ = 0.0;
};

// -------------------------------------------------------- semi-conjugacy

// max over a grid of d(h(f x), g(h x)), with one-sided checks at the jump
// points of h.
inline double semiconj_residual_pair(const CircleMap& f, const CircleMap& g, const MonotoneDegreeOneMap& h,
                                     int grid_n = 512) {
    double worst = 0.0;
    for (int i = 0; i < grid_n; ++i) {
        double x = (i + 0.13) / grid_n;  // avoid landing on jumps
        worst = std::max(worst, circ_dist(h.value(f.apply(x)), g.apply(h.value(x))));
    }
    for (double b : h.jump_points()) {
        worst = std::max(worst, circ_dist(h.hl(f.apply(b)), g.apply(h.hl(b))));
        worst = std::max(worst, circ_dist(h.hr(f.apply(b)), g.apply(h.hr(b))));
    }
    return worst;
}

// ----------------------------------------------------------------- collapse

struct CollapseResult {
    std::vector<CircleMap> collapsed;
    MonotoneDegreeOneMap h;
    // per generator: image gap index of each gap, or -1 when the image is
    // absorbed in the complement (truncation edge of a finite approximation)
    std::vector<std::vector<int>> gap_permutation;
    int absorbed_count = 0;
};

// Exact lift of the collapse staircase: constant on gaps, affine of slope
// 1/(1-s) on the complement.
class CollapseStaircase {
  public:
    CollapseStaircase(std::vector<CyclicInterval> gaps) : gaps_(std::move(gaps)) {
        std::sort(gaps_.begin(), gaps_.end(), [](auto& a, auto& b) { return a.lo < b.lo; });
        mass_ = 0.0;
        for (auto& g : gaps_) mass_ += g.length();
        if (mass_ >= 1.0) throw error("collapse: gaps cover the circle");
        scale_ = 1.0 / (1.0 - mass_);
        // cumulative gap mass strictly below gaps_[i].lo
        cum_.assign(gaps_.size(), 0.0);
        double acc = 0.0;
        for (size_t i = 0; i < gaps_.size(); ++i) {
            cum_[i] = acc;
            acc += gaps_[i].length();
        }
    }

    // h value (lift) at x in [gaps_[0].lo, +1)
    double lift(double x) const {
        double x0 = gaps_.empty() ? 0.0 : gaps_[0].lo;
        double k = std::floor(x - x0);
        double xe = x - k;
        // find last gap with lo <= xe
        size_t lo = 0, hi = gaps_.size();
        while (hi - lo > 1) {
            size_t mid = (lo + hi) / 2;
            if (xe < gaps_[mid].lo) hi = mid; else lo = mid;
        }
        double glo = gaps_[lo].lo, glen = gaps_[lo].length();
        double inside = std::min(std::max(xe - glo, 0.0), glen);
        double complement_below = (xe - glo - inside) + (glo - x0 - cum_[lo]);
        return (complement_below)*scale_ + k;  // h(gaps[0].lo) = 0 normalization
    }

    double mass() const { return mass_; }
    const std::vector<CyclicInterval>& gaps() const { return gaps_; }

    // inverse on the collapsed circle: right-continuous section
    double lift_inverse(double z) const {
        double k = std::floor(z);
        double ze = z - k;
        // invert within [0,1): complement position ze/scale_ translated back
        double target = ze / scale_;
        // find gap index: cumulative complement before gap i is
        // (gaps_[i].lo - x0 - cum_[i])
        double x0 = gaps_[0].lo;
        size_t lo = 0, hi = gaps_.size();
        while (hi - lo > 1) {
            size_t mid = (lo + hi) / 2;
            double comp_before = wrap(gaps_[mid].lo - x0) - cum_[mid];
            if (target < comp_before) hi = mid; else lo = mid;
        }
        double comp_before = wrap(gaps_[lo].lo - x0) - cum_[lo];
        double x = gaps_[lo].lo + gaps_[lo].length() + (target - comp_before);
        return x + k;
    }

  private:
    std::vector<CyclicInterval> gaps_;
    std::vector<double> cum_;
    double mass_ = 0.0, scale_ = 1.0;
};

inline CollapseResult collapse(const std::vector<CircleMap>& gens, std::vector<CyclicInterval> gaps,
                               double eps_fix = 1e-8) {
    if (gaps.empty()) {
        CollapseResult r{gens, MonotoneDegreeOneMap::identity(), {}, 0};
        return r;
    }
    std::sort(gaps.begin(), gaps.end(), [](auto& a, auto& b) { return a.lo < b.lo; });
    // Each gap must map onto a gap of the list; an image disjoint from every
    // listed gap is tolerated (truncation edge of a finite approximation),
    // a partial overlap is a genuine invariance failure.
    std::vector<std::vector<int>> perms;
    int absorbed = 0;
    for (const CircleMap& g : gens) {
        std::vector<int> perm;
        for (const auto& gap : gaps) {
            double il = g.apply(gap.lo), ih = g.apply(gap.hi);
            int found = -1;
            for (size_t j = 0; j < gaps.size(); ++j) {
                if (circ_dist(il, gaps[j].lo) < eps_fix && circ_dist(ih, gaps[j].hi) < eps_fix) {
                    found = static_cast<int>(j);
                    break;
                }
            }
            if (found < 0) {
                CyclicInterval img{il, ih, false, false};
                for (const auto& other : gaps) {
                    bool touches = img.contains(other.lo) || img.contains(other.midpoint()) ||
                                   other.contains(il) || other.contains(img.midpoint());
                    if (touches) throw error("collapse: gaps not invariant under generator");
                }
                ++absorbed;
            }
            perm.push_back(found);
        }
        perms.push_back(std::move(perm));
    }

    CollapseStaircase st(gaps);
    // h as a MonotoneDegreeOneMap (constant on gaps, affine between)
    std::vector<MonotonePiece> hp;
    const auto& gs = st.gaps();
    for (size_t i = 0; i < gs.size(); ++i) {
        MonotonePiece cp;
        cp.x0 = gs[i].lo;
        cp.x1 = cp.x0 + gs[i].length();
        cp.constant = true;
        cp.value = st.lift(cp.x0);
        hp.push_back(cp);
        double next = (i + 1 < gs.size()) ? gs[i + 1].lo : gs[0].lo + 1.0;
        if (next - cp.x1 > 1e-15) {
            MonotonePiece sp;
            sp.x0 = cp.x1;
            sp.x1 = next;
            sp.fn = [st](double x) { return st.lift(x); };
            sp.fn_inv = [st](double v) { return st.lift_inverse(v); };
            hp.push_back(sp);
        }
    }
    MonotoneDegreeOneMap h(std::move(hp));

    std::vector<CircleMap> cols;
    for (const auto& g : gens) {
        auto F = [st, g](double z) { return st.lift(g.lift(st.lift_inverse(z))); };
        cols.push_back(CircleMap(std::make_shared<FunctionLift>(F)));
    }
    return CollapseResult{std::move(cols), std::move(h), std::move(perms), absorbed};
}

// ----------------------------------------------------------- orbit opening

struct IntervalAction {
    // increasing homeomorphism of [0,1] fixing the endpoints
    std::function<double(double)> fn;
    std::function<double(double)> dfn;
    bool identity = true;
};

struct OpenOrbitResult {
    std::vector<CircleMap> opened;
    MonotoneDegreeOneMap h;
    std::vector<double> orbit;           // enumerated orbit points (original circle)
    std::vector<CyclicInterval> gaps;    // inserted intervals (opened circle)
};

namespace detail {

// Right-continuous staircase lift for orbit opening: slope (1-s) plus a jump
// of length[j] at each orbit point.
class OpeningStaircase {
  public:
    OpeningStaircase(std::vector<double> points, std::vector<double> lengths)
        : pts_(std::move(points)), len_(std::move(lengths)) {
        std::vector<size_t> idx(pts_.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return pts_[a] < pts_[b]; });
        std::vector<double> ps, ls;
        for (size_t i : idx) {
            ps.push_back(pts_[i]);
            ls.push_back(len_[i]);
        }
        pts_ = std::move(ps);
        len_ = std::move(ls);
        mass_ = 0.0;
        cum_.assign(pts_.size(), 0.0);
        for (size_t i = 0; i < pts_.size(); ++i) {
            cum_[i] = mass_;
            mass_ += len_[i];
        }
        if (mass_ >= 1.0) throw error("open_orbit: gap mass exceeds circle");
        scale_ = 1.0 - mass_;
    }

    double mass() const { return mass_; }
    size_t count() const { return pts_.size(); }
    const std::vector<double>& points() const { return pts_; }
    const std::vector<double>& lengths() const { return len_; }

    // strictly-below mass at x in [p0, p0+1)
    double mass_below(double xe) const {
        size_t lo = 0, hi = pts_.size();
        while (hi - lo > 1) {
            size_t mid = (lo + hi) / 2;
            if (xe <= pts_[mid]) hi = mid; else lo = mid;
        }
        if (xe <= pts_[0]) return 0.0;
        return cum_[lo] + ((xe > pts_[lo]) ? len_[lo] : 0.0);
    }

    // left-continuous lift (jump value not yet added at orbit points)
    double lift_left(double x) const {
        double k = std::floor(x - pts_[0]);
        double xe = x - k;
        return scale_ * (xe - pts_[0]) + mass_below(xe) + k;  // value 0 at p0-
    }
    // right-continuous lift
    double lift_right(double x) const {
        double k = std::floor(x - pts_[0]);
        double xe = x - k;
        double extra = 0.0;
        for (size_t i = 0; i < pts_.size(); ++i)
            if (xe == pts_[i]) extra = len_[i];
        return scale_ * (xe - pts_[0]) + mass_below(xe) + extra + k;
    }

    // section on the complement of the opened gaps (gap interiors map to the
    // collapsed orbit point)
    double lift_inverse(double z) const {
        double k = std::floor(z);
        double ze = z - k;
        // value just below the jump at pts_[i] is scale*(pts_[i]-p0) + cum_[i]
        size_t lo = 0, hi = pts_.size();
        while (hi - lo > 1) {
            size_t mid = (lo + hi) / 2;
            double v_at = scale_ * (pts_[mid] - pts_[0]) + cum_[mid];
            if (ze <= v_at) hi = mid; else lo = mid;
        }
        double v_lo_top = scale_ * (pts_[lo] - pts_[0]) + cum_[lo] + len_[lo];
        double x = (ze <= v_lo_top) ? pts_[lo] : pts_[lo] + (ze - v_lo_top) / scale_;
        return x + k;
    }

    double gap_bottom(size_t i) const { return scale_ * (pts_[i] - pts_[0]) + cum_[i]; }

  private:
    std::vector<double> pts_, len_, cum_;
    double mass_ = 0.0, scale_ = 1.0;
};

}  // namespace detail

// Open the (truncated) orbit of x0 into intervals of the given lengths.  The
// stabilizer action alpha applies when some generator fixes x0; otherwise it
// must be the identity.  Transports between opened intervals are affine.
inline OpenOrbitResult open_orbit(const std::vector<CircleMap>& gens, double x0,
                                  const std::vector<double>& gap_lengths, IntervalAction alpha = {},
                                  double eps_fix = 1e-10) {
    x0 = wrap(x0);
    if (gap_lengths.empty() || std::all_of(gap_lengths.begin(), gap_lengths.end(),
                                           [](double l) { return l == 0.0; })) {
        return OpenOrbitResult{gens, MonotoneDegreeOneMap::identity(), {x0}, {}};
    }
    for (double l : gap_lengths)
        if (!(l > 0.0)) throw error("open_orbit: gap lengths must be positive");

    // BFS orbit enumeration
    std::vector<CircleMap> all;
    for (const auto& g : gens) {
        all.push_back(g);
        all.push_back(g.inverse());
    }
    std::vector<double> orbit{x0};
    std::vector<size_t> frontier{0};
    bool stabilized_x0 = false;
    for (const auto& g : gens)
        if (circ_dist(g.apply(x0), x0) < 1e-12) stabilized_x0 = true;
    if (!alpha.identity && !stabilized_x0)
        throw error("open_orbit: stabilizer mismatch (alpha supplied for trivial stabilizer)");
    while (orbit.size() < gap_lengths.size() && !frontier.empty()) {
        std::vector<size_t> next;
        for (size_t fi : frontier) {
            for (const auto& g : all) {
                double y = g.apply(orbit[fi]);
                bool known = false;
                for (double p : orbit) {
                    double d = circ_dist(p, y);
                    if (d < 1e-12) known = true;
                    else if (d < eps_fix)
                        throw error("open_orbit: orbit collision at truncation depth");
                }
                if (!known && orbit.size() < gap_lengths.size()) {
                    orbit.push_back(y);
                    next.push_back(orbit.size() - 1);
                }
            }
        }
        frontier = std::move(next);
    }
    size_t n_orbit = orbit.size();
    std::vector<double> lens(gap_lengths.begin(), gap_lengths.begin() + n_orbit);

    detail::OpeningStaircase st(orbit, lens);
    // (points/lengths reordered inside; rebuild the index map)
    const auto& pts = st.points();
    const auto& ls = st.lengths();
    size_t n = st.count();

    auto find_point = [&](double y) -> int {
        for (size_t i = 0; i < n; ++i)
            if (circ_dist(pts[i], y) < 1e-10) return static_cast<int>(i);
        return -1;
    };
    int idx_x0 = find_point(x0);

    // gap intervals in opened coordinates
    std::vector<double> A(n), B(n);
    for (size_t i = 0; i < n; ++i) {
        A[i] = wrap(st.gap_bottom(i));
        B[i] = wrap(st.gap_bottom(i) + ls[i]);
    }

    // h pieces: affine slope (1-s) between orbit points, jumps at them
    double scale = 1.0 - st.mass();
    std::vector<MonotonePiece> hp;
    for (size_t i = 0; i < n; ++i) {
        MonotonePiece sp;
        sp.x0 = pts[i];
        sp.x1 = (i + 1 < n) ? pts[i + 1] : pts[0] + 1.0;
        double btop = st.gap_bottom(i) + ls[i];
        double p0 = pts[i];
        sp.fn = [btop, p0, scale](double x) { return btop + scale * (x - p0); };
        sp.fn_inv = [btop, p0, scale](double v) { return p0 + (v - btop) / scale; };
        hp.push_back(sp);
    }
    MonotoneDegreeOneMap h(std::move(hp));

    // Build each opened generator as a piecewise lift in opened coordinates.
    std::vector<CircleMap> opened;
    for (const auto& g : gens) {
        // strict composite functor
        auto strict = [st, g](double z) { return st.lift_left(g.lift(st.lift_inverse(z))); };

        struct GapJob {
            size_t j;          // source gap
            int q;             // target gap (or -1: carve)
            double ystar;      // unenumerated target point
        };
        std::vector<GapJob> jobs(n);
        for (size_t j = 0; j < n; ++j) {
            double y = g.apply(pts[j]);
            jobs[j] = {j, find_point(y), y};
        }
        // holes: enumerated targets whose g-preimage is unenumerated
        struct Hole {
            double z;    // opened coordinate of the preimage point
            double len;  // jump absorbed
        };
        std::vector<Hole> holes;
        for (size_t q = 0; q < n; ++q) {
            double pre = g.apply_inverse(pts[q]);
            if (find_point(pre) < 0) holes.push_back({wrap(st.lift_left(pre)), ls[q]});
        }

        std::vector<LiftPiece> pieces;
        // walk gaps in opened order; gap j occupies [A_j, B_j].  cursor is
        // the running lift value, cursor_ideal the value of the untruncated
        // construction (they differ transiently after a carve).
        double frame0 = A[0];
        double cursor, cursor_ideal;
        {
            const GapJob& j0 = jobs[0];
            cursor = (j0.q >= 0) ? st.gap_bottom(static_cast<size_t>(j0.q)) : st.lift_left(j0.ystar);
            cursor_ideal = cursor;
        }
        // helper: clamped strict-composite arc piece with exact endpoint data
        auto arc_piece = [&](double p0, double p1, double vstart, double vend, double K) {
            LiftPiece p;
            auto fn = strict;
            p.x0 = p0;
            p.x1 = p1;
            p.val = [=](double z) {
                if (z <= p0) return vstart;
                if (z >= p1) return vend;
                return fn(z) + K;
            };
            p.dval = [st, g](double z) { return g.deriv(wrap(st.lift_inverse(z))); };
            return p;
        };
        for (size_t j = 0; j < n; ++j) {
            double za = frame0 + wrap(A[j] - frame0);
            double zb = za + ls[j];
            double znext = (j + 1 < n) ? frame0 + wrap(A[j + 1] - frame0) : frame0 + 1.0;
            const GapJob& job = jobs[j];
            // branch constant of the following arc: strict(zb) is the left
            // value A_q; the ideal right limit is cursor_ideal + image jump.
            if (job.q >= 0) {
                double lq = ls[static_cast<size_t>(job.q)];
                double c0 = cursor, lj = ls[j];
                LiftPiece p;
                p.x0 = za;
                p.x1 = zb;
                if (!alpha.identity && static_cast<int>(j) == idx_x0 && job.q == idx_x0) {
                    auto afn = alpha.fn;
                    auto adfn = alpha.dfn;
                    p.val = [=](double z) { return c0 + lq * afn((z - za) / lj); };
                    p.dval = [=](double z) { return adfn ? (lq / lj) * adfn((z - za) / lj) : (lq / lj); };
                } else {
                    p.val = [=](double z) { return c0 + lq * (z - za) / lj; };
                    p.dval = [=](double) { return lq / lj; };
                }
                pieces.push_back(p);
                cursor += lq;
                cursor_ideal += lq;
            } else {
                // image carved out of the complement just after ystar
                double K_after = cursor_ideal - strict(zb);
                double growth = (strict(znext) + K_after) - cursor_ideal;
                double carve = std::min(0.5 * ls[j], 0.35 * growth);
                if (!(carve > 0.0)) throw error("open_orbit: no room to place a truncated image");
                double dprime = g.deriv(pts[j]);
                pieces.push_back(detail::hermite_piece(za, zb, cursor, cursor + carve, dprime,
                                                       std::min(1.0, carve / ls[j])));
                cursor += carve;
            }
            if (znext - zb < 1e-15) continue;
            // branch constant: strict(zb) is the left limit; the right limit
            // adds the image jump when the junction maps to a listed point
            double strict_right = strict(zb) + ((job.q >= 0) ? ls[static_cast<size_t>(job.q)] : 0.0);
            double K = cursor_ideal - strict_right;

            std::vector<Hole> inside;
            for (const auto& hole : holes) {
                double zh = frame0 + wrap(hole.z - frame0);
                if (zh > zb + 1e-14 && zh < znext - 1e-14) inside.push_back({zh, hole.len});
            }
            std::sort(inside.begin(), inside.end(), [](auto& u, auto& v) { return u.z < v.z; });

            double pos = zb;
            double deficit = cursor_ideal - cursor;  // nonzero right after a carve
            if (std::fabs(deficit) > 1e-14) {
                double bound = inside.empty() ? znext : inside.front().z;
                double w1 = pos + 0.45 * (bound - pos);
                double target = strict(w1) + K;
                pieces.push_back(detail::hermite_piece(pos, w1, cursor, target, 1.0, 1.0));
                pos = w1;
                cursor = target;
            }
            for (const auto& hole : inside) {
                double zh = hole.z;
                double wlen = std::min(0.45 * (zh - pos), std::max(8.0 * hole.len, 0.05 * (zh - pos)));
                double w0 = zh - wlen;
                if (w0 > pos + 1e-14) {
                    pieces.push_back(arc_piece(pos, w0, cursor, strict(w0) + K, K));
                    pos = w0;
                    cursor = strict(w0) + K;
                }
                // stretch over [w0, zh] absorbing the hole (left value + jump)
                double vtop = strict(zh) + K + hole.len;
                pieces.push_back(detail::hermite_piece(pos, zh, cursor, vtop, 1.0, 1.0));
                pos = zh;
                cursor = vtop;
            }
            if (znext - pos > 1e-15) {
                double vend = strict(znext) + K;
                pieces.push_back(arc_piece(pos, znext, cursor, vend, K));
                cursor = vend;
            }
            cursor_ideal = cursor;
        }
        opened.push_back(CircleMap(std::make_shared<PiecewiseLift>(std::move(pieces))));
    }

    OpenOrbitResult out{std::move(opened), std::move(h), {}, {}};
    for (size_t i = 0; i < n; ++i) {
        out.orbit.push_back(pts[i]);
        out.gaps.push_back(CyclicInterval{A[i], B[i], true, true});
    }
    return out;
}

// ------------------------------------------------- finite orbit equivalence

struct OrbitEquivalence {
    bool equivalent = false;
    int offset = -1;  // witness: E[i] -> F[i + offset]
};

inline OrbitEquivalence finite_orbit_equivalence(const std::vector<CircleMap>& rho,
                                                 const std::vector<CircleMap>& tau, std::vector<double> E,
                                                 std::vector<double> F, double tol = 1e-9) {
    if (E.size() != F.size() || E.empty()) return {false, -1};
    std::sort(E.begin(), E.end());
    std::sort(F.begin(), F.end());
    size_t k = E.size();
    auto index_of = [&](const std::vector<double>& S, double x) {
        for (size_t i = 0; i < S.size(); ++i)
            if (circ_dist(S[i], x) < tol) return static_cast<int>(i);
        return -1;
    };
    // invariance
    for (const auto& g : rho)
        for (double x : E)
            if (index_of(E, g.apply(x)) < 0) throw error("finite_orbit_equivalence: E not invariant");
    for (const auto& g : tau)
        for (double y : F)
            if (index_of(F, g.apply(y)) < 0) throw error("finite_orbit_equivalence: F not invariant");

    for (size_t off = 0; off < k; ++off) {
        bool ok = true;
        for (size_t gi = 0; gi < rho.size() && ok; ++gi) {
            for (size_t i = 0; i < k && ok; ++i) {
                int si = index_of(E, rho[gi].apply(E[i]));
                int ti = index_of(F, tau[gi].apply(F[(i + off) % k]));
                if (si < 0 || ti < 0 || static_cast<size_t>(ti) != (si + off) % k) ok = false;
            }
        }
        if (ok) return {true, static_cast<int>(off)};
    }
    return {false, -1};
}

// ------------------------------------------------------- minimal set probe

enum class MinimalSetKind { FiniteOrbit, Dense, CantorLike };

inline const char* to_string(MinimalSetKind k) {
    switch (k) {
        case MinimalSetKind::FiniteOrbit: return "finite-orbit";
        case MinimalSetKind::Dense: return "dense";
        case MinimalSetKind::CantorLike: return "cantor-like";
    }
    return "?";
}

struct MinimalSetProbe {
    MinimalSetKind kind = MinimalSetKind::Dense;
    std::vector<double> cloud;
    double max_gap = 0.0;
    bool heuristic = true;  // always: this is a sampled diagnostic
};

inline MinimalSetProbe minimal_set_probe(const std::vector<CircleMap>& gens, const std::vector<double>& seeds,
                                         int depth, size_t cloud_cap = 40000) {
    std::vector<CircleMap> all;
    for (const auto& g : gens) {
        all.push_back(g);
        all.push_back(g.inverse());
    }
    std::vector<double> cloud = seeds;
    std::vector<double> frontier = seeds;
    const double dedup = 1e-9;
    auto insert_sorted = [&](double x) {
        auto it = std::lower_bound(cloud.begin(), cloud.end(), x);
        if (it != cloud.end() && std::fabs(*it - x) < dedup) return false;
        if (it != cloud.begin() && std::fabs(*(it - 1) - x) < dedup) return false;
        cloud.insert(it, x);
        return true;
    };
    std::sort(cloud.begin(), cloud.end());
    bool stabilized = false;
    for (int d = 0; d < depth; ++d) {
        std::vector<double> next;
        for (double x : frontier) {
            for (const auto& g : all) {
                double y = g.apply(x);
                if (insert_sorted(y)) next.push_back(y);
                if (cloud.size() > cloud_cap) break;
            }
        }
        if (next.empty()) {
            stabilized = true;
            break;
        }
        frontier = std::move(next);
    }
    MinimalSetProbe out;
    out.cloud = cloud;
    double maxgap = 0.0;
    for (size_t i = 0; i < cloud.size(); ++i) {
        double gap = (i + 1 < cloud.size()) ? cloud[i + 1] - cloud[i] : cloud[0] + 1.0 - cloud[i];
        maxgap = std::max(maxgap, gap);
    }
    out.max_gap = maxgap;
    if (stabilized && cloud.size() <= 128)
        out.kind = MinimalSetKind::FiniteOrbit;
    else if (maxgap < 5.0 / depth)
        out.kind = MinimalSetKind::Dense;
    else
        out.kind = MinimalSetKind::CantorLike;
    return out;
}

}  // namespace clab
