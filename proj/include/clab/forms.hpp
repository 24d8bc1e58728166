#pragma once

#include <array>
#include <map>
#include <optional>

#include "clab/volume.hpp"

// Invariant volume-form builders.  Every construction here reduces to flow
// boxes: on a rectangle (x-interval between fixed points) x (y-interval
// between fixed points), any density of the shape
//
//     w(x,y) = H(T_y(y) - T_x(x)) * |T_x'(x)| * |T_y'(y)|
//
// is exactly invariant under the pair of time-1 maps, for every positive H
// (the time charts T satisfy T(f x) = T(x) + 1).  H only controls
// continuity across the fixed-point lines and corners:
//   - at a hyperbolic x-line p the active asymptote must be log H = mu w + C
//     with mu = -m_p, and the constants on the two sides are tied through
//     the charts' subleading constants;
//   - at a hyperbolic y-line q the slope is mu = +m_q;
//   - at a parabolic line the tail must be log H = log(P/q) - 2 log|w| with
//     the same P on both sides;
//   - G(h)-edges are free.
// Hyperbolic corners force -m_p = +m_q, i.e. the multiplier product
// condition f'(p) g'(q) = 1 at the fixed points of the pair in M_h.

namespace clab {

// ------------------------------------------------------------- chart specs

struct ChartSpec {
    double lo = 0.0, len = 1.0;  // interval (lo, lo+len), lo in [0,1)
    int dir = 1;
    EndSpec elo, ehi;
    double c_lo = 0.0, c_hi = 0.0;  // subleading constants of T at the ends
    std::function<double(double)> T;    // time(theta)
    std::function<double(double)> dT;   // dT/dtheta (sign = dir)

    double hi() const { return lo + len; }
    bool contains(double theta) const {
        double u = wrap(theta - lo);
        return u > 0.0 && u < len;
    }
    double offset(double theta) const { return wrap(theta - lo); }

    // invert T on the interval (monotone; geometric bracketing toward ends)
    double point_at_time(double t) const {
        auto g = [&](double u) { return dir * T(wrap(lo + u)); };
        double gt = dir * t;
        double ulo = len * 0.5, uhi = len * 0.5;
        for (int it = 0; it < 4000 && g(ulo) > gt; ++it) {
            ulo *= 0.5;
            if (ulo < len * 1e-280) break;
        }
        for (int it = 0; it < 4000 && g(uhi) < gt; ++it) {
            double w = (len - uhi) * 0.5;
            if (w < len * 1e-280) break;
            uhi = len - w;
        }
        for (int it = 0; it < 200 && uhi - ulo > 1e-16 * len; ++it) {
            double mid = 0.5 * (ulo + uhi);
            if (g(mid) < gt) ulo = mid; else uhi = mid;
        }
        return wrap(lo + 0.5 * (ulo + uhi));
    }
};

// chart of a prescribed-map interval (template charts are exact)
inline ChartSpec chart_from_interval(const IntervalTimeChart& c) {
    ChartSpec s;
    s.lo = c.lo();
    s.len = c.length();
    s.dir = c.dir();
    s.elo = c.end_lo();
    s.ehi = c.end_hi();
    s.c_lo = c.end_constant_lo();
    s.c_hi = c.end_constant_hi();
    s.T = [c](double theta) { return c.time(theta); };
    s.dT = [c](double theta) { return c.dtime(theta); };
    return s;
}

// chart linearizing a hyperbolic Mobius element on the interval between its
// fixed points: T = log|tau_p| / m_p with the projective cross-ratio chart
inline ChartSpec chart_from_mobius(double p, double q, double m_p) {
    ChartSpec s;
    s.lo = wrap(p);
    s.len = wrap(q - p);
    if (s.len == 0.0) throw error("chart_from_mobius: coincident fixed points");
    s.elo = EndSpec{m_p, 1.0};
    s.ehi = EndSpec{-m_p, 1.0};
    s.dir = (m_p > 0) ? 1 : -1;
    double len = s.len;
    double pp = s.lo;
    s.T = [pp, len, m_p](double theta) {
        double u = wrap(theta - pp);
        return (std::log(abs_sinpi(u)) - std::log(abs_sinpi(len - u))) / m_p;
    };
    // dT/dtheta = (pi/m_p)(cot(pi u) + cot(pi (len - u)))
    s.dT = [pp, len, m_p](double theta) {
        double u = wrap(theta - pp);
        double cu = std::cos(kPi * u) / std::sin(kPi * u);
        double cw = std::cos(kPi * (len - u)) / std::sin(kPi * (len - u));
        return kPi * (cu + cw) / m_p;
    };
    s.c_lo = std::log(kPi / abs_sinpi(len)) / m_p;
    s.c_hi = std::log(abs_sinpi(len) / kPi) / m_p;
    return s;
}

// ------------------------------------------------------------- H functions

struct Asymptote {
    enum Kind { Lin, QuadLog, Flat } kind = Lin;
    double m = 0.0, c = 0.0;  // Lin: m w + c; Flat: c; QuadLog: c - 2 log|w|
    double eval(double w) const {
        switch (kind) {
            case Lin: return m * w + c;
            case Flat: return c;
            case QuadLog: return c - 2.0 * std::log(std::fabs(w));
        }
        return 0.0;
    }
    static Asymptote lin(double m, double c) { return {Lin, m, c}; }
    static Asymptote flat(double c) { return {Flat, 0.0, c}; }
    static Asymptote quadlog(double logPq) { return {QuadLog, 0.0, logPq}; }
};

// log H as a chain of asymptotes joined by smoothstep blends on windows.
struct HFunction {
    std::vector<Asymptote> pieces;                    // k+1 asymptotes
    std::vector<std::pair<double, double>> windows;   // k windows, ascending

    static HFunction single(Asymptote a) { return {{a}, {}}; }
    static HFunction blend2(Asymptote low, Asymptote high, double w0, double w1) {
        return {{low, high}, {{w0, w1}}};
    }
    // hard step: the two sides meet a G(h)-edge, no continuity constraint
    static HFunction step2(Asymptote low, Asymptote high, double w_step) {
        return {{low, high}, {{w_step, w_step}}};
    }

    double log_eval(double w) const {
        size_t k = windows.size();
        for (size_t i = 0; i < k; ++i) {
            if (w < windows[i].first) return pieces[i].eval(w);
            if (windows[i].second <= windows[i].first) {  // degenerate: step
                if (w <= windows[i].second) return pieces[i].eval(w);
                continue;
            }
            if (w <= windows[i].second) {
                double s = smoothstep((w - windows[i].first) / (windows[i].second - windows[i].first));
                return (1.0 - s) * pieces[i].eval(w) + s * pieces[i + 1].eval(w);
            }
        }
        return pieces.back().eval(w);
    }
};

// Matching constants across fixed-point lines (same y-chart on both sides):
// the finite limit of H e^{..} |T'| forces C_to = C_from + m (c_from - c_to).
inline double match_across_line(double C_from, double m, double c_from, double c_to) {
    return C_from + m * (c_from - c_to);
}

// ------------------------------------------------------------ grid overlay

// Fundamental-cell sampling of a glued zone: log H tabulated on an
// (n_w x n_s) grid over w in [w_lo, w_hi] x s in [0,1), evaluated
// bilinearly; s = frac(T_x) is the deck coordinate of the quotient
// cylinder (the group power mapping the probe into the cell).
struct GridGlue {
    double w_lo = 0.0, w_hi = 1.0;
    int n_w = 0, n_s = 0;
    std::vector<double> values;  // (n_w+1) x (n_s+1), constant in s here

    bool covers(double w) const { return n_w > 0 && w >= w_lo && w <= w_hi; }

    double eval(double w, double s) const {
        double tw = (w - w_lo) / (w_hi - w_lo) * n_w;
        int iw = std::min(std::max(static_cast<int>(tw), 0), n_w - 1);
        double fw = tw - iw;
        double ts = wrap(s) * n_s;
        int is = std::min(static_cast<int>(ts), n_s - 1);
        double fs = ts - is;
        auto at = [&](int a, int b) { return values[static_cast<size_t>(a) * (n_s + 1) + b]; };
        return (1 - fw) * ((1 - fs) * at(iw, is) + fs * at(iw, is + 1)) +
               fw * ((1 - fs) * at(iw + 1, is) + fs * at(iw + 1, is + 1));
    }

    static GridGlue sample(const HFunction& H, double w_lo, double w_hi, int n_w, int n_s) {
        GridGlue g;
        g.w_lo = w_lo;
        g.w_hi = w_hi;
        g.n_w = n_w;
        g.n_s = n_s;
        g.values.resize(static_cast<size_t>(n_w + 1) * (n_s + 1));
        for (int i = 0; i <= n_w; ++i) {
            double w = w_lo + (w_hi - w_lo) * i / n_w;
            double v = H.log_eval(w);
            for (int j = 0; j <= n_s; ++j) g.values[static_cast<size_t>(i) * (n_s + 1) + j] = v;
        }
        return g;
    }

    // max |bilinear - analytic| over a dense w sweep (collar consistency)
    double defect(const HFunction& H, int probes = 4096) const {
        double worst = 0.0;
        for (int i = 0; i <= probes; ++i) {
            double w = w_lo + (w_hi - w_lo) * i / probes;
            worst = std::max(worst, std::fabs(eval(w, 0.37) - H.log_eval(w)));
        }
        return worst;
    }
};

// --------------------------------------------------------------- box field

struct BoxSpec {
    HFunction H;
    GridGlue grid;       // optional overlay of the glued zone
    bool glued = false;  // has a blend window (grid overlay applies)
};

// Rectangular patchwork over the fixed-point lines of the pair.
class RectBoxField final : public VolumeField {
  public:
    RectBoxField(std::vector<ChartSpec> xcharts, std::vector<ChartSpec> ycharts,
                 std::vector<std::vector<BoxSpec>> boxes, bool use_grid = false)
        : xs_(std::move(xcharts)), ys_(std::move(ycharts)), boxes_(std::move(boxes)), use_grid_(use_grid) {}

    double log_density(double x, double y) const override {
        size_t i = locate(xs_, x), j = locate(ys_, y);
        const ChartSpec& cx = xs_[i];
        const ChartSpec& cy = ys_[j];
        double tx = cx.T(nudge(cx, x)), ty = cy.T(nudge(cy, y));
        double w = ty - tx;
        const BoxSpec& b = boxes_[i][j];
        double logH;
        if (use_grid_ && b.glued && b.grid.covers(w)) logH = b.grid.eval(w, tx - std::floor(tx));
        else logH = b.H.log_eval(w);
        return logH + std::log(std::fabs(cx.dT(nudge(cx, x)))) + std::log(std::fabs(cy.dT(nudge(cy, y))));
    }

    // diagnostics
    bool in_glued_zone(double x, double y) const {
        size_t i = locate(xs_, x), j = locate(ys_, y);
        const BoxSpec& b = boxes_[i][j];
        if (!b.glued) return false;
        double w = ys_[j].T(nudge(ys_[j], y)) - xs_[i].T(nudge(xs_[i], x));
        return b.grid.covers(w);
    }
    double w_of(double x, double y) const {
        size_t i = locate(xs_, x), j = locate(ys_, y);
        return ys_[j].T(nudge(ys_[j], y)) - xs_[i].T(nudge(xs_[i], x));
    }
    std::vector<std::vector<BoxSpec>>& boxes() { return boxes_; }
    const std::vector<ChartSpec>& xcharts() const { return xs_; }
    const std::vector<ChartSpec>& ycharts() const { return ys_; }
    void set_use_grid(bool b) { use_grid_ = b; }

    void regrid(int n_w_cells, int n_s_cells) {
        for (auto& row : boxes_)
            for (auto& b : row)
                if (b.glued) b.grid = GridGlue::sample(b.H, b.grid.w_lo, b.grid.w_hi, n_w_cells, n_s_cells);
    }

    double max_grid_defect() const {
        double worst = 0.0;
        for (const auto& row : boxes_)
            for (const auto& b : row)
                if (b.glued) worst = std::max(worst, b.grid.defect(b.H));
        return worst;
    }

  private:
    static size_t locate(const std::vector<ChartSpec>& cs, double theta) {
        for (size_t i = 0; i < cs.size(); ++i)
            if (cs[i].contains(wrap(theta))) return i;
        // on a line: nudge into the next interval
        for (size_t i = 0; i < cs.size(); ++i)
            if (cs[i].contains(wrap(theta + 1e-12))) return i;
        throw error("RectBoxField: point on no chart interval");
    }
    static double nudge(const ChartSpec& c, double theta) {
        double u = wrap(theta - c.lo);
        double eps = 1e-13 * c.len;
        if (u < eps) return wrap(c.lo + eps);
        if (u > c.len - eps) return wrap(c.lo + c.len - eps);
        return wrap(theta);
    }

    std::vector<ChartSpec> xs_, ys_;
    std::vector<std::vector<BoxSpec>> boxes_;
    bool use_grid_ = false;
};

// =================================================== three-fixed-point pair

struct PairFormParams {
    double a1 = 0.1, b1 = 0.4, c1 = 0.7;     // fixed points of f (c1 parabolic)
    double mult_a1 = 0.5, mult_b1 = 3.0;     // f'(a1) < 1 < f'(b1)
    double a2 = 0.15, b2 = 0.55;             // fixed points of g
    double mult_a2 = 1.0 / 3.0, mult_b2 = 2.0;  // must satisfy the products
    double q_par = 16.0;
    double w_alpha1 = -1.0, w_alpha2 = 1.0;  // separatrix levels bounding W
    int grid_n = 512;
    bool use_grid = true;
};

struct PairForm {
    CircleMap f, g;
    MonotoneDegreeOneMap h;
    std::shared_ptr<RectBoxField> field;
    double cycle_defect = 0.0;  // closure of the matching-constant chains
    std::vector<std::pair<double, double>> corner_points;  // pair-fixed corners in M_h
    std::function<double(double)> alpha1, alpha2, beta, gamma;  // separatrices
};

inline PairForm build_hyperbolic_pair_form(const PairFormParams& P) {
    double prod1 = P.mult_a1 * P.mult_b2, prod2 = P.mult_b1 * P.mult_a2;
    if (std::fabs(prod1 - 1.0) > 1e-12)
        throw error("pair form: multiplier product f'(a1) g'(b2) violates the constraint, |f'g'-1|=" +
                    std::to_string(std::fabs(prod1 - 1.0)));
    if (std::fabs(prod2 - 1.0) > 1e-12)
        throw error("pair form: multiplier product f'(b1) g'(a2) violates the constraint, |f'g'-1|=" +
                    std::to_string(std::fabs(prod2 - 1.0)));
    if (!(P.a1 < P.b1 && P.b1 < P.c1 && P.c1 < 1.0)) throw error("pair form: need a1 < b1 < c1 in [0,1)");
    if (!(P.a2 < P.b2)) throw error("pair form: need a2 < b2");
    if (!(P.mult_a1 < 1.0 && P.mult_b1 > 1.0)) throw error("pair form: need f'(a1) < 1 < f'(b1)");

    CircleMap f = build_prescribed({{P.a1, P.mult_a1}, {P.b1, P.mult_b1}, {P.c1, 1.0}},
                                   PrescribedProfile{P.q_par, +1});
    CircleMap g = build_prescribed({{P.a2, P.mult_a2}, {P.b2, P.mult_b2}});
    auto fl = std::dynamic_pointer_cast<const FlowChartLift>(f.lift_impl());
    auto gl = std::dynamic_pointer_cast<const FlowChartLift>(g.lift_impl());

    ChartSpec Xab = chart_from_interval(fl->chart(0));  // (a1, b1)
    ChartSpec Xbc = chart_from_interval(fl->chart(1));  // (b1, c1)
    ChartSpec Xca = chart_from_interval(fl->chart(2));  // (c1, a1+1)
    ChartSpec Yab = chart_from_interval(gl->chart(0));  // (a2, b2)
    ChartSpec Yba = chart_from_interval(gl->chart(1));  // (b2, a2+1)

    double m_a = std::log(P.mult_a1), m_b = std::log(P.mult_b1);
    double m_a2 = std::log(P.mult_a2), m_b2 = std::log(P.mult_b2);
    double mu_U = m_a2;  // = -m_b
    double mu_V = m_b2;  // = -m_a

    // matching-constant chains (normalize each region in box (ab,ab))
    double CU_abab = 0.0;
    double CU_abba = match_across_line(CU_abab, m_a2, Yab.c_lo, Yba.c_hi);
    double CU_bcba = match_across_line(CU_abba, m_b, Xab.c_hi, Xbc.c_lo);
    double CU_bcab = match_across_line(CU_bcba, m_a2, Yba.c_hi, Yab.c_lo);
    double CU_cycle = match_across_line(CU_bcab, m_b, Xbc.c_lo, Xab.c_hi);
    double CV_abab = 0.0;
    double CV_abba = match_across_line(CV_abab, m_b2, Yab.c_hi, Yba.c_lo);
    double CV_caba = match_across_line(CV_abba, m_a, Xab.c_lo, Xca.c_hi);
    double CV_caab = match_across_line(CV_caba, m_b2, Yba.c_lo, Yab.c_hi);
    double CV_cycle = match_across_line(CV_caab, m_a, Xca.c_hi, Xab.c_lo);
    double cycle_defect = std::max(std::fabs(CU_cycle - CU_abab), std::fabs(CV_cycle - CV_abab));

    // parabolic tails at the c1 line, matched to the adjacent exact form at
    // the outer blend edge (X1 side)
    const double w_h = 0.0, w_beta = 0.0, w_gamma = 0.0;
    double bw_lo = w_beta - 2.0, bw_hi = w_beta - 0.6;  // blend window in box (bc,ab)
    double cq = (mu_U * bw_lo + CU_bcab) + 2.0 * std::log(std::fabs(bw_lo));
    double gw_lo = w_gamma + 0.6, gw_hi = w_gamma + 2.0;  // blend window in box (ca,ab)

    std::vector<std::vector<BoxSpec>> boxes(3, std::vector<BoxSpec>(2));
    auto glue = [&](HFunction H, double wlo, double whi) {
        BoxSpec b;
        b.H = std::move(H);
        b.glued = true;
        b.grid = GridGlue::sample(b.H, wlo - 1.0, whi + 1.0, P.grid_n, P.grid_n);
        return b;
    };
    // x index: 0 = (a1,b1), 1 = (b1,c1), 2 = (c1,a1); y: 0 = (a2,b2), 1 = (b2,a2)
    boxes[0][0].H = HFunction::step2(Asymptote::lin(mu_V, CV_abab), Asymptote::lin(mu_U, CU_abab), w_h);
    boxes[0][1] = glue(HFunction::blend2(Asymptote::lin(mu_V, CV_abba), Asymptote::lin(mu_U, CU_abba),
                                         P.w_alpha1 + 0.2 * (P.w_alpha2 - P.w_alpha1),
                                         P.w_alpha2 - 0.2 * (P.w_alpha2 - P.w_alpha1)),
                       P.w_alpha1, P.w_alpha2);
    boxes[1][1].H = HFunction::single(Asymptote::lin(mu_U, CU_bcba));
    boxes[1][0] = glue(HFunction::blend2(Asymptote::quadlog(cq), Asymptote::lin(mu_U, CU_bcab), bw_lo, bw_hi),
                       bw_lo, bw_hi);
    boxes[2][0] = glue(HFunction::blend2(Asymptote::lin(mu_V, CV_caab), Asymptote::quadlog(cq), gw_lo, gw_hi),
                       gw_lo, gw_hi);
    boxes[2][1].H = HFunction::single(Asymptote::lin(mu_V, CV_caba));

    // h: chart conjugacy on [a1,b1] (level w_h), constants elsewhere
    std::vector<MonotonePiece> hp;
    {
        MonotonePiece sm;
        sm.x0 = P.a1;
        sm.x1 = P.b1;
        ChartSpec cx = Xab, cy = Yab;
        sm.fn = [cx, cy, w_h](double x) {
            double y = cy.point_at_time(cx.T(wrap(x)) + w_h);
            return cy.lo + wrap(y - cy.lo);
        };
        sm.fn_inv = [cx, cy, w_h](double v) {
            double x = cx.point_at_time(cy.T(wrap(v)) - w_h);
            return cx.lo + wrap(x - cx.lo);
        };
        hp.push_back(sm);
        MonotonePiece cbc;
        cbc.x0 = P.b1;
        cbc.x1 = P.c1;
        cbc.constant = true;
        cbc.value = P.b2;
        hp.push_back(cbc);
        MonotonePiece cca;
        cca.x0 = P.c1;
        cca.x1 = P.a1 + 1.0;
        cca.constant = true;
        cca.value = P.a2 + 1.0;
        hp.push_back(cca);
    }
    MonotoneDegreeOneMap h(std::move(hp));

    auto field = std::make_shared<RectBoxField>(std::vector<ChartSpec>{Xab, Xbc, Xca},
                                                std::vector<ChartSpec>{Yab, Yba}, std::move(boxes),
                                                P.use_grid);

    PairForm out{std::move(f), std::move(g), std::move(h), field, cycle_defect,
                 {{P.b1, P.a2}, {P.a1, P.b2}},
                 {}, {}, {}, {}};
    ChartSpec cXab = Xab, cXbc = Xbc, cXca = Xca, cYab = Yab, cYba = Yba;
    double wa1 = P.w_alpha1, wa2 = P.w_alpha2;
    out.alpha1 = [cXab, cYba, wa1](double x) { return cYba.point_at_time(cXab.T(wrap(x)) + wa1); };
    out.alpha2 = [cXab, cYba, wa2](double x) { return cYba.point_at_time(cXab.T(wrap(x)) + wa2); };
    out.beta = [cXbc, cYab, w_beta](double x) { return cYab.point_at_time(cXbc.T(wrap(x)) + w_beta); };
    out.gamma = [cXca, cYab, w_gamma](double x) { return cYab.point_at_time(cXca.T(wrap(x)) + w_gamma); };
    return out;
}

// ===================================================== four-fixed-point pair

struct FourFixedParams {
    double a1 = 0.05, b1 = 0.3, c1 = 0.55, d1 = 0.8;  // a1 att, c1 rep, b1/d1 parabolic
    double mult_a1 = 0.5, mult_c1 = 3.0;
    double a2 = 0.2, b2 = 0.6;  // g'(a2) = 1/mult_c1, g'(b2) = 1/mult_a1
    double mult_a2 = 1.0 / 3.0, mult_b2 = 2.0;
    double q_par = 16.0;
    int grid_n = 512;
    bool use_grid = true;
};

inline PairForm build_four_fixed_point_form(const FourFixedParams& P) {
    double prod1 = P.mult_a1 * P.mult_b2, prod2 = P.mult_c1 * P.mult_a2;
    if (std::fabs(prod1 - 1.0) > 1e-12)
        throw error("four-fixed form: product f'(a1) g'(b2) violates the constraint, |f'g'-1|=" +
                    std::to_string(std::fabs(prod1 - 1.0)));
    if (std::fabs(prod2 - 1.0) > 1e-12)
        throw error("four-fixed form: product f'(c1) g'(a2) violates the constraint, |f'g'-1|=" +
                    std::to_string(std::fabs(prod2 - 1.0)));
    if (!(P.a1 < P.b1 && P.b1 < P.c1 && P.c1 < P.d1 && P.d1 < 1.0))
        throw error("four-fixed form: need a1 < b1 < c1 < d1 in [0,1)");

    CircleMap f = build_prescribed({{P.a1, P.mult_a1}, {P.b1, 1.0}, {P.c1, P.mult_c1}, {P.d1, 1.0}},
                                   PrescribedProfile{P.q_par, +1});
    CircleMap g = build_prescribed({{P.a2, P.mult_a2}, {P.b2, P.mult_b2}});
    auto fl = std::dynamic_pointer_cast<const FlowChartLift>(f.lift_impl());
    auto gl = std::dynamic_pointer_cast<const FlowChartLift>(g.lift_impl());

    ChartSpec X1 = chart_from_interval(fl->chart(0));  // (a1,b1)
    ChartSpec X2 = chart_from_interval(fl->chart(1));  // (b1,c1)
    ChartSpec X3 = chart_from_interval(fl->chart(2));  // (c1,d1)
    ChartSpec X4 = chart_from_interval(fl->chart(3));  // (d1,a1+1)
    ChartSpec Yab = chart_from_interval(gl->chart(0));
    ChartSpec Yba = chart_from_interval(gl->chart(1));

    double m_a1 = std::log(P.mult_a1), m_c1 = std::log(P.mult_c1);
    double m_a2 = std::log(P.mult_a2), m_b2 = std::log(P.mult_b2);
    double mu_U = m_b2;  // = -m_a1 > 0
    double mu_V = m_a2;  // = -m_c1 < 0

    double CU_1ab = 0.0;
    double CU_1ba = match_across_line(CU_1ab, m_b2, Yab.c_hi, Yba.c_lo);
    double CU_4ba = match_across_line(CU_1ba, m_a1, X1.c_lo, X4.c_hi);
    double CU_4ab = match_across_line(CU_4ba, m_b2, Yba.c_lo, Yab.c_hi);
    double CU_cycle = match_across_line(CU_4ab, m_a1, X4.c_hi, X1.c_lo);
    double CV_2ab = 0.0;
    double CV_2ba = match_across_line(CV_2ab, m_a2, Yab.c_lo, Yba.c_hi);
    double CV_3ba = match_across_line(CV_2ba, m_c1, X2.c_hi, X3.c_lo);
    double CV_3ab = match_across_line(CV_3ba, m_a2, Yba.c_hi, Yab.c_lo);
    double CV_cycle = match_across_line(CV_3ab, m_c1, X3.c_lo, X2.c_hi);
    double cycle_defect = std::max(std::fabs(CU_cycle - CU_1ab), std::fabs(CV_cycle - CV_2ab));

    // parabolic tails: b1 line shared by boxes (X1,Yba)/(X2,Yba); d1 line by
    // (X3,Yab)/(X4,Yab)
    double b_lo = 0.6, b_hi = 2.0;
    double cq_b1 = (mu_U * b_hi + CU_1ba) + 2.0 * std::log(std::fabs(b_hi));
    double d_lo = 0.6, d_hi = 2.0;
    double cq_d1 = (mu_U * d_hi + CU_4ab) + 2.0 * std::log(std::fabs(d_hi));

    std::vector<std::vector<BoxSpec>> boxes(4, std::vector<BoxSpec>(2));
    auto glue = [&](HFunction H, double wlo, double whi) {
        BoxSpec b;
        b.H = std::move(H);
        b.glued = true;
        b.grid = GridGlue::sample(b.H, wlo - 1.0, whi + 1.0, P.grid_n, P.grid_n);
        return b;
    };
    boxes[0][0].H = HFunction::single(Asymptote::lin(mu_U, CU_1ab));
    boxes[0][1] = glue(HFunction::blend2(Asymptote::lin(mu_U, CU_1ba), Asymptote::quadlog(cq_b1), b_lo, b_hi),
                       b_lo, b_hi);
    boxes[1][0].H = HFunction::single(Asymptote::lin(mu_V, CV_2ab));
    boxes[1][1] = glue(HFunction::blend2(Asymptote::quadlog(cq_b1), Asymptote::lin(mu_V, CV_2ba), -b_hi, -b_lo),
                       -b_hi, -b_lo);
    boxes[2][0] = glue(HFunction::blend2(Asymptote::quadlog(cq_d1), Asymptote::lin(mu_V, CV_3ab), -d_hi, -d_lo),
                       -d_hi, -d_lo);
    boxes[2][1].H = HFunction::single(Asymptote::lin(mu_V, CV_3ba));
    boxes[3][0] = glue(HFunction::blend2(Asymptote::lin(mu_U, CU_4ab), Asymptote::quadlog(cq_d1), d_lo, d_hi),
                       d_lo, d_hi);
    boxes[3][1].H = HFunction::single(Asymptote::lin(mu_U, CU_4ba));

    std::vector<MonotonePiece> hp;
    {
        MonotonePiece c1p;
        c1p.x0 = P.b1;
        c1p.x1 = P.d1;
        c1p.constant = true;
        c1p.value = P.b2;
        hp.push_back(c1p);
        MonotonePiece c2p;
        c2p.x0 = P.d1;
        c2p.x1 = P.b1 + 1.0;
        c2p.constant = true;
        c2p.value = P.a2 + 1.0;
        hp.push_back(c2p);
    }
    MonotoneDegreeOneMap h(std::move(hp));

    auto field = std::make_shared<RectBoxField>(std::vector<ChartSpec>{X1, X2, X3, X4},
                                                std::vector<ChartSpec>{Yab, Yba}, std::move(boxes),
                                                P.use_grid);
    return PairForm{std::move(f), std::move(g), std::move(h), field, cycle_defect,
                    {{P.a1, P.b2}, {P.c1, P.a2}},
                    {}, {}, {}, {}};
}

// ======================================================= parabolic opening

struct ParabolicOpeningForm {
    CircleMap f;
    MobiusElement gamma;
    MonotoneDegreeOneMap h;
    std::shared_ptr<VolumeField> field;         // exact closed form
    std::shared_ptr<VolumeField> strip_gridded; // gridded strip evaluator (diagnostics)
    CyclicInterval I;
    double x0 = 0.0;
};

// gridded evaluator of the strip I x S^1: one y-fundamental-domain cell,
// gamma-transport in y, bilinear log interpolation
class ParabolicStripGrid final : public VolumeField {
  public:
    ParabolicStripGrid(const VolumeField& exact, const MobiusElement& gamma, CyclicInterval I, double x0,
                       int n)
        : gamma_(gamma), I_(I), x0_(x0), n_(n) {
        // y fundamental domain [y*, gamma(y*)) with y* opposite the fixed point
        ystar_ = wrap(x0_ + 0.5);
        ytop_ = gamma_.apply(ystar_);
        values_.resize(static_cast<size_t>(n + 1) * (n + 1));
        for (int i = 0; i <= n; ++i) {
            double x = wrap(I_.lo + I_.length() * i / n);
            for (int j = 0; j <= n; ++j) {
                double y = wrap(ystar_ + wrap(ytop_ - ystar_) * j / n);
                values_[static_cast<size_t>(i) * (n + 1) + j] = exact.log_density(x, y);
            }
        }
    }

    double log_density(double x, double y) const override {
        // transport y into the fundamental domain along the parabolic orbit
        double yy = wrap(y);
        double logjac = 0.0;
        MobiusElement ginv = gamma_.inverse();
        // invariance with f|I = id: w(x, z) = w(x, gamma z) gamma'(z)
        bool forward = !ahead_of_fd(yy);
        for (int it = 0; it < 4096 && !in_fd(yy); ++it) {
            if (forward) {
                logjac += std::log(gamma_.derivative(yy));
                yy = gamma_.apply(yy);
            } else {
                yy = ginv.apply(yy);
                logjac -= std::log(gamma_.derivative(yy));
            }
        }
        if (!in_fd(yy)) throw error("parabolic strip grid: transport failed");
        double tx = wrap(x - I_.lo) / I_.length() * n_;
        double ty = wrap(yy - ystar_) / wrap(ytop_ - ystar_) * n_;
        int ix = std::min(std::max(static_cast<int>(tx), 0), n_ - 1);
        int iy = std::min(std::max(static_cast<int>(ty), 0), n_ - 1);
        double fx = tx - ix, fy = ty - iy;
        auto at = [&](int a, int b) { return values_[static_cast<size_t>(a) * (n_ + 1) + b]; };
        double v = (1 - fx) * ((1 - fy) * at(ix, iy) + fy * at(ix, iy + 1)) +
                   fx * ((1 - fy) * at(ix + 1, iy) + fy * at(ix + 1, iy + 1));
        return v + logjac;
    }

  private:
    bool in_fd(double y) const {
        double u = wrap(y - ystar_), v = wrap(ytop_ - ystar_);
        return u < v;
    }
    // parabolic orbit time coordinate decides the transport direction
    bool ahead_of_fd(double y) const {
        double u0 = wrap(ystar_ - x0_), u = wrap(y - x0_);
        auto t = [](double u) { return -std::cos(kPi * u) / std::sin(kPi * u); };
        double dir = t(wrap(ytop_ - x0_)) - t(u0);  // orbit time runs this way
        return (t(u) - t(u0)) * dir > std::fabs(dir);
    }
    MobiusElement gamma_;
    CyclicInterval I_;
    double x0_, ystar_, ytop_;
    int n_;
    std::vector<double> values_;
};

inline ParabolicOpeningForm build_parabolic_opening_form(const MobiusElement& gamma, CyclicInterval I,
                                                         int grid_n = 256) {
    if (gamma.classify() != MobiusClass::Parabolic) throw error("parabolic opening: gamma must be parabolic");
    double x0 = gamma.fixed_points()[0];
    double L = 1.0 - I.length();
    if (!(L > 0.0 && I.length() >= 0.0)) throw error("parabolic opening: bad interval");

    // h: collapses I to x0, affine stretch of the complement
    std::vector<MonotonePiece> hp;
    double ilo = wrap(I.lo), len = I.length();
    if (len > 0.0) {
        MonotonePiece cp;
        cp.x0 = ilo;
        cp.x1 = ilo + len;
        cp.constant = true;
        cp.value = x0 + (x0 < ilo ? 1.0 : 0.0);
        double v0 = cp.value;
        hp.push_back(cp);
        MonotonePiece sp;
        sp.x0 = ilo + len;
        sp.x1 = ilo + 1.0;
        sp.fn = [v0, ilo, len, L](double t) { return v0 + (t - ilo - len) / L; };
        sp.fn_inv = [v0, ilo, len, L](double v) { return ilo + len + (v - v0) * L; };
        hp.push_back(sp);
    } else {
        MonotonePiece sp;
        sp.x0 = 0.0;
        sp.x1 = 1.0;
        sp.fn = [](double t) { return t; };
        sp.fn_inv = [](double v) { return v; };
        hp.push_back(sp);
    }
    MonotoneDegreeOneMap h(std::move(hp));

    // f: h^{-1} o gamma o h off I, identity on I (C^1: gamma'(x0) = 1)
    CircleMap f;
    if (len > 0.0) {
        std::vector<LiftPiece> fp;
        LiftPiece idp;
        idp.x0 = ilo;
        idp.x1 = ilo + len;
        idp.val = [](double t) { return t; };
        idp.dval = [](double) { return 1.0; };
        fp.push_back(idp);
        LiftPiece cj;
        cj.x0 = ilo + len;
        cj.x1 = ilo + 1.0;
        MobiusElement gm = gamma;
        double v0 = x0 + (x0 < ilo ? 1.0 : 0.0);
        cj.val = [gm, v0, ilo, len, L](double t) {
            double hx = v0 + (t - ilo - len) / L;  // lift of h(t)
            double img = gm.apply(wrap(hx));
            double img_lift = hx + wrap_sym(img - wrap(hx));  // nearest-branch lift
            return ilo + len + (img_lift - v0) * L;
        };
        cj.dval = [gm, v0, ilo, len, L](double t) {
            double hx = v0 + (t - ilo - len) / L;
            return gm.derivative(wrap(hx));
        };
        fp.push_back(cj);
        f = CircleMap(std::make_shared<PiecewiseLift>(std::move(fp)));
    } else {
        f = CircleMap(gamma);
    }

    // exact field: omega(x,y) = omega0(h(x), y); on the open strip this is
    // omega0(x0, y), invariant because gamma'(x0) = 1 and f|I = id
    MonotoneDegreeOneMap hcopy = h;
    auto field = std::make_shared<LambdaField>([hcopy](double x, double y) {
        return log_omega0(hcopy.value(x), y);
    });

    std::shared_ptr<VolumeField> sg;
    if (len > 0.0) sg = std::make_shared<ParabolicStripGrid>(*field, gamma, CyclicInterval{ilo, wrap(ilo + len), true, true}, x0, grid_n);

    return ParabolicOpeningForm{std::move(f), gamma, std::move(h), field, sg,
                                CyclicInterval{ilo, wrap(ilo + len), true, true}, x0};
}

// ======================================================= double-cover form

struct DoubleCoverForm {
    CircleMap map;  // the fixed-point-free lift as a circle map
    MonotoneDegreeOneMap h;
    std::shared_ptr<RectBoxField> field;
    double p0 = 0.0;  // periodic point; the other is p0 + 1/2
};

inline DoubleCoverForm build_double_cover_form(const DoubleCoverElement& lift, int grid_n = 512,
                                               bool use_grid = true) {
    if (lift.base.classify() != MobiusClass::Parabolic)
        throw error("double cover form: base must be parabolic");
    double x0 = lift.base.fixed_points()[0];
    double p0 = wrap(x0 / 2.0);
    if (circ_dist(lift.apply(p0), p0) < 1e-9)
        throw error("double cover form: lift has fixed points (wrong branch)");
    if (circ_dist(lift.apply(p0), wrap(p0 + 0.5)) > 1e-9)
        throw error("double cover form: lift does not swap the periodic points");

    // base parabolic time: T_base(gamma theta) = T_base(theta) + 1
    MobiusElement gamma = lift.base;
    // T_raw = -cot(pi(theta - x0)); calibrate the increment
    auto traw = [x0](double theta) {
        double u = wrap(theta - x0);
        return -std::cos(kPi * u) / std::sin(kPi * u);
    };
    double samp = wrap(x0 + 0.3);
    double incr = traw(gamma.apply(samp)) - traw(samp);
    {
        double samp2 = wrap(x0 + 0.7);
        double incr2 = traw(gamma.apply(samp2)) - traw(samp2);
        if (std::fabs(incr - incr2) > 1e-9 * std::max(1.0, std::fabs(incr)))
            throw error("double cover form: parabolic time calibration failed");
    }

    // cover chart on (p0, p0 + 1/2): T1(phi) = T_base(2 phi)/2, so that the
    // square of the lift advances time by one
    auto T1 = [traw, incr](double phi) { return traw(wrap(2.0 * phi)) / (2.0 * incr); };
    auto dT1 = [x0, incr](double phi) {
        double u = wrap(2.0 * phi - x0);
        double s = std::sin(kPi * u);
        return kPi / (s * s) * (2.0 / (2.0 * incr));
    };
    int dir = (dT1(wrap(p0 + 0.25)) > 0) ? 1 : -1;
    double qfit;
    {
        // T ~ -dir/(q u) + c near the ends
        double u = 1e-5;
        double t1 = T1(wrap(p0 + u)), t2 = T1(wrap(p0 + u / 2));
        double A = (t2 - t1) * u;  // T ~ A/u + c
        qfit = std::fabs(1.0 / A);
    }
    auto mkchart = [&](double lo, std::function<double(double)> T, std::function<double(double)> dT) {
        ChartSpec s;
        s.lo = lo;
        s.len = 0.5;
        s.dir = dir;
        s.elo = EndSpec{0.0, qfit};
        s.ehi = EndSpec{0.0, qfit};
        s.T = std::move(T);
        s.dT = std::move(dT);
        s.c_lo = 0.0;
        s.c_hi = 0.0;  // unused: no interior line matchings here
        return s;
    };
    ChartSpec C1 = mkchart(p0, T1, dT1);
    double p1 = wrap(p0 + 0.5);
    auto T2 = [T1](double phi) { return T1(wrap(phi - 0.5)); };
    auto dT2 = [dT1](double phi) { return dT1(wrap(phi - 0.5)); };
    ChartSpec C2 = mkchart(p1, T2, dT2);

    // U density in chart terms: H_U(w) = 4 / w^2 exactly
    double cq = std::log(4.0);
    double flatC = cq - 2.0 * std::log(0.65);
    HFunction Hdiag = HFunction::blend2(Asymptote::flat(flatC), Asymptote::quadlog(cq), 0.3, 1.0);
    HFunction Hoff = HFunction::blend2(Asymptote::quadlog(cq), Asymptote::flat(flatC), -1.0, -0.3);

    std::vector<std::vector<BoxSpec>> boxes(2, std::vector<BoxSpec>(2));
    auto glue = [&](const HFunction& H, double wlo, double whi) {
        BoxSpec b;
        b.H = H;
        b.glued = true;
        b.grid = GridGlue::sample(b.H, wlo - 1.0, whi + 1.0, grid_n, grid_n);
        return b;
    };
    boxes[0][0] = glue(Hdiag, 0.3, 1.0);
    boxes[1][1] = glue(Hdiag, 0.3, 1.0);
    boxes[0][1] = glue(Hoff, -1.0, -0.3);
    boxes[1][0] = glue(Hoff, -1.0, -0.3);

    // h: two-step map p0 on [p0, p0+1/2), p0+1/2 on [p0+1/2, p0+1)
    std::vector<MonotonePiece> hp;
    MonotonePiece s1;
    s1.x0 = p0;
    s1.x1 = p0 + 0.5;
    s1.constant = true;
    s1.value = p0;
    hp.push_back(s1);
    MonotonePiece s2;
    s2.x0 = p0 + 0.5;
    s2.x1 = p0 + 1.0;
    s2.constant = true;
    s2.value = p0 + 0.5;
    hp.push_back(s2);
    MonotoneDegreeOneMap h(std::move(hp));

    auto field = std::make_shared<RectBoxField>(std::vector<ChartSpec>{C1, C2},
                                                std::vector<ChartSpec>{C1, C2}, std::move(boxes), use_grid);
    return DoubleCoverForm{CircleMap(lift), std::move(h), field, p0};
}

}  // namespace clab
