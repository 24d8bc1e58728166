#pragma once

#include "clab/freegroup.hpp"

// The free-group assembly: the semi-conjugacy h collapsing the d-orbit gaps
// to the transported parabolic points, the invariant strip forms for the two
// gap classes, the axis density w2 (exact on S^1 x L, transported along the
// coding on L x S^1), the strip extension by the stabilizer equivariance,
// and the orbit assembly of the full field on M_h.

namespace clab {

// ---------------------------------------------------------------- gap table

struct GapInfo {
    CyclicInterval I;
    int cls = 0;        // 1: d-class, 2: delta2-class, 0: unresolved
    std::string word;   // transport word: rho(word) maps the base gap onto I
    double P = 0.0;     // collapsed point (d-class only)
};

struct GapTable {
    std::vector<GapInfo> gaps;  // sorted by I.lo

    int find(double y) const {
        for (size_t i = 0; i < gaps.size(); ++i)
            if (gaps[i].I.contains(wrap(y))) return static_cast<int>(i);
        return -1;
    }
};

// enumerate the orbit of the two base gaps under words up to gap_depth
inline GapTable build_gap_table(const TorusRep& T, const Rho2Result& R, int gap_depth) {
    GapTable table;
    auto add_gap = [&](const GapInfo& g) {
        for (const auto& e : table.gaps)
            if (circ_dist(e.I.lo, g.I.lo) < 1e-9 && circ_dist(e.I.hi, g.I.hi) < 1e-9) return;
        table.gaps.push_back(g);
    };
    add_gap({CyclicInterval{T.N, T.S, false, false}, 1, "", R.P_a});
    add_gap({CyclicInterval{T.N2, T.S2, false, false}, 2, "", 0.0});
    for (const auto& w : reduced_words("abd", gap_depth)) {
        MobiusElement m = T.rho1.mobius(w);
        {
            GapInfo g;
            g.I = CyclicInterval{m.apply(T.N), m.apply(T.S), false, false};
            g.cls = 1;
            g.word = w;
            g.P = R.rho2.apply_word(w, R.P_a);
            add_gap(g);
        }
        {
            GapInfo g;
            g.I = CyclicInterval{m.apply(T.N2), m.apply(T.S2), false, false};
            g.cls = 2;
            g.word = w;
            add_gap(g);
        }
    }
    std::sort(table.gaps.begin(), table.gaps.end(),
              [](const GapInfo& u, const GapInfo& v) { return u.I.lo < v.I.lo; });
    return table;
}

// ------------------------------------------------------------- pipeline h

// identity off the d-class gaps, constant P_w on each of them
inline MonotoneDegreeOneMap build_h_for_pair(const GapTable& table) {
    std::vector<const GapInfo*> d_gaps;
    for (const auto& g : table.gaps)
        if (g.cls == 1) d_gaps.push_back(&g);
    if (d_gaps.empty()) return MonotoneDegreeOneMap::identity();
    std::vector<MonotonePiece> pieces;
    double frame0 = d_gaps.front()->I.lo;
    for (size_t i = 0; i < d_gaps.size(); ++i) {
        const GapInfo& g = *d_gaps[i];
        double lo = frame0 + wrap(g.I.lo - frame0);
        double hi = lo + g.I.length();
        MonotonePiece cp;
        cp.x0 = lo;
        cp.x1 = hi;
        cp.constant = true;
        cp.value = lo + wrap(g.P - g.I.lo);
        pieces.push_back(cp);
        double next = (i + 1 < d_gaps.size()) ? frame0 + wrap(d_gaps[i + 1]->I.lo - frame0) : frame0 + 1.0;
        if (next - hi > 1e-14) {
            MonotonePiece sp;
            sp.x0 = hi;
            sp.x1 = next;
            sp.fn = [](double x) { return x; };
            sp.fn_inv = [](double v) { return v; };
            pieces.push_back(sp);
        }
    }
    return MonotoneDegreeOneMap(std::move(pieces));
}

// ------------------------------------------------------ delta1 strip form

// invariant form of the pair (rho1(d), rho2(d)) on the strip S^1 x [N,S]:
// flow boxes of the Mobius x-charts and the interior y-charts of f
struct Delta1StripForm {
    std::shared_ptr<RectBoxField> field;
    double N = 0.0, S = 0.0, P_a = 0.0;
};

inline Delta1StripForm build_delta1_strip_form(const TorusRep& T, const Rho2Result& R, int grid_n = 512,
                                               bool use_grid = true) {
    double N = T.N, S = T.S, P_a = R.P_a;
    double mN = std::log(R.mult_N), mS = std::log(R.mult_S);
    ChartSpec Xin = chart_from_mobius(N, S, mN);
    ChartSpec Xout = chart_from_mobius(S, N, mS);
    ChartSpec Y1 = chart_from_interval(R.chart_NP);
    ChartSpec Y2 = chart_from_interval(R.chart_PS);

    double C_Q1 = 0.0;
    double cq = (mN * 2.0 + C_Q1) + 2.0 * std::log(2.0);
    double C_O1 = match_across_line(C_Q1, mS, Xin.c_hi, Xout.c_lo);
    double C_Q2 = cq - 2.0 * std::log(1.3) - mS * (-1.3);
    double C_O2 = match_across_line(C_Q2, mN, Xin.c_lo, Xout.c_hi);

    std::vector<std::vector<BoxSpec>> boxes(2, std::vector<BoxSpec>(2));
    auto glue = [&](HFunction H, double wlo, double whi) {
        BoxSpec b;
        b.H = std::move(H);
        b.glued = true;
        b.grid = GridGlue::sample(b.H, wlo - 1.0, whi + 1.0, grid_n, grid_n);
        return b;
    };
    boxes[0][0] = glue(HFunction::blend2(Asymptote::lin(mN, C_Q1), Asymptote::quadlog(cq), 0.6, 2.0), 0.6,
                       2.0);
    boxes[0][1] = glue(HFunction::blend2(Asymptote::quadlog(cq), Asymptote::lin(mS, C_Q2), -2.0, -0.6), -2.0,
                       -0.6);
    boxes[1][0] = glue(HFunction::blend2(Asymptote::lin(mN, C_O1), Asymptote::quadlog(cq), 0.6, 2.0), 0.6,
                       2.0);
    boxes[1][1] = glue(HFunction::blend2(Asymptote::quadlog(cq), Asymptote::lin(mS, C_O2), -2.0, -0.6), -2.0,
                       -0.6);

    auto field = std::make_shared<RectBoxField>(std::vector<ChartSpec>{Xin, Xout},
                                                std::vector<ChartSpec>{Y1, Y2}, std::move(boxes), use_grid);
    return Delta1StripForm{field, N, S, P_a};
}

// ------------------------------------------------------------- axis field

// w2 on (L x S^1 union S^1 x L) plus a continuous interpolation elsewhere:
// exactly 2 omega0 when y is on L (rho2 and rho1 agree there to first
// order), and the coding transport of that value when x is on L.
class AxisField final : public VolumeField {
  public:
    AxisField(const TorusRep& T, const Rho2Result& R, GapTable table, std::vector<double> cloud,
              double y_L_tol = 1e-7, int max_depth = 64)
        : table_(std::move(table)), cloud_(std::move(cloud)), ytol_(y_L_tol), depth_(max_depth) {
        arcs_ = T.arcs;
        // pull maps: a point deep in the arc of letter c has coding starting
        // with c, so it is pulled out by rho(c)^{-1}
        CircleMap c2 = compose(compose(CircleMap(T.B.inverse()), CircleMap(T.A.inverse())), R.f);
        auto reg = [&](char lower, const CircleMap& fwd1, const CircleMap& fwd2) {
            pull1_[lower] = fwd1.inverse();
            pull1_[std::toupper(lower)] = fwd1;
            pull2_[lower] = fwd2.inverse();
            pull2_[std::toupper(lower)] = fwd2;
        };
        reg('a', CircleMap(T.A), CircleMap(T.A));
        reg('b', CircleMap(T.B), CircleMap(T.B));
        reg('c', CircleMap(T.C), c2);
    }

    double log_density(double x, double y) const override {
        x = wrap(x);
        y = wrap(y);
        if (dist_to_cloud(y, cloud_) <= ytol_) return std::log(2.0) + log_omega0(x, y);
        int gi = table_.find(x);
        if (gi < 0) return transport_log(x, y);
        // inside an enumerated gap: interpolate the transport corrections of
        // the endpoints (both on L)
        const CyclicInterval& I = table_.gaps[static_cast<size_t>(gi)].I;
        double mu = wrap(x - I.lo) / I.length();
        double c_lo = transport_log(I.lo, y) - (std::log(2.0) + log_omega0(I.lo, y));
        double c_hi = transport_log(I.hi, y) - (std::log(2.0) + log_omega0(I.hi, y));
        return std::log(2.0) + log_omega0(x, y) + (1.0 - mu) * c_lo + mu * c_hi;
    }

    // pull (x, y) by the coding of x until the pulled y is L-close; the
    // value is the equivariant transport of the exact branch
    double transport_log(double x, double y) const {
        double acc = 0.0, xx = wrap(x), yy = wrap(y);
        for (int d = 0; d < depth_; ++d) {
            if (dist_to_cloud(yy, cloud_) <= ytol_) break;
            char key = 0;
            for (const auto& [c, arc] : arcs_)
                if (arc.contains(xx)) key = c;
            if (key == 0) break;  // not resolvable: accept the current branch
            const CircleMap& m1 = pull1_.at(key);
            const CircleMap& m2 = pull2_.at(key);
            acc += std::log(m1.deriv(xx)) + std::log(m2.deriv(yy));
            xx = m1.apply(xx);
            yy = m2.apply(yy);
        }
        return std::log(2.0) + log_omega0(xx, yy) + acc;
    }

  private:
    GapTable table_;
    std::vector<double> cloud_;
    double ytol_;
    int depth_;
    std::map<char, CyclicInterval> arcs_;
    std::map<char, CircleMap> pull1_, pull2_;
};

// ------------------------------------------------------------ strip fields

// omega on S^1 x closure(I): w2 on the fundamental band [a, f(a)),
// propagated by the pair equivariance; lambda * w_gamma on I x I.
class StripField final : public VolumeField {
  public:
    StripField(std::shared_ptr<const VolumeField> w2, std::shared_ptr<const VolumeField> wg, CircleMap f,
               CircleMap g, CyclicInterval I, double a, const std::vector<double>& cloud,
               const ChartSpec& tchart, int axis_samples = 24)
        : w2_(std::move(w2)), wg_(std::move(wg)), f_(std::move(f)), g_(std::move(g)), I_(I), a_(wrap(a)),
          chart_(tchart) {
        if (I_.contains(a_)) throw error("extend_strip: base point a must lie outside the closed gap");
        if (dist_to_cloud(a_, cloud) > 1e-6)
            throw error("extend_strip: a not in the limit set complement of I");
        t_a_ = chart_.T(a_);
        // matching constant on the limiting axes
        double sum = 0.0, sum2 = 0.0;
        int n = 0;
        for (int i = 1; i < axis_samples; ++i) {
            double y = wrap(I_.lo + I_.length() * i / axis_samples);
            for (double xedge : {I_.lo, I_.hi}) {
                double d2 = w2_->log_density(xedge, y);
                double dg = wg_->log_density(xedge, y);
                sum += d2 - dg;
                sum2 += (d2 - dg) * (d2 - dg);
                ++n;
            }
        }
        log_lambda_ = sum / n;
        lambda_spread_ = std::sqrt(std::max(0.0, sum2 / n - log_lambda_ * log_lambda_));
    }

    double lambda() const { return std::exp(log_lambda_); }
    double lambda_spread() const { return lambda_spread_; }

    double log_density(double x, double y) const override {
        x = wrap(x);
        y = wrap(y);
        if (I_.contains(x) || circ_dist(x, I_.lo) < 1e-13 || circ_dist(x, I_.hi) < 1e-13)
            return log_lambda_ + wg_->log_density(x, y);
        // bring x into the fundamental band [a, f(a)) through the time chart
        long n = static_cast<long>(std::floor(chart_.T(x) - t_a_));
        double acc = 0.0, xx = x, yy = y;
        const CircleMap fi = (n >= 0) ? f_.inverse() : f_;
        const CircleMap gi = (n >= 0) ? g_.inverse() : g_;
        for (long k = 0; k < std::labs(n); ++k) {
            acc += std::log(fi.deriv(xx)) + std::log(gi.deriv(yy));
            xx = fi.apply(xx);
            yy = gi.apply(yy);
        }
        // equivariance: w(x,y) = w2(phi^{-n}(x,y)) * Jac(phi^{-n})(x,y)
        return w2_->log_density(xx, yy) + acc;
    }

    // continuity defect at the gap boundary, probed at distance delta
    double boundary_defect(double delta, int samples = 16) const {
        double worst = 0.0;
        for (int i = 1; i < samples; ++i) {
            double y = wrap(I_.lo + I_.length() * i / samples);
            for (double edge : {I_.lo, I_.hi}) {
                double inside = log_lambda_ + wg_->log_density(edge, y);
                double xout = (edge == I_.lo) ? wrap(edge - delta) : wrap(edge + delta);
                worst = std::max(worst, std::fabs(log_density(xout, y) - inside));
            }
        }
        return worst;
    }

  private:
    std::shared_ptr<const VolumeField> w2_, wg_;
    CircleMap f_, g_;
    CyclicInterval I_;
    double a_, t_a_ = 0.0;
    ChartSpec chart_;
    double log_lambda_ = 0.0, lambda_spread_ = 0.0;
};

// -------------------------------------------------------- orbit assembly

class AssembledField final : public VolumeField {
  public:
    AssembledField(std::shared_ptr<const VolumeField> w2, std::shared_ptr<const VolumeField> strip1,
                   std::shared_ptr<const VolumeField> strip2, GapTable table, GroupRep rho1, GroupRep rho2,
                   std::vector<double> cloud, double y_L_tol = 1e-7)
        : w2_(std::move(w2)), s1_(std::move(strip1)), s2_(std::move(strip2)), table_(std::move(table)),
          rho1_(std::move(rho1)), rho2_(std::move(rho2)), cloud_(std::move(cloud)), ytol_(y_L_tol) {}

    double log_density(double x, double y) const override {
        x = wrap(x);
        y = wrap(y);
        if (dist_to_cloud(y, cloud_) <= ytol_) return w2_->log_density(x, y);
        int gi = table_.find(y);
        if (gi < 0) throw error("assembled field: uncovered point (gap outside the word budget)");
        const GapInfo& g = table_.gaps[static_cast<size_t>(gi)];
        const VolumeField& strip = (g.cls == 1) ? *s1_ : *s2_;
        if (g.word.empty()) return strip.log_density(x, y);
        // pull back by the transport word
        std::string winv = invert_word(g.word);
        double acc = 0.0, xx = x, yy = y;
        for (auto it = winv.rbegin(); it != winv.rend(); ++it) {
            const CircleMap& m1 = rho1_.generator(*it);
            const CircleMap& m2 = rho2_.generator(*it);
            acc += std::log(m1.deriv(xx)) + std::log(m2.deriv(yy));
            xx = m1.apply(xx);
            yy = m2.apply(yy);
        }
        return strip.log_density(xx, yy) + acc;
    }

  private:
    std::shared_ptr<const VolumeField> w2_, s1_, s2_;
    GapTable table_;
    GroupRep rho1_, rho2_;
    std::vector<double> cloud_;
    double ytol_;
};

// ------------------------------------------------------------ the pipeline

struct PipelineConfig {
    TorusRepParams torus;
    double P_a_rel = 0.5;
    int gap_depth = 5;
    int cloud_depth = 5;
    int strip_grid = 512;
    double y_L_tol = 1e-7;
    double eps_sc = 1e-6;
    long seed = 1;
};

struct PipelineResult {
    TorusRep torus;
    Rho2Result rho2;
    GapTable gaps;
    MonotoneDegreeOneMap h;
    Delta1StripForm d1form;
    std::shared_ptr<VolumeField> w2;
    std::shared_ptr<StripField> strip1, strip2;
    std::shared_ptr<VolumeField> omega;
    LimitSetResult lset1, lset2;
    // reports
    double semiconj_worst = 0.0;
    double lambda1 = 0.0, lambda2 = 0.0;
    double hausdorff = 0.0;
};

inline PipelineResult run_pipeline(const PipelineConfig& cfg = {}) {
    TorusRep T = twice_punctured_torus_rep(cfg.torus);
    Rho2Result R = build_rho2(T, cfg.P_a_rel);
    // register c = b^{-1} a^{-1} d in both representations
    T.rho1.set_generator('c', T.C);
    R.rho2.set_generator('c',
                         compose(compose(CircleMap(T.B.inverse()), CircleMap(T.A.inverse())), R.f));

    GapTable table = build_gap_table(T, R, cfg.gap_depth);
    MonotoneDegreeOneMap h = build_h_for_pair(table);
    Delta1StripForm d1 = build_delta1_strip_form(T, R, cfg.strip_grid);

    LimitSetResult l1 = limit_set(T.rho1, "abd", cfg.cloud_depth);
    LimitSetResult l2 = limit_set(R.rho2, "abd", cfg.cloud_depth);

    auto w2 = std::make_shared<AxisField>(T, R, table, l1.cloud, cfg.y_L_tol);

    // base points for the fundamental bands: cloud points far from each gap
    auto far_cloud_point = [&](const CyclicInterval& I) {
        double target = wrap(I.midpoint() + 0.5);
        double best = l1.cloud.front(), bd = 2.0;
        for (double p : l1.cloud) {
            if (I.contains(p)) continue;
            double d = circ_dist(p, target);
            if (d < bd) {
                bd = d;
                best = p;
            }
        }
        return best;
    };
    CyclicInterval I1{T.N, T.S, false, false}, I2{T.N2, T.S2, false, false};
    ChartSpec chart1 = chart_from_mobius(T.S, T.N, std::log(T.D1.derivative(T.S)));
    ChartSpec chart2 = chart_from_mobius(T.S2, T.N2, std::log(T.D2.derivative(T.S2)));
    auto strip1 = std::make_shared<StripField>(w2, d1.field, CircleMap(T.D1), R.f, I1,
                                               far_cloud_point(I1), l1.cloud, chart1);
    auto strip2 = std::make_shared<StripField>(w2, std::make_shared<Omega0Field>(), CircleMap(T.D2),
                                               R.rho2.eval("cba"), I2, far_cloud_point(I2), l1.cloud,
                                               chart2);
    auto omega = std::make_shared<AssembledField>(w2, strip1, strip2, table, T.rho1, R.rho2, l1.cloud,
                                                  cfg.y_L_tol);

    PipelineResult res{std::move(T), std::move(R), std::move(table), std::move(h), std::move(d1),
                       w2, strip1, strip2, omega, std::move(l1), std::move(l2),
                       0.0, strip1->lambda(), strip2->lambda(), 0.0};
    res.hausdorff = hausdorff_distance(res.lset1.cloud, res.lset2.cloud);
    for (const auto& w : reduced_words("abd", 4)) {
        res.semiconj_worst = std::max(
            res.semiconj_worst, semiconj_residual_pair(res.torus.rho1.eval(w), res.rho2.rho2.eval(w), res.h, 128));
    }
    return res;
}

}  // namespace clab
