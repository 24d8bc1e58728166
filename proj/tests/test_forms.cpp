#include <catch2/catch_amalgamated.hpp>

#include "clab/forms.hpp"

using namespace clab;

namespace {

std::vector<SamplePoint> zone_samples(const PairForm& pf, bool glued, size_t n, Rng& rng) {
    std::vector<SamplePoint> out;
    size_t guard = 0;
    while (out.size() < n && guard < 500 * n) {
        ++guard;
        double x = rng.uniform(), y = rng.uniform();
        if (!pf.h.in_Mh(x, y, 1e-6)) continue;
        // keep the forward image well inside M_h too
        if (!pf.h.in_Mh(pf.f.apply(x), pf.g.apply(y), 1e-9)) continue;
        if (pf.field->in_glued_zone(x, y) != glued) continue;
        out.push_back({x, y});
    }
    return out;
}

}  // namespace

TEST_CASE("pair form: constraint violations are rejected") {
    PairFormParams P;
    P.mult_b2 = 2.2;  // f'(a1) g'(b2) = 1.1
    REQUIRE_THROWS_WITH(build_hyperbolic_pair_form(P), Catch::Matchers::ContainsSubstring("0.1"));
}

TEST_CASE("pair form: matching chains close") {
    PairForm pf = build_hyperbolic_pair_form({});
    REQUIRE(pf.cycle_defect < 1e-9);
}

TEST_CASE("pair form: Lemma 3.1 at the pair corners") {
    PairForm pf = build_hyperbolic_pair_form({});
    for (auto& [x0, y0] : pf.corner_points) {
        REQUIRE(circ_dist(pf.f.apply(x0), x0) < 1e-12);
        REQUIRE(circ_dist(pf.g.apply(y0), y0) < 1e-12);
        double prod = pf.f.deriv(x0) * pf.g.deriv(y0);
        REQUIRE(std::fabs(prod - 1.0) < 1e-8);
        REQUIRE(std::fabs(pf.f.deriv(x0) - 1.0) > 0.1);
    }
}

TEST_CASE("pair form: invariance residual on closed-form region") {
    PairForm pf = build_hyperbolic_pair_form({});
    Rng rng(101);
    auto samples = zone_samples(pf, false, 500, rng);
    REQUIRE(samples.size() == 500);
    auto rep = invariance_residual(*pf.field, pf.f, pf.g, samples);
    REQUIRE(rep.max_log_residual < 1e-6);
}

TEST_CASE("pair form: invariance residual on glued region") {
    PairForm pf = build_hyperbolic_pair_form({});
    Rng rng(102);
    auto samples = zone_samples(pf, true, 200, rng);
    REQUIRE(samples.size() == 200);
    auto rep = invariance_residual(*pf.field, pf.f, pf.g, samples);
    REQUIRE(rep.max_log_residual < 1e-3);
}

TEST_CASE("pair form: collar defect decreases under grid refinement") {
    PairFormParams P;
    P.grid_n = 256;
    PairForm pf = build_hyperbolic_pair_form(P);
    double d256 = pf.field->max_grid_defect();
    pf.field->regrid(512, 512);
    double d512 = pf.field->max_grid_defect();
    pf.field->regrid(1024, 1024);
    double d1024 = pf.field->max_grid_defect();
    REQUIRE(d256 < 1e-3);
    REQUIRE(d512 < d256);
    REQUIRE(d1024 < d512);
}

TEST_CASE("pair form: continuity across the fixed-point lines") {
    PairFormParams P;
    P.use_grid = false;
    PairForm pf = build_hyperbolic_pair_form(P);
    const double d = 1e-9;
    auto jump = [&](double xline, double y) {
        return std::fabs(pf.field->log_density(wrap(xline - d), y) - pf.field->log_density(wrap(xline + d), y));
    };
    // b1 line (y in both intervals), c1 line (y in (a2,b2) only), a1 line
    for (double y : {0.3, 0.45, 0.52}) REQUIRE(jump(0.4, y) < 1e-5);
    for (double y : {0.7, 0.9, 0.05}) REQUIRE(jump(0.4, y) < 1e-5);
    for (double y : {0.2, 0.35, 0.5}) REQUIRE(jump(0.7, y) < 1e-5);
    for (double y : {0.3, 0.5, 0.8}) REQUIRE(jump(0.1, y) < 1e-5);
    // y lines: a2 (x away from [c1,a1)), b2 (x away from [b1,c1))
    auto jumpy = [&](double x, double yline) {
        return std::fabs(pf.field->log_density(x, wrap(yline - d)) - pf.field->log_density(x, wrap(yline + d)));
    };
    for (double x : {0.2, 0.5, 0.6}) REQUIRE(jumpy(x, 0.15) < 1e-5);
    for (double x : {0.2, 0.8, 0.05}) REQUIRE(jumpy(x, 0.55) < 1e-5);
}

TEST_CASE("pair form: separatrix graphs are invariant") {
    PairForm pf = build_hyperbolic_pair_form({});
    for (double x : {0.15, 0.2, 0.3, 0.38}) {
        REQUIRE(circ_dist(pf.alpha1(pf.f.apply(x)), pf.g.apply(pf.alpha1(x))) < 1e-9);
        REQUIRE(circ_dist(pf.alpha2(pf.f.apply(x)), pf.g.apply(pf.alpha2(x))) < 1e-9);
    }
    for (double x : {0.45, 0.55, 0.65}) {
        REQUIRE(circ_dist(pf.beta(pf.f.apply(x)), pf.g.apply(pf.beta(x))) < 1e-9);
    }
    for (double x : {0.75, 0.9, 0.02}) {
        REQUIRE(circ_dist(pf.gamma(pf.f.apply(x)), pf.g.apply(pf.gamma(x))) < 1e-9);
    }
    // ordering b2 < alpha1 < alpha2 < a2 (cyclically, through 1)
    double x = 0.25;
    REQUIRE(cyclic_between(0.55, pf.alpha1(x), pf.alpha2(x)));
    REQUIRE(cyclic_between(pf.alpha1(x), pf.alpha2(x), 0.15));
}

TEST_CASE("four-fixed form: full check set") {
    FourFixedParams P;
    PairForm pf = build_four_fixed_point_form(P);
    REQUIRE(pf.cycle_defect < 1e-9);
    for (auto& [x0, y0] : pf.corner_points) {
        double prod = pf.f.deriv(x0) * pf.g.deriv(y0);
        REQUIRE(std::fabs(prod - 1.0) < 1e-8);
        REQUIRE(std::fabs(pf.f.deriv(x0) - 1.0) > 0.1);
    }
    Rng rng(103);
    auto closed = zone_samples(pf, false, 400, rng);
    REQUIRE(invariance_residual(*pf.field, pf.f, pf.g, closed).max_log_residual < 1e-6);
    auto glued = zone_samples(pf, true, 150, rng);
    REQUIRE(invariance_residual(*pf.field, pf.f, pf.g, glued).max_log_residual < 1e-3);

    FourFixedParams bad;
    bad.mult_b2 = 2.2;
    REQUIRE_THROWS_AS(build_four_fixed_point_form(bad), error);

    // continuity across the parabolic lines b1, d1 (y in the outer arc)
    const double d = 1e-9;
    PairFormParams dummy;
    (void)dummy;
    pf.field->set_use_grid(false);
    for (double y : {0.7, 0.95, 0.1}) {
        REQUIRE(std::fabs(pf.field->log_density(wrap(P.b1 - d), y) - pf.field->log_density(wrap(P.b1 + d), y)) <
                1e-4);
    }
    for (double y : {0.3, 0.4, 0.5}) {
        REQUIRE(std::fabs(pf.field->log_density(wrap(P.d1 - d), y) - pf.field->log_density(wrap(P.d1 + d), y)) <
                1e-4);
    }
}

TEST_CASE("parabolic opening: exact off the strip and on it") {
    MobiusElement gamma(1.0, 1.0, 0.0, 1.0);  // parabolic fixing 0.5
    CyclicInterval I{0.1, 0.3, true, true};
    auto form = build_parabolic_opening_form(gamma, I, 128);

    // semi-conjugacy h o f = gamma o h
    for (int i = 0; i < 64; ++i) {
        double x = (i + 0.4) / 64.0;
        REQUIRE(circ_dist(form.h.value(form.f.apply(x)), gamma.apply(form.h.value(x))) < 1e-9);
    }
    // endpoint derivatives of f are 1
    REQUIRE(std::fabs(form.f.deriv(wrap(I.lo + 1e-9)) - 1.0) < 1e-6);
    REQUIRE(std::fabs(form.f.deriv(wrap(I.hi - 1e-9)) - 1.0) < 1e-6);

    CircleMap gm(gamma);
    Rng rng(104);
    std::vector<SamplePoint> off, strip;
    while (off.size() < 400) {
        double x = rng.uniform(), y = rng.uniform();
        if (!form.h.in_Mh(x, y, 1e-4)) continue;
        if (!form.h.in_Mh(form.f.apply(x), gamma.apply(y), 1e-9)) continue;
        bool in_strip = CyclicInterval{I.lo, I.hi, false, false}.contains(x);
        if (in_strip && strip.size() < 200) strip.push_back({x, y});
        if (!in_strip) off.push_back({x, y});
    }
    REQUIRE(invariance_residual(*form.field, form.f, gm, off).max_log_residual < 1e-9);
    REQUIRE(invariance_residual(*form.field, form.f, gm, strip).max_log_residual < 1e-9);

    // gridded strip evaluator: defect against the exact form decreases
    double defects[3];
    int k = 0;
    for (int n : {64, 128, 256}) {
        auto fg = build_parabolic_opening_form(gamma, I, n);
        double worst = 0.0;
        for (const auto& s : strip)
            worst = std::max(worst,
                             std::fabs(fg.strip_gridded->log_density(s.x, s.y) - fg.field->log_density(s.x, s.y)));
        defects[k++] = worst;
    }
    REQUIRE(defects[0] < 1e-3);
    REQUIRE(defects[1] < defects[0]);
    REQUIRE(defects[2] < defects[1]);
}

TEST_CASE("parabolic opening: degenerate interval reduces to omega0") {
    MobiusElement gamma(1.0, 1.0, 0.0, 1.0);
    auto form = build_parabolic_opening_form(gamma, CyclicInterval{0.1, 0.1, true, true}, 0);
    CircleMap gm(gamma);
    Rng rng(105);
    auto h = MonotoneDegreeOneMap::identity();
    auto samples = sample_Mh(h, 300, rng, 1e-3);
    std::vector<SamplePoint> good;
    for (auto& s : samples)
        if (circ_dist(gamma.apply(s.x), gamma.apply(s.y)) > 1e-4) good.push_back(s);
    REQUIRE(invariance_residual(*form.field, gm, gm, good).max_log_residual < 1e-10);
}

TEST_CASE("double cover form: exact on the diagonal-free zone") {
    MobiusElement par(1.0, 1.0, 0.0, 1.0);
    double x0 = par.fixed_points()[0];
    double p0 = wrap(x0 / 2.0);
    DoubleCoverElement l0 = lift_to_double_cover(par, 0), l1 = lift_to_double_cover(par, 1);
    DoubleCoverElement lift = (circ_dist(l0.apply(p0), p0) < 1e-9) ? l1 : l0;

    auto form = build_double_cover_form(lift, 256);
    CircleMap cov = form.map;

    // wrong branch is rejected
    DoubleCoverElement fixed_lift = (circ_dist(l0.apply(p0), p0) < 1e-9) ? l0 : l1;
    REQUIRE_THROWS_WITH(build_double_cover_form(fixed_lift, 16),
                        Catch::Matchers::ContainsSubstring("fixed points"));

    // U = {y in (x, R x)}: same cover interval with w > 0, or adjacent
    // interval with w < 0.  Deep-U points (past the grid overlay) must agree
    // with the closed form 4 omega0(2x, 2y).
    Rng rng(106);
    REQUIRE(form.p0 == Catch::Approx(p0).margin(1e-12));
    auto in_U = [&](double x, double y, double w) {
        bool x1 = wrap(x - p0) < 0.5, y1 = wrap(y - p0) < 0.5;
        return (x1 == y1) ? (w > 0) : (w < 0);
    };
    std::vector<SamplePoint> uzone, udeep, vzone;
    while (uzone.size() < 300 || vzone.size() < 300 || udeep.size() < 100) {
        double x = rng.uniform(), y = rng.uniform();
        if (!form.h.in_Mh(x, y, 1e-6)) continue;
        if (!form.h.in_Mh(cov.apply(x), cov.apply(y), 1e-9)) continue;
        double w = form.field->w_of(x, y);
        if (in_U(x, y, w) && std::fabs(w) >= 1.2 && std::fabs(w) < 50) {
            if (uzone.size() < 300) uzone.push_back({x, y});
            if (std::fabs(w) >= 2.2 && udeep.size() < 100) udeep.push_back({x, y});
        } else if (form.field->in_glued_zone(x, y) && vzone.size() < 300) {
            vzone.push_back({x, y});
        }
    }
    for (const auto& s : udeep) {
        double lhs = form.field->log_density(s.x, s.y);
        double rhs = std::log(4.0) + log_omega0(wrap(2 * s.x), wrap(2 * s.y));
        REQUIRE(std::fabs(lhs - rhs) < 1e-8);
    }
    REQUIRE(invariance_residual(*form.field, cov, cov, uzone).max_log_residual < 1e-8);
    REQUIRE(invariance_residual(*form.field, cov, cov, vzone).max_log_residual < 1e-3);

    // deck equivariance on U
    CircleMap deck = CircleMap::rotation(0.5);
    REQUIRE(invariance_residual(*form.field, deck, deck, uzone).max_log_residual < 1e-8);

    // glued-zone refinement trend
    double defects[3];
    int k = 0;
    for (int n : {128, 256, 512}) {
        auto fg = build_double_cover_form(lift, n);
        defects[k++] = fg.field->max_grid_defect();
    }
    REQUIRE(defects[0] < 1e-3);
    REQUIRE(defects[1] < defects[0]);
    REQUIRE(defects[2] < defects[1]);
}
