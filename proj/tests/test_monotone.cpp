#include <catch2/catch_amalgamated.hpp>

#include "clab/monotone.hpp"

using namespace clab;

namespace {

double golden() { return 0.5 * (std::sqrt(5.0) - 1.0); }

// the three-piece step/homeo h of the hyperbolic-pair construction, with an
// affine middle part for testing
MonotoneDegreeOneMap sample_h() {
    // h: [0.1,0.4] -> [0.15,0.55] affine; == 0.55 on [0.4,0.7); == 0.15(+1) on [0.7,1.1)
    std::vector<MonotonePiece> ps;
    MonotonePiece m;
    m.x0 = 0.1;
    m.x1 = 0.4;
    m.fn = [](double x) { return 0.15 + (x - 0.1) * (0.4 / 0.3); };
    m.fn_inv = [](double v) { return 0.1 + (v - 0.15) * (0.3 / 0.4); };
    ps.push_back(m);
    MonotonePiece c1;
    c1.x0 = 0.4;
    c1.x1 = 0.7;
    c1.constant = true;
    c1.value = 0.55;
    ps.push_back(c1);
    MonotonePiece c2;
    c2.x0 = 0.7;
    c2.x1 = 1.1;
    c2.constant = true;
    c2.value = 1.15;
    ps.push_back(c2);
    return MonotoneDegreeOneMap(std::move(ps));
}

std::vector<double> denjoy_lengths(int N, double mass) {
    std::vector<double> l(2 * N + 1);
    double s = 0.0;
    for (int n = -N; n <= N; ++n) s += 1.0 / (n * n + 1.0);
    for (int n = -N; n <= N; ++n) l[n + N] = mass / (s * (n * n + 1.0));
    return l;
}

}  // namespace

TEST_CASE("in_Mh for the identity graph") {
    auto h = MonotoneDegreeOneMap::identity();
    REQUIRE_FALSE(h.in_Mh(0.2, 0.2));
    REQUIRE(h.in_Mh(0.2, 0.7));
}

TEST_CASE("in_Mh honors constancy intervals and jumps") {
    auto h = sample_h();
    // constant value b2 = 0.55 on [0.4, 0.7)
    REQUIRE_FALSE(h.in_Mh(0.5, 0.55));
    REQUIRE_FALSE(h.in_Mh(0.4, 0.55));
    REQUIRE(h.in_Mh(0.5, 0.2));
    // jump at 0.7: fiber [0.55, 0.15] through 1
    REQUIRE_FALSE(h.in_Mh(0.7, 0.8));
    REQUIRE_FALSE(h.in_Mh(0.7, 0.55));
    REQUIRE_FALSE(h.in_Mh(0.7, 0.15));
    REQUIRE(h.in_Mh(0.7, 0.3));
    // vertical segment membership at a generic jump
    auto hs = MonotoneDegreeOneMap::step({0.0, 0.5}, {0.1, 0.4});
    REQUIRE_FALSE(hs.in_Mh(0.5, 0.25));
    REQUIRE(hs.in_Mh(0.5, 0.5));
}

TEST_CASE("ghys inverse of the identity") {
    auto h = MonotoneDegreeOneMap::identity();
    auto hs = h.ghys_inverse();
    for (double x : {0.0, 0.3, 0.77}) REQUIRE(circ_dist(hs.value(x), x) < 1e-12);
}

TEST_CASE("ghys inverse swaps constancies and jumps") {
    auto h = sample_h();
    auto hs = h.ghys_inverse();
    // h collapses [0.4,0.7) to 0.55  =>  h* jumps at 0.55 with width 0.3
    REQUIRE(circ_dist(hs.hl(0.55), 0.4) < 1e-12);
    REQUIRE(circ_dist(hs.hr(0.55), 0.7) < 1e-12);
    // h jumps at 0.7 over [0.55, 1.15]  =>  h* constant = 0.7 there
    REQUIRE(circ_dist(hs.value(0.8), 0.7) < 1e-12);
    REQUIRE(circ_dist(hs.value(0.05), 0.7) < 1e-12);
    // smooth part inverts
    REQUIRE(circ_dist(hs.value(h.value(0.25)), 0.25) < 1e-10);
}

TEST_CASE("ghys inverse is an involution on graphs") {
    auto h = sample_h();
    auto hss = h.ghys_inverse().ghys_inverse();
    for (int i = 0; i < 500; ++i) {
        double x = static_cast<double>(i) / 500 + 0.0013;
        auto f1 = h.fiber(x), f2 = hss.fiber(x);
        REQUIRE(circ_dist(f1.lo, f2.lo) < 1e-9);
        REQUIRE(circ_dist(f1.hi, f2.hi) < 1e-9);
    }
}

TEST_CASE("graph preimage") {
    auto h = sample_h();
    // regular value
    auto p = h.graph_preimage(0.35);
    REQUIRE(circ_dist(p.lo, p.hi) < 1e-9);
    REQUIRE(circ_dist(p.lo, 0.25) < 1e-9);
    // constancy value
    auto q = h.graph_preimage(0.55);
    REQUIRE(circ_dist(q.lo, 0.4) < 1e-9);
    REQUIRE(circ_dist(q.hi, 0.7) < 1e-9);
    // value inside the jump at 0.7
    auto r = h.graph_preimage(0.9);
    REQUIRE(circ_dist(r.lo, 0.7) < 1e-9);
    REQUIRE(circ_dist(r.hi, 0.7) < 1e-9);
}

TEST_CASE("semiconjugacy residual: identity triple") {
    CircleMap f(MobiusElement(1.3, 0.2, 0.4, 1.0));
    REQUIRE(semiconj_residual_pair(f, f, MonotoneDegreeOneMap::identity()) < 1e-12);
}

TEST_CASE("semiconjugacy residual detects perturbations") {
    // (R_a, R_a, Id) is exact; perturb the second map
    CircleMap f = CircleMap::rotation(0.37);
    double eps = 1e-3;
    CircleMap g(std::make_shared<FunctionLift>(
        [eps](double x) { return x + 0.37 + eps * std::sin(2 * kPi * x); },
        [eps](double x) { return 1.0 + eps * 2 * kPi * std::cos(2 * kPi * x); }));
    double res = semiconj_residual_pair(f, g, MonotoneDegreeOneMap::identity(), 1024);
    REQUIRE(res > eps / 2);
    REQUIRE(res < 2 * eps);
}

TEST_CASE("collapse with no gaps is trivial") {
    CircleMap f = CircleMap::rotation(golden());
    auto r = collapse({f}, {});
    REQUIRE(r.collapsed.size() == 1);
    REQUIRE(circ_dist(r.collapsed[0].apply(0.3), f.apply(0.3)) < 1e-12);
}

TEST_CASE("collapse of a truncated Denjoy map recovers the rotation") {
    int N = 16;
    auto d = denjoy_map(golden(), denjoy_lengths(N, 0.3));
    auto r = collapse({d.map}, d.intervals, 1e-7);
    REQUIRE(r.absorbed_count >= 1);  // the truncation edge
    auto rn = rotation_number(r.collapsed[0], 200000);
    double trunc_err = 0.02;  // edge effects of the finite construction
    REQUIRE(circ_dist(rn.value, golden()) < trunc_err);
    // semi-conjugacy of the collapse triple away from the edge
    double res = semiconj_residual_pair(d.map, r.collapsed[0], r.h, 1024);
    REQUIRE(res < 0.02);
}

TEST_CASE("collapse rejects non-invariant gaps") {
    CircleMap f = CircleMap::rotation(0.25);
    std::vector<CyclicInterval> gaps{{0.0, 0.2, false, false}, {0.21, 0.3, false, false}};
    REQUIRE_THROWS_WITH(collapse({f}, gaps, 1e-9), Catch::Matchers::ContainsSubstring("not invariant"));
}

TEST_CASE("open orbit with zero gaps is the identity") {
    CircleMap f = CircleMap::rotation(golden());
    auto r = open_orbit({f}, 0.1, {});
    REQUIRE(circ_dist(r.opened[0].apply(0.3), f.apply(0.3)) < 1e-12);
}

TEST_CASE("opening a fixed point of a hyperbolic Mobius map") {
    MobiusElement m = MobiusElement::hyperbolic(0.0, 0.5, 0.25);
    CircleMap g(m);
    IntervalAction alpha;
    alpha.identity = false;
    alpha.fn = [](double t) { return t * t * (3 - 2 * t) * 0.3 + 0.7 * t; };  // nontrivial interval map
    auto r = open_orbit({g}, 0.5, {0.2}, alpha);
    REQUIRE(r.gaps.size() == 1);
    // the opened map fixes the whole inserted interval setwise
    const auto& I = r.gaps[0];
    REQUIRE(circ_dist(r.opened[0].apply(I.lo), I.lo) < 1e-9);
    REQUIRE(circ_dist(r.opened[0].apply(I.hi), I.hi) < 1e-9);
    // semi-conjugacy (rho, rho_hat, h)
    double res = semiconj_residual_pair(g, r.opened[0], r.h, 1024);
    REQUIRE(res < 1e-6);
    // extra fixed points inside the interval boundary
    REQUIRE(circ_dist(r.h.hl(0.5), I.lo) < 1e-9);
    REQUIRE(circ_dist(r.h.hr(0.5), I.hi) < 1e-9);
}

TEST_CASE("opening a rotation orbit matches the Denjoy construction") {
    // alpha = identity, affine transports: rotation numbers agree
    int N = 6;
    std::vector<double> lens(2 * N + 1, 0.3 / (2 * N + 1));
    CircleMap rot = CircleMap::rotation(golden());
    auto r = open_orbit({rot}, 0.0, lens);
    REQUIRE(r.orbit.size() == lens.size());
    auto rn = rotation_number(r.opened[0], 400000);
    REQUIRE(circ_dist(rn.value, golden()) < 5e-3);
    double res = semiconj_residual_pair(rot, r.opened[0], r.h, 512);
    REQUIRE(res < 0.05);  // truncation edge only
}

TEST_CASE("stabilizer mismatch error") {
    CircleMap rot = CircleMap::rotation(golden());
    IntervalAction alpha;
    alpha.identity = false;
    alpha.fn = [](double t) { return t * t; };
    REQUIRE_THROWS_WITH(open_orbit({rot}, 0.0, {0.1, 0.1, 0.1}, alpha),
                        Catch::Matchers::ContainsSubstring("stabilizer mismatch"));
}

TEST_CASE("finite orbit equivalence") {
    CircleMap r2 = CircleMap::rotation(0.5);
    auto e = finite_orbit_equivalence({r2}, {r2}, {0.0, 0.5}, {0.0, 0.5});
    REQUIRE(e.equivalent);
    REQUIRE(e.offset == 0);

    CircleMap r3 = CircleMap::rotation(1.0 / 3.0);
    auto e3 = finite_orbit_equivalence({r3}, {r3}, {0.0, 1.0 / 3, 2.0 / 3}, {0.1, 0.1 + 1.0 / 3, 0.1 + 2.0 / 3});
    REQUIRE(e3.equivalent);

    CircleMap r23 = CircleMap::rotation(2.0 / 3.0);
    auto bad = finite_orbit_equivalence({r3}, {r23}, {0.0, 1.0 / 3, 2.0 / 3}, {0.0, 1.0 / 3, 2.0 / 3});
    REQUIRE_FALSE(bad.equivalent);
}

TEST_CASE("minimal set probe trichotomy") {
    CircleMap r4 = CircleMap::rotation(0.25);
    auto p1 = minimal_set_probe({r4}, {0.05}, 30);
    REQUIRE(p1.kind == MinimalSetKind::FiniteOrbit);
    REQUIRE(p1.cloud.size() == 4);

    CircleMap rg = CircleMap::rotation(golden());
    auto p2 = minimal_set_probe({rg}, {0.0}, 400);
    REQUIRE(p2.kind == MinimalSetKind::Dense);

    CircleMap s1(MobiusElement::hyperbolic(0.0, 0.5, 0.02));
    CircleMap s2(MobiusElement::hyperbolic(0.25, 0.75, 0.02));
    auto p3 = minimal_set_probe({s1, s2}, {0.5}, 40);
    REQUIRE(p3.kind == MinimalSetKind::CantorLike);
}

TEST_CASE("product map preserves the graph") {
    // for the collapse triple, (f, col(f)) maps G(h) into G(h)
    int N = 8;
    auto d = denjoy_map(golden(), denjoy_lengths(N, 0.3));
    auto r = collapse({d.map}, d.intervals, 1e-7);
    auto pts = r.h.sample_graph(200);
    int ok = 0, total = 0;
    for (auto& [x, y] : pts) {
        double fx = d.map.apply(x), gy = r.collapsed[0].apply(y);
        // graph membership up to the truncation-edge tolerance
        ++total;
        if (!r.h.in_Mh(fx, gy)) ++ok;
        else if (circ_dist(r.h.value(fx), gy) < 0.02) ++ok;
    }
    REQUIRE(ok == total);
}
