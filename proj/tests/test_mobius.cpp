#include <catch2/catch_amalgamated.hpp>

#include "clab/circlemap.hpp"
#include "clab/dynamics.hpp"
#include "clab/mobius.hpp"

using namespace clab;

namespace {

MobiusElement random_mobius(Rng& rng) {
    for (;;) {
        double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
        double c = rng.uniform(-2, 2), d = rng.uniform(-2, 2);
        if (a * d - b * c > 0.05) return MobiusElement(a, b, c, d);
    }
}

}  // namespace

TEST_CASE("identity acts trivially") {
    MobiusElement id;
    REQUIRE(id.apply(0.3) == Catch::Approx(0.3).margin(1e-15));
    REQUIRE(id.derivative(0.77) == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("diagonal element fixes 0 and 1/2") {
    MobiusElement m(std::sqrt(2.0), 0.0, 0.0, 1.0 / std::sqrt(2.0));
    REQUIRE(m.apply(0.0) == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(m.apply(0.5) == Catch::Approx(0.5).margin(1e-15));
    REQUIRE(m.derivative(0.0) == Catch::Approx(2.0).epsilon(1e-13));
    // chain rule through the chart, checked by finite differences
    double h = 1e-7;
    double fd = (m.apply(0.0 + h) - (m.apply(1.0 - h) - 1.0)) / (2 * h);
    REQUIRE(fd == Catch::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("rotation matrix acts as rigid rotation") {
    double a = kPi / 5.0;
    MobiusElement r = MobiusElement::rotation_matrix(a);
    for (double t : {0.0, 0.13, 0.5, 0.91}) {
        // oracle: tan(u - a) identity, i.e. theta -> theta - 1/5
        REQUIRE(circ_dist(r.apply(t), wrap(t - 0.2)) < 1e-14);
        REQUIRE(r.derivative(t) == Catch::Approx(1.0).margin(1e-14));
    }
}

TEST_CASE("classification by trace") {
    MobiusElement hyp(std::sqrt(2.0), 0.0, 0.0, 1.0 / std::sqrt(2.0));
    REQUIRE(hyp.classify() == MobiusClass::Hyperbolic);
    auto fp = hyp.fixed_points();
    REQUIRE(fp.size() == 2);
    // attracting first: derivative at 0 is 2 (repelling), at 1/2 is 1/2
    REQUIRE(circ_dist(fp[0], 0.5) < 1e-12);
    REQUIRE(circ_dist(fp[1], 0.0) < 1e-12);

    MobiusElement par(1.0, 1.0, 0.0, 1.0);
    REQUIRE(par.classify() == MobiusClass::Parabolic);
    auto pfp = par.fixed_points();
    REQUIRE(circ_dist(pfp[0], 0.5) < 1e-12);

    REQUIRE(MobiusElement::rotation_matrix(kPi / 5).classify() == MobiusClass::Elliptic);
}

TEST_CASE("classification is conjugation invariant") {
    Rng rng(7);
    MobiusElement samples[3] = {MobiusElement(std::sqrt(2.0), 0, 0, 1 / std::sqrt(2.0)),
                                MobiusElement(1, 1, 0, 1), MobiusElement::rotation_matrix(0.3)};
    for (const auto& m : samples) {
        for (int k = 0; k < 20; ++k) {
            MobiusElement g = random_mobius(rng);
            REQUIRE((g * m * g.inverse()).classify() == m.classify());
        }
    }
}

TEST_CASE("group law on random samples") {
    Rng rng(11);
    for (int k = 0; k < 200; ++k) {
        MobiusElement m1 = random_mobius(rng), m2 = random_mobius(rng);
        double t = rng.uniform();
        double lhs = (m1 * m2).apply(t);
        double rhs = m1.apply(m2.apply(t));
        REQUIRE(circ_dist(lhs, rhs) < 1e-12);
    }
}

TEST_CASE("omega0 values and symmetry") {
    REQUIRE(omega0(0.75, 0.25) == Catch::Approx(4 * kPi * kPi).epsilon(1e-14));
    Rng rng(3);
    for (int k = 0; k < 100; ++k) {
        double a = rng.uniform(), b = rng.uniform();
        if (circ_dist(a, b) < 1e-6) continue;
        REQUIRE(omega0(a, b) == Catch::Approx(omega0(b, a)).epsilon(1e-14));
    }
    REQUIRE_THROWS_AS(omega0(0.3, 0.3), error);
}

TEST_CASE("omega0 Mobius invariance over 1e4 samples") {
    Rng rng(42);
    double worst = 0.0;
    for (int k = 0; k < 10000; ++k) {
        MobiusElement g = random_mobius(rng);
        double x = rng.uniform(), y = rng.uniform();
        if (circ_dist(x, y) < 1e-4) continue;
        double lhs = std::log(omega0(g.apply(x), g.apply(y)) * g.derivative(x) * g.derivative(y));
        double rhs = std::log(omega0(x, y));
        worst = std::max(worst, std::fabs(lhs - rhs));
    }
    REQUIRE(worst < 1e-10);
}

TEST_CASE("double cover lifts") {
    MobiusElement id;
    DoubleCoverElement triv = lift_to_double_cover(id, 0);
    DoubleCoverElement deck = lift_to_double_cover(id, 1);
    for (double p : {0.1, 0.4, 0.9}) {
        REQUIRE(circ_dist(triv.apply(p), p) < 1e-14);
        REQUIRE(circ_dist(deck.apply(p), wrap(p + 0.5)) < 1e-14);
    }

    Rng rng(5);
    for (int k = 0; k < 50; ++k) {
        MobiusElement m = random_mobius(rng);
        for (int br : {0, 1}) {
            DoubleCoverElement lm = lift_to_double_cover(m, br);
            double phi = rng.uniform();
            // projection o lift == base o projection
            REQUIRE(circ_dist(wrap(2.0 * lm.apply(phi)), m.apply(wrap(2.0 * phi))) < 1e-12);
        }
        // branches differ by the deck rotation
        double phi = rng.uniform();
        DoubleCoverElement l0 = lift_to_double_cover(m, 0), l1 = lift_to_double_cover(m, 1);
        REQUIRE(circ_dist(l1.apply(phi), wrap(l0.apply(phi) + 0.5)) < 1e-12);
    }
}

TEST_CASE("fixed-point-free lift of a parabolic") {
    MobiusElement par(1.0, 1.0, 0.0, 1.0);
    double x0 = par.fixed_points()[0];
    // the two cover preimages of the fixed point
    double p0 = x0 / 2.0, p1 = wrap(x0 / 2.0 + 0.5);
    DoubleCoverElement l0 = lift_to_double_cover(par, 0);
    DoubleCoverElement l1 = lift_to_double_cover(par, 1);
    bool l0_fixes = circ_dist(l0.apply(p0), p0) < 1e-9;
    DoubleCoverElement& free_lift = l0_fixes ? l1 : l0;
    DoubleCoverElement& fix_lift = l0_fixes ? l0 : l1;
    REQUIRE(circ_dist(fix_lift.apply(p0), p0) < 1e-12);
    REQUIRE(circ_dist(fix_lift.apply(p1), p1) < 1e-12);
    // periodic points swapped by the fixed-point-free lift
    REQUIRE(circ_dist(free_lift.apply(p0), p1) < 1e-12);
    REQUIRE(circ_dist(free_lift.apply(p1), p0) < 1e-12);
    // rotation number 1/2
    CircleMap cov(free_lift);
    auto rn = rotation_number(cov, 20000);
    REQUIRE(circ_dist(rn.value, 0.5) < 1e-3);
}
