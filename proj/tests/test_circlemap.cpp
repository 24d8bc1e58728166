#include <catch2/catch_amalgamated.hpp>

#include "clab/dynamics.hpp"

using namespace clab;

namespace {

// local model f(x) = x/2 + x^2 near 0, closed up to a degree-one circle map
CircleMap local_model_map() {
    std::vector<LiftPiece> pieces;
    LiftPiece quad;
    quad.x0 = -0.2;
    quad.x1 = 0.2;
    quad.val = [](double x) { return 0.5 * x + x * x; };
    quad.dval = [](double x) { return 0.5 + 2.0 * x; };
    pieces.push_back(quad);
    pieces.push_back(detail::hermite_piece(0.2, 0.8, 0.14, 0.94, 0.9, 0.1));
    return CircleMap(std::make_shared<PiecewiseLift>(pieces));
}

double golden() { return 0.5 * (std::sqrt(5.0) - 1.0); }

std::vector<double> denjoy_lengths(int N, double mass) {
    std::vector<double> l(2 * N + 1);
    double s = 0.0;
    for (int n = -N; n <= N; ++n) s += 1.0 / (n * n + 1.0);
    for (int n = -N; n <= N; ++n) l[n + N] = mass / (s * (n * n + 1.0));
    return l;
}

}  // namespace

TEST_CASE("rotation number of rigid rotations is exact") {
    auto r = rotation_number(CircleMap::rotation(1.0 / 3.0));
    REQUIRE(r.exact);
    REQUIRE(r.value == 1.0 / 3.0);
}

TEST_CASE("maps with fixed points have rotation number zero") {
    MobiusElement m(std::sqrt(2.0), 0, 0, 1 / std::sqrt(2.0));
    auto r = rotation_number(CircleMap(m), 20000);
    REQUIRE(std::fabs(wrap_sym(r.value)) < 1e-3);
}

TEST_CASE("rotation number is a conjugation invariant") {
    long n = 100000;
    CircleMap f = CircleMap::rotation(golden());
    CircleMap h = CircleMap(MobiusElement(1.4, 0.3, 0.1, 1.0));
    CircleMap g = compose(compose(h.inverse(), f), h);
    auto r = rotation_number(g, n);
    REQUIRE(circ_dist(r.value, golden()) <= 2.0 / n + 1e-9);
}

TEST_CASE("rotation number of powers") {
    CircleMap f(MobiusElement(1.2, 0.3, 0.2, 1.0));
    long n = 40000;
    double rho = rotation_number(f, n).value;
    for (int k = 2; k <= 4; ++k) {
        CircleMap fk = f;
        for (int i = 1; i < k; ++i) fk = compose(fk, f);
        double rk = rotation_number(fk, n).value;
        REQUIRE(std::fabs(wrap_sym(rk - k * rho)) <= 2.0 * k / n + 1e-9);
    }
}

TEST_CASE("find_fixed_points on basic maps") {
    REQUIRE(find_fixed_points(CircleMap::rotation(1.0 / 3.0)).empty());

    MobiusElement m(std::sqrt(2.0), 0, 0, 1 / std::sqrt(2.0));
    auto fps = find_fixed_points(CircleMap(m), 512);
    REQUIRE(fps.size() == 2);
    REQUIRE(circ_dist(fps[0].location, 0.0) < 1e-9);
    REQUIRE(fps[0].multiplier == Catch::Approx(2.0).epsilon(1e-8));
    REQUIRE(fps[0].kind == FixedPointKind::Repelling);
    REQUIRE(circ_dist(fps[1].location, 0.5) < 1e-9);
    REQUIRE(fps[1].multiplier == Catch::Approx(0.5).epsilon(1e-8));
    REQUIRE(fps[1].kind == FixedPointKind::Attracting);
}

TEST_CASE("build_prescribed fixed-point data is recovered") {
    CircleMap f = build_prescribed({{0.1, 0.5}, {0.4, 3.0}, {0.7, 1.0}});
    auto fps = find_fixed_points(f, 4096);
    REQUIRE(fps.size() == 3);
    REQUIRE(circ_dist(fps[0].location, 0.1) < 1e-9);
    REQUIRE(fps[0].multiplier == Catch::Approx(0.5).epsilon(1e-6));
    REQUIRE(fps[0].kind == FixedPointKind::Attracting);
    REQUIRE(circ_dist(fps[1].location, 0.4) < 1e-9);
    REQUIRE(fps[1].multiplier == Catch::Approx(3.0).epsilon(1e-6));
    REQUIRE(fps[1].kind == FixedPointKind::Repelling);
    REQUIRE(circ_dist(fps[2].location, 0.7) < 1e-9);
    REQUIRE(fps[2].multiplier == Catch::Approx(1.0).epsilon(1e-6));
    REQUIRE(fps[2].kind == FixedPointKind::Parabolic);

    for (double t : {0.2, 0.55, 0.9}) {
        double h = 1e-6;
        double fd = (f.lift(t + h) - f.lift(t - h)) / (2 * h);
        REQUIRE(f.deriv(t) == Catch::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("build_prescribed rejects inconsistent dynamics") {
    REQUIRE_THROWS_WITH(build_prescribed({{0.0, 2.0}, {0.5, 3.0}}),
                        Catch::Matchers::ContainsSubstring("inconsistent dynamics"));
}

TEST_CASE("single parabolic point") {
    CircleMap f = build_prescribed({{0.5, 1.0}});
    auto fps = find_fixed_points(f, 4096);
    REQUIRE(fps.size() == 1);
    REQUIRE(circ_dist(fps[0].location, 0.5) < 1e-8);
    REQUIRE(fps[0].kind == FixedPointKind::Parabolic);
}

TEST_CASE("north-south prescribed map") {
    CircleMap f = build_prescribed({{0.0, 2.0}, {0.5, 0.5}});
    auto fps = find_fixed_points(f, 1024);
    REQUIRE(fps.size() == 2);
    REQUIRE(fps[0].kind == FixedPointKind::Repelling);
    REQUIRE(fps[1].kind == FixedPointKind::Attracting);
}

TEST_CASE("inverse round-trips") {
    Rng rng(19);
    CircleMap maps[] = {build_prescribed({{0.1, 0.5}, {0.4, 3.0}, {0.7, 1.0}}),
                        CircleMap(MobiusElement(1.3, 0.4, 0.2, 1.0)),
                        CircleMap::rotation(golden())};
    for (const auto& f : maps) {
        CircleMap g = f.inverse();
        for (int k = 0; k < 40; ++k) {
            double t = rng.uniform();
            REQUIRE(circ_dist(g.apply(f.apply(t)), t) < 1e-10);
        }
    }
}

TEST_CASE("koenigs chart on the local model") {
    CircleMap f = local_model_map();
    FixedPointRecord p{0.0, 0.5, FixedPointKind::Attracting};
    KoenigsChart tau(f, p, CyclicInterval{0.85, 0.15, false, false});
    for (double x = -0.1; x <= 0.1; x += 0.02) {
        if (std::fabs(x) < 1e-6) continue;
        double lhs = tau.value(f.apply(wrap(x)));
        double rhs = 0.5 * tau.value(wrap(x));
        REQUIRE(std::fabs(lhs - rhs) < 1e-9);
    }
    double prev = tau.value(wrap(-0.1));
    for (double x = -0.08; x <= 0.1; x += 0.02) {
        double v = tau.value(wrap(x));
        REQUIRE(v > prev);
        prev = v;
    }
}

TEST_CASE("koenigs chart matches the projective chart for a Mobius map") {
    MobiusElement m(std::sqrt(2.0), 0, 0, 1 / std::sqrt(2.0));
    CircleMap f(m);
    FixedPointRecord p{0.5, 0.5, FixedPointKind::Attracting};
    KoenigsChart tau(f, p, CyclicInterval{0.05, 0.95, false, false});
    // explicit chart at theta=1/2: u(t) = -cot(pi t)/pi satisfies u o f = u/2
    auto chart = [](double t) { return -std::cos(kPi * t) / (std::sin(kPi * t) * kPi); };
    double ratio0 = tau.value(0.3) / chart(0.3);
    for (double t : {0.15, 0.42, 0.6, 0.85}) {
        REQUIRE(tau.value(t) / chart(t) == Catch::Approx(ratio0).epsilon(1e-7));
    }
}

TEST_CASE("koenigs rejects non-hyperbolic points") {
    CircleMap f = build_prescribed({{0.5, 1.0}});
    FixedPointRecord p{0.5, 1.0, FixedPointKind::Parabolic};
    REQUIRE_THROWS_WITH(KoenigsChart(f, p, CyclicInterval{0.3, 0.7, false, false}),
                        Catch::Matchers::ContainsSubstring("not hyperbolic"));
}

TEST_CASE("empty insertion list gives the rotation") {
    auto d = denjoy_map(golden(), {});
    REQUIRE(d.map.exact_translation().has_value());
    REQUIRE(*d.map.exact_translation() == Catch::Approx(golden()));
}

TEST_CASE("denjoy construction") {
    int N = 64;
    auto lengths = denjoy_lengths(N, 0.3);
    auto d = denjoy_map(golden(), lengths);

    SECTION("wandering intervals are pairwise disjoint (exact bookkeeping)") {
        for (size_t i = 0; i < d.intervals.size(); ++i) {
            for (size_t j = i + 1; j < d.intervals.size(); ++j) {
                const auto& A = d.intervals[i];
                const auto& B = d.intervals[j];
                bool disjoint = !A.contains(B.lo) && !A.contains(B.midpoint()) && !B.contains(A.lo) &&
                                !B.contains(A.midpoint());
                REQUIRE(disjoint);
            }
        }
    }

    SECTION("partial sums increase and stay below the circle") {
        double sum = lengths[N];
        for (int n = 1; n <= N; ++n) {
            double prev = sum;
            sum += lengths[N + n] + lengths[N - n];
            REQUIRE(sum > prev);
            REQUIRE(sum <= d.inserted_mass + 1e-12);
        }
        REQUIRE(sum == Catch::Approx(0.3).epsilon(1e-12));
    }

    SECTION("map sends interval n onto interval n+1") {
        for (int n = -N; n < N; ++n) {
            const auto& I = d.intervals[n + N];
            const auto& J = d.intervals[n + 1 + N];
            REQUIRE(circ_dist(d.map.apply(I.lo), J.lo) < 1e-9);
            REQUIRE(circ_dist(d.map.apply(I.hi), J.hi) < 1e-9);
        }
    }

    SECTION("derivative 1 at wandering interval endpoints") {
        for (int n = -N; n < N; ++n) {
            const auto& I = d.intervals[n + N];
            REQUIRE(std::fabs(d.map.deriv(I.lo) - 1.0) < 1e-6);
            REQUIRE(std::fabs(d.map.deriv(I.hi) - 1.0) < 1e-6);
        }
    }

    SECTION("rotation number close to alpha") {
        auto r = rotation_number(d.map, 1000000);
        REQUIRE(circ_dist(r.value, golden()) < 1e-4);
    }
}

TEST_CASE("denjoy rejects too much mass") {
    std::vector<double> l(3, 0.4);
    REQUIRE_THROWS_WITH(denjoy_map(golden(), l), Catch::Matchers::ContainsSubstring("mass exceeds circle"));
}

TEST_CASE("spline refit reproduces a composition") {
    CircleMap f = build_prescribed({{0.1, 0.5}, {0.4, 3.0}, {0.7, 1.0}});
    CircleMap g(MobiusElement(1.2, 0.1, 0.3, 1.0));
    CircleMap fg = compose(f, g);
    CircleMap s = refit(fg, 1e-10);
    Rng rng(23);
    for (int k = 0; k < 200; ++k) {
        double t = rng.uniform();
        REQUIRE(circ_dist(s.apply(t), fg.apply(t)) < 2e-10);
    }
}
