#include <catch2/catch_amalgamated.hpp>

#include "clab/volume.hpp"

using namespace clab;

namespace {

MonotoneDegreeOneMap gap_h() { return MonotoneDegreeOneMap::step({0.0, 0.5}, {0.1, 0.4}); }

}  // namespace

TEST_CASE("omega0 invariance as a field") {
    Omega0Field w;
    MobiusElement m(1.7, 0.3, 0.5, 1.0);
    CircleMap g(m);
    Rng rng(31);
    auto h = MonotoneDegreeOneMap::identity();
    auto samples = sample_Mh(h, 2000, rng);
    auto rep = invariance_residual(w, g, g, samples, &h);
    REQUIRE(rep.max_log_residual < 1e-10);
    REQUIRE(rep.samples_used == 2000);
}

TEST_CASE("identity pair has zero residual") {
    Omega0Field w;
    CircleMap id;
    Rng rng(5);
    auto h = MonotoneDegreeOneMap::identity();
    auto samples = sample_Mh(h, 200, rng);
    auto rep = invariance_residual(w, id, id, samples);
    REQUIRE(rep.max_log_residual == 0.0);
}

TEST_CASE("non-Mobius perturbation is detected") {
    Omega0Field w;
    double eps = 1e-2;
    CircleMap g(std::make_shared<FunctionLift>(
        [eps](double x) { return x + 0.3 + eps * std::sin(2 * kPi * x); },
        [eps](double x) { return 1.0 + eps * 2 * kPi * std::cos(2 * kPi * x); }));
    Rng rng(7);
    auto h = MonotoneDegreeOneMap::identity();
    auto samples = sample_Mh(h, 500, rng);
    auto rep = invariance_residual(w, g, g, samples);
    REQUIRE(rep.max_log_residual > 1e-3);
}

TEST_CASE("escape detection") {
    Omega0Field w;
    auto h = MonotoneDegreeOneMap::identity();
    CircleMap f = CircleMap::rotation(0.3);
    CircleMap id;
    std::vector<SamplePoint> bad{{0.2, 0.5}};  // image (0.5, 0.5) on the diagonal
    REQUIRE_THROWS_WITH(invariance_residual(w, f, id, bad, &h),
                        Catch::Matchers::ContainsSubstring("escapes M_h"));
}

TEST_CASE("log residual subadditivity under composition") {
    Omega0Field w;
    double eps = 1e-3;
    CircleMap g1(std::make_shared<FunctionLift>(
        [eps](double x) { return x + 0.21 + eps * std::sin(2 * kPi * x); },
        [eps](double x) { return 1.0 + eps * 2 * kPi * std::cos(2 * kPi * x); }));
    CircleMap g2(MobiusElement(1.2, 0.1, 0.2, 1.0));
    Rng rng(11);
    auto h = MonotoneDegreeOneMap::identity();
    auto samples = sample_Mh(h, 300, rng, 0.05);
    // restrict to samples whose g1-image also stays away from the diagonal
    std::vector<SamplePoint> good;
    for (auto& s : samples) {
        if (circ_dist(g1.apply(s.x), g1.apply(s.y)) > 0.03) good.push_back(s);
    }
    double r1 = invariance_residual(w, g1, g1, good).max_log_residual;
    double r2 = invariance_residual(w, g2, g2, good).max_log_residual;
    CircleMap c1 = compose(g2, g1), c2 = compose(g2, g1);
    // residual of the composite at the same samples is bounded by the sum of
    // a residual measured at the original and one at the pushed samples
    std::vector<SamplePoint> pushed;
    for (auto& s : good) pushed.push_back({g1.apply(s.x), g1.apply(s.y)});
    double r2p = invariance_residual(w, g2, g2, pushed).max_log_residual;
    double rc = invariance_residual(w, c1, c2, good).max_log_residual;
    REQUIRE(rc <= r1 + r2p + 1e-12);
    (void)r2;
}

TEST_CASE("unit-speed geodesic runs into the wall") {
    LambdaField w([](double, double) { return 0.0; });  // density 1
    auto h = gap_h();
    // fiber(0.5) = [0.1, 0.4]; so y0 = 0.25 gives wall {0.5}
    auto geo = isotropic_geodesic(w, h, 0.25, 0.6, 5.0);
    REQUIRE(geo.left_domain());
    REQUIRE(geo.exit_time() == Catch::Approx(0.9).margin(1e-6));
    REQUIRE(geo.x_at(0.5) == Catch::Approx(1.1).margin(1e-9));
}

TEST_CASE("omega0 geodesic matches the closed-form antiderivative") {
    Omega0Field w;
    auto h = MonotoneDegreeOneMap::identity();
    double y0 = 0.5, a = 0.25;
    auto geo = isotropic_geodesic(w, h, y0, a, 200.0);
    // dt/dx = omega0(x, y0), so t(x) = -4 pi cot(pi (x - y0)) + C
    auto F = [&](double x) { return -4.0 * kPi * std::cos(kPi * (x - y0)) / std::sin(kPi * (x - y0)); };
    double C = 0.0 - F(a);
    for (double x : {0.26, 0.3, 0.35, 0.4, 0.44}) {
        REQUIRE(std::fabs(geo.t_at(x) - (F(x) + C)) < 1e-8);
    }
}

TEST_CASE("geodesic flow property") {
    Omega0Field w;
    auto h = MonotoneDegreeOneMap::identity();
    auto geo = isotropic_geodesic(w, h, 0.5, 0.25, 20.0);
    double t1 = 3.0, t2 = 5.0;
    double x1 = geo.x_at(t1);
    auto geo2 = isotropic_geodesic(w, h, 0.5, x1, 20.0);
    REQUIRE(std::fabs(geo2.x_at(t2) - geo.x_at(t1 + t2)) < 1e-9);
}

TEST_CASE("stabilizer affine chart: identity pair") {
    Omega0Field w;
    auto h = MonotoneDegreeOneMap::identity();
    CircleMap id;
    auto res = stabilizer_affine_chart(w, h, 0.0, {{id, id}});
    REQUIRE(res.entries.size() == 1);
    REQUIRE(res.entries[0].slope == Catch::Approx(1.0));
    REQUIRE(std::fabs(res.entries[0].intercept) < 1e-9);
}

TEST_CASE("stabilizer affine chart: Mobius pair acts affinely") {
    Omega0Field w;
    auto h = MonotoneDegreeOneMap::identity();
    MobiusElement m(std::sqrt(2.0), 0, 0, 1 / std::sqrt(2.0));  // fixes 0 and 1/2
    CircleMap f(m);
    auto res = stabilizer_affine_chart(w, h, 0.0, {{f, f}});
    REQUIRE(res.entries[0].slope == Catch::Approx(1.0 / f.deriv(0.0)).epsilon(1e-12));
    REQUIRE(res.entries[0].slope_dev < 1e-6);
}

TEST_CASE("commuting stabilizer elements have commuting affine images") {
    Omega0Field w;
    auto h = MonotoneDegreeOneMap::identity();
    MobiusElement m(std::sqrt(2.0), 0, 0, 1 / std::sqrt(2.0));
    CircleMap f1(m), f2(m * m);
    auto res = stabilizer_affine_chart(w, h, 0.0, {{f1, f1}, {f2, f2}});
    const auto& A = res.entries[0].as_mobius;
    const auto& B = res.entries[1].as_mobius;
    MobiusElement AB = A * B, BA = B * A;
    for (double t : {0.1, 0.35, 0.71}) {
        REQUIRE(circ_dist(AB.apply(t), BA.apply(t)) < 1e-8);
    }
}

TEST_CASE("psi is a degree-one semi-conjugacy to the affine action") {
    Omega0Field w;
    auto h = MonotoneDegreeOneMap::identity();
    MobiusElement m(std::sqrt(2.0), 0, 0, 1 / std::sqrt(2.0));
    CircleMap f(m);
    auto res = stabilizer_affine_chart(w, h, 0.0, {{f, f}});
    CircleMap aff(res.entries[0].as_mobius);
    // psi o f == aff o psi away from the wall
    double worst = 0.0;
    for (int i = 1; i < 40; ++i) {
        double x = 0.05 + 0.9 * i / 40.0;
        worst = std::max(worst, circ_dist(res.psi.value(f.apply(x)), aff.apply(res.psi.value(x))));
    }
    REQUIRE(worst < 1e-5);
}
