#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "blochdg/physics.hpp"

using namespace blochdg;

namespace {

// Test-local reference integrator (classic RK4, fixed step). Kept independent
// of the production steppers on purpose.
Vec3 rk4_reference(Vec3 m, double t0, double t1, int steps,
                   const std::function<Vec3(double, const Vec3&)>& f) {
    const double h = (t1 - t0) / steps;
    double t = t0;
    for (int i = 0; i < steps; ++i) {
        const Vec3 k1 = f(t, m);
        const Vec3 k2 = f(t + 0.5 * h, m + 0.5 * h * k1);
        const Vec3 k3 = f(t + 0.5 * h, m + 0.5 * h * k2);
        const Vec3 k4 = f(t + h, m + h * k3);
        m += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    return m;
}

}  // namespace

TEST_CASE("constants: default proton frequency") {
    PhysicalConstants c;
    CHECK(c.gamma > 0.0);
    CHECK(c.frequency_hz_per_tesla() == doctest::Approx(42.577478518e6).epsilon(1e-12));
    CHECK_NOTHROW(c.validate());
    CHECK_THROWS(PhysicalConstants{-1.0}.validate());
}

TEST_CASE("tissue invariants") {
    CHECK_NOTHROW((TissueParams{0.296, 0.113, 1.0}).validate());
    CHECK_NOTHROW(TissueParams::relaxation_free().validate());  // t1 = t2 = inf
    CHECK_THROWS((TissueParams{0.1, 0.2, 1.0}).validate());     // t1 < t2
    CHECK_THROWS((TissueParams{1.0, 0.0, 1.0}).validate());     // t2 = 0
    CHECK_THROWS((TissueParams{1.0, 0.5, 0.0}).validate());     // m0 = 0
}

TEST_CASE("bloch_rhs: equilibrium is a fixed point") {
    const TissueParams t{1.0, 0.5, 1.0};
    const Vec3 rate = bloch_rhs({0.0, 0.0, t.m0}, {0.0, 0.0, 0.0}, t, {});
    CHECK(rate.x == 0.0);
    CHECK(rate.y == 0.0);
    CHECK(rate.z == 0.0);
}

TEST_CASE("bloch_rhs: transverse RF tips the equilibrium toward +y") {
    const PhysicalConstants c;
    const TissueParams t = TissueParams::relaxation_free();
    const double b1 = 5e-6;
    const Vec3 rate = bloch_rhs({0.0, 0.0, 1.0}, {b1, 0.0, 0.0}, t, c);
    CHECK(rate.x == doctest::Approx(0.0));
    CHECK(rate.y == doctest::Approx(c.gamma * b1).epsilon(1e-14));
    CHECK(rate.z == doctest::Approx(0.0));
}

TEST_CASE("bloch_rhs: pure longitudinal recovery, checked against a reference integration") {
    const TissueParams t{1.0, 0.5, 1.0};
    const Vec3 rate = bloch_rhs({0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, t, {});
    CHECK(rate.x == 0.0);
    CHECK(rate.y == 0.0);
    CHECK(rate.z == doctest::Approx(1.0).epsilon(1e-15));

    const Vec3 m1 = rk4_reference({0.0, 0.0, 0.0}, 0.0, 1.0, 2000, [&](double, const Vec3& m) {
        return bloch_rhs(m, {0.0, 0.0, 0.0}, t, {});
    });
    CHECK(m1.z == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-10));
    CHECK(m1.z == doctest::Approx(0.6321).epsilon(1e-4));
}

TEST_CASE("bloch_rhs rejects non-finite input") {
    const TissueParams t{1.0, 0.5, 1.0};
    CHECK_THROWS(bloch_rhs({std::nan(""), 0.0, 0.0}, {0.0, 0.0, 0.0}, t, {}));
    CHECK_THROWS(bloch_rhs({0.0, 0.0, 1.0}, {0.0, std::numeric_limits<double>::infinity(), 0.0},
                           t, {}));
}

TEST_CASE("reaction_operator is the negated Bloch right-hand side") {
    const TissueParams t{0.3, 0.1, 1.0};
    const PhysicalConstants c;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const Vec3 m{d(rng), d(rng), d(rng)};
        const Vec3 b{1e-5 * d(rng), 1e-5 * d(rng), 1e-5 * d(rng)};
        const Vec3 r1 = bloch_rhs(m, b, t, c);
        const Vec3 r2 = reaction_operator(m, b, t, c);
        CHECK(r1.x == -r2.x);
        CHECK(r1.y == -r2.y);
        CHECK(r1.z == -r2.z);
    }
    const Vec3 eq = reaction_operator({0.0, 0.0, 1.0}, {0.0, 0.0, 0.0}, t, c);
    CHECK(eq.x == 0.0);
    CHECK(eq.y == 0.0);
    CHECK(eq.z == 0.0);
}

TEST_CASE("reaction_operator: relaxation matrix acting on transverse magnetization") {
    // D M - f with M = (1,0,0), t2 = 0.1 s: (10, 0, -m0/t1)
    const TissueParams t{1.0, 0.1, 1.0};
    const Vec3 r = reaction_operator({1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, t, {});
    CHECK(r.x == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(r.y == 0.0);
    CHECK(r.z == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("norm preservation: precession does not change |M| when relaxation is off") {
    const TissueParams t = TissueParams::relaxation_free();
    const PhysicalConstants c;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const Vec3 m{d(rng), d(rng), d(rng)};
        const Vec3 b{1e-4 * d(rng), 1e-4 * d(rng), 1e-4 * d(rng)};
        const Vec3 rate = bloch_rhs(m, b, t, c);
        // d/dt |M|^2 = 2 M . rate must vanish to machine precision
        const double scale = c.gamma * norm(m) * norm(m) * norm(b) + 1e-300;
        CHECK(std::abs(dot(m, rate)) / scale < 1e-13);
    }
}

TEST_CASE("exact_relaxation_rotation: closed forms") {
    const TissueParams t{1.3, 0.25, 1.0};
    const PhysicalConstants c;

    SUBCASE("longitudinal recovery from zero over t1") {
        const Vec3 m = exact_relaxation_rotation({0, 0, 0}, 0.0, t, c, t.t1);
        CHECK(m.x == 0.0);
        CHECK(m.y == 0.0);
        CHECK(m.z == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
    }
    SUBCASE("transverse decay over t2") {
        const Vec3 m = exact_relaxation_rotation({1, 0, 0}, 0.0, t, c, t.t2);
        CHECK(m.x == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
        CHECK(m.y == 0.0);
        CHECK(m.z == doctest::Approx(1.0 - std::exp(-t.t2 / t.t1)).epsilon(1e-15));
    }
    SUBCASE("dt = 0 is the identity") {
        const Vec3 m0{0.3, -0.4, 0.8};
        const Vec3 m = exact_relaxation_rotation(m0, 1e-5, t, c, 0.0);
        CHECK(m.x == m0.x);
        CHECK(m.y == m0.y);
        CHECK(m.z == m0.z);
    }
    SUBCASE("negative dt rejected") {
        CHECK_THROWS(exact_relaxation_rotation({0, 0, 0}, 0.0, t, c, -1e-9));
    }
}

TEST_CASE("exact_relaxation_rotation agrees with a fine-step integration of bloch_rhs") {
    const TissueParams t{0.8, 0.2, 1.0};
    const PhysicalConstants c;
    const double bz = 1.0e-6;
    const Vec3 m0{0.6, -0.2, 0.1};
    for (const double dt : {0.02, 0.1, 0.2}) {  // dt <= t2
        const Vec3 exact = exact_relaxation_rotation(m0, bz, t, c, dt);
        const Vec3 ref = rk4_reference(m0, 0.0, dt, 20000, [&](double, const Vec3& m) {
            return bloch_rhs(m, {0.0, 0.0, bz}, t, c);
        });
        CHECK(norm(exact - ref) / norm(ref) < 1e-8);
    }
}
