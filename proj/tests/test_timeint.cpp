#include <doctest.h>

#include <cmath>
#include <vector>

#include "blochdg/timeint.hpp"

using namespace blochdg;

namespace {

RhsFn scalar_decay() {
    return [](double, std::span<const double> y, std::span<double> dy) { dy[0] = -y[0]; };
}

// global error of a fixed-step embedded run on y' = -y over [0, 1]
double embedded_global_error(Method m, double tau) {
    std::vector<double> y{1.0}, out(1), err(1), work;
    int evals = 0;
    const RhsFn rhs = scalar_decay();
    double t = 0.0;
    const int n = int(std::round(1.0 / tau));
    for (int i = 0; i < n; ++i) {
        embedded_step(m, t, tau, y, rhs, out, err, work, nullptr, evals);
        y[0] = out[0];
        t += tau;
    }
    return std::abs(y[0] - std::exp(-1.0));
}

double fit_slope(const std::vector<double>& h, const std::vector<double>& e) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(h.size());
    for (size_t i = 0; i < h.size(); ++i) {
        const double x = std::log(h[i]), y = std::log(e[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("rk2 step reproduces the two-stage update by hand") {
    // y' = -y, y0 = 1, tau = 0.1: y* = 0.9, y1 = 0.95 - 0.045 = 0.905
    std::vector<double> y{1.0}, out(1), work;
    rk2_step(0.0, 0.1, y, scalar_decay(), out, work);
    CHECK(out[0] == doctest::Approx(0.905).epsilon(1e-15));
}

TEST_CASE("zero right-hand side: steps are the identity") {
    const RhsFn rhs = [](double, std::span<const double>, std::span<double> dy) { dy[0] = 0.0; };
    std::vector<double> y{3.14}, out(1), err(1), work;
    rk2_step(0.0, 0.5, y, rhs, out, work);
    CHECK(out[0] == 3.14);
    int evals = 0;
    embedded_step(Method::Rk45, 0.0, 0.5, y, rhs, out, err, work, nullptr, evals);
    CHECK(out[0] == 3.14);
    CHECK(err[0] == 0.0);
}

TEST_CASE("global-error orders on the linear decay problem") {
    SUBCASE("rk2: order 2") {
        std::vector<double> taus{0.1, 0.05, 0.025, 0.0125}, errs;
        for (double tau : taus) {
            SolverConfig cfg;
            cfg.method = Method::Rk2;
            cfg.fixed_step = tau;
            cfg.record_steps = false;
            auto r = integrate({1.0}, 0.0, 1.0, scalar_decay(), cfg);
            errs.push_back(std::abs(r.state[0] - std::exp(-1.0)));
        }
        CHECK(fit_slope(taus, errs) == doctest::Approx(2.0).epsilon(0.05));
    }
    SUBCASE("rk23: order 3") {
        std::vector<double> taus{0.2, 0.1, 0.05, 0.025}, errs;
        for (double tau : taus) errs.push_back(embedded_global_error(Method::Rk23, tau));
        CHECK(fit_slope(taus, errs) == doctest::Approx(3.0).epsilon(0.1 / 3.0));
    }
    SUBCASE("rk45: order 5") {
        std::vector<double> taus{0.5, 0.25, 0.125, 0.0625}, errs;
        for (double tau : taus) errs.push_back(embedded_global_error(Method::Rk45, tau));
        CHECK(fit_slope(taus, errs) == doctest::Approx(5.0).epsilon(0.03));
    }
}

TEST_CASE("rk45 integrates quartics exactly in one step") {
    const RhsFn rhs = [](double t, std::span<const double>, std::span<double> dy) {
        dy[0] = 5.0 * t * t * t * t;
    };
    std::vector<double> y{0.0}, out(1), err(1), work;
    int evals = 0;
    embedded_step(Method::Rk45, 0.0, 0.3, y, rhs, out, err, work, nullptr, evals);
    CHECK(std::abs(out[0] - std::pow(0.3, 5)) < 1e-13);
}

TEST_CASE("step controller") {
    SolverConfig cfg;
    SUBCASE("zero error: accept with the maximum growth factor") {
        const auto c = adapt_step(0.0, 0.1, 4, cfg);
        CHECK(c.accept);
        CHECK(c.tau_next == doctest::Approx(0.1 * cfg.max_factor));
    }
    SUBCASE("unit norm: accept, shrink by the safety factor") {
        const auto c = adapt_step(1.0, 0.1, 4, cfg);
        CHECK(c.accept);
        CHECK(c.tau_next == doctest::Approx(0.09).epsilon(1e-12));
    }
    SUBCASE("norm 2^(p+1): reject, halve (times safety)") {
        const auto c = adapt_step(32.0, 0.1, 4, cfg);
        CHECK(!c.accept);
        CHECK(c.tau_next == doctest::Approx(0.5 * 0.9 * 0.1).epsilon(1e-12));
    }
    SUBCASE("non-finite norm: reject with the maximum shrink factor") {
        const auto c = adapt_step(std::numeric_limits<double>::infinity(), 0.1, 4, cfg);
        CHECK(!c.accept);
        CHECK(c.tau_next == doctest::Approx(0.1 * cfg.min_factor));
    }
    SUBCASE("invalid config rejected") {
        SolverConfig bad;
        bad.rtol = 0.0;
        CHECK_THROWS(bad.validate());
        SolverConfig bad2;
        bad2.min_factor = 1.5;
        CHECK_THROWS(bad2.validate());
        SolverConfig bad3;
        bad3.method = Method::Rk2;  // fixed_step missing
        CHECK_THROWS(bad3.validate());
    }
}

TEST_CASE("error norm: weighted RMS with atol/rtol scaling") {
    std::vector<double> err{1e-8, 0.0}, y0{1.0, 1.0}, y1{1.0, 1.0};
    // scale = atol + rtol |y| = 1e-8 + 1e-6: err/scale ~ 0.0099; rms over 2 dofs
    const double n = error_norm(err, y0, y1, 1e-8, 1e-6);
    CHECK(n == doctest::Approx((1e-8 / (1e-8 + 1e-6)) / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("integrate: zero-length interval is the identity") {
    auto r = integrate({2.0}, 1.0, 1.0, scalar_decay(), SolverConfig{});
    CHECK(r.state[0] == 2.0);
    CHECK(r.accepted == 0);
}

TEST_CASE("integrate: event snapping and exact observer landing") {
    SolverConfig cfg;
    cfg.method = Method::Rk45;
    cfg.rtol = 1e-8;
    cfg.atol = 1e-10;
    const std::vector<double> events{0.3, 0.55, 0.7000001};
    const std::vector<double> obs{0.37};
    std::vector<double> obs_hits;
    auto r = integrate({1.0}, 0.0, 1.0, scalar_decay(), cfg, events, obs,
                       [&](double t, std::span<const double>) { obs_hits.push_back(t); });
    REQUIRE(obs_hits.size() == 1);
    CHECK(obs_hits[0] == 0.37);  // exact, no interpolation
    for (const auto& rec : r.records) {
        if (!rec.accepted) continue;
        for (double e : events) {
            CHECK(!(rec.t < e && e < rec.t + rec.tau));  // no event strictly inside a step
        }
    }
    CHECK(r.state[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-8));
}

TEST_CASE("integrate: fixed-step rk2 walks the grid and splits at events") {
    SolverConfig cfg;
    cfg.method = Method::Rk2;
    cfg.fixed_step = 0.1;
    const std::vector<double> events{0.55};
    auto r = integrate({1.0}, 0.0, 1.0, scalar_decay(), cfg, events);
    CHECK(r.accepted == 11);  // 10 grid steps, one split by the event
    bool saw_event_landing = false;
    for (const auto& rec : r.records) {
        saw_event_landing = saw_event_landing || (rec.t + rec.tau == 0.55);
        CHECK(!(rec.t < 0.55 && 0.55 < rec.t + rec.tau));
    }
    CHECK(saw_event_landing);
    CHECK(r.state[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-3));
}

TEST_CASE("integrate: non-finite right-hand side aborts with the last good state") {
    const RhsFn rhs = [](double t, std::span<const double> y, std::span<double> dy) {
        dy[0] = t < 0.5 ? -y[0] : std::numeric_limits<double>::quiet_NaN();
    };
    SolverConfig cfg;
    cfg.method = Method::Rk45;
    auto r = integrate({1.0}, 0.0, 1.0, rhs, cfg);
    CHECK(r.aborted);
    CHECK(!r.abort_reason.empty());
    CHECK(std::isfinite(r.state[0]));
}

TEST_CASE("integrate: identical configuration gives an identical step sequence") {
    SolverConfig cfg;
    cfg.method = Method::Rk45;
    const std::vector<double> events{0.2, 0.41};
    auto a = integrate({1.0}, 0.0, 1.0, scalar_decay(), cfg, events);
    auto b = integrate({1.0}, 0.0, 1.0, scalar_decay(), cfg, events);
    REQUIRE(a.records.size() == b.records.size());
    for (size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].t == b.records[i].t);
        CHECK(a.records[i].tau == b.records[i].tau);
        CHECK(a.records[i].accepted == b.records[i].accepted);
    }
    CHECK(a.state[0] == b.state[0]);
}

namespace {

// 2x2 linear parts: rotation (advection stand-in) and damping (reaction
// stand-in); they do not commute, so Lie splitting is first order.
RhsFn rotation_rhs(double w) {
    return [w](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = -w * y[1];
        dy[1] = w * y[0];
    };
}
RhsFn damping_rhs() {
    return [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = -1.0 * y[0];
        dy[1] = -3.0 * y[1];
    };
}
RhsFn combined_rhs(double w) {
    return [w](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = -w * y[1] - 1.0 * y[0];
        dy[1] = w * y[0] - 3.0 * y[1];
    };
}

std::vector<double> split_run(Method mode, double T, int macro_steps, double w) {
    SolverConfig sub;
    sub.method = Method::Rk45;
    sub.rtol = 1e-12;
    sub.atol = 1e-14;
    std::vector<double> y{1.0, 0.5};
    const double tau = T / macro_steps;
    for (int i = 0; i < macro_steps; ++i) {
        y = split_step(std::move(y), i * tau, tau, rotation_rhs(w), damping_rhs(), mode, sub);
    }
    return y;
}

}  // namespace

TEST_CASE("operator splitting: orders on a non-commuting linear pair") {
    const double w = 6.0, T = 1.0;
    SolverConfig tight;
    tight.method = Method::Rk45;
    tight.rtol = 1e-13;
    tight.atol = 1e-15;
    auto ref = integrate({1.0, 0.5}, 0.0, T, combined_rhs(w), tight);

    auto err_for = [&](Method mode, int n) {
        const auto y = split_run(mode, T, n, w);
        return std::hypot(y[0] - ref.state[0], y[1] - ref.state[1]);
    };
    std::vector<double> hs, lie, strang;
    for (int n : {4, 8, 16, 32}) {
        hs.push_back(T / n);
        lie.push_back(err_for(Method::SplitLie, n));
        strang.push_back(err_for(Method::SplitStrang, n));
    }
    CHECK(fit_slope(hs, lie) == doctest::Approx(1.0).epsilon(0.2));
    CHECK(fit_slope(hs, strang) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("operator splitting: commuting parts reproduce the coupled solution") {
    // both parts diagonal: the splitting is exact up to sub-solver tolerance
    const RhsFn a = [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = -2.0 * y[0];
        dy[1] = -0.5 * y[1];
    };
    const RhsFn b = [](double, std::span<const double> y, std::span<double> dy) {
        dy[0] = 0.3 * y[0];
        dy[1] = -1.0 * y[1];
    };
    const RhsFn ab = [&](double t, std::span<const double> y, std::span<double> dy) {
        dy[0] = -1.7 * y[0];
        dy[1] = -1.5 * y[1];
        (void)t;
    };
    SolverConfig cfg;
    cfg.method = Method::SplitLie;
    cfg.fixed_step = 0.25;
    cfg.rtol = 1e-12;
    cfg.atol = 1e-14;
    auto split = integrate_split({1.0, 1.0}, 0.0, 1.0, a, b, cfg);
    SolverConfig tight;
    tight.rtol = 1e-13;
    tight.atol = 1e-15;
    auto ref = integrate({1.0, 1.0}, 0.0, 1.0, ab, tight);
    CHECK(split.state[0] == doctest::Approx(ref.state[0]).epsilon(1e-10));
    CHECK(split.state[1] == doctest::Approx(ref.state[1]).epsilon(1e-10));
}

TEST_CASE("adaptive stepping needs far fewer steps than a naive fixed run") {
    // 1/10 the fixed count at matched accuracy on a smooth stiff-ish decay
    const RhsFn rhs = [](double t, std::span<const double> y, std::span<double> dy) {
        dy[0] = -y[0] * (1.0 + 10.0 * std::exp(-20.0 * t));
    };
    SolverConfig fixed;
    fixed.method = Method::Rk2;
    fixed.fixed_step = 1e-4;
    auto rf = integrate({1.0}, 0.0, 1.0, rhs, fixed);
    SolverConfig adaptive;
    adaptive.method = Method::Rk45;
    adaptive.rtol = 1e-8;
    adaptive.atol = 1e-10;
    auto ra = integrate({1.0}, 0.0, 1.0, rhs, adaptive);
    CHECK(ra.accepted * 10 < rf.accepted);
    CHECK(ra.state[0] == doctest::Approx(rf.state[0]).epsilon(1e-6));
}

TEST_CASE("cfl guard message") {
    CHECK(check_cfl(1e-5, 0.5, 2, 1e-3, 1.0).empty());
    const std::string w = check_cfl(1e-2, 0.5, 2, 1e-3, 1.0);
    CHECK(w.find("CFL") != std::string::npos);
}
