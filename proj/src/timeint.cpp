#include "blochdg/timeint.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace blochdg {

Method method_from_string(const std::string& s) {
    if (s == "rk2") return Method::Rk2;
    if (s == "rk23") return Method::Rk23;
    if (s == "rk45") return Method::Rk45;
    if (s == "split-lie") return Method::SplitLie;
    if (s == "split-strang") return Method::SplitStrang;
    throw std::invalid_argument("unknown method '" + s + "' (rk2|rk23|rk45|split-lie|split-strang)");
}

const char* method_to_string(Method m) {
    switch (m) {
        case Method::Rk2: return "rk2";
        case Method::Rk23: return "rk23";
        case Method::Rk45: return "rk45";
        case Method::SplitLie: return "split-lie";
        default: return "split-strang";
    }
}

void SolverConfig::validate() const {
    if (!(rtol > 0.0) || !(atol > 0.0)) {
        throw std::invalid_argument("SolverConfig: rtol and atol must be > 0");
    }
    if (!(min_factor > 0.0 && min_factor < 1.0 && max_factor > 1.0)) {
        throw std::invalid_argument("SolverConfig: need 0 < min_factor < 1 < max_factor");
    }
    if (!(safety > 0.0 && safety <= 1.0)) {
        throw std::invalid_argument("SolverConfig: need 0 < safety <= 1");
    }
    const bool needs_fixed =
        method == Method::Rk2 || method == Method::SplitLie || method == Method::SplitStrang;
    if (needs_fixed && !(fixed_step > 0.0)) {
        throw std::invalid_argument(std::string("SolverConfig: method ") + method_to_string(method) +
                                    " requires fixed_step > 0");
    }
}

void rk2_step(double t, double tau, std::span<const double> y, const RhsFn& rhs,
              std::span<double> out, std::vector<double>& work) {
    const size_t n = y.size();
    work.resize(2 * n);
    std::span<double> k(work.data(), n);
    std::span<double> y1(work.data() + n, n);
    rhs(t, y, k);
    for (size_t i = 0; i < n; ++i) y1[i] = y[i] + tau * k[i];
    rhs(t + tau, y1, k);
    for (size_t i = 0; i < n; ++i) out[i] = 0.5 * (y[i] + y1[i]) + 0.5 * tau * k[i];
}

namespace {

// Bogacki-Shampine 3(2)
constexpr double bs_c[4] = {0.0, 0.5, 0.75, 1.0};
constexpr double bs_a2[1] = {0.5};
constexpr double bs_a3[2] = {0.0, 0.75};
constexpr double bs_a4[3] = {2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0};  // also the 3rd-order weights
constexpr double bs_e[4] = {2.0 / 9.0 - 7.0 / 24.0, 1.0 / 3.0 - 0.25, 4.0 / 9.0 - 1.0 / 3.0,
                            -0.125};

// Dormand-Prince 5(4)
constexpr double dp_c[7] = {0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0};
constexpr double dp_a2[1] = {0.2};
constexpr double dp_a3[2] = {3.0 / 40.0, 9.0 / 40.0};
constexpr double dp_a4[3] = {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0};
constexpr double dp_a5[4] = {19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0};
constexpr double dp_a6[5] = {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
                             -5103.0 / 18656.0};
constexpr double dp_b[6] = {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
                            11.0 / 84.0};
constexpr double dp_bhat[7] = {5179.0 / 57600.0, 0.0,           7571.0 / 16695.0, 393.0 / 640.0,
                               -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0};

}  // namespace

void embedded_step(Method method, double t, double tau, std::span<const double> y,
                   const RhsFn& rhs, std::span<double> out, std::span<double> err,
                   std::vector<double>& work, std::vector<double>* k1_fsal, int& evals) {
    const size_t n = y.size();
    const int stages = (method == Method::Rk23) ? 4 : 7;
    work.resize(size_t(stages) * n + n);
    std::span<double> ytmp(work.data() + size_t(stages) * n, n);
    auto k = [&](int s) { return std::span<double>(work.data() + size_t(s) * n, n); };

    if (k1_fsal && k1_fsal->size() == n) {
        std::copy(k1_fsal->begin(), k1_fsal->end(), k(0).begin());
    } else {
        rhs(t, y, k(0));
        ++evals;
    }

    auto stage = [&](int s, std::span<const double> a, double c) {
        for (size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int j = 0; j < int(a.size()); ++j) acc += a[j] * k(j)[i];
            ytmp[i] = y[i] + tau * acc;
        }
        rhs(t + c * tau, ytmp, k(s));
        ++evals;
    };

    if (method == Method::Rk23) {
        stage(1, bs_a2, bs_c[1]);
        stage(2, bs_a3, bs_c[2]);
        for (size_t i = 0; i < n; ++i) {
            out[i] = y[i] + tau * (bs_a4[0] * k(0)[i] + bs_a4[1] * k(1)[i] + bs_a4[2] * k(2)[i]);
        }
        rhs(t + tau, out, k(3));  // FSAL stage
        ++evals;
        for (size_t i = 0; i < n; ++i) {
            err[i] = tau * (bs_e[0] * k(0)[i] + bs_e[1] * k(1)[i] + bs_e[2] * k(2)[i] +
                            bs_e[3] * k(3)[i]);
        }
        if (k1_fsal) k1_fsal->assign(k(3).begin(), k(3).end());
        return;
    }

    stage(1, dp_a2, dp_c[1]);
    stage(2, dp_a3, dp_c[2]);
    stage(3, dp_a4, dp_c[3]);
    stage(4, dp_a5, dp_c[4]);
    stage(5, dp_a6, dp_c[5]);
    for (size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < 6; ++j) acc += dp_b[j] * k(j)[i];
        out[i] = y[i] + tau * acc;
    }
    rhs(t + tau, out, k(6));  // FSAL stage
    ++evals;
    for (size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < 6; ++j) acc += (dp_b[j] - dp_bhat[j]) * k(j)[i];
        acc -= dp_bhat[6] * k(6)[i];
        err[i] = tau * acc;
    }
    if (k1_fsal) k1_fsal->assign(k(6).begin(), k(6).end());
}

double error_norm(std::span<const double> err, std::span<const double> y_old,
                  std::span<const double> y_new, double atol, double rtol) {
    const size_t n = err.size();
    if (n == 0) return 0.0;
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double scale = atol + rtol * std::max(std::abs(y_old[i]), std::abs(y_new[i]));
        const double q = err[i] / scale;
        acc += q * q;
    }
    return std::sqrt(acc / double(n));
}

StepControl adapt_step(double norm, double tau, int error_order, const SolverConfig& cfg) {
    if (!(norm >= 0.0)) throw std::invalid_argument("adapt_step: error norm must be >= 0");
    StepControl c;
    c.accept = norm <= 1.0 && std::isfinite(norm);
    double factor;
    if (norm == 0.0) {
        factor = cfg.max_factor;
    } else if (!std::isfinite(norm)) {
        factor = cfg.min_factor;
    } else {
        factor = cfg.safety * std::pow(norm, -1.0 / double(error_order + 1));
        factor = std::clamp(factor, cfg.min_factor, cfg.max_factor);
    }
    c.tau_next = tau * factor;
    return c;
}

namespace {

// next entry of `sorted` strictly greater than t (with a sliding cursor)
double next_after(std::span<const double> sorted, size_t& cursor, double t) {
    while (cursor < sorted.size() && sorted[cursor] <= t) ++cursor;
    return cursor < sorted.size() ? sorted[cursor] : std::numeric_limits<double>::infinity();
}

}  // namespace

IntegrateResult integrate(std::vector<double> y0, double t0, double t1, const RhsFn& rhs,
                          const SolverConfig& cfg, std::span<const double> events,
                          std::span<const double> observe_times, const ObserveFn& observe,
                          const ObserveFn& on_accept) {
    cfg.validate();
    if (!(t1 >= t0)) throw std::invalid_argument("integrate: need t1 >= t0");
    if (cfg.method == Method::SplitLie || cfg.method == Method::SplitStrang) {
        throw std::invalid_argument("integrate: split methods need integrate_split");
    }

    IntegrateResult res;
    res.state = std::move(y0);
    const size_t n = res.state.size();
    if (on_accept) on_accept(t0, res.state);
    if (t1 == t0) {
        if (observe && !observe_times.empty() && observe_times.front() == t0) {
            observe(t0, res.state);
        }
        return res;
    }

    std::vector<double> out(n), err(n), work;
    std::vector<double> k1_fsal;
    const bool fixed = cfg.method == Method::Rk2;
    const int err_order = cfg.method == Method::Rk23 ? 2 : 4;

    size_t ev_cur = std::upper_bound(events.begin(), events.end(), t0) - events.begin();
    size_t ob_cur =
        std::lower_bound(observe_times.begin(), observe_times.end(), t0) - observe_times.begin();
    if (observe && ob_cur < observe_times.size() && observe_times[ob_cur] == t0) {
        observe(t0, res.state);
        ++ob_cur;
    }

    double t = t0;
    double tau = cfg.initial_step > 0.0 ? cfg.initial_step
                                        : std::min(cfg.max_step, (t1 - t0) / 100.0);
    if (fixed) tau = cfg.fixed_step;
    long grid_n = 0;  // fixed-mode grid index

    const double tiny = cfg.min_step;
    while (t < t1) {
        const double ev_next = next_after(events, ev_cur, t);
        const double ob_next =
            ob_cur < observe_times.size() ? observe_times[ob_cur]
                                          : std::numeric_limits<double>::infinity();
        double t_stop = std::min({t1, ev_next, ob_next});
        double tau_try;
        if (fixed) {
            while (t0 + double(grid_n) * cfg.fixed_step <= t + tiny) ++grid_n;
            const double grid_next = t0 + double(grid_n) * cfg.fixed_step;
            t_stop = std::min(t_stop, grid_next);
            tau_try = t_stop - t;
        } else {
            tau_try = std::min({tau, cfg.max_step, t_stop - t});
        }

        const bool landed = tau_try == t_stop - t;
        const bool clipped = tau_try < tau;
        int evals = 0;
        double norm = 0.0;
        bool accept = true;
        if (fixed) {
            rk2_step(t, tau_try, res.state, rhs, out, work);
            evals = 2;
            bool ok = std::all_of(out.begin(), out.end(),
                                  [](double x) { return std::isfinite(x); });
            if (!ok) {
                res.aborted = true;
                res.abort_reason = "rk2: non-finite state at t=" + std::to_string(t);
            }
        } else {
            embedded_step(cfg.method, t, tau_try, res.state, rhs, out, err, work, &k1_fsal, evals);
            norm = error_norm(err, res.state, out, cfg.atol, cfg.rtol);
            const StepControl c = adapt_step(norm, tau_try, err_order, cfg);
            accept = c.accept;
            if (accept && clipped) {
                // a step shortened only to land on an event must not collapse
                // the controller's running proposal
                tau = std::max(c.tau_next, tau);
            } else {
                tau = c.tau_next;
            }
            if (!accept) {
                k1_fsal.clear();  // FSAL stage belongs to the rejected step
                if (tau < tiny) {
                    res.aborted = true;
                    res.abort_reason = "step size underflow at t=" + std::to_string(t) +
                                       " (error norm " + std::to_string(norm) + ")";
                }
            }
        }

        res.rhs_evals += size_t(evals);
        if (cfg.record_steps) res.records.push_back({t, tau_try, accept, norm, evals});
        if (res.aborted) return res;

        if (accept) {
            ++res.accepted;
            res.state.swap(out);
            t = landed ? t_stop : t + tau_try;
            if (observe && ob_cur < observe_times.size() && t == observe_times[ob_cur]) {
                observe(t, res.state);
                ++ob_cur;
            }
            if (on_accept) on_accept(t, res.state);
        } else {
            ++res.rejected;
        }
    }
    return res;
}

std::vector<double> split_step(std::vector<double> y, double t, double tau, const RhsFn& adv_rhs,
                               const RhsFn& mag_rhs, Method mode, const SolverConfig& sub) {
    if (mode != Method::SplitLie && mode != Method::SplitStrang) {
        throw std::invalid_argument("split_step: mode must be split-lie or split-strang");
    }
    SolverConfig s = sub;
    s.record_steps = false;
    if (s.method != Method::Rk23 && s.method != Method::Rk45) s.method = Method::Rk45;
    auto run = [&](std::vector<double> yy, double a, double b, const RhsFn& f) {
        auto r = integrate(std::move(yy), a, b, f, s);
        if (r.aborted) throw std::runtime_error("split_step: sub-integration failed: " + r.abort_reason);
        return std::move(r.state);
    };
    if (mode == Method::SplitLie) {
        y = run(std::move(y), t, t + tau, adv_rhs);
        y = run(std::move(y), t, t + tau, mag_rhs);
        return y;
    }
    y = run(std::move(y), t, t + 0.5 * tau, adv_rhs);
    y = run(std::move(y), t, t + tau, mag_rhs);
    y = run(std::move(y), t + 0.5 * tau, t + tau, adv_rhs);
    return y;
}

IntegrateResult integrate_split(std::vector<double> y0, double t0, double t1, const RhsFn& adv_rhs,
                                const RhsFn& mag_rhs, const SolverConfig& cfg,
                                std::span<const double> events,
                                std::span<const double> observe_times, const ObserveFn& observe) {
    cfg.validate();
    if (cfg.method != Method::SplitLie && cfg.method != Method::SplitStrang) {
        throw std::invalid_argument("integrate_split: method must be split-lie or split-strang");
    }
    SolverConfig sub = cfg;
    sub.method = Method::Rk45;

    IntegrateResult res;
    res.state = std::move(y0);
    size_t ev_cur = std::upper_bound(events.begin(), events.end(), t0) - events.begin();
    size_t ob_cur =
        std::lower_bound(observe_times.begin(), observe_times.end(), t0) - observe_times.begin();
    if (observe && ob_cur < observe_times.size() && observe_times[ob_cur] == t0) {
        observe(t0, res.state);
        ++ob_cur;
    }
    double t = t0;
    long grid_n = 0;
    const double tiny = cfg.min_step;
    while (t < t1) {
        const double ev_next = next_after(events, ev_cur, t);
        const double ob_next = ob_cur < observe_times.size()
                                   ? observe_times[ob_cur]
                                   : std::numeric_limits<double>::infinity();
        while (t0 + double(grid_n) * cfg.fixed_step <= t + tiny) ++grid_n;
        const double grid_next = t0 + double(grid_n) * cfg.fixed_step;
        const double t_stop = std::min({t1, ev_next, ob_next, grid_next});
        const double tau = t_stop - t;
        res.state = split_step(std::move(res.state), t, tau, adv_rhs, mag_rhs, cfg.method, sub);
        if (cfg.record_steps) res.records.push_back({t, tau, true, 0.0, 0});
        ++res.accepted;
        t = t_stop;
        if (observe && ob_cur < observe_times.size() && t == observe_times[ob_cur]) {
            observe(t, res.state);
            ++ob_cur;
        }
    }
    return res;
}

std::string check_cfl(double tau, double max_speed, int degree, double h_min, double cfl) {
    if (max_speed <= 0.0 || h_min <= 0.0) return {};
    const double number = tau * max_speed * double(2 * degree + 1) / h_min;
    if (number <= cfl) return {};
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "CFL guard: tau*|u|*(2k+1)/h = %.3g exceeds the configured limit %.3g", number,
                  cfl);
    return buf;
}

}  // namespace blochdg
