#include "blochdg/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace blochdg {

SteadyState spoiled_steady_state(const TissueParams& tissue, double tr, double te, double flip) {
    tissue.validate();
    const double e1 = std::exp(-tr / tissue.t1);
    const double ca = std::cos(flip);
    SteadyState s;
    s.mz_before_pulse = tissue.m0 * (1.0 - e1) / (1.0 - e1 * ca);
    s.signal = std::abs(std::sin(flip)) * s.mz_before_pulse * std::exp(-te / tissue.t2);
    return s;
}

std::vector<double> spoiled_transient(const TissueParams& tissue, double tr, double te,
                                      double flip, int n_reps, double mz0) {
    tissue.validate();
    const double e1 = std::exp(-tr / tissue.t1);
    const double e2te = std::exp(-te / tissue.t2);
    const double ca = std::cos(flip);
    const double sa = std::sin(flip);
    std::vector<double> sig(std::max(n_reps, 0));
    double mz = mz0;
    for (int n = 0; n < n_reps; ++n) {
        sig[n] = std::abs(sa * mz) * e2te;
        mz = tissue.m0 * (1.0 - e1) + e1 * ca * mz;
    }
    return sig;
}

namespace {

struct EnergySides {
    double lhs, rhs;
};

// walks the samples once with an exponentially damped running integral
std::vector<EnergySides> energy_sides(std::span<const EnergySample> s, double sigma,
                                      double f_norm2, size_t stride) {
    std::vector<EnergySides> out;
    if (s.empty()) return out;
    const double half_n0 = 0.5 * s[0].norm2;
    double diss = 0.0;  // int e^{sigma(s-t)} 1/2 outflow ds
    double gain = 0.0;  // int e^{sigma(s-t)} (f-term + inflow term) ds
    auto g = [&](const EnergySample& x) {
        return 0.5 * f_norm2 / sigma + 0.5 * x.inflow_data2;
    };
    size_t prev = 0;
    out.push_back({half_n0, half_n0});
    for (size_t i = stride; i < s.size(); i += stride) {
        const double dt = s[i].t - s[prev].t;
        if (dt < 0.0) throw std::invalid_argument("check_energy_inequality: times not increasing");
        const double decay = std::exp(-sigma * dt);
        diss = diss * decay + 0.5 * dt * (0.5 * s[prev].outflow_m2 * decay + 0.5 * s[i].outflow_m2);
        gain = gain * decay + 0.5 * dt * (g(s[prev]) * decay + g(s[i]));
        const double t = s[i].t - s[0].t;
        out.push_back({0.5 * s[i].norm2 + diss, half_n0 * std::exp(-sigma * t) + gain});
        prev = i;
    }
    return out;
}

}  // namespace

EnergyCheck check_energy_inequality(std::span<const EnergySample> samples, double sigma,
                                    double f_norm2, double rel_tol) {
    if (sigma <= 0.0) throw std::invalid_argument("check_energy_inequality: sigma must be > 0");
    EnergyCheck r;
    if (samples.size() < 2) {
        r.pass = !samples.empty();
        r.conclusive = false;
        r.note = "trajectory too short";
        r.samples = samples.size();
        return r;
    }
    auto verdict = [&](size_t stride) {
        const auto sides = energy_sides(samples, sigma, f_norm2, stride);
        double min_margin = std::numeric_limits<double>::infinity();
        double worst = 0.0;
        for (const auto& sd : sides) {
            min_margin = std::min(min_margin, sd.rhs - sd.lhs);
            if (sd.rhs > 0.0) worst = std::max(worst, sd.lhs / sd.rhs);
        }
        return std::pair{min_margin, worst};
    };
    const auto [margin, worst] = verdict(1);
    r.min_margin = margin;
    r.worst_ratio = worst;
    r.samples = samples.size();
    r.pass = worst <= 1.0 + rel_tol;
    if (samples.size() >= 8) {
        const double worst2 = verdict(2).second;
        const double scale = std::max({std::abs(worst), std::abs(worst2), 1.0});
        if (std::abs(worst - worst2) > 64.0 * rel_tol * scale) {
            r.conclusive = false;
            r.note = "time quadrature not converged; refine the sampling";
        }
    }
    return r;
}

ConvergenceReport convergence_order(std::span<const double> h, std::span<const double> error,
                                    std::span<const double> error_linf) {
    if (h.size() != error.size() || h.size() < 3) {
        throw std::invalid_argument("convergence_order: need >= 3 (h, error) pairs");
    }
    ConvergenceReport rep;
    rep.h.assign(h.begin(), h.end());
    rep.error.assign(error.begin(), error.end());
    rep.error_linf.assign(error_linf.begin(), error_linf.end());
    for (size_t i = 1; i < h.size(); ++i) {
        if (!(h[i] < h[i - 1])) {
            throw std::invalid_argument("convergence_order: h must be strictly decreasing");
        }
        if (error[i] >= error[i - 1]) rep.monotone = false;
    }
    // least-squares slope of log(e) against log(h)
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = double(h.size());
    for (size_t i = 0; i < h.size(); ++i) {
        if (!(error[i] > 0.0)) {
            rep.note = "non-positive error; no slope";
            rep.monotone = false;
            return rep;
        }
        const double x = std::log(h[i]);
        const double y = std::log(error[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    rep.observed_order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if (!rep.monotone) rep.note = "errors not monotone under refinement";
    return rep;
}

Overshoot overshoot_metric(std::span<const double> values, double bound) {
    if (bound < 0.0) throw std::invalid_argument("overshoot_metric: bound must be >= 0");
    Overshoot o;
    for (size_t i = 0; i < values.size(); ++i) {
        o.exceedance = std::max(o.exceedance, std::abs(values[i]) - bound);
        if (i > 0) o.total_variation += std::abs(values[i] - values[i - 1]);
    }
    o.exceedance = std::max(o.exceedance, 0.0);
    return o;
}

double pump_table_diameter(std::span<const double> mean_velocity_m_s, std::span<const double> re,
                           double kinematic_viscosity_m2_s, double rel_tol) {
    if (mean_velocity_m_s.size() != re.size() || mean_velocity_m_s.empty()) {
        throw std::invalid_argument("pump_table_diameter: empty or mismatched table");
    }
    std::vector<double> d(re.size());
    for (size_t i = 0; i < re.size(); ++i) {
        if (!(mean_velocity_m_s[i] > 0.0)) {
            throw std::invalid_argument("pump_table_diameter: velocities must be > 0");
        }
        d[i] = re[i] * kinematic_viscosity_m2_s / mean_velocity_m_s[i];
    }
    const double d0 = d[0];
    for (double di : d) {
        if (std::abs(di - d0) > rel_tol * d0) {
            throw std::invalid_argument(
                "pump_table_diameter: rows imply inconsistent diameters (" + std::to_string(d0) +
                " vs " + std::to_string(di) + " m)");
        }
    }
    return d0;
}

}  // namespace blochdg
