#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "blochdg/oracles.hpp"
#include "blochdg/physics.hpp"
#include "blochdg/scenario.hpp"
#include "blochdg/sequence.hpp"

namespace py = pybind11;
using namespace blochdg;

namespace {

std::tuple<double, double, double> to_tuple(const Vec3& v) { return {v.x, v.y, v.z}; }

Vec3 from_seq(const std::tuple<double, double, double>& t) {
    return {std::get<0>(t), std::get<1>(t), std::get<2>(t)};
}

TissueParams make_tissue(double t1, double t2, double m0) {
    TissueParams tp{t1, t2, m0};
    tp.validate();
    return tp;
}

py::dict series_to_dict(const FrameSeries& s) {
    py::dict d;
    d["magnitude"] = s.magnitude;
    d["normalized"] = s.normalized;
    d["reference"] = s.reference;
    d["spokes_per_frame"] = s.spokes_per_frame;
    return d;
}

py::dict run_from_json(const std::string& config_json, const std::string& mode) {
    const json j = json::parse(config_json);
    const ScenarioConfig cfg = parse_config(j, "<python>");
    RunOutput out;
    if (mode == "simulate") out = run_scenario(cfg);
    else if (mode == "convergence") out = run_convergence(cfg);
    else if (mode == "steady-state") out = run_steady_state_check(cfg);
    else if (mode == "sweep") out = run_sweep(cfg);
    else throw std::invalid_argument("mode must be simulate|convergence|steady-state|sweep");

    py::dict d;
    py::dict series;
    for (const auto& [k, v] : out.series) series[py::str(k)] = series_to_dict(v);
    d["series"] = series;
    py::dict scalars;
    for (const auto& [k, v] : out.scalars) scalars[py::str(k)] = v;
    d["scalars"] = scalars;
    py::dict energy;
    for (const auto& [k, e] : out.energy) {
        py::dict ed;
        ed["pass"] = e.pass;
        ed["conclusive"] = e.conclusive;
        ed["worst_ratio"] = e.worst_ratio;
        energy[py::str(k)] = ed;
    }
    d["energy"] = energy;
    if (!out.convergence.h.empty()) {
        py::dict cv;
        cv["h"] = out.convergence.h;
        cv["error_l2_my"] = out.convergence.error;
        cv["observed_order"] = out.convergence.observed_order;
        d["convergence"] = cv;
    }
    if (!out.profile.empty()) {
        py::list prof;
        for (const auto& p : out.profile) {
            prof.append(py::make_tuple(p.r.z, p.m.x, p.m.y, p.m.z));
        }
        d["profile"] = prof;
    }
    d["manifest"] = out.manifest.dump();
    return d;
}

}  // namespace

PYBIND11_MODULE(_blochdg, m) {
    m.doc() = "Bloch-equation spin dynamics: rotating-frame ODE kernels, spoiled "
              "steady-state oracles and scenario drivers";

    m.attr("__version__") = "0.1.0";
    m.attr("PROTON_FREQ_HZ_PER_T") = kProtonFreqHzPerTesla;

    m.def(
        "bloch_rhs",
        [](std::tuple<double, double, double> mm, std::tuple<double, double, double> bb, double t1,
           double t2, double m0, double gamma) {
            PhysicalConstants consts;
            if (gamma > 0.0) consts.gamma = gamma;
            return to_tuple(bloch_rhs(from_seq(mm), from_seq(bb), make_tissue(t1, t2, m0), consts));
        },
        py::arg("m"), py::arg("b"), py::arg("t1"), py::arg("t2"), py::arg("m0") = 1.0,
        py::arg("gamma") = -1.0,
        "Rotating-frame Bloch right-hand side dM/dt for magnetization m, effective field b "
        "(tesla) and relaxation times in seconds.");

    m.def(
        "exact_relaxation_rotation",
        [](std::tuple<double, double, double> mm, double bz, double t1, double t2, double m0,
           double dt, double gamma) {
            PhysicalConstants consts;
            if (gamma > 0.0) consts.gamma = gamma;
            return to_tuple(
                exact_relaxation_rotation(from_seq(mm), bz, make_tissue(t1, t2, m0), consts, dt));
        },
        py::arg("m"), py::arg("bz"), py::arg("t1"), py::arg("t2"), py::arg("m0"), py::arg("dt"),
        py::arg("gamma") = -1.0,
        "Exact propagator over dt for a constant longitudinal field offset bz.");

    m.def(
        "spoiled_steady_state",
        [](double t1, double t2, double m0, double tr, double te, double flip) {
            const auto s = spoiled_steady_state(make_tissue(t1, t2, m0), tr, te, flip);
            return std::make_pair(s.mz_before_pulse, s.signal);
        },
        py::arg("t1"), py::arg("t2"), py::arg("m0"), py::arg("tr"), py::arg("te"), py::arg("flip"),
        "Ideally spoiled steady state: (Mz before the pulse, echo signal per unit volume).");

    m.def(
        "spoiled_transient",
        [](double t1, double t2, double m0, double tr, double te, double flip, int n, double mz0) {
            return spoiled_transient(make_tissue(t1, t2, m0), tr, te, flip, n, mz0);
        },
        py::arg("t1"), py::arg("t2"), py::arg("m0"), py::arg("tr"), py::arg("te"), py::arg("flip"),
        py::arg("n_reps"), py::arg("mz0") = 1.0,
        "Echo magnitudes of the per-repetition spoiled recursion.");

    m.def(
        "blackman_sinc_calibration",
        [](double duration, double flip, int pairs, int samples) {
            const RFPulse p = blackman_sinc_pulse(duration, flip, pairs, samples);
            py::dict d;
            d["peak_amplitude_t"] = p.peak_amplitude;
            d["flip_integral_rad"] = p.flip_integral(PhysicalConstants{});
            d["duration_s"] = p.duration;
            return d;
        },
        py::arg("duration"), py::arg("flip"), py::arg("zero_crossing_pairs") = 3,
        py::arg("samples") = 129,
        "Calibrated Blackman-sinc envelope: peak amplitude and realized flip integral.");

    m.def("run", &run_from_json, py::arg("config_json"), py::arg("mode") = "simulate",
          "Runs a scenario from a JSON configuration string; returns series, scalars, energy "
          "checks and the manifest.");

    m.def("set_thread_limit", &set_thread_limit, py::arg("threads"),
          "Caps the data-parallel element loops (0 = hardware default).");
}
