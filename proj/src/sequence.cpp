#include "blochdg/sequence.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace blochdg {

namespace {

double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = units::pi * x;
    return std::sin(px) / px;
}

double blackman(double xi) {  // xi in [-1, 1], zero at the endpoints
    return 0.42 + 0.5 * std::cos(units::pi * xi) + 0.08 * std::cos(2.0 * units::pi * xi);
}

constexpr double kGoldenAngle = units::pi * 2.0 / (1.0 + 2.2360679774997896964091736687747);  // pi/phi

}  // namespace

double RFPulse::flip_integral(const PhysicalConstants& consts) const {
    const double re = envelope_re.integral(0.0, duration);
    const double im = envelope_im.integral(0.0, duration);
    return consts.gamma * std::hypot(re, im);
}

RFPulse hard_pulse(double flip, double duration, const PhysicalConstants& consts) {
    if (!(duration > 0.0)) throw std::invalid_argument("hard_pulse: duration must be > 0");
    const double b1 = flip / (consts.gamma * duration);
    RFPulse p;
    p.envelope_re = Waveform({0.0, duration}, {b1, 0.0}, Waveform::Interp::PiecewiseConstant);
    p.duration = duration;
    p.nominal_flip = flip;
    p.peak_amplitude = b1;
    return p;
}

RFPulse blackman_sinc_pulse(double duration, double target_flip, int zero_crossing_pairs,
                            int samples, const PhysicalConstants& consts) {
    if (!(duration > 0.0)) throw std::invalid_argument("blackman_sinc_pulse: duration must be > 0");
    if (zero_crossing_pairs < 1) throw std::invalid_argument("blackman_sinc_pulse: need >= 1 lobe pair");
    if (samples < 5) throw std::invalid_argument("blackman_sinc_pulse: need >= 5 samples");
    if (samples % 2 == 0) ++samples;  // odd count keeps a sample at the pulse center

    std::vector<double> t(samples), v(samples);
    const int half = samples / 2;
    for (int i = 0; i <= half; ++i) {
        const double xi = double(i - half) / double(half);  // [-1, 0]
        t[i] = duration * 0.5 * (1.0 + xi);
        v[i] = blackman(xi) * sinc(zero_crossing_pairs * xi);
    }
    for (int i = 0; i < half; ++i) {  // mirror: envelope exactly even about the center
        t[samples - 1 - i] = duration - t[i];
        v[samples - 1 - i] = v[i];
    }
    v.front() = 0.0;
    v.back() = 0.0;

    Waveform shape(t, v, Waveform::Interp::PiecewiseLinear);
    const double shape_area = shape.integral(0.0, duration);
    if (!(std::abs(shape_area) > 0.0)) {
        throw std::invalid_argument("blackman_sinc_pulse: degenerate envelope, cannot calibrate");
    }
    const double amp = target_flip / (consts.gamma * shape_area);
    for (auto& x : v) x *= amp;

    RFPulse p;
    p.envelope_re = Waveform(std::move(t), std::move(v), Waveform::Interp::PiecewiseLinear);
    p.duration = duration;
    p.nominal_flip = target_flip;
    p.peak_amplitude = std::abs(amp);
    return p;
}

double sinc_bandwidth(double duration, int zero_crossing_pairs) {
    return 2.0 * zero_crossing_pairs / duration;
}

SpoilingMode spoiling_from_string(const std::string& s) {
    if (s == "ideal") return SpoilingMode::Ideal;
    if (s == "rf-random") return SpoilingMode::RfRandom;
    if (s == "none") return SpoilingMode::None;
    throw std::invalid_argument("unknown spoiling mode '" + s + "' (ideal|rf-random|none)");
}

static const char* spoiling_to_string(SpoilingMode m) {
    switch (m) {
        case SpoilingMode::Ideal: return "ideal";
        case SpoilingMode::RfRandom: return "rf-random";
        default: return "none";
    }
}

void SequenceTimeline::finalize() {
    std::vector<double> ev;
    auto add_waveform = [&ev](const Waveform& w) {
        for (double t : w.times()) ev.push_back(t);
    };
    add_waveform(gx);
    add_waveform(gy);
    add_waveform(gz);
    for (const auto& e : rf_events) {
        ev.push_back(e.start);
        for (double t : rf.envelope_re.times()) ev.push_back(e.start + t);
        for (double t : rf.envelope_im.times()) ev.push_back(e.start + t);
        ev.push_back(e.start + rf.duration);
    }
    for (const auto& m : te_markers) ev.push_back(m.t);
    for (int n = 0; n <= repetitions; ++n) ev.push_back(tr * n);
    std::sort(ev.begin(), ev.end());
    // merge breakpoints closer than 0.1 ps: below any physical timescale here
    const double merge_tol = 1e-13;
    event_times_.clear();
    for (double t : ev) {
        if (t < -merge_tol || t > duration() + merge_tol) continue;
        if (event_times_.empty() || t - event_times_.back() > merge_tol) event_times_.push_back(t);
    }
}

FieldSample SequenceTimeline::field_at(double t) const {
    FieldSample f;
    f.g = {gx.value(t), gy.value(t), gz.value(t)};
    if (!rf_events.empty()) {
        auto it = std::upper_bound(rf_events.begin(), rf_events.end(), t,
                                   [](double tt, const RFEvent& e) { return tt < e.start; });
        if (it != rf_events.begin()) {
            const RFEvent& e = *(it - 1);
            const double local = t - e.start;
            if (local >= 0.0 && local < rf.duration) {
                const std::complex<double> env = rf.envelope(local);
                const double c = std::cos(e.phase), s = std::sin(e.phase);
                f.b1x = env.real() * c - env.imag() * s;
                f.b1y = env.real() * s + env.imag() * c;
            }
        }
    }
    return f;
}

double SequenceTimeline::repetition_phase(int n) const {
    if (n >= 0 && n < int(rf_events.size()) && rf_events[n].repetition == n) {
        return rf_events[n].phase;
    }
    for (const auto& e : rf_events) {
        if (e.repetition == n) return e.phase;
    }
    return 0.0;
}

double SequenceTimeline::kspace_origin(double t) const {
    if (tr <= 0.0 || rf_events.empty()) return 0.0;
    int n = int(std::floor(t / tr));
    n = std::clamp(n, 0, repetitions - 1);
    for (const auto& e : rf_events) {
        if (e.repetition == n) return e.start + 0.5 * rf.duration;
    }
    return tr * n;
}

std::vector<std::array<double, 2>> SequenceTimeline::kspace_trajectory(
    std::span<const double> times, const PhysicalConstants& consts) const {
    const double scale = consts.gamma / (2.0 * units::pi);
    std::vector<std::array<double, 2>> k;
    k.reserve(times.size());
    for (double t : times) {
        if (t < 0.0 || t > duration() * (1.0 + 1e-12)) {
            throw std::invalid_argument("kspace_trajectory: time outside the timeline span");
        }
        const double origin = kspace_origin(t);
        k.push_back({scale * gx.integral(origin, t), scale * gy.integral(origin, t)});
    }
    return k;
}

namespace {

void write_waveform_events(std::ostream& os, const Waveform& w, char axis) {
    char buf[160];
    const auto t = w.times();
    const auto v = w.values();
    if (w.interpolation() == Waveform::Interp::PiecewiseConstant) {
        for (size_t i = 0; i + 1 < t.size(); ++i) {
            if (v[i] == 0.0) continue;
            std::snprintf(buf, sizeof buf, "%.17g %.17g grad %c %.17g\n", t[i], t[i + 1] - t[i],
                          axis, v[i]);
            os << buf;
        }
    } else {
        for (size_t i = 0; i + 1 < t.size(); ++i) {
            if (v[i] == 0.0 && v[i + 1] == 0.0) continue;
            std::snprintf(buf, sizeof buf, "%.17g %.17g gradlin %c %.17g %.17g\n", t[i],
                          t[i + 1] - t[i], axis, v[i], v[i + 1]);
            os << buf;
        }
    }
}

}  // namespace

void SequenceTimeline::write_events(std::ostream& os) const {
    char buf[256];
    os << "# blochdg sequence events v1\n";
    os << "# columns: start duration type axis parameters\n";
    std::snprintf(buf, sizeof buf,
                  "# tr=%.17g te=%.17g repetitions=%d spokes_per_frame=%d spoiling=%s seed=%llu\n",
                  tr, te, repetitions, spokes_per_frame, spoiling_to_string(spoiling),
                  static_cast<unsigned long long>(seed));
    os << buf;
    std::snprintf(buf, sizeof buf, "# rf: flip=%.17g duration=%.17g samples=%zu peak=%.17g\n",
                  rf.nominal_flip, rf.duration, rf.envelope_re.times().size(), rf.peak_amplitude);
    os << buf;
    for (int n = 0; n < repetitions; ++n) {
        const double angle = n < int(spoke_angles.size()) ? spoke_angles[n] : 0.0;
        std::snprintf(buf, sizeof buf, "%.17g %.17g rep - index=%d angle=%.17g\n", tr * n, tr, n,
                      angle);
        os << buf;
    }
    for (const auto& e : rf_events) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g rf - repetition=%d phase=%.17g\n", e.start,
                      rf.duration, e.repetition, e.phase);
        os << buf;
    }
    // the shared envelope, sampled: one line per breakpoint
    {
        const auto t = rf.envelope_re.times();
        const auto v = rf.envelope_re.values();
        for (size_t i = 0; i < t.size(); ++i) {
            const double im = rf.envelope_im.empty() ? 0.0 : rf.envelope_im.value(t[i]);
            std::snprintf(buf, sizeof buf, "%.17g 0 rfenv - %.17g %.17g\n", t[i], v[i], im);
            os << buf;
        }
    }
    write_waveform_events(os, gx, 'x');
    write_waveform_events(os, gy, 'y');
    write_waveform_events(os, gz, 'z');
    for (const auto& m : te_markers) {
        std::snprintf(buf, sizeof buf, "%.17g 0 te - spoke=%d frame=%d\n", m.t, m.spoke, m.frame);
        os << buf;
    }
}

namespace {

double parse_kv(const std::string& tok, const char* key) {
    const std::string k = std::string(key) + "=";
    if (tok.rfind(k, 0) != 0) {
        throw std::invalid_argument("sequence events: expected '" + k + "...', got '" + tok + "'");
    }
    return std::stod(tok.substr(k.size()));
}

}  // namespace

SequenceTimeline SequenceTimeline::read_events(std::istream& is) {
    SequenceTimeline tl;
    struct Seg {
        double t0, t1, v0, v1;
        bool linear;
    };
    std::array<std::vector<Seg>, 3> segs;
    std::vector<double> env_t, env_re, env_im;
    std::string line;
    double rf_flip = 0.0, rf_dur = 0.0, rf_peak = 0.0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string tok;
            while (hs >> tok) {
                if (tok.rfind("tr=", 0) == 0) tl.tr = std::stod(tok.substr(3));
                else if (tok.rfind("te=", 0) == 0) tl.te = std::stod(tok.substr(3));
                else if (tok.rfind("repetitions=", 0) == 0) tl.repetitions = std::stoi(tok.substr(12));
                else if (tok.rfind("spokes_per_frame=", 0) == 0) tl.spokes_per_frame = std::stoi(tok.substr(17));
                else if (tok.rfind("spoiling=", 0) == 0) tl.spoiling = spoiling_from_string(tok.substr(9));
                else if (tok.rfind("seed=", 0) == 0) tl.seed = std::stoull(tok.substr(5));
                else if (tok.rfind("flip=", 0) == 0) rf_flip = std::stod(tok.substr(5));
                else if (tok.rfind("duration=", 0) == 0) rf_dur = std::stod(tok.substr(9));
                else if (tok.rfind("peak=", 0) == 0) rf_peak = std::stod(tok.substr(5));
            }
            continue;
        }
        std::istringstream ls(line);
        double start = 0.0, dur = 0.0;
        std::string type, axis;
        if (!(ls >> start >> dur >> type >> axis)) {
            throw std::invalid_argument("sequence events: malformed line '" + line + "'");
        }
        if (type == "rep") {
            std::string a, b;
            ls >> a >> b;
            tl.spoke_angles.push_back(parse_kv(b, "angle"));
        } else if (type == "rf") {
            std::string a, b;
            ls >> a >> b;
            RFEvent e;
            e.start = start;
            e.repetition = int(parse_kv(a, "repetition"));
            e.phase = parse_kv(b, "phase");
            tl.rf_events.push_back(e);
        } else if (type == "rfenv") {
            double re = 0.0, im = 0.0;
            ls >> re >> im;
            env_t.push_back(start);
            env_re.push_back(re);
            env_im.push_back(im);
        } else if (type == "grad" || type == "gradlin") {
            const int ax = axis == "x" ? 0 : axis == "y" ? 1 : 2;
            Seg s{start, start + dur, 0.0, 0.0, type == "gradlin"};
            ls >> s.v0;
            if (s.linear) ls >> s.v1;
            segs[ax].push_back(s);
        } else if (type == "te") {
            std::string a, b;
            ls >> a >> b;
            tl.te_markers.push_back({start, int(parse_kv(a, "spoke")), int(parse_kv(b, "frame"))});
        } else {
            throw std::invalid_argument("sequence events: unknown event type '" + type + "'");
        }
    }
    // rebuild gradient waveforms
    for (int ax = 0; ax < 3; ++ax) {
        auto& ss = segs[ax];
        if (ss.empty()) continue;
        std::sort(ss.begin(), ss.end(), [](const Seg& a, const Seg& b) { return a.t0 < b.t0; });
        std::vector<double> t, v;
        const bool linear = ss.front().linear;
        for (const auto& s : ss) {
            if (!t.empty() && s.t0 == t.back()) {
                v.back() = s.v0;
            } else {
                t.push_back(s.t0);
                v.push_back(s.v0);
            }
            t.push_back(s.t1);
            v.push_back(linear ? s.v1 : 0.0);
        }
        Waveform w(std::move(t), std::move(v),
                   linear ? Waveform::Interp::PiecewiseLinear : Waveform::Interp::PiecewiseConstant);
        (ax == 0 ? tl.gx : ax == 1 ? tl.gy : tl.gz) = std::move(w);
    }
    if (!env_t.empty()) {
        const bool linear = env_t.size() > 2;
        const auto interp =
            linear ? Waveform::Interp::PiecewiseLinear : Waveform::Interp::PiecewiseConstant;
        tl.rf.envelope_re = Waveform(env_t, env_re, interp);
        bool any_im = std::any_of(env_im.begin(), env_im.end(), [](double x) { return x != 0.0; });
        if (any_im) tl.rf.envelope_im = Waveform(env_t, env_im, interp);
        tl.rf.duration = rf_dur > 0.0 ? rf_dur : env_t.back();
        tl.rf.nominal_flip = rf_flip;
        tl.rf.peak_amplitude = rf_peak;
    }
    std::sort(tl.te_markers.begin(), tl.te_markers.end(),
              [](const TEMarker& a, const TEMarker& b) { return a.t < b.t; });
    std::sort(tl.rf_events.begin(), tl.rf_events.end(),
              [](const RFEvent& a, const RFEvent& b) { return a.start < b.start; });
    tl.finalize();
    return tl;
}

SequenceTimeline build_flash_radial(const FlashParams& p, const PhysicalConstants& consts) {
    if (!(p.te > 0.0 && p.te < p.tr)) {
        throw std::invalid_argument("build_flash_radial: need 0 < te < tr");
    }
    if (p.spokes_per_frame < 1 || p.frames < 1) {
        throw std::invalid_argument("build_flash_radial: spokes_per_frame and frames must be >= 1");
    }
    const bool selective = p.g_slice != 0.0;
    const double ramp = p.ramp_time;

    double tp = p.rf_duration;
    if (tp <= 0.0) {
        if (selective) {
            const double bw = consts.frequency_hz_per_tesla() * std::abs(p.g_slice) * p.slice_thickness;
            tp = 2.0 * p.rf_zero_crossing_pairs / bw;
        } else {
            tp = 1e-8;  // effectively instantaneous rotation
        }
    }

    RFPulse pulse = selective
                        ? blackman_sinc_pulse(tp, p.flip, p.rf_zero_crossing_pairs, p.rf_samples, consts)
                        : hard_pulse(p.flip, tp, consts);

    // per-repetition slice gradient template (local time)
    const double rf_start = selective ? ramp : 0.0;
    const double rf_end = rf_start + tp;
    double chain_end = rf_end;  // end of the slice-axis gradient chain
    struct Rect {
        double t0, t1, amp;
    };
    std::vector<Rect> slice_rects;
    if (selective) {
        slice_rects.push_back({rf_start, rf_end, p.g_slice});
        // rewinder: cancels the slice moment accumulated from the RF center
        const double rw_flat = 0.5 * tp;
        const double rw_start = rf_end + 2.0 * ramp;
        WaveformBuilder probe(ramp);
        probe.rect(rf_start, rf_end, p.g_slice);
        const Waveform wslice = probe.build();
        const double center = 0.5 * (rf_start + rf_end);
        const double tail_area = wslice.integral(center, rf_end + ramp);
        const double rw_amp = -tail_area / (rw_flat + ramp);
        slice_rects.push_back({rw_start, rw_start + rw_flat, rw_amp});
        chain_end = rw_start + rw_flat + ramp;
    }
    if (chain_end >= p.tr) {
        throw std::invalid_argument(
            "build_flash_radial: RF pulse plus rewinder (" + std::to_string(chain_end * 1e3) +
            " ms) does not fit into TR (" + std::to_string(p.tr * 1e3) + " ms)");
    }

    // readout window centered on TE, prephaser immediately before
    double t_ro = p.readout_duration;
    if (p.g_readout != 0.0) {
        const double before = p.te - chain_end - 3.0 * ramp;  // room for prephaser + readout half
        const double after = p.tr - p.te - ramp;
        if (t_ro <= 0.0) t_ro = 0.8 * std::min(before, 2.0 * after);
        if (!(t_ro > 0.0)) {
            throw std::invalid_argument(
                "build_flash_radial: no room for a readout between the RF chain ending at " +
                std::to_string(chain_end * 1e3) + " ms and TE = " + std::to_string(p.te * 1e3) +
                " ms");
        }
        if (p.te - t_ro - 2.0 * ramp < chain_end) {
            throw std::invalid_argument(
                "build_flash_radial: readout duration " + std::to_string(t_ro * 1e3) +
                " ms overlaps the RF chain (prephaser would start before " +
                std::to_string(chain_end * 1e3) + " ms)");
        }
        if (p.te + 0.5 * t_ro + ramp > p.tr) {
            throw std::invalid_argument("build_flash_radial: readout duration " +
                                        std::to_string(t_ro * 1e3) + " ms extends past TR = " +
                                        std::to_string(p.tr * 1e3) + " ms");
        }
    }

    const int reps = p.spokes_per_frame * p.frames;
    SequenceTimeline tl;
    tl.tr = p.tr;
    tl.te = p.te;
    tl.repetitions = reps;
    tl.spokes_per_frame = p.spokes_per_frame;
    tl.rf = std::move(pulse);
    tl.spoiling = p.spoiling;
    tl.seed = p.seed;

    std::mt19937_64 rng(p.seed);
    std::uniform_real_distribution<double> uphase(0.0, 2.0 * units::pi);

    WaveformBuilder bx(ramp), by(ramp), bz(ramp);
    for (int n = 0; n < reps; ++n) {
        const double t0 = p.tr * n;
        double theta;
        if (p.ordering == SpokeOrdering::Sequential) {
            theta = (n % p.spokes_per_frame) * units::pi / p.spokes_per_frame;
        } else {
            theta = std::fmod(n * kGoldenAngle, 2.0 * units::pi);
        }
        tl.spoke_angles.push_back(theta);

        RFEvent e;
        e.start = t0 + rf_start;
        e.repetition = n;
        e.phase = (p.spoiling == SpoilingMode::RfRandom) ? uphase(rng) : 0.0;
        tl.rf_events.push_back(e);

        for (const auto& r : slice_rects) bz.rect(t0 + r.t0, t0 + r.t1, r.amp);

        if (p.g_readout != 0.0) {
            const double cx = std::cos(theta), cy = std::sin(theta);
            const double ro0 = p.te - 0.5 * t_ro;
            const double ro1 = p.te + 0.5 * t_ro;
            // prephaser amplitude chosen so the zeroth moment vanishes at TE
            WaveformBuilder probe(ramp);
            probe.rect(ro0, ro1, p.g_readout);
            const double ro_area_to_te = probe.build().integral(ro0 - ramp, p.te);
            const double pp_flat = 0.5 * t_ro;
            const double pp_amp = -ro_area_to_te / (pp_flat + ramp);
            const double pp0 = ro0 - 2.0 * ramp - pp_flat;
            bx.rect(t0 + pp0, t0 + pp0 + pp_flat, pp_amp * cx);
            by.rect(t0 + pp0, t0 + pp0 + pp_flat, pp_amp * cy);
            bx.rect(t0 + ro0, t0 + ro1, p.g_readout * cx);
            by.rect(t0 + ro0, t0 + ro1, p.g_readout * cy);
        }

        tl.te_markers.push_back({t0 + p.te, n % p.spokes_per_frame, n / p.spokes_per_frame});
    }
    tl.gx = bx.build();
    tl.gy = by.build();
    tl.gz = bz.build();
    tl.finalize();
    return tl;
}

}  // namespace blochdg
