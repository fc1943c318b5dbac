#include "blochdg/waveform.hpp"

#include <algorithm>
#include <stdexcept>

namespace blochdg {

Waveform::Waveform(std::vector<double> times, std::vector<double> values, Interp interp)
    : times_(std::move(times)), values_(std::move(values)), interp_(interp) {
    if (times_.size() != values_.size()) {
        throw std::invalid_argument("Waveform: times/values size mismatch");
    }
    for (size_t i = 1; i < times_.size(); ++i) {
        if (!(times_[i] > times_[i - 1])) {
            throw std::invalid_argument("Waveform: breakpoint times must be strictly increasing");
        }
    }
    prefix_.assign(times_.size(), 0.0);
    for (size_t i = 1; i < times_.size(); ++i) {
        const double dt = times_[i] - times_[i - 1];
        const double piece = (interp_ == Interp::PiecewiseConstant)
                                 ? values_[i - 1] * dt
                                 : 0.5 * (values_[i - 1] + values_[i]) * dt;
        prefix_[i] = prefix_[i - 1] + piece;
    }
}

size_t Waveform::segment_of(double t) const {
    // index i with times_[i] <= t < times_[i+1]; caller guarantees t in span
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    return size_t(it - times_.begin()) - 1;
}

double Waveform::value(double t) const {
    if (times_.size() < 2 || t < times_.front() || t >= times_.back()) return 0.0;
    const size_t i = segment_of(t);
    if (interp_ == Interp::PiecewiseConstant) return values_[i];
    const double w = (t - times_[i]) / (times_[i + 1] - times_[i]);
    return values_[i] + w * (values_[i + 1] - values_[i]);
}

double Waveform::integral_from_start(double t) const {
    if (times_.size() < 2 || t <= times_.front()) return 0.0;
    if (t >= times_.back()) return prefix_.back();
    const size_t i = segment_of(t);
    const double dt = t - times_[i];
    if (interp_ == Interp::PiecewiseConstant) return prefix_[i] + values_[i] * dt;
    const double w = dt / (times_[i + 1] - times_[i]);
    const double vt = values_[i] + w * (values_[i + 1] - values_[i]);
    return prefix_[i] + 0.5 * (values_[i] + vt) * dt;
}

double Waveform::integral(double a, double b) const {
    if (b < a) return -integral(b, a);
    return integral_from_start(b) - integral_from_start(a);
}

WaveformBuilder& WaveformBuilder::rect(double t0, double t1, double amplitude) {
    if (!(t1 > t0)) throw std::invalid_argument("WaveformBuilder: segment needs t1 > t0");
    segs_.push_back({t0, t1, amplitude});
    return *this;
}

Waveform WaveformBuilder::build() const {
    auto segs = segs_;
    std::sort(segs.begin(), segs.end(), [](const Seg& a, const Seg& b) { return a.t0 < b.t0; });
    for (size_t i = 1; i < segs.size(); ++i) {
        const double prev_end = segs[i - 1].t1 + ramp_;
        if (segs[i].t0 - ramp_ < prev_end - 1e-15) {
            throw std::invalid_argument("WaveformBuilder: overlapping gradient segments");
        }
    }
    std::vector<double> t, v;
    if (ramp_ == 0.0) {
        // piecewise-constant rectangles with explicit zero gaps
        for (const auto& s : segs) {
            if (!t.empty() && s.t0 == t.back()) {
                v.back() = s.amp;  // abutting segment: reuse the breakpoint
            } else {
                t.push_back(s.t0);
                v.push_back(s.amp);
            }
            t.push_back(s.t1);
            v.push_back(0.0);
        }
        return Waveform(std::move(t), std::move(v), Waveform::Interp::PiecewiseConstant);
    }
    // trapezoids: linear ramps attached outside the flat top
    for (const auto& s : segs) {
        t.insert(t.end(), {s.t0 - ramp_, s.t0, s.t1, s.t1 + ramp_});
        v.insert(v.end(), {0.0, s.amp, s.amp, 0.0});
    }
    return Waveform(std::move(t), std::move(v), Waveform::Interp::PiecewiseLinear);
}

}  // namespace blochdg
