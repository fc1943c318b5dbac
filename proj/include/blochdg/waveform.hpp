#pragma once

#include <span>
#include <vector>

namespace blochdg {

/// Piecewise waveform over an ordered breakpoint list. Evaluation outside the
/// span returns 0. Integrals are computed exactly for the interpolation class
/// (no quadrature error), which keeps gradient moments and k-space
/// trajectories bit-reproducible.
class Waveform {
  public:
    enum class Interp { PiecewiseConstant, PiecewiseLinear };

    Waveform() = default;
    Waveform(std::vector<double> times, std::vector<double> values, Interp interp);

    bool empty() const { return times_.empty(); }
    double start() const { return times_.empty() ? 0.0 : times_.front(); }
    double end() const { return times_.empty() ? 0.0 : times_.back(); }
    Interp interpolation() const { return interp_; }

    /// Value at time t; 0 outside [start, end). Piecewise-constant segments
    /// take the value of their left breakpoint.
    double value(double t) const;

    /// Exact integral over [a, b] (clipped to the span).
    double integral(double a, double b) const;

    std::span<const double> times() const { return times_; }
    std::span<const double> values() const { return values_; }

  private:
    std::vector<double> times_;
    std::vector<double> values_;
    std::vector<double> prefix_;  // integral from times_[0] to times_[i]
    Interp interp_ = Interp::PiecewiseConstant;

    size_t segment_of(double t) const;
    double integral_from_start(double t) const;
};

/// Assembles a piecewise waveform from possibly abutting rectangles or
/// trapezoids. Segments must not overlap.
class WaveformBuilder {
  public:
    explicit WaveformBuilder(double ramp_time = 0.0) : ramp_(ramp_time) {}

    /// Pulse with the given flat-top interval and amplitude. With a nonzero
    /// ramp time the ramps extend outside [t0, t1].
    WaveformBuilder& rect(double t0, double t1, double amplitude);

    Waveform build() const;

  private:
    struct Seg {
        double t0, t1, amp;
    };
    double ramp_;
    std::vector<Seg> segs_;
};

}  // namespace blochdg
