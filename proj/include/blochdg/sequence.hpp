#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "blochdg/physics.hpp"
#include "blochdg/waveform.hpp"

namespace blochdg {

/// RF pulse shape: complex envelope in tesla over local time [0, duration].
/// Spoiling phase offsets are applied per repetition by the timeline, not
/// stored here.
struct RFPulse {
    Waveform envelope_re;
    Waveform envelope_im;
    double duration = 0.0;      // s
    double nominal_flip = 0.0;  // rad
    double peak_amplitude = 0.0;

    std::complex<double> envelope(double t) const {
        return {envelope_re.value(t), envelope_im.value(t)};
    }
    /// gamma * |integral of the complex envelope|; calibrated pulses satisfy
    /// flip_integral == nominal_flip to better than 0.1%.
    double flip_integral(const PhysicalConstants& consts) const;
};

/// Constant-envelope pulse with gamma*B1*duration == flip.
RFPulse hard_pulse(double flip, double duration, const PhysicalConstants& consts);

/// Blackman-windowed sinc, centered in [0, duration], sampled as a
/// piecewise-linear envelope. The amplitude is calibrated on the sampled
/// envelope so the flip-angle integral is exact for the stored representation.
/// zero_crossing_pairs controls the sinc lobe count per side.
RFPulse blackman_sinc_pulse(double duration, double target_flip, int zero_crossing_pairs = 3,
                            int samples = 129,
                            const PhysicalConstants& consts = PhysicalConstants{});

/// Frequency bandwidth (Hz) of a sinc pulse with the given lobe count.
double sinc_bandwidth(double duration, int zero_crossing_pairs);

enum class SpoilingMode { Ideal, RfRandom, None };
enum class SpokeOrdering { Sequential, GoldenAngle };

SpoilingMode spoiling_from_string(const std::string& s);

struct RFEvent {
    double start = 0.0;
    double phase = 0.0;  // transmit phase, rad
    int repetition = 0;
};

struct TEMarker {
    double t = 0.0;
    int spoke = 0;
    int frame = 0;
};

/// Instantaneous waveform values; B_eff(r) = (b1x, b1y, g . r).
struct FieldSample {
    double b1x = 0.0, b1y = 0.0;
    Vec3 g{};  // gradient vector, T/m
    EffectiveField at(const Vec3& r) const { return {b1x, b1y, dot(g, r)}; }
};

/// Pulse-sequence timeline: per-axis gradient waveforms, RF events, TE and
/// repetition markers. Immutable after finalize(); evaluation is thread-safe.
class SequenceTimeline {
  public:
    double tr = 0.0;  // repetition duration, s
    double te = 0.0;  // echo marker offset from repetition start, s
    int repetitions = 1;
    int spokes_per_frame = 1;
    RFPulse rf;
    std::vector<RFEvent> rf_events;        // sorted by start
    Waveform gx, gy, gz;                   // whole-timeline, T/m
    std::vector<TEMarker> te_markers;      // sorted
    std::vector<double> spoke_angles;      // per repetition, in [0, 2*pi)
    SpoilingMode spoiling = SpoilingMode::Ideal;
    std::uint64_t seed = 0;

    double duration() const { return tr * repetitions; }

    /// Builds the sorted unique breakpoint list; call after all events exist.
    void finalize();

    FieldSample field_at(double t) const;
    EffectiveField eval_field(double t, const Vec3& r) const { return field_at(t).at(r); }

    /// Transmit phase of the RF event of repetition n (receiver demodulation
    /// uses the same phase).
    double repetition_phase(int n) const;

    /// All waveform/RF/marker breakpoints, sorted, deduplicated. Adaptive
    /// steps never straddle these.
    const std::vector<double>& event_times() const { return event_times_; }

    /// k-space position (kx, ky) in 1/m. The integration origin is the RF
    /// center of the repetition containing t (timeline start when the
    /// repetition has no RF event), where the transverse phase history of the
    /// current excitation begins.
    std::vector<std::array<double, 2>> kspace_trajectory(std::span<const double> times,
                                                         const PhysicalConstants& consts) const;

    /// One event per line: start duration type axis parameters.
    void write_events(std::ostream& os) const;
    static SequenceTimeline read_events(std::istream& is);

  private:
    std::vector<double> event_times_;
    double kspace_origin(double t) const;
};

/// Spoiled gradient-echo (FLASH) sequence with a radial readout trajectory.
struct FlashParams {
    double tr = 2.18e-3;
    double te = 1.28e-3;
    double flip = 8.0 * units::pi / 180.0;
    int spokes_per_frame = 27;
    int frames = 100;
    double g_slice = 0.0;         // T/m; 0 selects a hard (non-selective) pulse
    double g_readout = 10e-3;     // T/m plateau
    double slice_thickness = 6e-3;
    double fov = 40e-3;
    SpoilingMode spoiling = SpoilingMode::Ideal;
    SpokeOrdering ordering = SpokeOrdering::Sequential;
    double rf_duration = 0.0;     // 0: derived from slice bandwidth (selective) or 1e-8 s (hard)
    int rf_zero_crossing_pairs = 3;
    int rf_samples = 129;
    double readout_duration = 0.0;  // 0: auto-fit into the repetition
    double ramp_time = 0.0;         // gradient ramps; 0 = ideal rectangles
    std::uint64_t seed = 0;
};

/// Per repetition: slice-selection gradient + rewinder on z, prephase +
/// readout on x/y rotated by the spoke angle, one RF event and one TE marker.
/// The readout zeroth moment vanishes at TE and the slice moment, taken from
/// the RF center, vanishes at the end of the rewinder. Throws with the
/// violated duration budget when the timing does not fit.
SequenceTimeline build_flash_radial(const FlashParams& p,
                                    const PhysicalConstants& consts = PhysicalConstants{});

}  // namespace blochdg
