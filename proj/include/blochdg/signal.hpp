#pragma once

#include <complex>
#include <span>
#include <vector>

#include "blochdg/dg_space.hpp"
#include "blochdg/vec3.hpp"

namespace blochdg {

struct SignalSample {
    double t = 0.0;
    std::complex<double> value;
    int spoke = 0;
    int frame = 0;
};

/// Per-frame magnitudes of the echo samples; `reference` records the
/// normalization divisor applied to `normalized`.
struct FrameSeries {
    std::vector<double> magnitude;
    std::vector<double> normalized;
    double reference = 1.0;
    int spokes_per_frame = 1;
};

/// Axis-aligned integration region. Cells are selected by their centers, so
/// the region effectively snaps to cell boundaries.
struct Region {
    Vec3 lo{-1e30, -1e30, -1e30};
    Vec3 hi{1e30, 1e30, 1e30};
    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z &&
               p.z <= hi.z;
    }
    static Region all() { return {}; }
};

/// Cell indices selected by a region; throws when the selection is empty.
std::vector<int> region_cells(const DGSpace& space, const Region& region);

/// integral of (Mx + i My) over the region, exact for the stored polynomial
/// (only the constant mode contributes).
std::complex<double> integrate_signal(const DGSpace& space, std::span<const double> state,
                                      std::span<const int> cells);
std::complex<double> integrate_signal(const DGSpace& space, std::span<const double> state,
                                      const Region& region);

/// Isochromat variant: weighted sum of transverse magnetization.
std::complex<double> integrate_signal(std::span<const Vec3> m, std::span<const double> weights);

/// Per-frame mean of |sample|. Throws when samples do not form complete
/// frames of the stated size.
FrameSeries frame_average(std::span<const SignalSample> samples, int spokes_per_frame);

/// Normalizes in place by the given reference (throws on zero).
void normalize(FrameSeries& series, double reference);

/// Mean magnitude of the trailing `last_n` frames (the dynamic-equilibrium
/// plateau estimate).
double plateau(const FrameSeries& series, int last_n = 10);

}  // namespace blochdg
