#include "blochdg/signal.hpp"

#include <cmath>
#include <stdexcept>

namespace blochdg {

std::vector<int> region_cells(const DGSpace& space, const Region& region) {
    std::vector<int> cells;
    for (int c = 0; c < space.mesh().cells(); ++c) {
        if (region.contains(space.mesh().cell_center(c))) cells.push_back(c);
    }
    if (cells.empty()) {
        throw std::invalid_argument("integrate_signal: region selects no cells");
    }
    return cells;
}

std::complex<double> integrate_signal(const DGSpace& space, std::span<const double> state,
                                      std::span<const int> cells) {
    // constant mode phi_0 = 1/sqrt(V): integral over the cell = c_0 * sqrt(V)
    const double sqrt_v = std::sqrt(space.mesh().cell_volume());
    const int nb = space.nb();
    double re = 0.0, im = 0.0;
    for (int c : cells) {
        const double* cc = state.data() + space.cell_offset(c);
        re += cc[0];
        im += cc[nb];
    }
    return {re * sqrt_v, im * sqrt_v};
}

std::complex<double> integrate_signal(const DGSpace& space, std::span<const double> state,
                                      const Region& region) {
    const auto cells = region_cells(space, region);
    return integrate_signal(space, state, cells);
}

std::complex<double> integrate_signal(std::span<const Vec3> m, std::span<const double> weights) {
    if (m.size() != weights.size() || m.empty()) {
        throw std::invalid_argument("integrate_signal: empty or mismatched isochromat set");
    }
    // fixed pairwise reduction keeps parallel replays bit-identical
    double re = 0.0, im = 0.0;
    for (size_t i = 0; i < m.size(); ++i) {
        re += weights[i] * m[i].x;
        im += weights[i] * m[i].y;
    }
    return {re, im};
}

FrameSeries frame_average(std::span<const SignalSample> samples, int spokes_per_frame) {
    if (spokes_per_frame < 1) throw std::invalid_argument("frame_average: spokes_per_frame < 1");
    if (samples.size() % size_t(spokes_per_frame) != 0) {
        throw std::invalid_argument("frame_average: " + std::to_string(samples.size()) +
                                    " samples do not fill frames of " +
                                    std::to_string(spokes_per_frame) + " spokes");
    }
    FrameSeries s;
    s.spokes_per_frame = spokes_per_frame;
    const size_t frames = samples.size() / size_t(spokes_per_frame);
    s.magnitude.resize(frames);
    for (size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (int k = 0; k < spokes_per_frame; ++k) {
            acc += std::abs(samples[f * spokes_per_frame + k].value);
        }
        s.magnitude[f] = acc / spokes_per_frame;
    }
    s.normalized = s.magnitude;
    return s;
}

void normalize(FrameSeries& series, double reference) {
    if (reference == 0.0 || !std::isfinite(reference)) {
        throw std::invalid_argument("normalize: zero or non-finite reference");
    }
    series.reference = reference;
    series.normalized.resize(series.magnitude.size());
    for (size_t i = 0; i < series.magnitude.size(); ++i) {
        series.normalized[i] = series.magnitude[i] / reference;
    }
}

double plateau(const FrameSeries& series, int last_n) {
    if (series.magnitude.empty()) throw std::invalid_argument("plateau: empty series");
    const int n = std::min<int>(last_n, int(series.magnitude.size()));
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += series.magnitude[series.magnitude.size() - 1 - i];
    return acc / n;
}

}  // namespace blochdg
