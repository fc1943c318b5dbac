#pragma once

#include <limits>

#include "blochdg/units.hpp"
#include "blochdg/vec3.hpp"

namespace blochdg {

/// Proton gyromagnetic ratio over 2*pi in Hz/T. Configurable through
/// PhysicalConstants; this is the default.
inline constexpr double kProtonFreqHzPerTesla = 42.577478518e6;

struct PhysicalConstants {
    /// Gyromagnetic ratio, rad s^-1 T^-1.
    double gamma = 2.0 * units::pi * kProtonFreqHzPerTesla;

    static constexpr PhysicalConstants from_frequency_hz_per_tesla(double f) {
        return PhysicalConstants{2.0 * units::pi * f};
    }
    constexpr double frequency_hz_per_tesla() const { return gamma / (2.0 * units::pi); }

    void validate() const;
};

/// Relaxation times and equilibrium magnetization of one material region.
/// t1 or t2 may be +inf to disable the corresponding relaxation channel.
struct TissueParams {
    double t1 = std::numeric_limits<double>::infinity();  // longitudinal, s
    double t2 = std::numeric_limits<double>::infinity();  // transverse, s
    double m0 = 1.0;                                      // equilibrium magnetization

    void validate() const;  // enforces t1 >= t2 > 0 and m0 > 0

    static TissueParams relaxation_free() { return TissueParams{}; }
};

using Magnetization = Vec3;   // dimensionless, units of m0
using EffectiveField = Vec3;  // rotating-frame field, tesla; z holds G(t).r

/// Rotating-frame Bloch right-hand side (rate, 1/s):
///   dM/dt = gamma M x B + (m0 - Mz)/T1 e_z - (Mx e_x + My e_y)/T2
/// No bounds on magnitudes, but all inputs must be finite.
Vec3 bloch_rhs(const Vec3& m, const Vec3& b, const TissueParams& tissue,
               const PhysicalConstants& consts);

/// Splitting operand gamma B x M + D M - f. Equals -bloch_rhs componentwise.
Vec3 reaction_operator(const Vec3& m, const Vec3& b, const TissueParams& tissue,
                       const PhysicalConstants& consts);

/// Exact propagator over dt for a constant longitudinal field offset bz and no
/// transverse RF: the transverse part decays by exp(-dt/t2) while precessing
/// through the angle -gamma*bz*dt about z, and Mz relaxes toward m0.
Vec3 exact_relaxation_rotation(const Vec3& m, double bz, const TissueParams& tissue,
                               const PhysicalConstants& consts, double dt);

// Hot-loop kernel: no input validation. The checked bloch_rhs forwards here.
inline Vec3 bloch_rhs_unchecked(const Vec3& m, const Vec3& b, const TissueParams& tissue,
                                const PhysicalConstants& consts) {
    const double r2 = 1.0 / tissue.t2;
    const double r1 = 1.0 / tissue.t1;
    Vec3 rate = consts.gamma * cross(m, b);
    rate.x -= m.x * r2;
    rate.y -= m.y * r2;
    rate.z += (tissue.m0 - m.z) * r1;
    return rate;
}

}  // namespace blochdg
