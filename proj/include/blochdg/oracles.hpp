#pragma once

#include <span>
#include <string>
#include <vector>

#include "blochdg/physics.hpp"

namespace blochdg {

// Independent checkers. Everything in this header is implemented without the
// DG operator or the RK steppers, so agreement with simulation output is a
// genuine cross-check.

struct SteadyState {
    double mz_before_pulse = 0.0;
    double signal = 0.0;  // |transverse| at TE per unit volume
};

/// Ideally spoiled gradient-echo fixed point: Mz+ = m0 (1 - E1) + E1 cos(a) Mz
/// with E1 = exp(-tr/t1); signal = sin(a) Mz* exp(-te/t2).
SteadyState spoiled_steady_state(const TissueParams& tissue, double tr, double te, double flip);

/// The same per-TR recursion unrolled: echo magnitudes of repetitions
/// 0..n_reps-1 starting from longitudinal magnetization mz0 before the first
/// pulse (transverse assumed spoiled away before every pulse).
std::vector<double> spoiled_transient(const TissueParams& tissue, double tr, double te,
                                      double flip, int n_reps, double mz0);

/// Scalar trajectory sample for the kinetic-energy inequality monitor.
struct EnergySample {
    double t = 0.0;
    double norm2 = 0.0;         // ||M||_H^2
    double outflow_m2 = 0.0;    // integral over Gamma+ of |u.n| |M|^2
    double inflow_data2 = 0.0;  // integral over Gamma- of |u.n| |M_Gamma|^2
};

struct EnergyCheck {
    bool pass = false;
    bool conclusive = true;      // false: time quadrature did not stabilize
    double min_margin = 0.0;     // min over samples of rhs - lhs
    double worst_ratio = 0.0;    // max lhs/rhs
    size_t samples = 0;
    std::string note;
};

/// Monitors, along a sampled trajectory,
///   1/2 ||M(t)||^2 + int_0^t e^{sigma (s-t)} 1/2 outflow_m2 ds
///     <= 1/2 ||M(0)||^2 e^{-sigma t}
///        + int_0^t e^{sigma (s-t)} ( 1/(2 sigma) ||f||^2 + 1/2 inflow_data2 ) ds
/// with sigma = 1/T1 and ||f||^2 = (m0/T1)^2 |Omega| (summed over regions).
/// This is the a-priori energy bound extended with the inflow-data term that
/// a nonzero M_Gamma contributes through the weak boundary condition; for
/// M_Gamma = 0 it reduces to the homogeneous estimate. Time integrals use the
/// trapezoidal rule; `conclusive` is false when halving the sampling changes
/// the verdict margin by more than the tolerance.
EnergyCheck check_energy_inequality(std::span<const EnergySample> samples, double sigma,
                                    double f_norm2, double rel_tol = 1e-6);

struct ConvergenceReport {
    std::vector<double> h;
    std::vector<double> error;       // L2 errors against the reference
    std::vector<double> error_linf;  // reported alongside
    double observed_order = 0.0;     // least-squares slope of log(error) vs log(h)
    bool monotone = true;
    std::string note;
};

/// Least-squares slope fit; errors must follow strictly decreasing h.
ConvergenceReport convergence_order(std::span<const double> h, std::span<const double> error,
                                    std::span<const double> error_linf = {});

struct Overshoot {
    double exceedance = 0.0;       // max distance outside [-bound, +bound]
    double total_variation = 0.0;  // sum of |v_{i+1} - v_i| inside the region
};

/// Overshoot of sampled profile values against a physical bound.
Overshoot overshoot_metric(std::span<const double> values, double bound);

/// Tube diameter implied by Reynolds number rows (Re = u d / nu); throws when
/// rows disagree by more than rel_tol.
double pump_table_diameter(std::span<const double> mean_velocity_m_s, std::span<const double> re,
                           double kinematic_viscosity_m2_s, double rel_tol = 0.02);

}  // namespace blochdg
