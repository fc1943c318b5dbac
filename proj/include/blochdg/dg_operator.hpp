#pragma once

#include <functional>
#include <span>
#include <vector>

#include "blochdg/dg_space.hpp"
#include "blochdg/physics.hpp"
#include "blochdg/sequence.hpp"
#include "blochdg/velocity.hpp"

namespace blochdg {

/// Inflow boundary magnetization M_Gamma on Gamma- (where u.n < 0).
struct BoundaryData {
    Vec3 constant{0.0, 0.0, 1.0};
    std::function<Vec3(double t, const Vec3& r)> fn;  // overrides `constant` when set

    Vec3 value(double t, const Vec3& r) const { return fn ? fn(t, r) : constant; }
    bool is_constant() const { return !fn; }
};

/// Piecewise-constant tissue assignment: one region index per cell.
struct TissueMap {
    std::vector<TissueParams> regions;
    std::vector<int> cell_region;  // empty: region 0 everywhere

    static TissueMap uniform(const TissueParams& t) { return {{t}, {}}; }
    const TissueParams& of(int cell) const {
        return regions[cell_region.empty() ? 0 : cell_region[cell]];
    }
    void validate(int cells) const;
};

/// negative part w^- = (|w| - w)/2, the inflow weight of the weak boundary term
inline double negative_part(double w) { return 0.5 * (std::abs(w) - w); }

/// Semi-discrete spatial operator of the flow Bloch problem: reaction
/// (pointwise Bloch right-hand side), upwind-stabilized advection, weak inflow
/// boundary data and the gradient-jump penalty. The per-cell orthonormal basis
/// makes the mass matrix the identity, so apply() returns d(coefficients)/dt
/// directly.
class DGOperator {
  public:
    struct Parts {
        bool reaction = true;   // gamma B x M + D M - f, with B from the timeline
        bool advection = true;  // volume term + upwind interior fluxes
        bool boundary = true;   // weak inflow data on Gamma-
        bool penalty = true;    // gradient-jump stabilization
    };

    DGOperator(const DGSpace& space, TissueMap tissue, VelocityField velocity, BoundaryData bc,
               PhysicalConstants consts = {}, double penalty_eps = 0.0);

    void set_timeline(const SequenceTimeline* tl) { timeline_ = tl; }
    void set_field(std::function<Vec3(double t, const Vec3& r)> f) { field_fn_ = std::move(f); }
    void set_penalty(double eps) { penalty_eps_ = eps; }
    double penalty() const { return penalty_eps_; }
    const DGSpace& space() const { return *space_; }
    const TissueMap& tissue() const { return tissue_; }
    const VelocityField& velocity() const { return velocity_; }

    /// rate = full spatial operator applied to state (all parts).
    void apply(double t, std::span<const double> state, std::span<double> rate) const;
    /// rate += selected parts only (rate is not zeroed).
    void apply_parts(double t, std::span<const double> state, std::span<double> rate,
                     const Parts& parts) const;

    /// Boundary terms of the energy budget at time t:
    /// outflow_m2  = integral over Gamma+ of |u.n| |M_h|^2,
    /// inflow_data = integral over Gamma- of |u.n| |M_Gamma|^2.
    struct BoundaryEnergy {
        double outflow_m2 = 0.0;
        double inflow_data2 = 0.0;
    };
    BoundaryEnergy boundary_energy(double t, std::span<const double> state) const;

    /// max |u| over cell centers at time t (CFL guard input).
    double max_speed(double t) const;

    const PhysicalConstants& constants() const { return consts_; }

  private:
    const DGSpace* space_;
    TissueMap tissue_;
    VelocityField velocity_;
    BoundaryData bc_;
    PhysicalConstants consts_;
    double penalty_eps_;
    const SequenceTimeline* timeline_ = nullptr;
    std::function<Vec3(double t, const Vec3& r)> field_fn_;

    std::vector<Vec3> face_centers_;       // interior faces
    std::vector<Vec3> bface_centers_;      // boundary faces
    std::vector<int> cell_face_offset_;    // CSR cell -> interior face links
    std::vector<std::pair<int, int>> cell_face_;  // (face index, side 0=lower/1=upper)
    std::vector<int> cell_bface_offset_;   // CSR cell -> boundary faces
    std::vector<int> cell_bface_;

    mutable std::vector<double> face_buf_;  // scratch: per-face contributions, written
                                            // in the face pass, gathered per cell
    std::vector<int> cell_ids_, face_ids_;

    void cell_pass(double t, std::span<const double> state, std::span<double> rate,
                   const Parts& parts) const;
    void face_pass(double t, std::span<const double> state, const Parts& parts) const;
    void gather_pass(std::span<double> rate) const;
};

/// Thread cap for the data-parallel element loops (and anything else running
/// through the parallel STL). 0 restores the hardware default.
void set_thread_limit(int threads);

}  // namespace blochdg
