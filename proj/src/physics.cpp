#include "blochdg/physics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace blochdg {

void PhysicalConstants::validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw std::invalid_argument("PhysicalConstants: gamma must be positive and finite, got " +
                                    std::to_string(gamma));
    }
}

void TissueParams::validate() const {
    if (!(t2 > 0.0) || !(t1 >= t2)) {
        throw std::invalid_argument("TissueParams: need t1 >= t2 > 0, got t1=" +
                                    std::to_string(t1) + " t2=" + std::to_string(t2));
    }
    if (!(m0 > 0.0) || !std::isfinite(m0)) {
        throw std::invalid_argument("TissueParams: need finite m0 > 0, got " + std::to_string(m0));
    }
}

Vec3 bloch_rhs(const Vec3& m, const Vec3& b, const TissueParams& tissue,
               const PhysicalConstants& consts) {
    if (!all_finite(m)) throw std::invalid_argument("bloch_rhs: non-finite magnetization");
    if (!all_finite(b)) throw std::invalid_argument("bloch_rhs: non-finite field");
    return bloch_rhs_unchecked(m, b, tissue, consts);
}

Vec3 reaction_operator(const Vec3& m, const Vec3& b, const TissueParams& tissue,
                       const PhysicalConstants& consts) {
    return -bloch_rhs(m, b, tissue, consts);
}

Vec3 exact_relaxation_rotation(const Vec3& m, double bz, const TissueParams& tissue,
                               const PhysicalConstants& consts, double dt) {
    if (dt < 0.0) throw std::invalid_argument("exact_relaxation_rotation: dt must be >= 0");
    if (!all_finite(m) || !std::isfinite(bz)) {
        throw std::invalid_argument("exact_relaxation_rotation: non-finite input");
    }
    const double e2 = std::exp(-dt / tissue.t2);
    const double e1 = std::exp(-dt / tissue.t1);
    const double phi = -consts.gamma * bz * dt;
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    return {e2 * (c * m.x - s * m.y), e2 * (s * m.x + c * m.y),
            tissue.m0 + (m.z - tissue.m0) * e1};
}

}  // namespace blochdg
