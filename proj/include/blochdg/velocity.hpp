#pragma once

#include <array>
#include <functional>
#include <utility>

#include "blochdg/vec3.hpp"

namespace blochdg {

/// Flow field u(t, r). `active` marks physical axes on which the component
/// can be nonzero; the DG operator skips faces whose normal lies on an
/// inactive axis (exact zeros contribute nothing), which is the through-plane
/// fast path.
struct VelocityField {
    std::function<Vec3(double t, const Vec3& r)> eval;
    bool divergence_free = true;
    bool spatially_uniform = false;  // lets the operator evaluate u once per call
    std::array<bool, 3> active{true, true, true};

    bool is_zero() const { return !active[0] && !active[1] && !active[2]; }

    Vec3 operator()(double t, const Vec3& r) const {
        return active[0] || active[1] || active[2] ? eval(t, r) : Vec3{};
    }

    static VelocityField zero() {
        VelocityField u;
        u.eval = [](double, const Vec3&) { return Vec3{}; };
        u.active = {false, false, false};
        u.spatially_uniform = true;
        return u;
    }
    static VelocityField constant(const Vec3& v) {
        VelocityField u;
        u.eval = [v](double, const Vec3&) { return v; };
        u.active = {v.x != 0.0, v.y != 0.0, v.z != 0.0};
        u.spatially_uniform = true;
        return u;
    }
    /// u = (0, 0, uz(t)): spatially constant, divergence-free by construction.
    static VelocityField axial_z(std::function<double(double)> uz) {
        VelocityField u;
        u.eval = [f = std::move(uz)](double t, const Vec3&) { return Vec3{0.0, 0.0, f(t)}; };
        u.active = {false, false, true};
        u.spatially_uniform = true;
        return u;
    }
};

/// Centered-difference estimate of max |div u| over sample points; used to
/// validate fields declared divergence-free.
double max_divergence_estimate(const VelocityField& u, double t,
                               std::span<const Vec3> samples, double h);

}  // namespace blochdg
