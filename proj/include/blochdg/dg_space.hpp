#pragma once

#include <functional>
#include <span>
#include <vector>

#include "blochdg/mesh.hpp"
#include "blochdg/vec3.hpp"

namespace blochdg {

struct GaussRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;  // sum to 2
};
GaussRule gauss_legendre(int n);

/// Orthonormal Legendre values/derivatives on [-1,1] up to degree k:
/// Lt_n = sqrt((2n+1)/2) P_n, so that (Lt_m, Lt_n) = delta_mn.
void legendre_orthonormal(int k, double x, std::span<double> val, std::span<double> der);

/// Discontinuous tensor-product polynomial space on a BoxMesh with a per-cell
/// orthonormal modal basis (the element mass matrix is the identity). The
/// state vector stores 3 magnetization components x basis size x cells,
/// cell-major: dof(cell, comp, n) = (cell*3 + comp)*nb + n.
class DGSpace {
  public:
    DGSpace(BoxMesh mesh, int degree);

    const BoxMesh& mesh() const { return mesh_; }
    int degree() const { return degree_; }
    int nb() const { return nb_; }                    // basis functions per cell
    std::size_t dofs() const { return std::size_t(mesh_.cells()) * 3 * nb_; }
    std::size_t cell_offset(int cell) const { return std::size_t(cell) * 3 * nb_; }

    // volume quadrature tables, shared by every cell (uniform mesh)
    int nq_vol() const { return nq_vol_; }
    std::span<const double> phi_vol() const { return phi_vol_; }      // [q*nb + n]
    std::span<const double> grad_vol() const { return grad_vol_; }    // [(q*nb + n)*3 + mesh_axis]
    std::span<const double> w_vol() const { return w_vol_; }          // physical weights
    const std::vector<Vec3>& xq_vol() const { return xq_vol_; }       // offsets from cell center

    // face quadrature tables per mesh axis; "lo" traces belong to the cell on
    // the lower side of the face (its local coordinate +1), "hi" to the upper
    int nq_face(int axis) const { return nq_face_[axis]; }
    std::span<const double> trace_lo(int axis) const { return trace_lo_[axis]; }
    std::span<const double> trace_hi(int axis) const { return trace_hi_[axis]; }
    std::span<const double> dtrace_lo(int axis) const { return dtrace_lo_[axis]; }
    std::span<const double> dtrace_hi(int axis) const { return dtrace_hi_[axis]; }
    std::span<const double> w_face(int axis) const { return w_face_[axis]; }
    const std::vector<Vec3>& xq_face(int axis) const { return xq_face_[axis]; }

    /// L2 projection of a pointwise field (exact for polynomial data of
    /// degree <= k+1 per axis).
    std::vector<double> project(const std::function<Vec3(const Vec3&)>& f) const;
    std::vector<double> constant_state(const Vec3& value) const;

    /// Point evaluation of the stored polynomial inside a cell.
    Vec3 eval(std::span<const double> state, int cell, const Vec3& r) const;
    /// Cell containing the physical point (clamped to the domain).
    int locate(const Vec3& r) const;

    Vec3 cell_mean(std::span<const double> state, int cell) const;
    /// ||M_h||_H^2: exact, equals the squared coefficient norm.
    double l2_norm2(std::span<const double> state) const;

  private:
    BoxMesh mesh_;
    int degree_;
    int nb_;
    int nq1_;  // quadrature points per axis = degree + 2
    GaussRule rule_;
    int nq_vol_ = 1;
    std::vector<double> phi_vol_, grad_vol_, w_vol_;
    std::vector<Vec3> xq_vol_;
    int nq_face_[3] = {1, 1, 1};
    std::vector<double> trace_lo_[3], trace_hi_[3], dtrace_lo_[3], dtrace_hi_[3], w_face_[3];
    std::vector<Vec3> xq_face_[3];
    std::vector<std::array<int, 3>> midx_;  // basis multi-indices

    void build_tables();
};

}  // namespace blochdg
