#pragma once

#include <array>
#include <vector>

#include "blochdg/vec3.hpp"

namespace blochdg {

/// Axis-aligned structured box mesh with equidistant cells per axis.
/// dim == 1 meshes live on the physical z axis (slice direction); dim == 3
/// meshes use x, y, z. Cells are indexed lexicographically, fastest along the
/// first mesh axis, so the face orientation "from lower- to higher-indexed
/// cell" coincides with the +axis direction.
class BoxMesh {
  public:
    struct InteriorFace {
        int axis;        // mesh axis of the normal (+axis from lower to upper)
        int lower, upper;  // adjacent cell indices
    };
    struct BoundaryFace {
        int axis;
        int cell;
        int side;  // -1: lower domain boundary (outward normal -axis), +1: upper
    };

    BoxMesh() = default;
    /// 1D mesh along z.
    BoxMesh(double z_lo, double z_hi, int nz);
    /// 3D mesh.
    BoxMesh(const Vec3& lo, const Vec3& hi, const std::array<int, 3>& n);

    int dim() const { return dim_; }
    int cells() const { return total_cells_; }
    double spacing(int axis) const { return h_[axis]; }
    double lo(int axis) const { return lo_[axis]; }
    double hi(int axis) const { return hi_[axis]; }
    int count(int axis) const { return n_[axis]; }
    double cell_volume() const { return cell_volume_; }
    double domain_volume() const { return cell_volume_ * total_cells_; }
    double min_spacing() const;

    /// Physical axis (0=x, 1=y, 2=z) carried by a mesh axis.
    int physical_axis(int mesh_axis) const { return dim_ == 1 ? 2 : mesh_axis; }

    std::array<int, 3> cell_coords(int idx) const;
    int cell_index(const std::array<int, 3>& c) const;
    /// Physical center of a cell; unused axes sit at 0.
    Vec3 cell_center(int idx) const;

    /// Face diameter scale used by the gradient-jump penalty: transverse face
    /// diagonal in 3D, the cell spacing along the normal in 1D.
    double face_h(int axis) const;
    /// Face measure (length/area); 1 for point faces of 1D meshes.
    double face_measure(int axis) const;

    const std::vector<InteriorFace>& interior_faces() const { return interior_; }
    const std::vector<BoundaryFace>& boundary_faces() const { return boundary_; }

    /// Unit outward/oriented normal of a face with the given axis and sign.
    Vec3 normal(int axis, int sign) const;

  private:
    int dim_ = 1;
    std::array<double, 3> lo_{}, hi_{};
    std::array<int, 3> n_{1, 1, 1};
    std::array<double, 3> h_{1.0, 1.0, 1.0};
    int total_cells_ = 0;
    double cell_volume_ = 0.0;
    std::vector<InteriorFace> interior_;
    std::vector<BoundaryFace> boundary_;

    void build_faces();
};

}  // namespace blochdg
