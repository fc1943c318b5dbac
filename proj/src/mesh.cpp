#include "blochdg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace blochdg {

BoxMesh::BoxMesh(double z_lo, double z_hi, int nz) : dim_(1) {
    if (!(z_hi > z_lo) || nz < 1) throw std::invalid_argument("BoxMesh: degenerate 1D extent");
    lo_ = {z_lo, 0.0, 0.0};
    hi_ = {z_hi, 0.0, 0.0};
    n_ = {nz, 1, 1};
    h_ = {(z_hi - z_lo) / nz, 1.0, 1.0};
    total_cells_ = nz;
    cell_volume_ = h_[0];
    build_faces();
}

BoxMesh::BoxMesh(const Vec3& lo, const Vec3& hi, const std::array<int, 3>& n) : dim_(3) {
    const double lov[3] = {lo.x, lo.y, lo.z};
    const double hiv[3] = {hi.x, hi.y, hi.z};
    total_cells_ = 1;
    cell_volume_ = 1.0;
    for (int a = 0; a < 3; ++a) {
        if (!(hiv[a] > lov[a]) || n[a] < 1) {
            throw std::invalid_argument("BoxMesh: degenerate extent on axis " + std::to_string(a));
        }
        lo_[a] = lov[a];
        hi_[a] = hiv[a];
        n_[a] = n[a];
        h_[a] = (hiv[a] - lov[a]) / n[a];
        total_cells_ *= n[a];
        cell_volume_ *= h_[a];
    }
    build_faces();
}

double BoxMesh::min_spacing() const {
    double m = h_[0];
    for (int a = 1; a < dim_; ++a) m = std::min(m, h_[a]);
    return m;
}

std::array<int, 3> BoxMesh::cell_coords(int idx) const {
    std::array<int, 3> c{0, 0, 0};
    c[0] = idx % n_[0];
    c[1] = (idx / n_[0]) % n_[1];
    c[2] = idx / (n_[0] * n_[1]);
    return c;
}

int BoxMesh::cell_index(const std::array<int, 3>& c) const {
    return c[0] + n_[0] * (c[1] + n_[1] * c[2]);
}

Vec3 BoxMesh::cell_center(int idx) const {
    const auto c = cell_coords(idx);
    double p[3] = {0.0, 0.0, 0.0};
    for (int a = 0; a < dim_; ++a) p[physical_axis(a)] = lo_[a] + (c[a] + 0.5) * h_[a];
    return {p[0], p[1], p[2]};
}

double BoxMesh::face_h(int axis) const {
    if (dim_ == 1) return h_[0];
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
        if (a != axis) d2 += h_[a] * h_[a];
    }
    return std::sqrt(d2);
}

double BoxMesh::face_measure(int axis) const {
    double m = 1.0;
    for (int a = 0; a < dim_; ++a) {
        if (a != axis) m *= h_[a];
    }
    return m;
}

Vec3 BoxMesh::normal(int axis, int sign) const {
    double v[3] = {0.0, 0.0, 0.0};
    v[physical_axis(axis)] = double(sign);
    return {v[0], v[1], v[2]};
}

void BoxMesh::build_faces() {
    interior_.clear();
    boundary_.clear();
    std::array<int, 3> stride{1, n_[0], n_[0] * n_[1]};
    for (int a = 0; a < dim_; ++a) {
        for (int idx = 0; idx < total_cells_; ++idx) {
            const auto c = cell_coords(idx);
            if (c[a] + 1 < n_[a]) {
                interior_.push_back({a, idx, idx + stride[a]});
            }
            if (c[a] == 0) boundary_.push_back({a, idx, -1});
            if (c[a] == n_[a] - 1) boundary_.push_back({a, idx, +1});
        }
    }
}

}  // namespace blochdg
