#include "blochdg/dg_space.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "blochdg/units.hpp"

namespace blochdg {

GaussRule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: need n >= 1");
    GaussRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(units::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            // P_n(x) and P_n'(x) by recurrence
            double p0 = 1.0, p1 = x;
            for (int m = 2; m <= n; ++m) {
                const double p2 = ((2 * m - 1) * x * p1 - (m - 1) * p0) / m;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        r.nodes[i] = -x;  // ascending order
        r.nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        r.weights[i] = w;
        r.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) r.nodes[n / 2] = 0.0;
    return r;
}

void legendre_orthonormal(int k, double x, std::span<double> val, std::span<double> der) {
    double p0 = 1.0, p1 = x, d0 = 0.0, d1 = 1.0;
    for (int n = 0; n <= k; ++n) {
        const double scale = std::sqrt((2.0 * n + 1.0) / 2.0);
        if (n == 0) {
            val[0] = scale;
            if (!der.empty()) der[0] = 0.0;
            continue;
        }
        if (n > 1) {
            const double p2 = ((2 * n - 1) * x * p1 - (n - 1) * p0) / n;
            const double d2 = d0 + (2 * n - 1) * p1;
            p0 = p1;
            p1 = p2;
            d0 = d1;
            d1 = d2;
        }
        val[n] = scale * p1;
        if (!der.empty()) der[n] = scale * d1;
    }
}

DGSpace::DGSpace(BoxMesh mesh, int degree) : mesh_(std::move(mesh)), degree_(degree) {
    if (degree_ < 0) throw std::invalid_argument("DGSpace: degree must be >= 0");
    nq1_ = degree_ + 2;
    rule_ = gauss_legendre(nq1_);
    nb_ = 1;
    for (int a = 0; a < mesh_.dim(); ++a) nb_ *= degree_ + 1;
    build_tables();
}

void DGSpace::build_tables() {
    const int dim = mesh_.dim();
    const int k1 = degree_ + 1;

    midx_.resize(nb_);
    for (int n = 0; n < nb_; ++n) {
        int rem = n;
        std::array<int, 3> mi{0, 0, 0};
        for (int a = 0; a < dim; ++a) {
            mi[a] = rem % k1;
            rem /= k1;
        }
        midx_[n] = mi;
    }

    // per-axis 1D tables at the quadrature nodes and at the cell ends
    std::vector<double> val1(nq1_ * k1), der1(nq1_ * k1);
    for (int q = 0; q < nq1_; ++q) {
        legendre_orthonormal(degree_, rule_.nodes[q],
                             std::span<double>(val1.data() + q * k1, k1),
                             std::span<double>(der1.data() + q * k1, k1));
    }
    std::vector<double> val_end[2], der_end[2];
    for (int side = 0; side < 2; ++side) {
        val_end[side].resize(k1);
        der_end[side].resize(k1);
        legendre_orthonormal(degree_, side == 0 ? -1.0 : 1.0, val_end[side], der_end[side]);
    }

    // axis scale factors: sqrt(2/h) per axis normalizes on the physical cell
    double scale[3], dscale[3], half_h[3];
    for (int a = 0; a < dim; ++a) {
        const double h = mesh_.spacing(a);
        scale[a] = std::sqrt(2.0 / h);
        dscale[a] = 2.0 / h;  // d(xi)/dx
        half_h[a] = 0.5 * h;
    }

    // volume tables
    nq_vol_ = 1;
    for (int a = 0; a < dim; ++a) nq_vol_ *= nq1_;
    phi_vol_.assign(std::size_t(nq_vol_) * nb_, 0.0);
    grad_vol_.assign(std::size_t(nq_vol_) * nb_ * 3, 0.0);
    w_vol_.assign(nq_vol_, 0.0);
    xq_vol_.assign(nq_vol_, Vec3{});
    for (int q = 0; q < nq_vol_; ++q) {
        int rem = q;
        std::array<int, 3> qi{0, 0, 0};
        double w = 1.0;
        double off[3] = {0.0, 0.0, 0.0};
        for (int a = 0; a < dim; ++a) {
            qi[a] = rem % nq1_;
            rem /= nq1_;
            w *= rule_.weights[qi[a]] * half_h[a];
            off[mesh_.physical_axis(a)] = rule_.nodes[qi[a]] * half_h[a];
        }
        w_vol_[q] = w;
        xq_vol_[q] = {off[0], off[1], off[2]};
        for (int n = 0; n < nb_; ++n) {
            double v = 1.0;
            for (int a = 0; a < dim; ++a) v *= val1[qi[a] * k1 + midx_[n][a]] * scale[a];
            phi_vol_[std::size_t(q) * nb_ + n] = v;
            for (int g = 0; g < dim; ++g) {
                double gv = 1.0;
                for (int a = 0; a < dim; ++a) {
                    const double f = (a == g) ? der1[qi[a] * k1 + midx_[n][a]] * dscale[a]
                                              : val1[qi[a] * k1 + midx_[n][a]];
                    gv *= f * scale[a];
                }
                grad_vol_[(std::size_t(q) * nb_ + n) * 3 + g] = gv;
            }
        }
    }

    // face tables per mesh axis
    for (int fa = 0; fa < dim; ++fa) {
        int nqf = 1;
        for (int a = 0; a < dim; ++a) {
            if (a != fa) nqf *= nq1_;
        }
        nq_face_[fa] = nqf;
        trace_lo_[fa].assign(std::size_t(nqf) * nb_, 0.0);
        trace_hi_[fa].assign(std::size_t(nqf) * nb_, 0.0);
        dtrace_lo_[fa].assign(std::size_t(nqf) * nb_ * 3, 0.0);
        dtrace_hi_[fa].assign(std::size_t(nqf) * nb_ * 3, 0.0);
        w_face_[fa].assign(nqf, 0.0);
        xq_face_[fa].assign(nqf, Vec3{});
        for (int q = 0; q < nqf; ++q) {
            int rem = q;
            std::array<int, 3> qi{-1, -1, -1};  // -1 marks the face axis
            double w = 1.0;
            double off[3] = {0.0, 0.0, 0.0};
            for (int a = 0; a < dim; ++a) {
                if (a == fa) continue;
                qi[a] = rem % nq1_;
                rem /= nq1_;
                w *= rule_.weights[qi[a]] * half_h[a];
                off[mesh_.physical_axis(a)] = rule_.nodes[qi[a]] * half_h[a];
            }
            w_face_[fa][q] = w;
            xq_face_[fa][q] = {off[0], off[1], off[2]};
            for (int n = 0; n < nb_; ++n) {
                // lower cell: trace at its local xi_fa = +1 (side 1)
                // upper cell: trace at its local xi_fa = -1 (side 0)
                double vlo = 1.0, vhi = 1.0;
                for (int a = 0; a < dim; ++a) {
                    const int m = midx_[n][a];
                    if (a == fa) {
                        vlo *= val_end[1][m] * scale[a];
                        vhi *= val_end[0][m] * scale[a];
                    } else {
                        const double f = val1[qi[a] * k1 + m] * scale[a];
                        vlo *= f;
                        vhi *= f;
                    }
                }
                trace_lo_[fa][std::size_t(q) * nb_ + n] = vlo;
                trace_hi_[fa][std::size_t(q) * nb_ + n] = vhi;
                for (int g = 0; g < dim; ++g) {
                    double glo = 1.0, ghi = 1.0;
                    for (int a = 0; a < dim; ++a) {
                        const int m = midx_[n][a];
                        double flo, fhi;
                        if (a == fa) {
                            flo = (a == g) ? der_end[1][m] * dscale[a] : val_end[1][m];
                            fhi = (a == g) ? der_end[0][m] * dscale[a] : val_end[0][m];
                        } else {
                            const double v = val1[qi[a] * k1 + m];
                            const double d = der1[qi[a] * k1 + m] * dscale[a];
                            flo = (a == g) ? d : v;
                            fhi = flo;
                        }
                        glo *= flo * scale[a];
                        ghi *= fhi * scale[a];
                    }
                    dtrace_lo_[fa][(std::size_t(q) * nb_ + n) * 3 + g] = glo;
                    dtrace_hi_[fa][(std::size_t(q) * nb_ + n) * 3 + g] = ghi;
                }
            }
        }
    }
}

std::vector<double> DGSpace::project(const std::function<Vec3(const Vec3&)>& f) const {
    std::vector<double> state(dofs(), 0.0);
    const int cells = mesh_.cells();
    for (int cell = 0; cell < cells; ++cell) {
        const Vec3 center = mesh_.cell_center(cell);
        double* c = state.data() + cell_offset(cell);
        for (int q = 0; q < nq_vol_; ++q) {
            const Vec3 v = f(center + xq_vol_[q]);
            const double w = w_vol_[q];
            const double* phi = phi_vol_.data() + std::size_t(q) * nb_;
            const double m[3] = {v.x, v.y, v.z};
            for (int comp = 0; comp < 3; ++comp) {
                double* cc = c + comp * nb_;
                const double wm = w * m[comp];
                for (int n = 0; n < nb_; ++n) cc[n] += wm * phi[n];
            }
        }
    }
    return state;
}

std::vector<double> DGSpace::constant_state(const Vec3& value) const {
    return project([&](const Vec3&) { return value; });
}

Vec3 DGSpace::eval(std::span<const double> state, int cell, const Vec3& r) const {
    const int dim = mesh_.dim();
    const int k1 = degree_ + 1;
    const Vec3 center = mesh_.cell_center(cell);
    const double rr[3] = {r.x - center.x, r.y - center.y, r.z - center.z};
    double vals[3][8];  // per mesh axis, up to degree 7
    double dummy_der[8];
    for (int a = 0; a < dim; ++a) {
        const double xi = rr[mesh_.physical_axis(a)] / (0.5 * mesh_.spacing(a));
        legendre_orthonormal(degree_, xi, std::span<double>(vals[a], k1),
                             std::span<double>(dummy_der, k1));
        const double s = std::sqrt(2.0 / mesh_.spacing(a));
        for (int m = 0; m < k1; ++m) vals[a][m] *= s;
    }
    const double* c = state.data() + cell_offset(cell);
    Vec3 out{};
    for (int n = 0; n < nb_; ++n) {
        double phi = 1.0;
        for (int a = 0; a < dim; ++a) phi *= vals[a][midx_[n][a]];
        out.x += c[0 * nb_ + n] * phi;
        out.y += c[1 * nb_ + n] * phi;
        out.z += c[2 * nb_ + n] * phi;
    }
    return out;
}

int DGSpace::locate(const Vec3& r) const {
    const double rr[3] = {r.x, r.y, r.z};
    std::array<int, 3> c{0, 0, 0};
    for (int a = 0; a < mesh_.dim(); ++a) {
        const double x = rr[mesh_.physical_axis(a)];
        int i = int(std::floor((x - mesh_.lo(a)) / mesh_.spacing(a)));
        c[a] = std::clamp(i, 0, mesh_.count(a) - 1);
    }
    return mesh_.cell_index(c);
}

Vec3 DGSpace::cell_mean(std::span<const double> state, int cell) const {
    // constant mode phi_0 = 1/sqrt(V) on every cell
    const double inv_sqrt_v = 1.0 / std::sqrt(mesh_.cell_volume());
    const double* c = state.data() + cell_offset(cell);
    return {c[0] * inv_sqrt_v, c[nb_] * inv_sqrt_v, c[2 * nb_] * inv_sqrt_v};
}

double DGSpace::l2_norm2(std::span<const double> state) const {
    double acc = 0.0;
    for (double x : state) acc += x * x;
    return acc;
}

}  // namespace blochdg
