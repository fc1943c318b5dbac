#include "blochdg/dg_operator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <execution>
#include <memory>
#include <numeric>
#include <stdexcept>

#include <tbb/global_control.h>

#include "blochdg/velocity.hpp"

namespace blochdg {

namespace {
std::unique_ptr<tbb::global_control> g_thread_cap;
}

void set_thread_limit(int threads) {
    if (threads <= 0) {
        g_thread_cap.reset();
    } else {
        g_thread_cap = std::make_unique<tbb::global_control>(
            tbb::global_control::max_allowed_parallelism, std::size_t(threads));
    }
}

double max_divergence_estimate(const VelocityField& u, double t, std::span<const Vec3> samples,
                               double h) {
    double worst = 0.0;
    const double d = 0.5 * h;
    for (const Vec3& r : samples) {
        double div = 0.0;
        div += (u(t, {r.x + d, r.y, r.z}).x - u(t, {r.x - d, r.y, r.z}).x) / h;
        div += (u(t, {r.x, r.y + d, r.z}).y - u(t, {r.x, r.y - d, r.z}).y) / h;
        div += (u(t, {r.x, r.y, r.z + d}).z - u(t, {r.x, r.y, r.z - d}).z) / h;
        worst = std::max(worst, std::abs(div));
    }
    return worst;
}

void TissueMap::validate(int cells) const {
    if (regions.empty()) throw std::invalid_argument("TissueMap: no tissue regions");
    for (const auto& r : regions) r.validate();
    if (!cell_region.empty()) {
        if (int(cell_region.size()) != cells) {
            throw std::invalid_argument("TissueMap: cell_region size does not match the mesh");
        }
        for (int idx : cell_region) {
            if (idx < 0 || idx >= int(regions.size())) {
                throw std::invalid_argument("TissueMap: region index out of range");
            }
        }
    }
}

DGOperator::DGOperator(const DGSpace& space, TissueMap tissue, VelocityField velocity,
                       BoundaryData bc, PhysicalConstants consts, double penalty_eps)
    : space_(&space),
      tissue_(std::move(tissue)),
      velocity_(std::move(velocity)),
      bc_(std::move(bc)),
      consts_(consts),
      penalty_eps_(penalty_eps) {
    const BoxMesh& mesh = space.mesh();
    tissue_.validate(mesh.cells());
    consts_.validate();
    if (penalty_eps_ < 0.0) throw std::invalid_argument("DGOperator: penalty must be >= 0");

    const auto& faces = mesh.interior_faces();
    face_centers_.resize(faces.size());
    std::vector<std::vector<std::pair<int, int>>> links(mesh.cells());
    for (size_t f = 0; f < faces.size(); ++f) {
        const auto& fc = faces[f];
        Vec3 c = mesh.cell_center(fc.lower);
        const int pa = mesh.physical_axis(fc.axis);
        const double off = 0.5 * mesh.spacing(fc.axis);
        if (pa == 0) c.x += off;
        else if (pa == 1) c.y += off;
        else c.z += off;
        face_centers_[f] = c;
        links[fc.lower].push_back({int(f), 0});
        links[fc.upper].push_back({int(f), 1});
    }
    cell_face_offset_.assign(mesh.cells() + 1, 0);
    for (int c = 0; c < mesh.cells(); ++c) {
        cell_face_offset_[c + 1] = cell_face_offset_[c] + int(links[c].size());
    }
    cell_face_.reserve(cell_face_offset_.back());
    for (int c = 0; c < mesh.cells(); ++c) {
        for (auto& l : links[c]) cell_face_.push_back(l);
    }

    const auto& bfaces = mesh.boundary_faces();
    bface_centers_.resize(bfaces.size());
    std::vector<std::vector<int>> blinks(mesh.cells());
    for (size_t f = 0; f < bfaces.size(); ++f) {
        const auto& fc = bfaces[f];
        Vec3 c = mesh.cell_center(fc.cell);
        const int pa = mesh.physical_axis(fc.axis);
        const double off = 0.5 * mesh.spacing(fc.axis) * fc.side;
        if (pa == 0) c.x += off;
        else if (pa == 1) c.y += off;
        else c.z += off;
        bface_centers_[f] = c;
        blinks[fc.cell].push_back(int(f));
    }
    cell_bface_offset_.assign(mesh.cells() + 1, 0);
    for (int c = 0; c < mesh.cells(); ++c) {
        cell_bface_offset_[c + 1] = cell_bface_offset_[c] + int(blinks[c].size());
    }
    for (int c = 0; c < mesh.cells(); ++c) {
        for (int f : blinks[c]) cell_bface_.push_back(f);
    }

    cell_ids_.resize(mesh.cells());
    std::iota(cell_ids_.begin(), cell_ids_.end(), 0);
    face_ids_.resize(faces.size());
    std::iota(face_ids_.begin(), face_ids_.end(), 0);
    face_buf_.assign(faces.size() * 2 * 3 * size_t(space.nb()), 0.0);
}

void DGOperator::apply(double t, std::span<const double> state, std::span<double> rate) const {
    std::fill(rate.begin(), rate.end(), 0.0);
    apply_parts(t, state, rate, Parts{});
}

void DGOperator::apply_parts(double t, std::span<const double> state, std::span<double> rate,
                             const Parts& parts) const {
    if (state.size() != space_->dofs() || rate.size() != space_->dofs()) {
        throw std::invalid_argument("DGOperator: state/rate size mismatch");
    }
    const bool need_faces =
        (parts.advection || parts.penalty) && !velocity_.is_zero() && !space_->mesh().interior_faces().empty();
    if (need_faces) face_pass(t, state, parts);
    cell_pass(t, state, rate, parts);
    if (need_faces) gather_pass(rate);
}

void DGOperator::cell_pass(double t, std::span<const double> state, std::span<double> rate,
                           const Parts& parts) const {
    const DGSpace& sp = *space_;
    const BoxMesh& mesh = sp.mesh();
    const int nb = sp.nb();
    const int nq = sp.nq_vol();
    const int dim = mesh.dim();
    const auto phi = sp.phi_vol();
    const auto grad = sp.grad_vol();
    const auto wq = sp.w_vol();
    const auto& xq = sp.xq_vol();
    const auto& bfaces = mesh.boundary_faces();

    FieldSample fs;
    if (timeline_ && parts.reaction) fs = timeline_->field_at(t);
    const bool use_tl = timeline_ != nullptr;
    const bool has_u = !velocity_.is_zero();
    const bool do_adv = parts.advection && has_u;
    const bool u_uniform = velocity_.spatially_uniform;
    const Vec3 u_fixed = (has_u && u_uniform) ? velocity_(t, Vec3{}) : Vec3{};
    const double gamma = consts_.gamma;
    std::atomic<int> bad_cell{-1};

    std::for_each(std::execution::par, cell_ids_.begin(), cell_ids_.end(), [&](int cell) {
        const double* c = state.data() + sp.cell_offset(cell);
        double* out = rate.data() + sp.cell_offset(cell);
        const TissueParams& tp = tissue_.of(cell);
        const double r1 = 1.0 / tp.t1;
        const double r2 = 1.0 / tp.t2;
        const Vec3 center = mesh.cell_center(cell);

        for (int q = 0; q < nq; ++q) {
            const double* ph = phi.data() + std::size_t(q) * nb;
            // magnetization at the quadrature point
            double m[3] = {0.0, 0.0, 0.0};
            for (int comp = 0; comp < 3; ++comp) {
                const double* cc = c + comp * nb;
                double acc = 0.0;
                for (int n = 0; n < nb; ++n) acc += cc[n] * ph[n];
                m[comp] = acc;
            }
            double pt[3] = {0.0, 0.0, 0.0};
            const Vec3 r = center + xq[q];
            if (parts.reaction) {
                double bx = 0.0, by = 0.0, bz = 0.0;
                if (use_tl) {
                    bx = fs.b1x;
                    by = fs.b1y;
                    bz = fs.g.x * r.x + fs.g.y * r.y + fs.g.z * r.z;
                } else if (field_fn_) {
                    const Vec3 b = field_fn_(t, r);
                    bx = b.x;
                    by = b.y;
                    bz = b.z;
                }
                pt[0] = gamma * (m[1] * bz - m[2] * by) - m[0] * r2;
                pt[1] = gamma * (m[2] * bx - m[0] * bz) - m[1] * r2;
                pt[2] = gamma * (m[0] * by - m[1] * bx) + (tp.m0 - m[2]) * r1;
            }
            if (do_adv) {
                const Vec3 u = u_uniform ? u_fixed : velocity_(t, r);
                const double uu[3] = {u.x, u.y, u.z};
                for (int comp = 0; comp < 3; ++comp) {
                    const double* cc = c + comp * nb;
                    double conv = 0.0;
                    for (int a = 0; a < dim; ++a) {
                        const double ua = uu[mesh.physical_axis(a)];
                        if (ua == 0.0) continue;
                        const double* g = grad.data() + std::size_t(q) * nb * 3 + a;
                        double dm = 0.0;
                        for (int n = 0; n < nb; ++n) dm += cc[n] * g[n * 3];
                        conv += ua * dm;
                    }
                    pt[comp] -= conv;
                }
            }
            const double w = wq[q];
            for (int comp = 0; comp < 3; ++comp) {
                double* oc = out + comp * nb;
                const double wp = w * pt[comp];
                if (wp == 0.0) continue;
                for (int n = 0; n < nb; ++n) oc[n] += wp * ph[n];
            }
        }

        // boundary faces of this cell: weak inflow data on Gamma-
        if (parts.boundary && has_u) {
            for (int bi = cell_bface_offset_[cell]; bi < cell_bface_offset_[cell + 1]; ++bi) {
                const int f = cell_bface_[bi];
                const auto& bf = bfaces[f];
                const int pa = mesh.physical_axis(bf.axis);
                if (!velocity_.active[pa]) continue;
                const int nqf = sp.nq_face(bf.axis);
                const auto tr = bf.side > 0 ? sp.trace_lo(bf.axis) : sp.trace_hi(bf.axis);
                const auto wf = sp.w_face(bf.axis);
                const auto& xf = sp.xq_face(bf.axis);
                for (int q = 0; q < nqf; ++q) {
                    const Vec3 r = bface_centers_[f] + xf[q];
                    const Vec3 u = u_uniform ? u_fixed : velocity_(t, r);
                    const double un = (pa == 0 ? u.x : pa == 1 ? u.y : u.z) * bf.side;
                    const double uminus = negative_part(un);
                    if (uminus == 0.0) continue;
                    const double* ps = tr.data() + std::size_t(q) * nb;
                    const Vec3 mg = bc_.value(t, r);
                    const double mgv[3] = {mg.x, mg.y, mg.z};
                    for (int comp = 0; comp < 3; ++comp) {
                        const double* cc = c + comp * nb;
                        double mtr = 0.0;
                        for (int n = 0; n < nb; ++n) mtr += cc[n] * ps[n];
                        const double coef = -wf[q] * uminus * (mtr - mgv[comp]);
                        double* oc = out + comp * nb;
                        for (int n = 0; n < nb; ++n) oc[n] += coef * ps[n];
                    }
                }
            }
        }

        for (int i = 0; i < 3 * nb; ++i) {
            if (!std::isfinite(out[i])) {
                int expect = bad_cell.load();
                while ((expect < 0 || cell < expect) &&
                       !bad_cell.compare_exchange_weak(expect, cell)) {
                }
                break;
            }
        }
    });
    if (bad_cell.load() >= 0) {
        throw std::runtime_error("DGOperator: non-finite rate in cell " +
                                 std::to_string(bad_cell.load()) + " at t=" + std::to_string(t));
    }
}

void DGOperator::face_pass(double t, std::span<const double> state, const Parts& parts) const {
    const DGSpace& sp = *space_;
    const BoxMesh& mesh = sp.mesh();
    const int nb = sp.nb();
    const int dim = mesh.dim();
    const auto& faces = mesh.interior_faces();
    const double eps = penalty_eps_;
    const bool do_adv = parts.advection;
    const bool do_pen = parts.penalty && eps > 0.0 && sp.degree() >= 1;
    const bool u_uniform = velocity_.spatially_uniform;
    const Vec3 u_fixed = u_uniform ? velocity_(t, Vec3{}) : Vec3{};

    std::for_each(std::execution::par, face_ids_.begin(), face_ids_.end(), [&](int f) {
        double* buf = face_buf_.data() + std::size_t(f) * 2 * 3 * nb;
        std::fill(buf, buf + 2 * 3 * nb, 0.0);
        const auto& fc = faces[f];
        const int pa = mesh.physical_axis(fc.axis);
        if (!velocity_.active[pa]) return;
        const int nqf = sp.nq_face(fc.axis);
        const auto tlo = sp.trace_lo(fc.axis);
        const auto thi = sp.trace_hi(fc.axis);
        const auto wf = sp.w_face(fc.axis);
        const auto& xf = sp.xq_face(fc.axis);
        const double* cl = state.data() + sp.cell_offset(fc.lower);
        const double* cu = state.data() + sp.cell_offset(fc.upper);
        const double hE = mesh.face_h(fc.axis);
        const double pen_scale = eps * hE * hE;

        for (int q = 0; q < nqf; ++q) {
            const Vec3 r = face_centers_[f] + xf[q];
            const Vec3 u = u_uniform ? u_fixed : velocity_(t, r);
            const double un = pa == 0 ? u.x : pa == 1 ? u.y : u.z;  // normal: +axis
            if (un == 0.0 && !do_pen) continue;
            const double w = wf[q];
            const double u_in = negative_part(un);         // (|un|-un)/2
            const double u_out = 0.5 * (std::abs(un) + un);  // positive part
            const double* plo = tlo.data() + std::size_t(q) * nb;
            const double* phi_ = thi.data() + std::size_t(q) * nb;

            for (int comp = 0; comp < 3; ++comp) {
                double mlo = 0.0, mhi = 0.0;
                const double* ccl = cl + comp * nb;
                const double* ccu = cu + comp * nb;
                for (int n = 0; n < nb; ++n) mlo += ccl[n] * plo[n];
                for (int n = 0; n < nb; ++n) mhi += ccu[n] * phi_[n];
                const double jump = mlo - mhi;
                if (do_adv && un != 0.0 && jump != 0.0) {
                    // rate_L -= w * psi_L * jump * (un)^- ; rate_U += w * psi_U * jump * (un)^+
                    const double alo = -w * jump * u_in;
                    const double ahi = w * jump * u_out;
                    double* blo = buf + (0 * 3 + comp) * nb;
                    double* bhi = buf + (1 * 3 + comp) * nb;
                    if (alo != 0.0) {
                        for (int n = 0; n < nb; ++n) blo[n] += alo * plo[n];
                    }
                    if (ahi != 0.0) {
                        for (int n = 0; n < nb; ++n) bhi[n] += ahi * phi_[n];
                    }
                }
            }

            if (do_pen && un != 0.0) {
                const double pw = w * pen_scale * std::abs(un);
                const double* dlo = sp.dtrace_lo(fc.axis).data() + std::size_t(q) * nb * 3;
                const double* dhi = sp.dtrace_hi(fc.axis).data() + std::size_t(q) * nb * 3;
                for (int comp = 0; comp < 3; ++comp) {
                    const double* ccl = cl + comp * nb;
                    const double* ccu = cu + comp * nb;
                    double gj[3] = {0.0, 0.0, 0.0};
                    for (int a = 0; a < dim; ++a) {
                        double glo = 0.0, ghi = 0.0;
                        for (int n = 0; n < nb; ++n) {
                            glo += ccl[n] * dlo[n * 3 + a];
                            ghi += ccu[n] * dhi[n * 3 + a];
                        }
                        gj[a] = glo - ghi;
                    }
                    double* blo = buf + (0 * 3 + comp) * nb;
                    double* bhi = buf + (1 * 3 + comp) * nb;
                    for (int n = 0; n < nb; ++n) {
                        double slo = 0.0, shi = 0.0;
                        for (int a = 0; a < dim; ++a) {
                            slo += gj[a] * dlo[n * 3 + a];
                            shi += gj[a] * dhi[n * 3 + a];
                        }
                        blo[n] -= pw * slo;
                        bhi[n] += pw * shi;
                    }
                }
            }
        }
    });
}

void DGOperator::gather_pass(std::span<double> rate) const {
    const DGSpace& sp = *space_;
    const int nb = sp.nb();
    std::for_each(std::execution::par, cell_ids_.begin(), cell_ids_.end(), [&](int cell) {
        double* out = rate.data() + sp.cell_offset(cell);
        for (int i = cell_face_offset_[cell]; i < cell_face_offset_[cell + 1]; ++i) {
            const auto [f, side] = cell_face_[i];
            const double* buf = face_buf_.data() + (std::size_t(f) * 2 + side) * 3 * nb;
            for (int j = 0; j < 3 * nb; ++j) out[j] += buf[j];
        }
    });
}

DGOperator::BoundaryEnergy DGOperator::boundary_energy(double t,
                                                       std::span<const double> state) const {
    const DGSpace& sp = *space_;
    const BoxMesh& mesh = sp.mesh();
    const int nb = sp.nb();
    BoundaryEnergy be;
    if (velocity_.is_zero()) return be;
    const auto& bfaces = mesh.boundary_faces();
    for (size_t f = 0; f < bfaces.size(); ++f) {
        const auto& bf = bfaces[f];
        const int pa = mesh.physical_axis(bf.axis);
        if (!velocity_.active[pa]) continue;
        const int nqf = sp.nq_face(bf.axis);
        const auto tr = bf.side > 0 ? sp.trace_lo(bf.axis) : sp.trace_hi(bf.axis);
        const auto wf = sp.w_face(bf.axis);
        const auto& xf = sp.xq_face(bf.axis);
        const double* c = state.data() + sp.cell_offset(bf.cell);
        for (int q = 0; q < nqf; ++q) {
            const Vec3 r = bface_centers_[f] + xf[q];
            const Vec3 u = velocity_(t, r);
            const double un = (pa == 0 ? u.x : pa == 1 ? u.y : u.z) * bf.side;
            if (un == 0.0) continue;
            const double* ps = tr.data() + std::size_t(q) * nb;
            if (un > 0.0) {
                double m2 = 0.0;
                for (int comp = 0; comp < 3; ++comp) {
                    const double* cc = c + comp * nb;
                    double v = 0.0;
                    for (int n = 0; n < nb; ++n) v += cc[n] * ps[n];
                    m2 += v * v;
                }
                be.outflow_m2 += wf[q] * un * m2;
            } else {
                const Vec3 mg = bc_.value(t, r);
                be.inflow_data2 += wf[q] * (-un) * dot(mg, mg);
            }
        }
    }
    return be;
}

double DGOperator::max_speed(double t) const {
    if (velocity_.is_zero()) return 0.0;
    const BoxMesh& mesh = space_->mesh();
    double m = 0.0;
    for (int cell = 0; cell < mesh.cells(); ++cell) {
        m = std::max(m, norm(velocity_(t, mesh.cell_center(cell))));
    }
    return m;
}

}  // namespace blochdg
