#pragma once

// Two-scale expansion machinery for eigenvalues of the thin-strip
// operator: first transverse correctors, the interaction matrix L of a
// multiple limiting eigenvalue with its eigenvalue corrections, the
// reduced solves on the orthogonal complement of the eigenspace, the
// second-order corrections, and the a-posteriori residual of the
// truncated expansion applied to the assembled strip operator.
//
// Conventions used throughout (derived from the recurrent cell hierarchy;
// the ingredients entering the order-two correction):
//   phi^(1) = T6 phi + Phi^(1),            Phi^(1) = Psi^(1) + sum b1_{ks} phi_s
//   phi^(2) = T7 phi + T6 Phi^(1) + Phi^(2),   with Phi^(2) chosen 0
//   phi^(3) = tilde3 + T7 Phi^(1) + T6 Phi^(2)
// where T7 psi solves the flux cell problem with volume data
//   dnu^*(dxi T6 psi) + (T5 - lambda0) psi  and face flux dnu(T6 psi),
// and tilde3 solves it with volume data
//   dnu^*(dxi T7 phi) + (T5 - lambda0)(T6 phi) - Lambda1 phi
// and face flux dnu(T7 phi).  The compatibility defects of the individual
// flux solves equal reduced-equation residuals and cancel in the sum; they
// are recorded, never repaired.

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <vector>

#include "thinspec/assemble.hpp"
#include "thinspec/cell.hpp"
#include "thinspec/eigen_solvers.hpp"
#include "thinspec/fd.hpp"
#include "thinspec/spectral.hpp"

namespace thinspec::asym {

using cplx = std::complex<double>;
using Line = std::vector<cplx>;        // one value per x-node (full grid)
using RealLine = std::vector<double>;
using Field = std::vector<cplx>;       // (a, q) row-major, q the transverse node
using model::CoefficientSet;

struct CellFieldSet {
    std::vector<cell::Profile> profile;  // per x-node evaluator
    Field values;
    Field dxi;
    Line sres;  // compatibility defect per x-node (reduced-equation residual)
};

// Coefficient samples and transverse machinery shared by all modes of a
// cluster.  Holds the quadrature rule the stored profiles point into.
class Workspace {
public:
    Workspace(CoefficientSet cs, std::vector<double> xs_, int quad_panels)
        : cs_(std::move(cs)), xs(std::move(xs_)), quad(cell::make_rule(quad_panels)) {
        Nx = static_cast<int>(xs.size());
        Nq = quad.size();
        hx = xs[1] - xs[0];
        alpha.resize(Nx);
        a12.assign(static_cast<std::size_t>(Nx) * Nq, 0.0);
        a22.assign(a12.size(), 0.0);
        a1.assign(a12.size(), cplx(0.0));
        a2.assign(a12.size(), cplx(0.0));
        a0.assign(a12.size(), cplx(0.0));
        a11h.assign(static_cast<std::size_t>(Nx - 1) * Nq, 0.0);
        for (int a = 0; a < Nx; ++a) {
            alpha[a] = cs_.eval_alpha(xs[a]);
            for (int q = 0; q < Nq; ++q) {
                double xi = quad.xi[q];
                a12[id(a, q)] = cs_.eval_aij(0, 1, xs[a], xi).real();
                a22[id(a, q)] = cs_.eval_aij(1, 1, xs[a], xi).real();
                a1[id(a, q)] = cs_.eval_aj(0, xs[a], xi);
                a2[id(a, q)] = cs_.eval_aj(1, xs[a], xi);
                a0[id(a, q)] = cs_.eval_a0(xs[a], xi);
            }
        }
        for (int a = 0; a + 1 < Nx; ++a)
            for (int q = 0; q < Nq; ++q)
                a11h[id(a, q)] = cs_.eval_aij(0, 0, 0.5 * (xs[a] + xs[a + 1]), quad.xi[q]).real();
        gprof.reserve(Nx);
        for (int a = 0; a < Nx; ++a) gprof.push_back(cell::cell_profiles(cs_, xs[a], quad));
    }

    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;

    int id(int a, int q) const { return a * Nq + q; }

    // tangential derivative of a field, fourth order, per transverse node
    Field dx4(const Field& f) const {
        Field out(f.size());
        Line col(Nx);
        for (int q = 0; q < Nq; ++q) {
            for (int a = 0; a < Nx; ++a) col[a] = f[id(a, q)];
            auto d = fd::dx4_line(col, hx);
            for (int a = 0; a < Nx; ++a) out[id(a, q)] = d[a];
        }
        return out;
    }

    Line dx4_line(const Line& f) const { return fd::dx4_line(f, hx); }

    // tangential second-order expression per transverse node, flux form on
    // the same stencils as the assembled operators; zero at the line ends
    Field t5(const Field& f) const {
        Field out(f.size(), cplx(0.0));
        for (int q = 0; q < Nq; ++q) {
            for (int a = 1; a + 1 < Nx; ++a) {
                cplx um = f[id(a - 1, q)], uc = f[id(a, q)], up = f[id(a + 1, q)];
                double dl = a11h[id(a - 1, q)], dr = a11h[id(a, q)];
                cplx v = -(dr * (up - uc) - dl * (uc - um)) / (hx * hx);
                cplx g1 = a1[id(a, q)];
                v += g1 * (up - um) / (2.0 * hx);
                v -= (std::conj(a1[id(a + 1, q)]) * up - std::conj(a1[id(a - 1, q)]) * um) /
                     (2.0 * hx);
                v += a0[id(a, q)] * uc;
                out[id(a, q)] = v;
            }
        }
        return out;
    }

    // face-flux expression  a12 d/dx + conj(a2) + i alpha
    Field dnu(const Field& f) const {
        Field d = dx4(f);
        Field out(f.size());
        for (int a = 0; a < Nx; ++a)
            for (int q = 0; q < Nq; ++q)
                out[id(a, q)] = a12[id(a, q)] * d[id(a, q)] +
                                (std::conj(a2[id(a, q)]) + cplx(0.0, alpha[a])) * f[id(a, q)];
        return out;
    }

    // adjoint-side expression  -a12 d/dx + a2 + i alpha
    Field dnu_star(const Field& f) const {
        Field d = dx4(f);
        Field out(f.size());
        for (int a = 0; a < Nx; ++a)
            for (int q = 0; q < Nq; ++q)
                out[id(a, q)] = -a12[id(a, q)] * d[id(a, q)] +
                                (a2[id(a, q)] + cplx(0.0, alpha[a])) * f[id(a, q)];
        return out;
    }

    Field broadcast(const Line& psi) const {
        Field out(static_cast<std::size_t>(Nx) * Nq);
        for (int a = 0; a < Nx; ++a)
            for (int q = 0; q < Nq; ++q) out[id(a, q)] = psi[a];
        return out;
    }

    Field t6_of(const Line& psi, const Line& dpsi) const {
        Field out(static_cast<std::size_t>(Nx) * Nq);
        for (int a = 0; a < Nx; ++a)
            for (int q = 0; q < Nq; ++q)
                out[id(a, q)] = gprof[a].G1[q] * dpsi[a] + gprof[a].G0[q] * psi[a];
        return out;
    }

    Field dxi_t6_of(const Line& psi, const Line& dpsi) const {
        Field out(static_cast<std::size_t>(Nx) * Nq);
        for (int a = 0; a < Nx; ++a)
            for (int q = 0; q < Nq; ++q)
                out[id(a, q)] = gprof[a].dG1[q] * dpsi[a] + gprof[a].dG0[q] * psi[a];
        return out;
    }

    // transverse flux solve at every x-node
    CellFieldSet flux_solve(const Field& fvol, const Field& theta) const {
        CellFieldSet set;
        set.values.assign(fvol.size(), cplx(0.0));
        set.dxi.assign(fvol.size(), cplx(0.0));
        set.sres.assign(Nx, cplx(0.0));
        set.profile.resize(Nx);
        std::vector<double> ann(Nq);
        std::vector<cplx> fv(Nq), th(Nq);
        for (int a = 0; a < Nx; ++a) {
            for (int q = 0; q < Nq; ++q) {
                ann[q] = a22[id(a, q)];
                fv[q] = fvol[id(a, q)];
                th[q] = theta[id(a, q)];
            }
            auto sol = cell::cell_solve_flux(ann, fv, th, quad);
            for (int q = 0; q < Nq; ++q) {
                set.values[id(a, q)] = sol.phi[q];
                set.dxi[id(a, q)] = sol.dphi[q];
            }
            set.profile[a] = sol.profile;
            set.sres[a] = sol.volume_residual;
        }
        return set;
    }

    Line xi_integral(const Field& f) const {
        Line out(Nx, cplx(0.0));
        for (int a = 0; a < Nx; ++a) {
            cplx s(0.0);
            for (int q = 0; q < Nq; ++q) s += quad.w[q] * f[id(a, q)];
            out[a] = s;
        }
        return out;
    }

    // inner product over the cell cylinder, conjugation on the second slot
    cplx omega_dot(const Field& f, const Field& g) const {
        cplx s(0.0);
        for (int a = 0; a < Nx; ++a)
            for (int q = 0; q < Nq; ++q) s += quad.w[q] * f[id(a, q)] * std::conj(g[id(a, q)]);
        return hx * s;
    }

    cplx x_dot(const Line& f, const RealLine& g) const {
        cplx s(0.0);
        for (int a = 0; a < Nx; ++a) s += f[a] * g[a];
        return hx * s;
    }

    const CoefficientSet& cs() const { return cs_; }

    CoefficientSet cs_;
    std::vector<double> xs;
    cell::QuadRule quad;
    int Nx = 0, Nq = 0;
    double hx = 0.0;
    RealLine alpha;
    std::vector<double> a12, a22, a11h;
    std::vector<cplx> a1, a2, a0;
    std::vector<cell::CellProfiles> gprof;
};

struct ModeData {
    RealLine phi;        // limiting eigenvector, unit in the weighted x-norm
    Line dphi;
    Field t6phi, dxi_t6phi;
    Field theta;         // face flux expression applied to the first profile
    Field t5phi;         // (T5 - lambda0) phi as a field
    Field t5t6phi;       // T5 applied to the first profile
    CellFieldSet t7phi;  // second-order transverse piece attached to phi
    Line h1;
    // second-order ingredients
    Line Psi1, dPsi1;
    Field t6Psi, dxi_t6Psi;
    CellFieldSet t7Psi;
    CellFieldSet tilde3;
    Line hcheck2;
};

struct AsymptoticExpansion {
    double lambda0 = 0.0;
    int m = 0;
    Eigen::MatrixXcd L;
    double L_herm_residual = 0.0;
    double L_route_gap = 0.0;  // symmetrized vs direct evaluation, a consistency diagnostic
    bool degenerate = false;
    std::vector<double> Lambda1;
    std::vector<double> Lambda2;      // filled by second_order
    Eigen::MatrixXcd b1;              // off-diagonal mixing, second order
    std::vector<ModeData> modes;
    std::shared_ptr<Workspace> ws;
    double limiting_consistency = 0.0;  // max reduced-equation defect seen
    double solvability_defect = 0.0;    // eigenspace component removed before the Psi solves
    bool has_second_order = false;
};

// ---------------------------------------------------------------- cluster

struct Cluster {
    double lambda0 = 0.0;
    std::vector<RealLine> phik;  // full-grid lines, hx-weighted orthonormal
};

// Eigenvalues of the limiting matrix within cluster_tol of the one nearest
// sigma, with real orthonormal eigenvectors.  Members are peeled one at a
// time, deflating the found directions, so no tightly clustered state far
// from the shift ever needs to be resolved to full tolerance.
inline Cluster find_cluster(const disc::DiscreteOperator& M0, cplx sigma, double hx,
                            double cluster_tol = 1e-6, int max_m = 4, double tol = 1e-10) {
    const int n = M0.dim();
    auto opts = spectral::default_arnoldi(tol);
    auto first = solvers::shift_invert_arnoldi(M0.M, sigma, 1, opts);
    cplx anchor = first[0].lambda;
    double scale = 1.0 + std::abs(anchor);

    std::vector<Eigen::VectorXcd> vecs{first[0].v};
    std::vector<cplx> lams{anchor};
    cplx sigma2 = anchor + 0.37 * std::max(cluster_tol, 1e-9) * scale;

    while (static_cast<int>(vecs.size()) < max_m + 1) {
        Eigen::MatrixXcd Q(n, vecs.size());
        for (std::size_t j = 0; j < vecs.size(); ++j) {
            Eigen::VectorXcd v = vecs[j];
            for (std::size_t i = 0; i < j; ++i) v -= Q.col(i) * Q.col(i).dot(v);
            Q.col(j) = v / v.norm();
        }
        auto probe_opts = opts;
        probe_opts.deflate0 = &Q;
        probe_opts.tol = std::min(1e-6, cluster_tol);
        probe_opts.max_restarts = 12;
        solvers::RitzPair cand;
        try {
            cand = solvers::shift_invert_arnoldi(M0.M, sigma2, 1, probe_opts)[0];
        } catch (const convergence_error&) {
            break;  // nothing further reachable near the cluster
        }
        if (std::abs(cand.lambda - anchor) - 10.0 * cand.residual > cluster_tol * scale) break;
        if (cand.residual > tol) {
            auto strict_opts = opts;
            strict_opts.deflate0 = &Q;
            cand = solvers::shift_invert_arnoldi(M0.M, sigma2, 1, strict_opts)[0];
        }
        if (std::abs(cand.lambda - anchor) > cluster_tol * scale) break;
        vecs.push_back(cand.v);
        lams.push_back(cand.lambda);
    }
    if (static_cast<int>(vecs.size()) > max_m)
        throw degeneracy_error("asymptote.find_cluster: cluster larger than the supported "
                               "multiplicity");

    Cluster cl;
    for (std::size_t j = 0; j < vecs.size(); ++j) {
        // rotate the phase away and take the real part
        const auto& pv = vecs[j];
        int imax = 0;
        for (int i = 1; i < n; ++i)
            if (std::abs(pv[i]) > std::abs(pv[imax])) imax = i;
        cplx phase = pv[imax] / std::abs(pv[imax]);
        Eigen::VectorXcd v = pv / phase;
        if (v.imag().norm() > 1e-6 * v.norm())
            throw error("asymptote.find_cluster: limiting eigenvector not real after "
                        "phase alignment; matrix not Hermitian enough");
        RealLine line(n + 2, 0.0);
        for (int i = 0; i < n; ++i) line[i + 1] = v[i].real();
        cl.phik.push_back(std::move(line));
    }
    // hx-weighted Gram-Schmidt
    for (std::size_t k = 0; k < cl.phik.size(); ++k) {
        auto& vk = cl.phik[k];
        for (std::size_t j = 0; j < k; ++j) {
            double g = 0.0;
            for (std::size_t i = 0; i < vk.size(); ++i) g += vk[i] * cl.phik[j][i];
            g *= hx;
            for (std::size_t i = 0; i < vk.size(); ++i) vk[i] -= g * cl.phik[j][i];
        }
        double nn = 0.0;
        for (double v : vk) nn += v * v;
        nn = std::sqrt(hx * nn);
        if (nn < 1e-12)
            throw degeneracy_error("asymptote.find_cluster: defective cluster basis");
        for (double& v : vk) v /= nn;
    }
    cplx mean(0.0);
    for (auto l : lams) mean += l;
    mean /= static_cast<double>(lams.size());
    cl.lambda0 = mean.real();
    return cl;
}

// -------------------------------------------------------------- first order

namespace detail {

inline Line to_line(const RealLine& r) {
    Line out(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) out[i] = r[i];
    return out;
}

// first-order pipeline for one line: transverse profiles and h^(1)
inline void first_order_mode(const Workspace& ws, double lambda0, ModeData& md) {
    Line phi = to_line(md.phi);
    md.dphi = ws.dx4_line(phi);
    md.t6phi = ws.t6_of(phi, md.dphi);
    md.dxi_t6phi = ws.dxi_t6_of(phi, md.dphi);

    md.t5phi = ws.t5(ws.broadcast(phi));
    Field rho = md.t5phi;
    for (int a = 0; a < ws.Nx; ++a)
        for (int q = 0; q < ws.Nq; ++q) rho[ws.id(a, q)] -= lambda0 * phi[a];
    Field xi_part = ws.dnu_star(md.dxi_t6phi);
    Field fvol(rho.size());
    for (std::size_t i = 0; i < fvol.size(); ++i) fvol[i] = xi_part[i] + rho[i];
    md.theta = ws.dnu(md.t6phi);
    md.t7phi = ws.flux_solve(fvol, md.theta);

    Field inner = ws.dnu_star(md.t7phi.dxi);
    md.t5t6phi = ws.t5(md.t6phi);
    Field sum(inner.size());
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = inner[i] + md.t5t6phi[i];
    Line integral = ws.xi_integral(sum);
    md.h1.assign(ws.Nx, cplx(0.0));
    for (int a = 0; a < ws.Nx; ++a) md.h1[a] = -integral[a];
}

// Interaction matrix entry in integrated-by-parts form (all products
// bilinear, no conjugation):
//   L_ks = II[ d_k Theta_s + Theta_k d_s + (T5 - lambda0) phi_k phihat_s
//              + (T5 phihat_k) phi_s
//              + (dA21/dx + 2i Im A2)(dcheck_k phi_s + d_k phihat_s) ]
// with d = d/dxi of the first profile and dcheck = d/dxi of the second.
// The conjugate swap k <-> s maps every term into itself through the
// transverse parities of the profiles and the transpose symmetry of the
// tangential stencil, so for real-coefficient problems with x-independent
// mixing the evaluation is Hermitian to rounding; otherwise it agrees with
// the direct route up to the discretization gap.
inline cplx l_entry_sym(const Workspace& ws, double lambda0, const ModeData& mk,
                        const ModeData& ms, const Field& db_field) {
    cplx v(0.0);
    for (int a = 0; a < ws.Nx; ++a)
        for (int q = 0; q < ws.Nq; ++q) {
            int i = ws.id(a, q);
            cplx t = mk.dxi_t6phi[i] * ms.theta[i] + mk.theta[i] * ms.dxi_t6phi[i];
            t += (mk.t5phi[i] - lambda0 * mk.phi[a]) * ms.t6phi[i];
            t += mk.t5t6phi[i] * ms.phi[a];
            cplx junk = db_field[i] + cplx(0.0, 2.0 * ws.a2[i].imag());
            t += junk * (mk.t7phi.dxi[i] * ms.phi[a] + mk.dxi_t6phi[i] * ms.t6phi[i]);
            v += ws.quad.w[q] * t;
        }
    return ws.hx * v;
}

} // namespace detail

// Reduced solve: (M0 - lambda0) Psi = rhs on the orthogonal complement of
// span{phik}, via a bordered system.  rhs must already be orthogonal to
// every phi_s (that is the solvability of the reduced equation).
inline Line solve_reduced(const disc::DiscreteOperator& M0, double lambda0,
                          const std::vector<RealLine>& phik, const Line& rhs, double hx,
                          double ortho_tol = 1e-8) {
    const int n = M0.dim();
    const int m = static_cast<int>(phik.size());
    if (static_cast<int>(rhs.size()) != n + 2)
        throw error("asymptote.solve_reduced: rhs must be a full grid line");

    double rhs_norm = 0.0;
    for (const auto& v : rhs) rhs_norm += std::norm(v);
    rhs_norm = std::sqrt(hx * rhs_norm);
    for (int s = 0; s < m; ++s) {
        cplx g(0.0);
        for (int i = 0; i < n + 2; ++i) g += rhs[i] * phik[s][i];
        g *= hx;
        if (std::abs(g) > ortho_tol * std::max(1.0, rhs_norm))
            throw solvability_error(
                "asymptote.solve_reduced: rhs not orthogonal to the eigenspace, |(rhs,phi_" +
                std::to_string(s) + ")| = " + std::to_string(std::abs(g)));
    }

    std::vector<Eigen::Triplet<cplx>> trip;
    for (int k = 0; k < M0.M.outerSize(); ++k)
        for (disc::SpMat::InnerIterator it(M0.M, k); it; ++it) {
            cplx v = it.value();
            if (it.row() == it.col()) v -= lambda0;
            trip.emplace_back(it.row(), it.col(), v);
        }
    for (int s = 0; s < m; ++s)
        for (int i = 0; i < n; ++i) {
            if (phik[s][i + 1] == 0.0) continue;
            trip.emplace_back(i, n + s, cplx(phik[s][i + 1]));
            trip.emplace_back(n + s, i, cplx(phik[s][i + 1]));
        }
    disc::SpMat B(n + m, n + m);
    B.setFromTriplets(trip.begin(), trip.end());
    B.makeCompressed();
    Eigen::SparseLU<disc::SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(B);
    lu.factorize(B);
    if (lu.info() != Eigen::Success)
        throw error("asymptote.solve_reduced: bordered factorization failed");
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(n + m);
    for (int i = 0; i < n; ++i) b[i] = rhs[i + 1];
    Eigen::VectorXcd sol = lu.solve(b);

    Line out(n + 2, cplx(0.0));
    for (int i = 0; i < n; ++i) out[i + 1] = sol[i];
    // hygiene: exact deflation of the eigenspace components
    for (int s = 0; s < m; ++s) {
        cplx g(0.0);
        for (int i = 0; i < n + 2; ++i) g += out[i] * phik[s][i];
        g *= hx;
        for (int i = 0; i < n + 2; ++i) out[i] -= g * phik[s][i];
    }
    return out;
}

// The mean-zero first corrector field  sum_j G_j d(phi)/dx_j + G_0 phi.
inline Field t6_apply(const Workspace& ws, const Line& phi, const Line& dphi) {
    return ws.t6_of(phi, dphi);
}

// First-order expansion of the cluster nearest sigma: interaction matrix,
// its eigenvalues, the rotated eigenbasis, and the reduced solutions.
inline AsymptoticExpansion assemble_L(const CoefficientSet& cs,
                                      const disc::DiscreteOperator& M0,
                                      const std::vector<double>& xs, int quad_panels,
                                      cplx sigma, double cluster_tol = 1e-6,
                                      double degeneracy_tol = 1e-8) {
    AsymptoticExpansion ex;
    ex.ws = std::make_shared<Workspace>(cs, xs, quad_panels);
    auto& ws = *ex.ws;

    auto cl = find_cluster(M0, sigma, ws.hx, cluster_tol);
    ex.lambda0 = cl.lambda0;
    ex.m = static_cast<int>(cl.phik.size());

    std::vector<ModeData> raw(ex.m);
    for (int k = 0; k < ex.m; ++k) {
        raw[k].phi = cl.phik[k];
        detail::first_order_mode(ws, ex.lambda0, raw[k]);
    }

    Field db_field(static_cast<std::size_t>(ws.Nx) * ws.Nq);
    {
        Field bf(db_field.size());
        for (std::size_t i = 0; i < bf.size(); ++i) bf[i] = ws.a12[i];
        db_field = ws.dx4(bf);
    }
    ex.L.resize(ex.m, ex.m);
    Eigen::MatrixXcd L_direct(ex.m, ex.m);
    for (int k = 0; k < ex.m; ++k)
        for (int s = 0; s < ex.m; ++s) {
            ex.L(k, s) = detail::l_entry_sym(ws, ex.lambda0, raw[k], raw[s], db_field);
            L_direct(k, s) = -ws.x_dot(raw[k].h1, cl.phik[s]);
        }
    double ln = ex.L.norm();
    ex.L_herm_residual = ln > 0 ? (ex.L - ex.L.adjoint()).norm() / ln : 0.0;
    ex.L_route_gap = (ex.L - L_direct).norm() / std::max(ln, 1e-300);

    for (int k = 0; k < ex.m; ++k)
        ex.limiting_consistency =
            std::max(ex.limiting_consistency,
                     std::abs(*std::max_element(raw[k].t7phi.sres.begin(), raw[k].t7phi.sres.end(),
                                                [](cplx a, cplx b) {
                                                    return std::abs(a) < std::abs(b);
                                                })));

    // diagonalize the Hermitian part and rotate the basis
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (ex.L + ex.L.adjoint()));
    Eigen::MatrixXcd U = es.eigenvectors();
    ex.Lambda1.resize(ex.m);
    for (int k = 0; k < ex.m; ++k) ex.Lambda1[k] = es.eigenvalues()[k];

    // rotate the real basis; eigenvector phases are arbitrary, so align the
    // dominant component with the real axis first
    Eigen::MatrixXd Ur(ex.m, ex.m);
    for (int k = 0; k < ex.m; ++k) {
        int imax = 0;
        for (int s = 1; s < ex.m; ++s)
            if (std::abs(U(s, k)) > std::abs(U(imax, k))) imax = s;
        cplx phase = U(imax, k) / std::abs(U(imax, k));
        for (int s = 0; s < ex.m; ++s) Ur(s, k) = (U(s, k) / phase).real();
    }
    // re-orthonormalize the real rotation (exact when the imaginary parts
    // are rounding-level, which they are for a Hermitian-part eigenbasis)
    for (int k = 0; k < ex.m; ++k) {
        for (int j = 0; j < k; ++j) Ur.col(k) -= Ur.col(j).dot(Ur.col(k)) * Ur.col(j);
        double nn = Ur.col(k).norm();
        if (nn < 0.5)
            throw degeneracy_error("asymptote.assemble_L: rotation defective after phase "
                                   "alignment");
        Ur.col(k) /= nn;
    }

    ex.modes.resize(ex.m);
    for (int k = 0; k < ex.m; ++k) {
        RealLine phi(cl.phik[0].size(), 0.0);
        for (int s = 0; s < ex.m; ++s)
            for (std::size_t i = 0; i < phi.size(); ++i) phi[i] += Ur(s, k) * cl.phik[s][i];
        ex.modes[k].phi = std::move(phi);
        detail::first_order_mode(ws, ex.lambda0, ex.modes[k]);
    }

    for (int k = 0; k < ex.m && ex.m > 1; ++k)
        for (int s = k + 1; s < ex.m; ++s)
            if (std::abs(ex.Lambda1[k] - ex.Lambda1[s]) <
                degeneracy_tol * std::max(1.0, std::abs(ex.Lambda1[k])))
                ex.degenerate = true;

    // reduced solutions of the first-order equations; the solvability
    // defect left by a non-Hermitian part of L is recorded and removed
    std::vector<RealLine> basis(ex.m);
    for (int k = 0; k < ex.m; ++k) basis[k] = ex.modes[k].phi;
    for (int k = 0; k < ex.m; ++k) {
        Line rhs(ws.Nx, cplx(0.0));
        for (int a = 0; a < ws.Nx; ++a)
            rhs[a] = ex.modes[k].h1[a] + ex.Lambda1[k] * ex.modes[k].phi[a];
        for (int s = 0; s < ex.m; ++s) {
            cplx gproj = ws.x_dot(rhs, basis[s]);
            ex.solvability_defect = std::max(ex.solvability_defect, std::abs(gproj));
            for (int a = 0; a < ws.Nx; ++a) rhs[a] -= gproj * basis[s][a];
        }
        // a residual component of size O(hx^2) is the consistency gap
        // between the profile machinery and the assembled stencils; only a
        // defect far beyond that signals broken bookkeeping
        if (ex.solvability_defect > 1e-3 * std::max(1.0, std::abs(ex.lambda0)))
            throw solvability_error(
                "asymptote.assemble_L: first-order solvability defect " +
                std::to_string(ex.solvability_defect) + "; interaction matrix far from Hermitian");
        ex.modes[k].Psi1 = solve_reduced(M0, ex.lambda0, basis, rhs, ws.hx);
        ex.modes[k].dPsi1 = ws.dx4_line(ex.modes[k].Psi1);
        ex.modes[k].t6Psi = ws.t6_of(ex.modes[k].Psi1, ex.modes[k].dPsi1);
        ex.modes[k].dxi_t6Psi = ws.dxi_t6_of(ex.modes[k].Psi1, ex.modes[k].dPsi1);
    }
    return ex;
}

// -------------------------------------------------------------- second order

// Second corrections Lambda2 and the off-diagonal mixing coefficients.
inline std::vector<double> lambda2(AsymptoticExpansion& ex, double degeneracy_tol = 1e-8,
                                   double im_tol = 1e-6) {
    if (ex.degenerate)
        throw degeneracy_error("asymptote.lambda2: coinciding first corrections; "
                               "the second-order formulas are not applicable");
    auto& ws = *ex.ws;
    ex.Lambda2.assign(ex.m, 0.0);
    ex.b1 = Eigen::MatrixXcd::Zero(ex.m, ex.m);

    for (int k = 0; k < ex.m; ++k) {
        auto& md = ex.modes[k];
        Line phi = detail::to_line(md.phi);

        // transverse solve attached to Psi^(1)
        {
            Field rho = ws.t5(ws.broadcast(md.Psi1));
            for (int a = 0; a < ws.Nx; ++a)
                for (int q = 0; q < ws.Nq; ++q)
                    rho[ws.id(a, q)] -= ex.lambda0 * md.Psi1[a];
            Field xi_part = ws.dnu_star(md.dxi_t6Psi);
            Field fvol(rho.size());
            for (std::size_t i = 0; i < fvol.size(); ++i) fvol[i] = xi_part[i] + rho[i];
            Field theta = ws.dnu(md.t6Psi);
            md.t7Psi = ws.flux_solve(fvol, theta);
        }

        // third-order transverse piece attached to phi
        {
            Field xi_part = ws.dnu_star(md.t7phi.dxi);
            Field rho = ws.t5(md.t6phi);
            for (int a = 0; a < ws.Nx; ++a)
                for (int q = 0; q < ws.Nq; ++q) {
                    rho[ws.id(a, q)] -= ex.lambda0 * md.t6phi[ws.id(a, q)];
                    rho[ws.id(a, q)] -= ex.Lambda1[k] * phi[a];
                }
            Field fvol(rho.size());
            for (std::size_t i = 0; i < fvol.size(); ++i) fvol[i] = xi_part[i] + rho[i];
            Field theta = ws.dnu(md.t7phi.values);
            md.tilde3 = ws.flux_solve(fvol, theta);
        }

        // hcheck^(2) = -int [ dnu*(dxi(tilde3 + T7 Psi)) + T5(T7 phi + T6 Psi) ]
        Field dsum(md.tilde3.dxi.size());
        for (std::size_t i = 0; i < dsum.size(); ++i)
            dsum[i] = md.tilde3.dxi[i] + md.t7Psi.dxi[i];
        Field part1 = ws.dnu_star(dsum);
        Field vsum(md.t7phi.values.size());
        for (std::size_t i = 0; i < vsum.size(); ++i)
            vsum[i] = md.t7phi.values[i] + md.t6Psi[i];
        Field part2 = ws.t5(vsum);
        for (std::size_t i = 0; i < part1.size(); ++i) part1[i] += part2[i];
        Line integral = ws.xi_integral(part1);
        md.hcheck2.assign(ws.Nx, cplx(0.0));
        for (int a = 0; a < ws.Nx; ++a) md.hcheck2[a] = -integral[a];

        cplx lam2 = -ws.x_dot(md.hcheck2, md.phi);
        if (std::abs(lam2.imag()) > im_tol * (1.0 + std::abs(lam2)))
            throw error("asymptote.lambda2: second correction has a non-negligible "
                        "imaginary part " +
                        std::to_string(lam2.imag()));
        ex.Lambda2[k] = lam2.real();
    }

    for (int k = 0; k < ex.m; ++k)
        for (int s = 0; s < ex.m; ++s) {
            if (s == k) continue;
            double gap = ex.Lambda1[s] - ex.Lambda1[k];
            if (std::abs(gap) < degeneracy_tol * std::max(1.0, std::abs(ex.Lambda1[k])))
                throw degeneracy_error("asymptote.lambda2: vanishing gap in a mixing "
                                       "denominator");
            ex.b1(k, s) = ws.x_dot(ex.modes[k].hcheck2, ex.modes[s].phi) / gap;
        }
    ex.has_second_order = true;
    return ex.Lambda2;
}

// ------------------------------------------------------------- residuals

// Relative residual of the order-N truncated expansion under the assembled
// strip operator.  The eigenvalue is truncated two orders behind the
// eigenfunction, matching the a-priori estimate for the defect.
inline double residual_check(const AsymptoticExpansion& ex, int k,
                             const disc::DiscreteOperator& op, int N) {
    if (N < 1 || N > 3) throw error("asymptote.residual_check: N in {1,2,3}");
    if (N >= 3 && !ex.has_second_order)
        throw error("asymptote.residual_check: order-three fields need the second-order "
                    "pass; call lambda2 first");
    const auto& ws = *ex.ws;
    const disc::Grid& g = op.grid;
    if (g.Nx != ws.Nx)
        throw error("asymptote.residual_check: strip grid must match the expansion grid");
    const auto& md = ex.modes[k];

    // Phi^(1) = Psi^(1) + sum_{s != k} b1_{ks} phi_s  (absent before second order)
    Line Phi1(ws.Nx, cplx(0.0));
    for (int a = 0; a < ws.Nx; ++a) Phi1[a] = md.Psi1[a];
    if (ex.has_second_order)
        for (int s = 0; s < ex.m; ++s) {
            if (s == k) continue;
            for (int a = 0; a < ws.Nx; ++a) Phi1[a] += ex.b1(k, s) * ex.modes[s].phi[a];
        }
    Line dPhi1 = ws.dx4_line(Phi1);

    double eps = g.eps;
    std::vector<cplx> field(static_cast<std::size_t>(g.Nx) * g.Nt, cplx(0.0));
    for (int a = 0; a < g.Nx; ++a) {
        for (int m2 = 0; m2 < g.Nt; ++m2) {
            double xi = g.xi_of(m2);
            cplx v = md.phi[a];
            if (N >= 1) {
                cplx p1 = ws.gprof[a].G1p.eval(xi) * md.dphi[a] +
                          ws.gprof[a].G0p.eval(xi) * md.phi[a] + Phi1[a];
                v += eps * p1;
            }
            if (N >= 2) {
                cplx p2 = md.t7phi.profile[a].eval(xi) + ws.gprof[a].G1p.eval(xi) * dPhi1[a] +
                          ws.gprof[a].G0p.eval(xi) * Phi1[a];
                v += eps * eps * p2;
            }
            if (N >= 3) {
                cplx p3 = md.tilde3.profile[a].eval(xi) + md.t7Psi.profile[a].eval(xi);
                if (ex.has_second_order)
                    for (int s = 0; s < ex.m; ++s) {
                        if (s == k) continue;
                        p3 += ex.b1(k, s) * ex.modes[s].t7phi.profile[a].eval(xi);
                    }
                v += eps * eps * eps * p3;
            }
            field[g.node(a, m2)] = v;
        }
    }

    cplx lam = ex.lambda0;
    if (N >= 3) lam += eps * ex.Lambda1[k];

    Eigen::VectorXcd vec = op.field_to_vec(field);
    Eigen::VectorXcd r = op.M * vec - lam * vec;
    return r.norm() / vec.norm();
}

} // namespace thinspec::asym
