#pragma once

// Transverse (cell) machinery: the averaged coefficients of the limiting
// operator, the pointwise B-coefficients that reproduce them under the
// transverse integral, the two-point boundary value cell solver with its
// compatibility condition, the first-order profiles G_j/G_0, and the
// corrector profile entering the gradient-norm resolvent estimate.

#include <complex>
#include <string>
#include <vector>

#include "thinspec/error.hpp"
#include "thinspec/model.hpp"
#include "thinspec/quadrature.hpp"

namespace thinspec::cell {

using model::CoefficientSet;

// profile(xi) = scale * cum(xi) + shift; cum is an antiderivative from -1/2
struct Profile {
    Cumulative cum;
    cplx scale{1.0, 0.0};
    cplx shift{0.0, 0.0};

    cplx eval(double xi) const { return scale * cum.eval(xi) + shift; }
};

struct LimitingCoefficients {
    std::vector<double> xs;
    std::vector<double> a0_11;  // (n-1)x(n-1) block, n = 2
    std::vector<cplx> a0_1;
    std::vector<cplx> a00;
};

struct CellSolution {
    std::vector<cplx> phi;     // mean-zero solution at quadrature nodes
    std::vector<cplx> dphi;    // its transverse derivative (exact flux ratio)
    std::vector<cplx> flux;    // A_nn * dphi
    Profile profile;           // evaluator at arbitrary xi
    Profile flux_profile;      // evaluator of A_nn * phi'
    cplx volume_residual{0.0}; // integral of the volume part of the data
};

struct CellProfiles {
    double x = 0.0;
    std::vector<double> xig;
    std::vector<cplx> G1, G0;     // node values
    std::vector<cplx> dG1, dG0;   // transverse derivatives (analytic)
    Profile G1p, G0p;             // point evaluators
};

namespace detail {

inline std::vector<double> ann_at_nodes(const CoefficientSet& cs, double x, const QuadRule& q,
                                        const char* who) {
    std::vector<double> ann(q.size());
    for (int i = 0; i < q.size(); ++i) {
        cplx v = cs.eval_aij(cs.n - 1, cs.n - 1, x, q.xi[i]);
        if (v.real() <= 0.0)
            throw ellipticity_error(std::string(who) + ": A_nn <= 0 at (x,xi)=(" +
                                    std::to_string(x) + "," + std::to_string(q.xi[i]) + ")");
        ann[i] = v.real();
    }
    return ann;
}

} // namespace detail

inline LimitingCoefficients limiting_coefficients(const CoefficientSet& cs,
                                                  const std::vector<double>& xs,
                                                  const QuadRule& q) {
    if (cs.n != 2) throw error("cell.limiting_coefficients: only n = 2 supported");
    LimitingCoefficients lc;
    lc.xs = xs;
    lc.a0_11.reserve(xs.size());
    lc.a0_1.reserve(xs.size());
    lc.a00.reserve(xs.size());
    for (double x : xs) {
        auto ann = detail::ann_at_nodes(cs, x, q, "cell.limiting_coefficients");
        double alpha = cs.eval_alpha(x);
        double i11 = 0.0;
        cplx i1(0.0), i00(0.0);
        for (int i = 0; i < q.size(); ++i) {
            double xi = q.xi[i];
            double a11 = cs.eval_aij(0, 0, x, xi).real();
            double a12 = cs.eval_aij(0, 1, x, xi).real();
            double a21 = cs.eval_aij(1, 0, x, xi).real();
            cplx a1 = cs.eval_aj(0, x, xi);
            cplx a2 = cs.eval_aj(1, x, xi);
            cplx a0 = cs.eval_a0(x, xi);
            i11 += q.w[i] * (a11 - a12 * a21 / ann[i]);
            i1 += q.w[i] * (a1 - a2 * a21 / ann[i]);
            i00 += q.w[i] * (a0 + alpha * alpha / ann[i] -
                             cplx(0.0, 2.0) * alpha * a2.real() / ann[i] -
                             std::norm(a2) / ann[i]);
        }
        if (i11 <= 0.0)
            throw ellipticity_error("cell.limiting_coefficients: averaged diffusion not positive at x=" +
                                    std::to_string(x));
        lc.a0_11.push_back(i11);
        lc.a0_1.push_back(i1);
        lc.a00.push_back(i00);
    }
    return lc;
}

struct BCoefficients {
    double b11;
    cplx b1;
    cplx b0;
};

// Pointwise integrands whose transverse integrals reproduce the limiting
// coefficients; used as a cross-check oracle.
inline BCoefficients b_coefficients(const CoefficientSet& cs, double x, double xi) {
    double ann = cs.eval_aij(cs.n - 1, cs.n - 1, x, xi).real();
    if (ann <= 0.0)
        throw ellipticity_error("cell.b_coefficients: A_nn <= 0 at (x,xi)=(" + std::to_string(x) +
                                "," + std::to_string(xi) + ")");
    double a11 = cs.eval_aij(0, 0, x, xi).real();
    double a12 = cs.eval_aij(0, 1, x, xi).real();
    double a21 = cs.eval_aij(1, 0, x, xi).real();
    cplx a1 = cs.eval_aj(0, x, xi);
    cplx a2 = cs.eval_aj(1, x, xi);
    cplx a0 = cs.eval_a0(x, xi);
    double alpha = cs.eval_alpha(x);
    BCoefficients b;
    b.b11 = a11 - a12 * a21 / ann;
    b.b1 = a1 - a2 * a21 / ann;
    b.b0 = a0 + alpha * alpha / ann - cplx(0.0, 1.0) * alpha * (a2 + std::conj(a2)) / ann -
           std::norm(a2) / ann;
    return b;
}

// Unique mean-zero solution of  -(A_nn phi')' + F = 0,  A_nn phi' + g = 0 at
// xi = -1/2 (g_-) and xi = +1/2 (g_+).  The data must satisfy the
// compatibility condition  int F = g_- - g_+;  violations beyond tol are
// errors, not repaired.
inline CellSolution cell_solve(const std::vector<double>& ann, const std::vector<cplx>& F,
                               cplx gm, cplx gp, const QuadRule& q, double tol = 1e-10) {
    if (static_cast<int>(ann.size()) != q.size() || static_cast<int>(F.size()) != q.size())
        throw error("cell.cell_solve: data size mismatch with quadrature rule");
    for (int i = 0; i < q.size(); ++i)
        if (ann[i] <= 0.0)
            throw ellipticity_error("cell.cell_solve: A_nn <= 0 at xi=" + std::to_string(q.xi[i]));

    cplx total = integrate(q, F);
    cplx defect = total - (gm - gp);
    if (std::abs(defect) > tol)
        throw solvability_error("cell.cell_solve: compatibility violated, |int F - (g- - g+)| = " +
                                std::to_string(std::abs(defect)));

    Cumulative S(q, F);
    auto s_nodes = S.node_values();
    std::vector<cplx> flux(q.size()), integrand(q.size());
    for (int i = 0; i < q.size(); ++i) {
        flux[i] = s_nodes[i] - gm;
        integrand[i] = flux[i] / ann[i];
    }
    CellSolution sol;
    sol.flux = flux;
    sol.dphi = integrand;
    sol.flux_profile.cum = S;
    sol.flux_profile.shift = -gm;
    sol.profile.cum = Cumulative(q, integrand);
    // constant making the mean vanish
    std::vector<cplx> weighted(q.size());
    for (int i = 0; i < q.size(); ++i) weighted[i] = (q.xi[i] - 0.5) * integrand[i];
    sol.profile.shift = integrate(q, weighted);
    sol.phi.resize(q.size());
    for (int i = 0; i < q.size(); ++i) sol.phi[i] = sol.profile.eval(q.xi[i]);
    sol.volume_residual = defect;
    return sol;
}

// Variant taking a tabulated boundary-flux field Theta(xi) in place of the
// scalars: solves  -(A_nn phi')' + Fvol - d/dxi Theta = 0  with
// A_nn phi' + Theta = 0 at both faces, never enforcing compatibility.  The
// returned volume_residual (= int Fvol) is the amount by which the top-face
// condition is missed; in the expansion machinery it equals the residual of
// the reduced equation and cancels across terms.
inline CellSolution cell_solve_flux(const std::vector<double>& ann, const std::vector<cplx>& Fvol,
                                    const std::vector<cplx>& theta, const QuadRule& q) {
    if (static_cast<int>(ann.size()) != q.size() || static_cast<int>(Fvol.size()) != q.size() ||
        static_cast<int>(theta.size()) != q.size())
        throw error("cell.cell_solve_flux: data size mismatch with quadrature rule");
    Cumulative S(q, Fvol);
    auto s_nodes = S.node_values();
    std::vector<cplx> flux(q.size()), integrand(q.size());
    for (int i = 0; i < q.size(); ++i) {
        flux[i] = s_nodes[i] - theta[i];
        integrand[i] = flux[i] / ann[i];
    }
    CellSolution sol;
    sol.flux = flux;
    sol.dphi = integrand;
    sol.profile.cum = Cumulative(q, integrand);
    std::vector<cplx> weighted(q.size());
    for (int i = 0; i < q.size(); ++i) weighted[i] = (q.xi[i] - 0.5) * integrand[i];
    sol.profile.shift = integrate(q, weighted);
    sol.phi.resize(q.size());
    for (int i = 0; i < q.size(); ++i) sol.phi[i] = sol.profile.eval(q.xi[i]);
    sol.volume_residual = S.total();
    return sol;
}

// First-order transverse profiles at fixed x:
//   G_1(xi) = -int_{-1/2}^{xi} A_12/A_22 dt - int t A_12/A_22 dt
//   G_0(xi) = -int_{-1/2}^{xi} (conj(A_2)+i alpha)/A_22 dt
//             - int (t - 1/2)(conj(A_2)+i alpha)/A_22 dt
inline CellProfiles cell_profiles(const CoefficientSet& cs, double x, const QuadRule& q) {
    auto ann = detail::ann_at_nodes(cs, x, q, "cell.cell_profiles");
    double alpha = cs.eval_alpha(x);
    CellProfiles cp;
    cp.x = x;
    cp.xig = q.xi;
    std::vector<cplx> r1(q.size()), r0(q.size());
    for (int i = 0; i < q.size(); ++i) {
        double a12 = cs.eval_aij(cs.n - 1, 0, x, q.xi[i]).real();
        cplx a2 = cs.eval_aj(cs.n - 1, x, q.xi[i]);
        r1[i] = a12 / ann[i];
        r0[i] = (std::conj(a2) + cplx(0.0, alpha)) / ann[i];
    }
    cp.G1p.cum = Cumulative(q, r1);
    cp.G1p.scale = -1.0;
    cp.G0p.cum = Cumulative(q, r0);
    cp.G0p.scale = -1.0;
    std::vector<cplx> w1(q.size()), w0(q.size());
    for (int i = 0; i < q.size(); ++i) {
        w1[i] = q.xi[i] * r1[i];
        w0[i] = (q.xi[i] - 0.5) * r0[i];
    }
    cp.G1p.shift = -integrate(q, w1);
    cp.G0p.shift = -integrate(q, w0);
    cp.G1.resize(q.size());
    cp.G0.resize(q.size());
    cp.dG1.resize(q.size());
    cp.dG0.resize(q.size());
    for (int i = 0; i < q.size(); ++i) {
        cp.G1[i] = cp.G1p.eval(q.xi[i]);
        cp.G0[i] = cp.G0p.eval(q.xi[i]);
        cp.dG1[i] = -r1[i];
        cp.dG0[i] = -r0[i];
    }
    return cp;
}

// Corrector profile at fixed x for given limiting value and gradient:
//   w(xi) = -u0' int_0^xi A_12/A_22 dt - u0 int_0^xi conj(A_2) dt
//           - i alpha u0 int_0^xi dt/A_22.
// Integrals run from 0, not -1/2.
inline Profile w_profile(const CoefficientSet& cs, cplx u0, cplx grad_u0, double x,
                         const QuadRule& q) {
    auto ann = detail::ann_at_nodes(cs, x, q, "cell.w_profile");
    double alpha = cs.eval_alpha(x);
    std::vector<cplx> integrand(q.size());
    for (int i = 0; i < q.size(); ++i) {
        double a12 = cs.eval_aij(cs.n - 1, 0, x, q.xi[i]).real();
        cplx a2 = cs.eval_aj(cs.n - 1, x, q.xi[i]);
        integrand[i] = -grad_u0 * a12 / ann[i] - u0 * std::conj(a2) -
                       cplx(0.0, alpha) * u0 / ann[i];
    }
    Profile w;
    w.cum = Cumulative(q, integrand);
    w.shift = -w.cum.eval(0.0);
    return w;
}

} // namespace thinspec::cell
