#pragma once

// Coefficient sets for the perturbed operator, the built-in problem
// catalog, and sampled checks of the structural hypotheses: transverse
// parities of the coefficients, realness and symmetry of the diffusion
// matrix, and the ellipticity/enclosure constants.

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "thinspec/error.hpp"
#include "thinspec/expr.hpp"

namespace thinspec::model {

using cplx = std::complex<double>;
using expr::Expr;

struct CoefficientSet {
    int n = 2;                           // spatial dimension (assembly supports n=2)
    std::vector<Expr> Aij;               // row-major n x n, real-valued by contract
    std::vector<Expr> Aj;                // length n, complex-valued
    Expr A0;
    Expr alpha;                          // function of x' only
    std::map<std::string, double> params;
    std::string name = "inline";

    const Expr& aij(int i, int j) const { return Aij[i * n + j]; }

    cplx eval_aij(int i, int j, double x, double xi) const {
        return expr::eval(aij(i, j), x, xi, params);
    }
    cplx eval_aj(int j, double x, double xi) const { return expr::eval(Aj[j], x, xi, params); }
    cplx eval_a0(double x, double xi) const { return expr::eval(A0, x, xi, params); }
    double eval_alpha(double x) const { return expr::eval(alpha, x, 0.0, params).real(); }
};

struct HypothesisReport {
    struct Identity {
        std::string name;
        double max_violation = 0.0;
        bool ok = false;
    };
    std::vector<Identity> identities;
    bool symmetry_ok = false;
    double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0;
    std::string sample_grid;
};

namespace detail {

inline std::set<std::string> param_names(const std::map<std::string, double>& p) {
    std::set<std::string> s;
    for (const auto& kv : p) s.insert(kv.first);
    return s;
}

inline Expr parse_with(const std::string& src, const std::map<std::string, double>& params) {
    auto allowed = param_names(params);
    return expr::parse(src, allowed);
}

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
    return v;
}

} // namespace detail

// Build an inline coefficient set from expression strings (n = 2 layout:
// a11, a12, a21, a22, a1, a2, a0, alpha).
inline CoefficientSet make_set(const std::string& a11, const std::string& a12,
                               const std::string& a21, const std::string& a22,
                               const std::string& a1, const std::string& a2,
                               const std::string& a0, const std::string& alpha,
                               std::map<std::string, double> params,
                               const std::string& name = "inline") {
    CoefficientSet cs;
    cs.n = 2;
    cs.params = std::move(params);
    cs.Aij = {detail::parse_with(a11, cs.params), detail::parse_with(a12, cs.params),
              detail::parse_with(a21, cs.params), detail::parse_with(a22, cs.params)};
    cs.Aj = {detail::parse_with(a1, cs.params), detail::parse_with(a2, cs.params)};
    cs.A0 = detail::parse_with(a0, cs.params);
    cs.alpha = detail::parse_with(alpha, cs.params);
    cs.name = name;
    if (expr::uses_xi(cs.alpha))
        throw error("model.make_set: alpha must not depend on xi");
    return cs;
}

inline CoefficientSet catalog(const std::string& name,
                              const std::map<std::string, double>& overrides = {}) {
    std::map<std::string, double> p;
    CoefficientSet cs;
    if (name == "free") {
        p = {{"alpha0", 1.0}};
        for (const auto& kv : overrides) {
            if (!p.count(kv.first))
                throw error("model.catalog: problem 'free' has no parameter '" + kv.first + "'");
            p[kv.first] = kv.second;
        }
        cs = make_set("1", "0", "0", "1", "0", "0", "0", "alpha0", p, name);
    } else if (name == "pt_well") {
        p = {{"alpha0", 1.0}};
        for (const auto& kv : overrides) {
            if (!p.count(kv.first))
                throw error("model.catalog: problem 'pt_well' has no parameter '" + kv.first + "'");
            p[kv.first] = kv.second;
        }
        cs = make_set("1", "0", "0", "1", "0", "0", "-2*sech(x)^2", "alpha0", p, name);
    } else if (name == "shear") {
        p = {{"alpha0", 1.0}, {"c12", 1.0}};
        for (const auto& kv : overrides) {
            if (!p.count(kv.first))
                throw error("model.catalog: problem 'shear' has no parameter '" + kv.first + "'");
            p[kv.first] = kv.second;
        }
        cs = make_set("1", "c12*xi", "c12*xi", "1", "0", "0", "-2*sech(x)^2", "alpha0", p, name);
    } else if (name == "fullmix") {
        p = {{"alpha0", 1.0}, {"c12", 1.0}, {"c22", 1.0},
             {"a1", 0.3},    {"a2", 0.4},  {"a0", 0.2}};
        for (const auto& kv : overrides) {
            if (!p.count(kv.first))
                throw error("model.catalog: problem 'fullmix' has no parameter '" + kv.first + "'");
            p[kv.first] = kv.second;
        }
        cs = make_set("1", "c12*xi", "c12*xi", "1+c22*xi^2", "i*a1*xi", "a2*xi",
                      "-2*sech(x)^2+i*a0*xi", "alpha0", p, name);
    } else {
        throw error("model.catalog: unknown problem '" + name +
                    "'; known: free, pt_well, shear, fullmix");
    }
    return cs;
}

// Same coefficients with the boundary coefficient negated.
inline CoefficientSet with_negated_alpha(const CoefficientSet& cs) {
    CoefficientSet out = cs;
    out.alpha = Expr{expr::make(expr::NodeKind::Neg, cs.alpha.root)};
    out.name = cs.name + "[-alpha]";
    return out;
}

// Sampled check of the transverse parity conditions plus realness and
// symmetry of A_ij.  Probes an nx-by-nxi grid over [x_lo,x_hi] x [-1/2,1/2].
inline HypothesisReport validate_symmetry(const CoefficientSet& cs, int nx, int nxi, double tol,
                                          double x_lo = -10.0, double x_hi = 10.0) {
    if (nx < 3 || nxi < 3) throw error("model.validate_symmetry: nx, nxi >= 3 required");
    if (cs.n != 2) throw error("model.validate_symmetry: only n = 2 supported");
    auto xs = detail::linspace(x_lo, x_hi, nx);
    auto xis = detail::linspace(-0.5, 0.5, nxi);

    HypothesisReport rep;
    auto record = [&rep, tol](const std::string& id, double viol) {
        rep.identities.push_back({id, viol, viol <= tol});
    };

    double v_a11 = 0, v_a12 = 0, v_a22 = 0, v_sym = 0, v_im = 0, v_a1 = 0, v_a2 = 0, v_a0 = 0;
    for (double x : xs)
        for (double xi : xis) {
            cplx a11p = cs.eval_aij(0, 0, x, xi), a11m = cs.eval_aij(0, 0, x, -xi);
            cplx a12p = cs.eval_aij(0, 1, x, xi), a12m = cs.eval_aij(0, 1, x, -xi);
            cplx a21p = cs.eval_aij(1, 0, x, xi);
            cplx a22p = cs.eval_aij(1, 1, x, xi), a22m = cs.eval_aij(1, 1, x, -xi);
            cplx a1p = cs.eval_aj(0, x, xi), a1m = cs.eval_aj(0, x, -xi);
            cplx a2p = cs.eval_aj(1, x, xi), a2m = cs.eval_aj(1, x, -xi);
            cplx a0p = cs.eval_a0(x, xi), a0m = cs.eval_a0(x, -xi);

            v_a11 = std::max(v_a11, std::abs(a11m - a11p));
            v_a12 = std::max(v_a12, std::abs(a12m + a12p));
            v_a22 = std::max(v_a22, std::abs(a22m - a22p));
            v_sym = std::max(v_sym, std::abs(a21p - a12p));
            v_im = std::max({v_im, std::abs(a11p.imag()), std::abs(a12p.imag()),
                             std::abs(a21p.imag()), std::abs(a22p.imag())});
            v_a1 = std::max(v_a1, std::abs(std::conj(a1m) - a1p));
            v_a2 = std::max(v_a2, std::abs(a2m + std::conj(a2p)));
            v_a0 = std::max(v_a0, std::abs(a0m - std::conj(a0p)));
        }

    record("A11(-xi)=A11(xi)", v_a11);
    record("A12(-xi)=-A12(xi)", v_a12);
    record("A22(-xi)=A22(xi)", v_a22);
    record("A21=A12", v_sym);
    record("Im Aij=0", v_im);
    record("conj(A1)(-xi)=A1(xi)", v_a1);
    record("A2(-xi)=-conj(A2)(xi)", v_a2);
    record("A0(-xi)=conj(A0)(xi)", v_a0);
    record("alpha xi-free", expr::uses_xi(cs.alpha) ? 1.0 : 0.0);

    rep.symmetry_ok = true;
    for (const auto& id : rep.identities) rep.symmetry_ok = rep.symmetry_ok && id.ok;
    rep.sample_grid = std::to_string(nx) + "x" + std::to_string(nxi) + " probe on [" +
                      std::to_string(x_lo) + "," + std::to_string(x_hi) + "]x[-1/2,1/2]";
    return rep;
}

// Grid estimates of the constants in the spectral enclosure.  Sups over a
// finite probe grid are lower bounds on the true sups.
inline HypothesisReport estimate_constants(const CoefficientSet& cs, int nx, int nxi,
                                           double x_lo = -10.0, double x_hi = 10.0,
                                           double tol = 1e-12) {
    HypothesisReport rep = validate_symmetry(cs, nx, nxi, tol, x_lo, x_hi);
    auto xs = detail::linspace(x_lo, x_hi, nx);
    auto xis = detail::linspace(-0.5, 0.5, nxi);

    const int n = cs.n;
    double c0 = std::numeric_limits<double>::infinity();
    double x_at = 0, xi_at = 0;
    std::vector<double> sup_aj(n, 0.0);
    double sup_a0 = 0.0, sup_alpha = 0.0;

    Eigen::MatrixXd re_a(n, n);
    for (double x : xs) {
        sup_alpha = std::max(sup_alpha, std::abs(cs.eval_alpha(x)));
        for (double xi : xis) {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) re_a(i, j) = cs.eval_aij(i, j, x, xi).real();
            Eigen::MatrixXd sym = 0.5 * (re_a + re_a.transpose());
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
            double lam = es.eigenvalues().minCoeff();
            if (lam < c0) {
                c0 = lam;
                x_at = x;
                xi_at = xi;
            }
            for (int j = 0; j < n; ++j)
                sup_aj[j] = std::max(sup_aj[j], std::abs(cs.eval_aj(j, x, xi)));
            sup_a0 = std::max(sup_a0, std::abs(cs.eval_a0(x, xi)));
        }
    }
    if (c0 <= 0.0)
        throw ellipticity_error("model.estimate_constants: ellipticity fails, min eig " +
                                std::to_string(c0) + " at (x,xi)=(" + std::to_string(x_at) +
                                "," + std::to_string(xi_at) + ")");
    double s = 0.0;
    for (double v : sup_aj) s += v * v;
    rep.c0 = c0;
    rep.c1 = std::sqrt(s);
    rep.c2 = sup_a0;
    rep.c3 = 2.0 * sup_alpha;
    return rep;
}

} // namespace thinspec::model
