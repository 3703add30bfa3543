#pragma once

// The epsilon-sweep experiment driver: eigenvalue and resolvent
// convergence tables with log-log rate fits, a spatial-floor guard, and
// first-order Richardson extrapolation (the independent oracle for the
// first eigenvalue correction).

#include <cmath>
#include <complex>
#include <functional>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "thinspec/cell.hpp"
#include "thinspec/fd.hpp"
#include "thinspec/spectral.hpp"

namespace thinspec::converge {

using cplx = std::complex<double>;
using model::CoefficientSet;

struct ConvergenceRow {
    double eps = 0.0;
    cplx value{0.0, 0.0};
    double error = 0.0;
    std::string meta;
};

struct ConvergenceTable {
    std::string quantity;
    std::vector<ConvergenceRow> rows;
    std::optional<double> fitted_rate;
    std::optional<double> fit_r2;
    std::string floor_status = "n/a";  // "ok" | "floor-limited" | "n/a"
};

// least-squares slope of log(error) against log(eps)
inline std::pair<double, double> fit_rate(const ConvergenceTable& t) {
    std::vector<double> lx, ly;
    for (const auto& r : t.rows)
        if (r.error > 0.0) {
            lx.push_back(std::log(r.eps));
            ly.push_back(std::log(r.error));
        }
    const int n = static_cast<int>(lx.size());
    if (n < 3) throw error("converge.fit_rate: need at least 3 rows with positive error");
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
        syy += ly[i] * ly[i];
    }
    double denom = n * sxx - sx * sx;
    double slope = (n * sxy - sx * sy) / denom;
    double ss_res = 0.0, mean_y = sy / n, ss_tot = 0.0;
    double intercept = (sy - slope * sx) / n;
    for (int i = 0; i < n; ++i) {
        double fit = slope * lx[i] + intercept;
        ss_res += (ly[i] - fit) * (ly[i] - fit);
        ss_tot += (ly[i] - mean_y) * (ly[i] - mean_y);
    }
    double r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return {slope, r2};
}

// First-order Richardson extrapolation of values g(eps) on a geometric
// eps-list; the error estimate is the last extrapolation increment.
inline std::pair<double, double> richardson(const std::vector<double>& values,
                                            const std::vector<double>& eps_list) {
    if (values.size() != eps_list.size() || values.size() < 3)
        throw error("converge.richardson: need >= 3 values matching the eps list");
    double ratio = eps_list[0] / eps_list[1];
    for (std::size_t i = 0; i + 1 < eps_list.size(); ++i) {
        double r = eps_list[i] / eps_list[i + 1];
        if (std::abs(r - ratio) > 1e-9 * ratio)
            throw error("converge.richardson: eps list must be geometric");
        if (eps_list[i + 1] >= eps_list[i])
            throw error("converge.richardson: eps list must decrease");
    }
    std::vector<double> g = values;
    double prev = g.back();
    double limit = prev, increment = 0.0;
    // one elimination level of the O(eps) term per pass
    std::vector<double> cur = g;
    double level_ratio = ratio;
    while (cur.size() >= 2) {
        std::vector<double> next(cur.size() - 1);
        for (std::size_t i = 0; i + 1 < cur.size(); ++i)
            next[i] = (level_ratio * cur[i + 1] - cur[i]) / (level_ratio - 1.0);
        increment = std::abs(next.back() - cur.back());
        limit = next.back();
        cur = std::move(next);
        level_ratio *= ratio;
    }
    return {limit, increment};
}

// ------------------------------------------------------------------ sweeps

struct SweepConfig {
    double X = 12.0;
    int Nx = 801;
    int Nt = 17;
    std::vector<double> eps_list{0.2, 0.1, 0.05, 0.025};
    int quad_panels = 8;
    int k = 3;             // eigenpairs per solve
    double tol = 1e-10;
    int jobs = 1;
    bool floor_guard = true;
};

struct LimitingSetup {
    cell::QuadRule quad;
    cell::LimitingCoefficients lc;
    disc::DiscreteOperator M0;
    std::vector<double> xs;
};

inline LimitingSetup limiting_setup(const CoefficientSet& cs, double X, int Nx, int panels) {
    LimitingSetup s;
    s.quad = cell::make_rule(panels);
    disc::Grid g = disc::build_grid(X, Nx, 1.0, 3);
    s.xs = g.xs();
    s.lc = cell::limiting_coefficients(cs, s.xs, s.quad);
    s.M0 = disc::assemble_limiting(s.lc, s.xs);
    return s;
}

// shift below the lowest potential value; pulls the ground state
inline double ground_shift(const cell::LimitingCoefficients& lc) {
    double lo = lc.a00.front().real();
    for (const auto& v : lc.a00) lo = std::min(lo, v.real());
    return lo - 0.5;
}

inline double ground_eigenvalue(const LimitingSetup& s, double tol = 1e-10) {
    auto rep = spectral::eigs_near(s.M0, ground_shift(s.lc), 1, tol);
    return rep.pairs.front().lambda.real();
}

// nearest eigenvalue to `target`; ambiguous ties are an error asking for
// grid refinement
inline spectral::EigenPair track_nearest(const spectral::SpectrumReport& rep, cplx target) {
    if (rep.pairs.empty()) throw error("converge.track: empty spectrum report");
    std::vector<double> d(rep.pairs.size());
    for (std::size_t i = 0; i < rep.pairs.size(); ++i)
        d[i] = std::abs(rep.pairs[i].lambda - target);
    std::size_t best = 0;
    for (std::size_t i = 1; i < d.size(); ++i)
        if (d[i] < d[best]) best = i;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (i == best) continue;
        if (std::abs(d[i] - d[best]) <= 1e-9 + 1e-6 * d[best])
            throw degeneracy_error(
                "converge.track: two eigenvalues equidistant from the tracking target; "
                "refine the grid or provide a first-order correction");
    }
    return rep.pairs[best];
}

struct EigenSweepResult {
    double lambda0 = 0.0;
    std::optional<double> lambda1;    // first correction used for tracking
    ConvergenceTable err_plain;       // |lambda^eps - lambda0|
    ConvergenceTable err_corrected;   // |lambda^eps - lambda0 - eps*Lambda1| (when lambda1 given)
    double max_im = 0.0;
    double max_residual = 0.0;
};

namespace detail {

template <class F>
auto run_over_eps(const std::vector<double>& eps_list, int jobs, F&& body) {
    using R = std::invoke_result_t<F, double>;
    std::vector<R> out(eps_list.size());
    if (jobs <= 1) {
        for (std::size_t i = 0; i < eps_list.size(); ++i) out[i] = body(eps_list[i]);
        return out;
    }
    std::vector<std::future<R>> futs;
    futs.reserve(eps_list.size());
    for (double e : eps_list) futs.push_back(std::async(std::launch::async, body, e));
    for (std::size_t i = 0; i < eps_list.size(); ++i) out[i] = futs[i].get();
    return out;
}

} // namespace detail

// One eigenvalue tracked across the eps sweep against the limiting value
// computed on the same tangential grid.
inline EigenSweepResult sweep_eigenvalue(const CoefficientSet& cs, const SweepConfig& cfg,
                                         std::optional<double> lambda1 = std::nullopt,
                                         std::optional<double> lambda0_hint = std::nullopt) {
    auto setup = limiting_setup(cs, cfg.X, cfg.Nx, cfg.quad_panels);
    double shift = lambda0_hint ? *lambda0_hint - 0.25 : ground_shift(setup.lc);
    auto rep0 = spectral::eigs_near(setup.M0, shift, 1, cfg.tol);
    double lambda0 = rep0.pairs.front().lambda.real();

    struct Point {
        cplx lam;
        double resid;
    };
    auto solve_at = [&](double eps, int Nx) {
        disc::Grid g = disc::build_grid(cfg.X, Nx, eps, cfg.Nt);
        auto M = disc::assemble_perturbed(cs, g);
        cplx target = lambda0 + (lambda1 ? *lambda1 * eps : 0.0);
        auto rep = spectral::eigs_near(M, target, cfg.k, cfg.tol, 1);
        auto p = track_nearest(rep, target);
        return Point{p.lambda, p.residual};
    };

    auto pts = detail::run_over_eps(cfg.eps_list, cfg.jobs,
                                    [&](double e) { return solve_at(e, cfg.Nx); });

    EigenSweepResult res;
    res.lambda0 = lambda0;
    res.lambda1 = lambda1;
    res.err_plain.quantity = "eigenvalue";
    res.err_corrected.quantity = "eigenvalue_corrected";
    for (std::size_t i = 0; i < cfg.eps_list.size(); ++i) {
        double eps = cfg.eps_list[i];
        res.max_im = std::max(res.max_im, std::abs(pts[i].lam.imag()));
        res.max_residual = std::max(res.max_residual, pts[i].resid);
        res.err_plain.rows.push_back(
            {eps, pts[i].lam, std::abs(pts[i].lam - lambda0), "plain"});
        if (lambda1)
            res.err_corrected.rows.push_back(
                {eps, pts[i].lam, std::abs(pts[i].lam - cplx(lambda0 + eps * *lambda1)),
                 "corrected"});
    }

    auto guard_and_fit = [&](ConvergenceTable& t, std::function<double(double, int)> err_at) {
        t.floor_status = "n/a";
        if (cfg.floor_guard) {
            double e0 = cfg.eps_list.front();
            double coarse = t.rows.front().error;
            double fine = err_at(e0, 2 * cfg.Nx - 1);
            double spatial = std::abs(fine - coarse) * (4.0 / 3.0);
            t.floor_status = (spatial < 0.1 * std::max(fine, 1e-300)) ? "ok" : "floor-limited";
        }
        if (t.floor_status != "floor-limited") {
            try {
                auto [rate, r2] = fit_rate(t);
                t.fitted_rate = rate;
                t.fit_r2 = r2;
            } catch (const error&) {
            }
        }
    };

    auto erro_at = [&](double eps, int Nx) {
        auto s2 = limiting_setup(cs, cfg.X, Nx, cfg.quad_panels);
        auto r2 = spectral::eigs_near(s2.M0, shift, 1, cfg.tol);
        double l0f = r2.pairs.front().lambda.real();
        disc::Grid g = disc::build_grid(cfg.X, Nx, eps, cfg.Nt);
        auto M = disc::assemble_perturbed(cs, g);
        cplx target = l0f + (lambda1 ? *lambda1 * eps : 0.0);
        auto rep = spectral::eigs_near(M, target, cfg.k, cfg.tol, 1);
        auto p = track_nearest(rep, target);
        return std::abs(p.lambda - cplx(l0f));
    };
    auto errc_at = [&](double eps, int Nx) {
        auto s2 = limiting_setup(cs, cfg.X, Nx, cfg.quad_panels);
        auto r2 = spectral::eigs_near(s2.M0, shift, 1, cfg.tol);
        double l0f = r2.pairs.front().lambda.real();
        disc::Grid g = disc::build_grid(cfg.X, Nx, eps, cfg.Nt);
        auto M = disc::assemble_perturbed(cs, g);
        cplx target = l0f + *lambda1 * eps;
        auto rep = spectral::eigs_near(M, target, cfg.k, cfg.tol, 1);
        auto p = track_nearest(rep, target);
        return std::abs(p.lambda - target);
    };

    guard_and_fit(res.err_plain, erro_at);
    if (lambda1) guard_and_fit(res.err_corrected, errc_at);
    return res;
}

struct ResolventSweepResult {
    ConvergenceTable table_a;  // L2 error without corrector
    ConvergenceTable table_b;  // H1 error with corrector
    std::vector<double> h1_uncorrected;  // per eps, for the comparison clause
    bool corrector_improves = true;
    cplx lambda{0.0, 0.0};
};

namespace detail {

// fourth-order first derivative of a tabulated line
inline std::vector<cplx> dx_line(const std::vector<cplx>& f, double h) {
    return fd::dx4_line(f, h);
}

// discrete H1 seminorm+norm: value plus forward difference quotients, the
// transverse quotient at the physical spacing
inline double h1_norm(const std::vector<cplx>& u, const disc::Grid& g) {
    double s = 0.0;
    for (int a = 0; a < g.Nx; ++a)
        for (int m = 0; m < g.Nt; ++m) {
            s += g.wt(m) * std::norm(u[g.node(a, m)]);
            if (a + 1 < g.Nx)
                s += g.wt(m) * std::norm((u[g.node(a + 1, m)] - u[g.node(a, m)]) / g.hx);
            if (m + 1 < g.Nt)
                s += std::norm((u[g.node(a, m + 1)] - u[g.node(a, m)]) / g.ht);
        }
    return std::sqrt(s);
}

} // namespace detail

// Resolvent action compared against the limiting one, without and with the
// first-order corrector field.
inline ResolventSweepResult sweep_resolvent(const CoefficientSet& cs, const SweepConfig& cfg,
                                            const expr::Expr& f_of_x,
                                            std::optional<cplx> lambda_opt = std::nullopt) {
    auto setup = limiting_setup(cs, cfg.X, cfg.Nx, cfg.quad_panels);
    cplx lambda = lambda_opt ? *lambda_opt : cplx(ground_eigenvalue(setup, cfg.tol) - 1.0, 0.0);

    const int Nx = cfg.Nx;
    std::vector<cplx> f_line(Nx);
    for (int a = 0; a < Nx; ++a)
        f_line[a] = expr::eval(f_of_x, setup.xs[a], 0.0, cs.params);

    // limiting solve: interior unknowns
    Eigen::VectorXcd f0(Nx - 2);
    for (int a = 1; a <= Nx - 2; ++a) f0[a - 1] = f_line[a];
    Eigen::VectorXcd u0v = spectral::solve_linear(setup.M0, lambda, f0);
    std::vector<cplx> u0(Nx, cplx(0.0));
    for (int a = 1; a <= Nx - 2; ++a) u0[a] = u0v[a - 1];
    auto du0 = detail::dx_line(u0, setup.xs[1] - setup.xs[0]);

    ResolventSweepResult res;
    res.lambda = lambda;
    res.table_a.quantity = "resolvent_L2";
    res.table_b.quantity = "resolvent_H1";

    struct Row {
        double errA, errB, errB_old;
    };
    auto run_one = [&](double eps) {
        disc::Grid g = disc::build_grid(cfg.X, Nx, eps, cfg.Nt);
        auto M = disc::assemble_perturbed(cs, g);
        auto f_strip = disc::embed(f_line, g);
        Eigen::VectorXcd ue = spectral::solve_linear(M, lambda, M.field_to_vec(f_strip));
        auto u_eps = M.vec_to_field(ue);

        auto u0_strip = disc::embed(u0, g);
        std::vector<cplx> diff(u_eps.size());
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = u_eps[i] - u0_strip[i];
        double fnorm = disc::field_norm(f_strip, g);
        double errA = disc::field_norm(diff, g) / fnorm;

        // corrector field from the profile integrals at each x-node
        std::vector<cplx> corrected(diff.size());
        for (int a = 0; a < g.Nx; ++a) {
            auto wp = cell::w_profile(cs, u0[a], du0[a], g.x_of(a), setup.quad);
            for (int m = 0; m < g.Nt; ++m)
                corrected[g.node(a, m)] =
                    diff[g.node(a, m)] - eps * wp.eval(g.xi_of(m));
        }
        double errB = detail::h1_norm(corrected, g) / fnorm;
        double errB_old = detail::h1_norm(diff, g) / fnorm;
        return Row{errA, errB, errB_old};
    };

    auto rows = detail::run_over_eps(cfg.eps_list, cfg.jobs, run_one);
    for (std::size_t i = 0; i < cfg.eps_list.size(); ++i) {
        double eps = cfg.eps_list[i];
        res.table_a.rows.push_back({eps, lambda, rows[i].errA, "L2 no corrector"});
        res.table_b.rows.push_back({eps, lambda, rows[i].errB, "H1 with corrector"});
        res.h1_uncorrected.push_back(rows[i].errB_old);
        res.corrector_improves = res.corrector_improves && rows[i].errB < rows[i].errB_old;
    }

    for (ConvergenceTable* t : {&res.table_a, &res.table_b}) {
        t->floor_status = "n/a";
        try {
            auto [rate, r2] = fit_rate(*t);
            t->fitted_rate = rate;
            t->fit_r2 = r2;
        } catch (const error&) {
        }
    }
    return res;
}

} // namespace thinspec::converge
