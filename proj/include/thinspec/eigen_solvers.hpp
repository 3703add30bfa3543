#pragma once

// Linear algebra workhorses: shift-invert Arnoldi on a sparse LU
// factorization, a dense QR fallback used as a cross-check oracle on small
// matrices, and the resolvent solve with one step of iterative refinement.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "thinspec/error.hpp"

namespace thinspec::solvers {

using cplx = std::complex<double>;
using SpMat = Eigen::SparseMatrix<cplx>;

struct RitzPair {
    cplx lambda;
    Eigen::VectorXcd v;
    double residual = 0.0;
};

struct ArnoldiOptions {
    int max_restarts = 40;
    double tol = 1e-10;
    std::uint64_t seed = 0x7453'9e1a'11c3'5eedULL;
    int extra_subspace = 10;  // subspace dimension is 4k + extra
    // how many of the k returned pairs must meet tol; trailing pairs are
    // returned with their true (possibly larger) residuals.  Clustered
    // states far from the shift separate slowly, and callers that only
    // need them for coarse distance decisions can relax this.
    int min_converged = -1;  // -1: all k
    const Eigen::MatrixXcd* deflate0 = nullptr;  // directions to avoid
};

inline Eigen::VectorXcd seeded_vector(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    Eigen::VectorXcd v(n);
    for (int i = 0; i < n; ++i) v[i] = cplx(d(rng), d(rng));
    v /= v.norm();
    return v;
}

// k eigenpairs of M nearest sigma.  Residuals are true relative residuals
// ||Mv - lambda v|| / ||v||, recomputed with the original matrix.
inline std::vector<RitzPair> shift_invert_arnoldi(const SpMat& M, cplx sigma, int k,
                                                  const ArnoldiOptions& opt = {}) {
    const int n = static_cast<int>(M.rows());
    if (k < 1) throw error("spectral.eigs_near: k >= 1 required");
    if (k >= n) throw error("spectral.eigs_near: k must be smaller than the matrix order");

    SpMat A = M;
    for (int i = 0; i < n; ++i) A.coeffRef(i, i) -= sigma;
    A.makeCompressed();
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success)
        throw error("spectral.eigs_near: factorization of (M - sigma I) failed; "
                    "sigma may hit the spectrum, perturb it");

    const int m = std::min(n, 4 * k + opt.extra_subspace);
    const int need = opt.min_converged < 0 ? k : std::min(opt.min_converged, k);
    // the residual of a perfect eigenpair still carries ||M||-scaled
    // roundoff, so the tolerance is floored there
    double entry_scale = 0.0;
    for (int kk = 0; kk < M.outerSize(); ++kk)
        for (SpMat::InnerIterator it(M, kk); it; ++it)
            entry_scale = std::max(entry_scale, std::abs(it.value()));
    const double eff_tol = std::max(opt.tol, 20.0 * 2.22e-16 * entry_scale);
    Eigen::VectorXcd start = seeded_vector(n, opt.seed);

    // converged directions are locked into an orthonormal basis Q; the
    // iteration continues on the complement, which carries the remaining
    // spectrum once span(Q) is invariant
    Eigen::MatrixXcd Q(n, 0);
    if (opt.deflate0 && opt.deflate0->cols() > 0) Q = *opt.deflate0;
    std::vector<RitzPair> locked;
    double best_residual = std::numeric_limits<double>::infinity();
    int polish = 0;  // restarts spent after the required pairs converged

    auto deflate = [&](Eigen::VectorXcd& w) {
        for (int pass = 0; pass < 2 && Q.cols() > 0; ++pass) w -= Q * (Q.adjoint() * w);
    };

    auto finish = [&](std::vector<RitzPair> extra = {}) {
        for (auto& p : extra) {
            bool dup = false;
            for (const auto& q : locked)
                dup = dup || (std::abs(p.lambda - q.lambda) < 1e-12 * (1.0 + std::abs(p.lambda)) &&
                              std::abs(q.v.dot(p.v)) > 0.9);
            if (!dup) locked.push_back(std::move(p));
        }
        std::sort(locked.begin(), locked.end(), [&](const RitzPair& a, const RitzPair& b) {
            return std::abs(a.lambda - sigma) < std::abs(b.lambda - sigma);
        });
        if (static_cast<int>(locked.size()) > k) locked.resize(k);
        return locked;
    };

    for (int restart = 0; restart < opt.max_restarts; ++restart) {
        Eigen::MatrixXcd V(n, m + 1);
        Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
        deflate(start);
        if (start.norm() < 1e-12) start = seeded_vector(n, opt.seed + 101 * (restart + 1));
        deflate(start);
        V.col(0) = start / start.norm();
        int built = m;
        bool invariant = false;
        for (int j = 0; j < m; ++j) {
            Eigen::VectorXcd w = lu.solve(V.col(j));
            deflate(w);
            // modified Gram-Schmidt, twice
            for (int pass = 0; pass < 2; ++pass)
                for (int i = 0; i <= j; ++i) {
                    cplx h = V.col(i).dot(w);
                    w -= h * V.col(i);
                    H(i, j) += h;
                }
            double nw = w.norm();
            H(j + 1, j) = nw;
            if (nw < 1e-14) {  // invariant subspace reached
                built = j + 1;
                invariant = true;
                break;
            }
            V.col(j + 1) = w / nw;
        }

        Eigen::MatrixXcd Hm = H.topLeftCorner(built, built);
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(Hm);
        if (es.info() != Eigen::Success)
            throw convergence_error("spectral.eigs_near: Hessenberg eigensolve failed");

        std::vector<int> order(built);
        for (int i = 0; i < built; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return std::abs(es.eigenvalues()[a]) > std::abs(es.eigenvalues()[b]);
        });

        int want = k - static_cast<int>(locked.size());
        int take = std::min(std::min(2 * want, built), built);
        std::vector<RitzPair> fresh;
        for (int i = 0; i < take; ++i) {
            cplx theta = es.eigenvalues()[order[i]];
            if (std::abs(theta) < 1e-300) continue;
            Eigen::VectorXcd y = es.eigenvectors().col(order[i]);
            Eigen::VectorXcd x = V.leftCols(built) * y;
            x /= x.norm();
            RitzPair p;
            p.lambda = sigma + 1.0 / theta;
            p.v = x;
            p.residual = (M * x - p.lambda * x).norm();
            fresh.push_back(std::move(p));
        }
        if (!fresh.empty()) best_residual = std::min(best_residual, fresh.front().residual);

        for (auto& p : fresh) {
            if (static_cast<int>(locked.size()) >= k) break;
            if (p.residual <= eff_tol) {
                Eigen::VectorXcd qv = p.v;
                deflate(qv);
                double nq = qv.norm();
                if (nq > 1e-8) {
                    Q.conservativeResize(Eigen::NoChange, Q.cols() + 1);
                    Q.col(Q.cols() - 1) = qv / nq;
                }
                locked.push_back(std::move(p));
            }
        }
        if (static_cast<int>(locked.size()) >= k) return finish();
        if (invariant) {
            // exact complement subspace: absorb remaining Ritz pairs as-is
            auto out = finish(std::move(fresh));
            if (static_cast<int>(out.size()) < k)
                throw convergence_error("spectral.eigs_near: invariant subspace smaller than k");
            return out;
        }
        if (static_cast<int>(locked.size()) >= need) ++polish;
        if (static_cast<int>(locked.size()) >= need &&
            (polish >= 6 || restart + 1 == opt.max_restarts) &&
            static_cast<int>(locked.size() + fresh.size()) >= k)
            return finish(std::move(fresh));

        // restart from the unconverged wanted directions
        start.setZero(n);
        int used = 0;
        for (auto& p : fresh) {
            if (p.residual > eff_tol) {
                start += p.v / static_cast<double>(++used);
                if (used >= want) break;
            }
        }
        if (used == 0 || start.norm() < 1e-300)
            start = seeded_vector(n, opt.seed + restart + 1);
    }
    throw convergence_error("spectral.eigs_near: Arnoldi did not converge after max restarts; "
                            "best unconverged residual " + std::to_string(best_residual) +
                            ", converged " + std::to_string(locked.size()) + " of " +
                            std::to_string(k));
}

// Dense fallback: every eigenpair, sorted by |lambda - sigma|.
inline std::vector<RitzPair> dense_eigs(const SpMat& M, cplx sigma, int k) {
    const int n = static_cast<int>(M.rows());
    if (n > 600) throw error("spectral.dense_eigs: order limited to 600");
    Eigen::MatrixXcd D(M);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(D);
    if (es.info() != Eigen::Success) throw convergence_error("spectral.dense_eigs: QR failed");
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return std::abs(es.eigenvalues()[a] - sigma) < std::abs(es.eigenvalues()[b] - sigma);
    });
    std::vector<RitzPair> pairs(std::min(k, n));
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        pairs[i].lambda = es.eigenvalues()[order[i]];
        pairs[i].v = es.eigenvectors().col(order[i]);
        pairs[i].v /= pairs[i].v.norm();
        pairs[i].residual = (M * pairs[i].v - pairs[i].lambda * pairs[i].v).norm();
    }
    return pairs;
}

// Resolvent solve (M - lambda)^{-1} f with one refinement step.
inline Eigen::VectorXcd resolvent_solve(const SpMat& M, cplx lambda, const Eigen::VectorXcd& f,
                                        double rel_tol = 1e-10) {
    const int n = static_cast<int>(M.rows());
    SpMat A = M;
    for (int i = 0; i < n; ++i) A.coeffRef(i, i) -= lambda;
    A.makeCompressed();
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success)
        throw error("spectral.solve_linear: factorization failed; lambda may hit the spectrum");
    Eigen::VectorXcd u = lu.solve(f);
    Eigen::VectorXcd r = f - A * u;
    u += lu.solve(r);
    r = f - A * u;
    double rel = r.norm() / std::max(f.norm(), 1e-300);
    if (rel > rel_tol) {
        double cond_est = u.norm() * A.norm() / std::max(f.norm(), 1e-300);
        throw error("spectral.solve_linear: residual " + std::to_string(rel) +
                    " above tolerance; condition estimate " + std::to_string(cond_est) +
                    ", lambda too close to the spectrum");
    }
    return u;
}

} // namespace thinspec::solvers
