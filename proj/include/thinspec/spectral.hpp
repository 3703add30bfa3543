#pragma once

// Non-Hermitian eigenvalue computations on the discrete operators:
// eigenpairs near a shift, resolvent solves, normalization in the
// reflection pairing, the three structural residuals, and the spectral
// enclosure predicate.

#include <complex>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <vector>

#include "thinspec/assemble.hpp"
#include "thinspec/eigen_solvers.hpp"
#include "thinspec/model.hpp"

namespace thinspec::spectral {

using cplx = std::complex<double>;
using disc::DiscreteOperator;
using disc::SpMat;

struct EigenPair {
    cplx lambda;
    Eigen::VectorXcd vector;  // unit in the discrete inner product
    double residual = 0.0;
    cplx pt_norm{0.0, 0.0};   // (v, Pv)
};

struct SymmetryResiduals {
    double r1 = 0.0;  // ||M^H - P M P|| / ||M||
    double r2 = 0.0;  // antilinear reflection-conjugation commutator on probes
    double r3 = 0.0;  // ||M_alpha^H - M_{-alpha}|| / ||M||
};

struct EnclosureVerdict {
    cplx lambda;
    double bound = 0.0;
    bool inside = false;
};

struct SpectrumReport {
    std::vector<EigenPair> pairs;  // sorted by |lambda - shift|
    cplx shift{0.0, 0.0};
    std::vector<EnclosureVerdict> enclosure;
    std::optional<SymmetryResiduals> symmetry_residuals;
};

// pairing (u, Pv): conjugation on the second slot composed with the
// reflection; Hermitian as a form, real on the diagonal
inline cplx pt_pair(const Eigen::VectorXcd& u, const Eigen::VectorXcd& v,
                    const std::vector<int>& refl) {
    cplx s(0.0);
    for (int i = 0; i < u.size(); ++i) s += u[i] * std::conj(v[refl[i]]);
    return s;
}

inline solvers::ArnoldiOptions default_arnoldi(double tol) {
    solvers::ArnoldiOptions opt;
    opt.tol = tol;
    if (const char* env = std::getenv("THINSPEC_SEED")) opt.seed = std::strtoull(env, nullptr, 10);
    return opt;
}

inline SpectrumReport eigs_near(const DiscreteOperator& op, cplx sigma, int k,
                                double tol = 1e-10, int min_converged = -1) {
    auto opt = default_arnoldi(tol);
    opt.min_converged = min_converged;
    auto pairs = solvers::shift_invert_arnoldi(op.M, sigma, k, opt);
    SpectrumReport rep;
    rep.shift = sigma;
    for (auto& p : pairs) {
        EigenPair ep;
        ep.lambda = p.lambda;
        ep.vector = std::move(p.v);
        ep.residual = p.residual;
        ep.pt_norm = pt_pair(ep.vector, ep.vector, op.reflection);
        rep.pairs.push_back(std::move(ep));
    }
    std::sort(rep.pairs.begin(), rep.pairs.end(), [&](const EigenPair& a, const EigenPair& b) {
        return std::abs(a.lambda - sigma) < std::abs(b.lambda - sigma);
    });
    return rep;
}

inline Eigen::VectorXcd solve_linear(const DiscreteOperator& op, cplx lambda,
                                     const Eigen::VectorXcd& f) {
    return solvers::resolvent_solve(op.M, lambda, f);
}

// Rescale/recombine eigenvectors so the reflection pairing becomes the
// identity.  Gram-Schmidt in the (Hermitian, possibly indefinite) pairing;
// diagonal entries are normalized to +-1 and a vanishing pivot is reported
// as a degeneracy, not repaired.
inline std::vector<EigenPair> pt_normalize(std::vector<EigenPair> pairs,
                                           const std::vector<int>& refl,
                                           double pivot_tol = 1e-10) {
    for (std::size_t kk = 0; kk < pairs.size(); ++kk) {
        auto& vk = pairs[kk].vector;
        for (std::size_t j = 0; j < kk; ++j) {
            cplx g = pt_pair(vk, pairs[j].vector, refl);
            cplx d = pairs[j].pt_norm;  // +-1 after normalization below
            vk -= (g / d) * pairs[j].vector;
        }
        cplx d = pt_pair(vk, vk, refl);
        if (std::abs(d) < pivot_tol)
            throw degeneracy_error(
                "spectral.pt_normalize: eigenvector self-orthogonal under the reflection "
                "pairing, |(v,Pv)| = " +
                std::to_string(std::abs(d)));
        vk /= std::sqrt(std::abs(d));
        pairs[kk].pt_norm = pt_pair(vk, vk, refl);
    }
    return pairs;
}

namespace detail {

inline SpMat reflected(const SpMat& M, const std::vector<int>& refl) {
    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(M.nonZeros());
    for (int k = 0; k < M.outerSize(); ++k)
        for (SpMat::InnerIterator it(M, k); it; ++it)
            trip.emplace_back(refl[it.row()], refl[it.col()], it.value());
    SpMat out(M.rows(), M.cols());
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

inline double frob(const SpMat& M) {
    double s = 0.0;
    for (int k = 0; k < M.outerSize(); ++k)
        for (SpMat::InnerIterator it(M, k); it; ++it) s += std::norm(it.value());
    return std::sqrt(s);
}

} // namespace detail

inline SymmetryResiduals symmetry_residuals(const DiscreteOperator& op,
                                            const DiscreteOperator& op_minus_alpha,
                                            std::uint64_t probe_seed = 20240815u) {
    if (op.dim() != op_minus_alpha.dim())
        throw error("spectral.symmetry_residuals: operators live on different grids");
    SymmetryResiduals r;
    double nm = detail::frob(op.M);

    SpMat adj = SpMat(op.M.adjoint());
    SpMat pmp = detail::reflected(op.M, op.reflection);
    r.r1 = detail::frob(SpMat(adj - pmp)) / nm;
    r.r3 = detail::frob(SpMat(adj - op_minus_alpha.M)) / nm;

    // antilinear check by action: PT w = conj(w) reflected
    auto ptv = [&](const Eigen::VectorXcd& w) {
        Eigen::VectorXcd out(w.size());
        for (int i = 0; i < w.size(); ++i) out[i] = std::conj(w[op.reflection[i]]);
        return out;
    };
    double worst = 0.0;
    for (int probe = 0; probe < 8; ++probe) {
        Eigen::VectorXcd v = solvers::seeded_vector(op.dim(), probe_seed + probe);
        Eigen::VectorXcd lhs = ptv(op.M * v);
        Eigen::VectorXcd rhs = op.M * ptv(v);
        worst = std::max(worst, (lhs - rhs).norm() / (op.M * v).norm());
    }
    r.r2 = worst;
    return r;
}

// Enclosure predicate: |Im z| <= c3/sqrt(c0) sqrt(|Re z|)
//                      + (c1 + sqrt(c1^2 + c0 c2)) c3/c0 + c2 + margin
inline std::vector<EnclosureVerdict> enclosure_check(const SpectrumReport& rep,
                                                     const model::HypothesisReport& consts,
                                                     double margin_scale = 1e-6) {
    std::vector<EnclosureVerdict> out;
    for (const auto& p : rep.pairs) {
        EnclosureVerdict v;
        v.lambda = p.lambda;
        double margin = margin_scale * (1.0 + std::abs(p.lambda));
        v.bound = consts.c3 / std::sqrt(consts.c0) * std::sqrt(std::abs(p.lambda.real())) +
                  (consts.c1 + std::sqrt(consts.c1 * consts.c1 + consts.c0 * consts.c2)) *
                      consts.c3 / consts.c0 +
                  consts.c2 + margin;
        v.inside = std::abs(p.lambda.imag()) <= v.bound;
        out.push_back(v);
    }
    return out;
}

} // namespace thinspec::spectral
