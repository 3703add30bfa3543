#include <doctest.h>

#include <cmath>

#include "thinspec/converge.hpp"
#include "thinspec/spectral.hpp"

using namespace thinspec;
using disc::cplx;
using disc::SpMat;

namespace {

SpMat diag2(cplx a, cplx b) {
    SpMat M(2, 2);
    M.insert(0, 0) = a;
    M.insert(1, 1) = b;
    M.makeCompressed();
    return M;
}

SpMat random_sparse(int n, std::uint64_t seed, double diag_boost) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<Eigen::Triplet<cplx>> trip;
    for (int i = 0; i < n; ++i) {
        trip.emplace_back(i, i, cplx(d(rng) + diag_boost * (i + 1), d(rng)));
        for (int rep = 0; rep < 3; ++rep) {
            int j = std::uniform_int_distribution<int>(0, n - 1)(rng);
            trip.emplace_back(i, j, 0.3 * cplx(d(rng), d(rng)));
        }
    }
    SpMat M(n, n);
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
}

} // namespace

TEST_CASE("shift-invert on a diagonal matrix") {
    auto M = diag2(1.0, 3.0);
    disc::DiscreteOperator op;
    op.M = M;
    op.reflection = {0, 1};
    op.wsqrt = {1.0, 1.0};
    auto rep = spectral::eigs_near(op, cplx(0.9, 0.0), 1, 1e-12);
    CHECK(std::abs(rep.pairs[0].lambda - cplx(1.0)) <= 1e-12);
    CHECK(std::abs(std::abs(rep.pairs[0].vector[0]) - 1.0) <= 1e-12);
}

TEST_CASE("arnoldi agrees with the dense QR oracle") {
    for (std::uint64_t seed : {11u, 29u, 47u}) {
        int n = 120;
        auto M = random_sparse(n, seed, 0.15);
        cplx sigma(2.0, 0.3);
        auto arn = solvers::shift_invert_arnoldi(M, sigma, 4, {});
        auto qr = solvers::dense_eigs(M, sigma, 4);
        for (int i = 0; i < 4; ++i) {
            INFO("seed " << seed << " pair " << i);
            CHECK(std::abs(arn[i].lambda - qr[i].lambda) <= 1e-8);
        }
    }
}

TEST_CASE("solve_linear") {
    SUBCASE("identity and scalar cases") {
        auto I = diag2(1.0, 1.0);
        Eigen::VectorXcd f(2);
        f << cplx(1, 2), cplx(-3, 0.5);
        auto u = solvers::resolvent_solve(I, 0.0, f);
        CHECK((u - f).norm() <= 1e-14);

        auto M = diag2(2.0, 2.0);
        Eigen::VectorXcd one = Eigen::VectorXcd::Ones(2);
        auto u2 = solvers::resolvent_solve(M, 1.0, one);
        CHECK((u2 - one).norm() <= 1e-14);
    }

    SUBCASE("random system meets the residual target") {
        int n = 200;
        auto M = random_sparse(n, 5u, 0.2);
        cplx lambda(120.0, 40.0);  // far outside the Gershgorin range
        Eigen::VectorXcd f = solvers::seeded_vector(n, 77u);
        auto u = solvers::resolvent_solve(M, lambda, f);
        SpMat A = M;
        for (int i = 0; i < n; ++i) A.coeffRef(i, i) -= lambda;
        CHECK((f - A * u).norm() <= 1e-10 * f.norm());
    }

    SUBCASE("singular shift is reported") {
        auto M = diag2(1.0, 3.0);
        Eigen::VectorXcd f = Eigen::VectorXcd::Ones(2);
        CHECK_THROWS_AS(solvers::resolvent_solve(M, 1.0, f), error);
    }
}

TEST_CASE("pt_normalize") {
    SUBCASE("identity reflection reduces to plain normalization") {
        spectral::EigenPair p;
        p.vector = Eigen::VectorXcd(2);
        p.vector << cplx(3.0, 0.0), cplx(0.0, 0.0);
        std::vector<int> refl{0, 1};
        p.pt_norm = spectral::pt_pair(p.vector, p.vector, refl);
        auto out = spectral::pt_normalize({p}, refl);
        CHECK(std::abs(out[0].pt_norm - cplx(1.0)) <= 1e-12);
        CHECK(std::abs(out[0].vector[0] - cplx(1.0)) <= 1e-12);
    }

    SUBCASE("orthogonal eigenvectors of a Hermitian matrix stay orthonormal") {
        std::vector<int> refl{0, 1};
        spectral::EigenPair a, b;
        a.vector = Eigen::VectorXcd(2);
        a.vector << 2.0, 0.0;
        b.vector = Eigen::VectorXcd(2);
        b.vector << 0.0, cplx(0.0, 0.5);
        a.pt_norm = spectral::pt_pair(a.vector, a.vector, refl);
        b.pt_norm = spectral::pt_pair(b.vector, b.vector, refl);
        auto out = spectral::pt_normalize({a, b}, refl);
        CHECK(std::abs(out[0].pt_norm - cplx(1.0)) <= 1e-12);
        CHECK(std::abs(out[1].pt_norm - cplx(1.0)) <= 1e-12);
        CHECK(std::abs(spectral::pt_pair(out[0].vector, out[1].vector, refl)) <= 1e-12);
    }

    SUBCASE("ground state of the strip operator pairs to one") {
        auto cs = model::catalog("free", {{"alpha0", 1.0}});
        auto g = disc::build_grid(12.0, 101, 0.1, 9);
        auto op = disc::assemble_perturbed(cs, g);
        double sigma = std::pow(3.14159265358979323846 / 24.0, 2) + 1.0;
        auto rep = spectral::eigs_near(op, sigma, 1, 1e-10);
        // (v, Pv) is real by the reflection symmetry of the pairing and
        // close to one for a near-constant transverse mode
        CHECK(std::abs(rep.pairs[0].pt_norm.imag()) <= 1e-10);
        auto out = spectral::pt_normalize(rep.pairs, op.reflection);
        CHECK(std::abs(out[0].pt_norm - cplx(1.0)) <= 1e-10);
        // idempotent
        auto again = spectral::pt_normalize(out, op.reflection);
        CHECK((again[0].vector - out[0].vector).norm() <= 1e-10);
    }
}

TEST_CASE("hermitian limiting matrices return real eigenvalues") {
    auto q = cell::make_rule(8);
    auto cs = model::catalog("shear");
    disc::Grid g = disc::build_grid(12.0, 801, 1.0, 3);
    auto xs = g.xs();
    auto lc = cell::limiting_coefficients(cs, xs, q);
    auto M0 = disc::assemble_limiting(lc, xs);
    auto rep = spectral::eigs_near(M0, converge::ground_shift(lc), 3, 1e-10);
    for (const auto& p : rep.pairs) CHECK(std::abs(p.lambda.imag()) <= 1e-10);
}

TEST_CASE("enclosure verdict arithmetic") {
    model::HypothesisReport consts;
    consts.c0 = 1.0;
    consts.c1 = 0.0;
    consts.c2 = 0.0;
    consts.c3 = 2.0;

    spectral::SpectrumReport rep;
    spectral::EigenPair p1;
    p1.lambda = cplx(4.0, 10.0);
    spectral::EigenPair p2;
    p2.lambda = cplx(4.0, 3.0);
    spectral::EigenPair p3;
    p3.lambda = cplx(5.0, 0.0);
    rep.pairs = {p1, p2, p3};

    auto verdict = spectral::enclosure_check(rep, consts, 1e-6);
    // bound = 2*sqrt(4) = 4 (plus margin)
    CHECK_FALSE(verdict[0].inside);  // 10 > 4
    CHECK(verdict[1].inside);        // 3 <= 4
    CHECK(verdict[2].inside);        // real
}
