#include <doctest.h>

#include <cmath>
#include <sstream>

#include "thinspec/assemble.hpp"
#include "thinspec/converge.hpp"
#include "thinspec/spectral.hpp"

using namespace thinspec;
using disc::cplx;

namespace {
const double pi = 3.14159265358979323846;
}

TEST_CASE("grid construction") {
    auto g = disc::build_grid(10.0, 11, 0.1, 3);
    CHECK(g.hx == doctest::Approx(2.0));
    CHECK(g.ht == doctest::Approx(0.05));
    CHECK(g.x_of(0) == doctest::Approx(-10.0));
    CHECK(g.xn_of(0) == doctest::Approx(-0.05));
    CHECK(g.node(0, 0) == 0);
    CHECK_THROWS_AS(disc::build_grid(10.0, 11, 0.1, 2), error);
    CHECK_THROWS_AS(disc::build_grid(-1.0, 11, 0.1, 3), error);
    CHECK_THROWS_AS(disc::build_grid(10.0, 4, 0.1, 3), error);
    CHECK_THROWS_AS(disc::build_grid(10.0, 11, 0.0, 3), error);
}

TEST_CASE("free with alpha=0 assembles a real symmetric matrix") {
    auto cs = model::catalog("free", {{"alpha0", 0.0}});
    auto g = disc::build_grid(8.0, 41, 0.1, 9);
    auto op = disc::assemble_perturbed(cs, g);
    Eigen::MatrixXcd D(op.M);
    CHECK((D - D.transpose()).norm() / D.norm() <= 1e-15);
    CHECK(D.imag().norm() / D.norm() <= 1e-15);
}

TEST_CASE("reflection is an involution and commutes with the weights") {
    auto cs = model::catalog("shear");
    auto g = disc::build_grid(6.0, 21, 0.1, 8);
    auto op = disc::assemble_perturbed(cs, g);
    for (int i = 0; i < op.dim(); ++i) {
        CHECK(op.reflection[op.reflection[i]] == i);
        CHECK(op.wsqrt[op.reflection[i]] == op.wsqrt[i]);
    }
}

TEST_CASE("transverse average and embedding") {
    auto g = disc::build_grid(6.0, 11, 0.2, 9);
    std::vector<cplx> ones(static_cast<std::size_t>(g.Nx) * g.Nt, cplx(1.0));
    auto avg = disc::transverse_average(ones, g);
    for (auto v : avg) CHECK(std::abs(v - cplx(1.0)) <= 1e-15);

    // odd field averages to zero on the symmetric grid
    std::vector<cplx> odd(ones.size());
    for (int a = 0; a < g.Nx; ++a)
        for (int m = 0; m < g.Nt; ++m) odd[g.node(a, m)] = g.xi_of(m);
    auto avg_odd = disc::transverse_average(odd, g);
    for (auto v : avg_odd) CHECK(std::abs(v) <= 1e-16);

    // trapezoid average of xi^2 tends to 1/12
    double prev_err = 1.0;
    for (int Nt : {9, 17, 33}) {
        auto gf = disc::build_grid(6.0, 11, 0.2, Nt);
        std::vector<cplx> sq(static_cast<std::size_t>(gf.Nx) * gf.Nt);
        for (int a = 0; a < gf.Nx; ++a)
            for (int m = 0; m < gf.Nt; ++m) sq[gf.node(a, m)] = gf.xi_of(m) * gf.xi_of(m);
        double err = std::abs(disc::transverse_average(sq, gf)[0] - cplx(1.0 / 12.0));
        CHECK(err < prev_err * 0.3);  // second-order decay
        prev_err = err;
    }

    // projector identity: average(embed(v)) = v exactly
    std::vector<cplx> line(g.Nx);
    for (int a = 0; a < g.Nx; ++a) line[a] = cplx(std::sin(0.3 * a), std::cos(0.1 * a));
    auto back = disc::transverse_average(disc::embed(line, g), g);
    for (int a = 0; a < g.Nx; ++a) CHECK(std::abs(back[a] - line[a]) <= 1e-15);

    CHECK_THROWS_AS(disc::transverse_average(line, g), error);
    CHECK_THROWS_AS(disc::embed(ones, g), error);
}

TEST_CASE("limiting operator: structure and the bound-state oracle") {
    auto q = cell::make_rule(8);

    SUBCASE("free: -D^2 + alpha^2") {
        auto cs = model::catalog("free", {{"alpha0", 1.0}});
        disc::Grid g = disc::build_grid(12.0, 401, 1.0, 3);
        auto xs = g.xs();
        auto lc = cell::limiting_coefficients(cs, xs, q);
        auto M0 = disc::assemble_limiting(lc, xs);
        double oracle = std::pow(pi / (2 * 12.0), 2) + 1.0;
        auto rep = spectral::eigs_near(M0, oracle - 0.005, 1, 1e-10);
        CHECK(std::abs(rep.pairs[0].lambda - oracle) <= 2e-4);
        CHECK(std::abs(rep.pairs[0].lambda.imag()) <= 1e-12);
    }

    SUBCASE("pt_well: ground state at -1 + alpha0^2") {
        auto cs = model::catalog("pt_well", {{"alpha0", 0.0}});
        disc::Grid g = disc::build_grid(12.0, 2001, 1.0, 3);
        auto xs = g.xs();
        auto lc = cell::limiting_coefficients(cs, xs, q);
        auto M0 = disc::assemble_limiting(lc, xs);
        auto rep = spectral::eigs_near(M0, -1.05, 1, 1e-10);
        CHECK(std::abs(rep.pairs[0].lambda - cplx(-1.0)) <= 1e-4);
    }
}

TEST_CASE("separable problem: exact transverse mode") {
    // free with alpha=1: e^{-i alpha x_n} satisfies the boundary condition
    // exactly, so the eigenvalue sits at the tangential Dirichlet value
    // plus alpha^2 for every eps
    auto cs = model::catalog("free", {{"alpha0", 1.0}});
    double X = 12.0;
    double oracle = std::pow(pi / (2 * X), 2) + 1.0;
    for (double eps : {0.2, 0.05}) {
        auto g = disc::build_grid(X, 201, eps, 17);
        auto op = disc::assemble_perturbed(cs, g);
        auto rep = spectral::eigs_near(op, oracle, 1, 1e-10);
        INFO("eps = " << eps);
        CHECK(std::abs(rep.pairs[0].lambda.imag()) <= 1e-10);
        CHECK(std::abs(rep.pairs[0].lambda - oracle) <= 5e-3);  // coarse grid, h^2 error
    }
}

TEST_CASE("order of accuracy: free alpha=0 ground state converges at h^2") {
    auto cs = model::catalog("free", {{"alpha0", 0.0}});
    double X = 10.0;
    double oracle = std::pow(pi / (2 * X), 2);
    converge::ConvergenceTable t;
    t.quantity = "eig_h_refinement";
    for (int Nx : {51, 101, 201}) {
        auto g = disc::build_grid(X, Nx, 0.1, 5);
        auto op = disc::assemble_perturbed(cs, g);
        auto rep = spectral::eigs_near(op, oracle, 1, 1e-11);
        double err = std::abs(rep.pairs[0].lambda - oracle);
        t.rows.push_back({g.hx, rep.pairs[0].lambda, err, ""});
    }
    auto [rate, r2] = converge::fit_rate(t);
    INFO("observed rate " << rate << " r2 " << r2);
    CHECK(rate >= 1.9);
}

TEST_CASE("structural residuals on the catalog and the mutant detector") {
    auto g = disc::build_grid(12.0, 101, 0.1, 9);

    auto residuals = [&](const model::CoefficientSet& cs) {
        auto op = disc::assemble_perturbed(cs, g);
        auto opm = disc::assemble_perturbed(model::with_negated_alpha(cs), g);
        return spectral::symmetry_residuals(op, opm);
    };

    SUBCASE("identities hold exactly for real-coefficient problems") {
        for (const char* name : {"free", "pt_well", "shear"}) {
            auto r = residuals(model::catalog(name));
            INFO(name);
            CHECK(r.r1 <= 1e-12);
            CHECK(r.r2 <= 1e-12);
            CHECK(r.r3 <= 1e-12);
        }
    }

    SUBCASE("fullmix keeps the antilinear symmetry; the adjoint identities "
            "pick up the imaginary parts of A_1 and A_0") {
        auto r = residuals(model::catalog("fullmix"));
        CHECK(r.r2 <= 1e-12);
        // multiplication blocks built from Im A_1 (resp. Im A_0) are
        // self-adjoint but flip sign under the reflection, so r1 (r3)
        // cannot vanish for a1 (a0) nonzero
        CHECK(r.r1 >= 1e-7);
        CHECK(r.r3 >= 1e-8);
        auto r0 = residuals(model::catalog("fullmix", {{"a1", 0.0}, {"a0", 0.0}}));
        CHECK(r0.r1 <= 1e-12);
        CHECK(r0.r3 <= 1e-12);
    }

    SUBCASE("parity mutant trips the detector") {
        auto mut = model::make_set("1", "xi^2", "xi^2", "1", "0", "0", "-2*sech(x)^2",
                                   "alpha0", {{"alpha0", 1.0}}, "mutant");
        auto r = residuals(mut);
        CHECK(r.r1 >= 1e-3);
    }

    SUBCASE("adjoint pairs by construction") {
        auto cs = model::catalog("shear");
        auto op = disc::assemble_perturbed(cs, g);
        auto opm = disc::assemble_perturbed(model::with_negated_alpha(cs), g);
        Eigen::MatrixXcd A(op.M), B(opm.M);
        CHECK((A.adjoint() - B).norm() / A.norm() <= 1e-13);
    }
}

TEST_CASE("matrix dump uses 0-based coordinate triplets") {
    auto cs = model::catalog("free");
    auto g = disc::build_grid(6.0, 11, 0.1, 5);
    auto op = disc::assemble_perturbed(cs, g);
    std::ostringstream os;
    disc::dump_matrix(op, os);
    std::istringstream is(os.str());
    int r, c;
    double re, im;
    REQUIRE((is >> r >> c >> re >> im));
    CHECK(r >= 0);
    CHECK(c >= 0);
}
