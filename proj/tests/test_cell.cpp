#include <doctest.h>

#include <cmath>

#include "thinspec/cell.hpp"

using namespace thinspec;
using cell::cplx;

namespace {
const double pi = 3.14159265358979323846;
}

TEST_CASE("limiting coefficients: constant and polynomial integrands") {
    auto q = cell::make_rule(8);

    auto free = model::catalog("free", {{"alpha0", 1.0}});
    auto lc = cell::limiting_coefficients(free, {0.0, 1.0}, q);
    CHECK(lc.a0_11[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(lc.a0_1[0]) <= 1e-15);
    CHECK(lc.a00[0].real() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(lc.a00[0].imag()) <= 1e-16);

    // int (1 - xi^2) dxi = 1 - 1/12
    auto shear = model::catalog("shear", {{"c12", 1.0}, {"alpha0", 0.0}});
    auto lcs = cell::limiting_coefficients(shear, {0.0}, q);
    CHECK(lcs.a0_11[0] == doctest::Approx(1.0 - 1.0 / 12.0).epsilon(1e-14));

    auto well = model::catalog("pt_well", {{"alpha0", 1.0}});
    auto lcw = cell::limiting_coefficients(well, {0.0}, q);
    CHECK(lcw.a00[0].real() == doctest::Approx(-1.0).epsilon(1e-14));  // -2 + alpha^2
}

TEST_CASE("B-coefficients match pointwise and under the integral") {
    auto free = model::catalog("free", {{"alpha0", 1.0}});
    auto b = cell::b_coefficients(free, 0.3, 0.2);
    CHECK(b.b11 == doctest::Approx(1.0));
    CHECK(b.b0.real() == doctest::Approx(1.0));

    auto shear = model::catalog("shear", {{"c12", 1.0}});
    CHECK(cell::b_coefficients(shear, 0.0, 0.5).b11 == doctest::Approx(1.0 - 0.25));

    // integral of B reproduces the limiting coefficients on every catalog problem
    auto q = cell::make_rule(8);
    for (const char* name : {"free", "pt_well", "shear", "fullmix"}) {
        auto cs = model::catalog(name);
        for (double x : {-1.3, 0.0, 2.7}) {
            auto lc = cell::limiting_coefficients(cs, {x}, q);
            double i11 = 0;
            cplx i1(0), i0(0);
            for (int i = 0; i < q.size(); ++i) {
                auto b2 = cell::b_coefficients(cs, x, q.xi[i]);
                i11 += q.w[i] * b2.b11;
                i1 += q.w[i] * b2.b1;
                i0 += q.w[i] * b2.b0;
            }
            INFO(name << " at x=" << x);
            CHECK(std::abs(i11 - lc.a0_11[0]) <= 1e-12);
            CHECK(std::abs(i1 - lc.a0_1[0]) <= 1e-12);
            CHECK(std::abs(i0 - lc.a00[0]) <= 1e-12);
        }
    }
}

TEST_CASE("cell solver against the double-integration oracle") {
    auto q = cell::make_rule(8);
    std::vector<double> ann(q.size(), 1.0);

    SUBCASE("zero data gives the zero solution") {
        std::vector<cplx> F(q.size(), cplx(0));
        auto sol = cell::cell_solve(ann, F, 0.0, 0.0, q);
        for (auto v : sol.phi) CHECK(std::abs(v) <= 1e-15);
    }

    SUBCASE("phi'' = cos(2 pi xi) with zero flux") {
        std::vector<cplx> F(q.size());
        for (int i = 0; i < q.size(); ++i) F[i] = std::cos(2 * pi * q.xi[i]);
        auto sol = cell::cell_solve(ann, F, 0.0, 0.0, q);
        for (int i = 0; i < q.size(); ++i) {
            double exact = -std::cos(2 * pi * q.xi[i]) / (4 * pi * pi);
            CHECK(std::abs(sol.phi[i] - exact) <= 1e-10);
        }
        // mean-zero to quadrature tolerance
        CHECK(std::abs(cell::integrate(q, sol.phi)) <= 1e-12);
        // boundary flux: A phi' + g = 0 at both faces
        CHECK(std::abs(sol.flux_profile.eval(-0.5)) <= 1e-10);
        CHECK(std::abs(sol.flux_profile.eval(0.5)) <= 1e-10);
    }

    SUBCASE("ODE residual by spectral differentiation of the tabulated solution") {
        // residual of -(A phi')' + F with the flux differentiated spectrally;
        // 16 panels keep the interpolant-derivative error under the target
        auto q16 = cell::make_rule(16);
        std::vector<double> ann16(q16.size(), 1.0);
        std::vector<cplx> F(q16.size());
        for (int i = 0; i < q16.size(); ++i) F[i] = std::cos(2 * pi * q16.xi[i]);
        auto sol = cell::cell_solve(ann16, F, 0.0, 0.0, q16);
        auto dflux = cell::spectral_derivative(q16, sol.flux);
        double r = 0;
        for (int i = 0; i < q16.size(); ++i) r = std::max(r, std::abs(dflux[i] - F[i]));
        CHECK(r <= 1e-8);
    }

    SUBCASE("incompatible data is rejected") {
        std::vector<cplx> F(q.size(), cplx(1.0));
        CHECK_THROWS_AS(cell::cell_solve(ann, F, 0.0, 0.0, q), solvability_error);
    }

    SUBCASE("variable coefficient, manufactured solution") {
        // phi = sin(2 pi xi)/(2 pi), A = 2 + sin(pi xi): F = (A phi')',
        // g_± = -(A phi')(±1/2); subtract the mean afterwards
        std::vector<cplx> F(q.size());
        std::vector<double> A(q.size());
        auto a_of = [](double t) { return 2.0 + std::sin(pi * t); };
        auto phi_of = [](double t) { return std::sin(2 * pi * t) / (2 * pi); };
        auto dphi_of = [](double t) { return std::cos(2 * pi * t); };
        auto dA = [](double t) { return pi * std::cos(pi * t); };
        auto ddphi = [](double t) { return -2 * pi * std::sin(2 * pi * t); };
        for (int i = 0; i < q.size(); ++i) {
            double t = q.xi[i];
            A[i] = a_of(t);
            F[i] = dA(t) * dphi_of(t) + a_of(t) * ddphi(t);
        }
        cplx gm = -a_of(-0.5) * dphi_of(-0.5);
        cplx gp = -a_of(0.5) * dphi_of(0.5);
        auto sol = cell::cell_solve(A, F, gm, gp, q, 1e-9);
        std::vector<cplx> exact(q.size());
        for (int i = 0; i < q.size(); ++i) exact[i] = phi_of(q.xi[i]);
        cplx mean = cell::integrate(q, exact);
        for (int i = 0; i < q.size(); ++i)
            CHECK(std::abs(sol.phi[i] - (exact[i] - mean)) <= 1e-9);
    }
}

TEST_CASE("profiles G_1 and G_0") {
    auto q = cell::make_rule(8);

    SUBCASE("free: G_0 = -i alpha xi, G_1 = 0") {
        auto cs = model::catalog("free", {{"alpha0", 0.7}});
        auto cp = cell::cell_profiles(cs, 1.2, q);
        for (int i = 0; i < q.size(); ++i) {
            CHECK(std::abs(cp.G0[i] - cplx(0.0, -0.7 * q.xi[i])) <= 1e-13);
            CHECK(std::abs(cp.G1[i]) <= 1e-14);
        }
        CHECK(std::abs(cp.G0p.eval(0.25) - cplx(0.0, -0.175)) <= 1e-13);
    }

    SUBCASE("shear: G_1 = -c xi^2/2 + c/24") {
        double c = 1.4;
        auto cs = model::catalog("shear", {{"c12", c}, {"alpha0", 0.0}});
        auto cp = cell::cell_profiles(cs, 0.0, q);
        for (int i = 0; i < q.size(); ++i) {
            double t = q.xi[i];
            CHECK(std::abs(cp.G1[i] - (-c * t * t / 2 + c / 24)) <= 1e-13);
        }
    }

    SUBCASE("mean-zero on the catalog") {
        for (const char* name : {"free", "pt_well", "shear", "fullmix"}) {
            auto cs = model::catalog(name);
            auto cp = cell::cell_profiles(cs, 0.8, q);
            CHECK(std::abs(cell::integrate(q, cp.G1)) <= 1e-12);
            CHECK(std::abs(cell::integrate(q, cp.G0)) <= 1e-12);
        }
    }
}

TEST_CASE("corrector profile integrates from zero") {
    auto q = cell::make_rule(8);

    SUBCASE("free with alpha=1, u0=1, grad=0: w = -i xi") {
        auto cs = model::catalog("free", {{"alpha0", 1.0}});
        auto w = cell::w_profile(cs, 1.0, 0.0, 0.0, q);
        for (double t : {-0.5, -0.2, 0.0, 0.3, 0.5})
            CHECK(std::abs(w.eval(t) - cplx(0.0, -t)) <= 1e-13);
    }

    SUBCASE("linearity: zero data gives zero") {
        auto cs = model::catalog("shear");
        auto w = cell::w_profile(cs, 0.0, 0.0, 0.0, q);
        for (double t : {-0.4, 0.1, 0.5}) CHECK(std::abs(w.eval(t)) <= 1e-15);
    }

    SUBCASE("shear with grad=1: w = -c xi^2/2") {
        double c = 2.0;
        auto cs = model::catalog("shear", {{"c12", c}, {"alpha0", 0.0}});
        auto w = cell::w_profile(cs, 0.0, 1.0, 0.0, q);
        for (double t : {-0.5, -0.1, 0.2, 0.5})
            CHECK(std::abs(w.eval(t) - cplx(-c * t * t / 2, 0.0)) <= 1e-13);
    }
}
