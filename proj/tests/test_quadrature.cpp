#include <doctest.h>

#include <cmath>

#include "thinspec/quadrature.hpp"

using namespace thinspec;
using thinspec::cell::cplx;

TEST_CASE("weights sum to the interval length") {
    for (int panels : {1, 4, 8, 16}) {
        auto q = cell::make_rule(panels);
        double s = 0;
        for (double w : q.w) s += w;
        CHECK(std::abs(s - 1.0) <= 1e-15);
    }
}

TEST_CASE("degree 15 polynomials integrate exactly per panel") {
    auto q = cell::make_rule(1, 8);
    for (int deg = 0; deg <= 15; ++deg) {
        std::vector<cplx> f(q.size());
        for (int i = 0; i < q.size(); ++i) f[i] = std::pow(q.xi[i], deg);
        // int_{-1/2}^{1/2} t^deg dt
        double exact = (deg % 2 == 1) ? 0.0 : 2.0 * std::pow(0.5, deg + 1) / (deg + 1);
        CHECK(std::abs(cell::integrate(q, f) - exact) <= 1e-13);
    }
}

TEST_CASE("cumulative antiderivative of smooth functions") {
    auto q = cell::make_rule(8);
    const double pi = 3.14159265358979323846;
    std::vector<cplx> f(q.size());
    for (int i = 0; i < q.size(); ++i) f[i] = std::cos(2 * pi * q.xi[i]);
    cell::Cumulative c(q, f);
    // int_{-1/2}^x cos(2 pi t) dt = sin(2 pi x)/(2 pi)
    for (double x : {-0.5, -0.3, -0.123, 0.0, 0.25, 0.5}) {
        double exact = std::sin(2 * pi * x) / (2 * pi);
        CHECK(std::abs(c.eval(x) - exact) <= 1e-12);
    }
    auto nodes = c.node_values();
    for (int i = 0; i < q.size(); ++i) {
        double exact = std::sin(2 * pi * q.xi[i]) / (2 * pi);
        CHECK(std::abs(nodes[i] - exact) <= 1e-12);
    }
    CHECK(std::abs(c.total()) <= 1e-14);
}

TEST_CASE("cumulative is exact on per-panel polynomials") {
    auto q = cell::make_rule(4);
    std::vector<cplx> f(q.size());
    for (int i = 0; i < q.size(); ++i) {
        double t = q.xi[i];
        f[i] = cplx(3 * t * t, -2 * t);
    }
    cell::Cumulative c(q, f);
    for (double x : {-0.47, -0.25, 0.1, 0.49}) {
        cplx exact(x * x * x + 0.125, -(x * x - 0.25));
        CHECK(std::abs(c.eval(x) - exact) <= 1e-14);
    }
}

TEST_CASE("spectral derivative recovers smooth slopes") {
    auto q = cell::make_rule(8);
    std::vector<cplx> f(q.size());
    for (int i = 0; i < q.size(); ++i) f[i] = std::exp(q.xi[i]);
    auto d = cell::spectral_derivative(q, f);
    for (int i = 0; i < q.size(); ++i)
        CHECK(std::abs(d[i] - std::exp(q.xi[i])) <= 1e-10);
}
