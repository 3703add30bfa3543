#pragma once

// Tensor grid on the truncated strip [-X, X] x [-eps/2, eps/2].  The
// transverse grid lives on the fixed reference interval [-1/2, 1/2] in the
// rescaled variable; physical spacing is eps/(Nt-1).

#include <vector>

#include "thinspec/error.hpp"

namespace thinspec::disc {

struct Grid {
    double X = 12.0;
    int Nx = 201;
    double eps = 0.1;
    int Nt = 17;
    double hx = 0.0;  // tangential spacing
    double ht = 0.0;  // physical transverse spacing

    int interior_nx() const { return Nx - 2; }
    int dim() const { return interior_nx() * Nt; }

    double x_of(int a) const { return -X + a * hx; }
    double xi_of(int m) const { return -0.5 + static_cast<double>(m) / (Nt - 1); }
    double xn_of(int m) const { return eps * xi_of(m); }

    // flat index over the full grid, node (a, m) -> a*Nt + m
    int node(int a, int m) const { return a * Nt + m; }
    // matrix index over interior-x nodes
    int idx(int a, int m) const { return (a - 1) * Nt + m; }

    std::vector<double> xs() const {
        std::vector<double> v(Nx);
        for (int a = 0; a < Nx; ++a) v[a] = x_of(a);
        return v;
    }
    std::vector<double> xis() const {
        std::vector<double> v(Nt);
        for (int m = 0; m < Nt; ++m) v[m] = xi_of(m);
        return v;
    }
    // trapezoid weight of transverse node m
    double wt(int m) const { return (m == 0 || m == Nt - 1) ? 0.5 : 1.0; }
};

inline Grid build_grid(double X, int Nx, double eps, int Nt) {
    if (X <= 0.0) throw error("disc.build_grid: X > 0 required");
    if (Nx < 5) throw error("disc.build_grid: Nx >= 5 required");
    if (eps <= 0.0) throw error("disc.build_grid: eps > 0 required");
    if (Nt < 3) throw error("disc.build_grid: Nt >= 3 required");
    Grid g;
    g.X = X;
    g.Nx = Nx;
    g.eps = eps;
    g.Nt = Nt;
    g.hx = 2.0 * X / (Nx - 1);
    g.ht = eps / (Nt - 1);
    return g;
}

} // namespace thinspec::disc
