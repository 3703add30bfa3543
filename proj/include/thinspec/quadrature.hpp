#pragma once

// Composite Gauss-Legendre quadrature on [-1/2, 1/2] with a cumulative
// variant: sampled integrands are expanded per panel in Legendre
// polynomials (exact projection at the Gauss nodes), and antiderivatives
// of the expansion give running integrals at nodes or arbitrary points.

#include <cmath>
#include <complex>
#include <vector>

#include "thinspec/error.hpp"

namespace thinspec::cell {

using cplx = std::complex<double>;

namespace detail {

// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration.
inline void gauleg(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    const double pi = 3.14159265358979323846;
    int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[n - 1 - i] = weights[i];
    }
}

inline void legendre_all(int n, double t, std::vector<double>& p) {
    p.assign(n + 1, 0.0);
    p[0] = 1.0;
    if (n >= 1) p[1] = t;
    for (int k = 1; k < n; ++k) p[k + 1] = ((2.0 * k + 1.0) * t * p[k] - k * p[k - 1]) / (k + 1.0);
}

} // namespace detail

struct QuadRule {
    int panels = 8;
    int order = 8;                 // Gauss points per panel
    std::vector<double> xi;        // all nodes on [-1/2, 1/2], ascending
    std::vector<double> w;         // matching weights
    std::vector<double> gl_nodes;  // reference nodes on [-1,1]
    std::vector<double> gl_w;
    double a = -0.5, b = 0.5;

    int size() const { return static_cast<int>(xi.size()); }
    double panel_halfwidth() const { return (b - a) / (2.0 * panels); }
};

inline QuadRule make_rule(int panels = 8, int order = 8) {
    if (panels < 1 || order < 2) throw error("cell.make_rule: panels >= 1 and order >= 2 required");
    QuadRule q;
    q.panels = panels;
    q.order = order;
    detail::gauleg(order, q.gl_nodes, q.gl_w);
    double h = (q.b - q.a) / panels;
    for (int p = 0; p < panels; ++p) {
        double lo = q.a + p * h;
        for (int i = 0; i < order; ++i) {
            q.xi.push_back(lo + 0.5 * h * (q.gl_nodes[i] + 1.0));
            q.w.push_back(0.5 * h * q.gl_w[i]);
        }
    }
    return q;
}

template <class T>
T integrate(const QuadRule& q, const std::vector<T>& f) {
    T s{};
    for (int i = 0; i < q.size(); ++i) s += q.w[i] * f[i];
    return s;
}

// Antiderivative of a function sampled at the rule's nodes.  Per panel the
// sample is the degree order-1 Legendre interpolant; its primitive is exact.
class Cumulative {
public:
    Cumulative() = default;

    Cumulative(const QuadRule& q, const std::vector<cplx>& f) : rule_(&q) {
        const int n = q.order;
        coef_.assign(static_cast<std::size_t>(q.panels) * n, cplx(0.0));
        std::vector<double> p;
        // c_k = (2k+1)/2 sum_i w_i f(t_i) P_k(t_i); exact for the interpolant
        for (int pan = 0; pan < q.panels; ++pan) {
            for (int i = 0; i < n; ++i) {
                detail::legendre_all(n - 1, q.gl_nodes[i], p);
                cplx fi = f[pan * n + i];
                for (int k = 0; k < n; ++k)
                    coef_[pan * n + k] += (2.0 * k + 1.0) / 2.0 * q.gl_w[i] * fi * p[k];
            }
        }
        // running integral up to each panel's start
        panel_start_.assign(q.panels + 1, cplx(0.0));
        double hw = q.panel_halfwidth();
        for (int pan = 0; pan < q.panels; ++pan)
            panel_start_[pan + 1] = panel_start_[pan] + 2.0 * hw * coef_[pan * n + 0];
    }

    // integral of f from the interval start to t
    cplx eval(double t) const {
        const QuadRule& q = *rule_;
        double h = (q.b - q.a) / q.panels;
        int pan = static_cast<int>(std::floor((t - q.a) / h));
        if (pan < 0) pan = 0;
        if (pan >= q.panels) pan = q.panels - 1;
        double lo = q.a + pan * h;
        double tau = 2.0 * (t - lo) / h - 1.0;
        if (tau < -1.0) tau = -1.0;
        if (tau > 1.0) tau = 1.0;
        const int n = q.order;
        std::vector<double> p;
        detail::legendre_all(n, tau, p);
        double hw = q.panel_halfwidth();
        // primitive of P_0 is tau+1, of P_k is (P_{k+1}-P_{k-1})/(2k+1); both vanish at tau=-1
        cplx s = coef_[pan * n + 0] * (tau + 1.0);
        for (int k = 1; k < n; ++k)
            s += coef_[pan * n + k] * (p[k + 1] - p[k - 1]) / (2.0 * k + 1.0);
        return panel_start_[pan] + hw * s;
    }

    // values at all quadrature nodes
    std::vector<cplx> node_values() const {
        const QuadRule& q = *rule_;
        std::vector<cplx> out(q.size());
        for (int i = 0; i < q.size(); ++i) out[i] = eval(q.xi[i]);
        return out;
    }

    cplx total() const { return panel_start_.back(); }

private:
    const QuadRule* rule_ = nullptr;
    std::vector<cplx> coef_;
    std::vector<cplx> panel_start_;
};

inline std::vector<cplx> cumulative_at_nodes(const QuadRule& q, const std::vector<cplx>& f) {
    return Cumulative(q, f).node_values();
}

// Derivative of the per-panel interpolant at the nodes; used only as a
// diagnostic (residuals of cell solutions).
inline std::vector<cplx> spectral_derivative(const QuadRule& q, const std::vector<cplx>& f) {
    const int n = q.order;
    std::vector<cplx> out(q.size(), cplx(0.0));
    std::vector<double> p, dp;
    // per-panel coefficients, then P'_k via (2k+1)P_k = P'_{k+1} - P'_{k-1}
    for (int pan = 0; pan < q.panels; ++pan) {
        std::vector<cplx> c(n, cplx(0.0));
        for (int i = 0; i < n; ++i) {
            detail::legendre_all(n - 1, q.gl_nodes[i], p);
            for (int k = 0; k < n; ++k)
                c[k] += (2.0 * k + 1.0) / 2.0 * q.gl_w[i] * f[pan * n + i] * p[k];
        }
        double hw = q.panel_halfwidth();
        for (int i = 0; i < n; ++i) {
            double tau = q.gl_nodes[i];
            detail::legendre_all(n - 1, tau, p);
            dp.assign(n, 0.0);
            if (n >= 2) dp[1] = 1.0;
            for (int k = 1; k + 1 < n; ++k) dp[k + 1] = dp[k - 1] + (2.0 * k + 1.0) * p[k];
            cplx s(0.0);
            for (int k = 0; k < n; ++k) s += c[k] * dp[k];
            out[pan * n + i] = s / hw;
        }
    }
    return out;
}

} // namespace thinspec::cell
