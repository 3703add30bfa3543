#pragma once

// Fourth-order first derivative on a uniform line with one-sided closures
// at the ends.  The closure stencils mirror each other, so the operator is
// equivariant under reversal of the line.

#include <complex>
#include <vector>

namespace thinspec::fd {

template <class T>
std::vector<T> dx4_line(const std::vector<T>& f, double h) {
    const int n = static_cast<int>(f.size());
    std::vector<T> d(n, T{});
    if (n < 5) return d;
    for (int i = 0; i < n; ++i) {
        if (i >= 2 && i + 2 < n)
            d[i] = (-f[i + 2] + 8.0 * f[i + 1] - 8.0 * f[i - 1] + f[i - 2]) / (12.0 * h);
        else if (i == 0)
            d[i] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) /
                   (12.0 * h);
        else if (i == 1)
            d[i] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h);
        else if (i == n - 2)
            d[i] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] -
                    f[n - 5]) /
                   (12.0 * h);
        else
            d[i] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] +
                    3.0 * f[n - 5]) /
                   (12.0 * h);
    }
    return d;
}

} // namespace thinspec::fd
