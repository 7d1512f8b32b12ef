#ifndef CTQ_QUADRATURE_HPP
#define CTQ_QUADRATURE_HPP

#include <cstddef>
#include <span>
#include <vector>

namespace ctq {

/// Uniform grid of n >= 2 points covering [lo, hi] inclusive.
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> g(n);
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo + step * static_cast<double>(i);
    g.back() = hi;
    return g;
}

/// Composite trapezoid weight sum of samples on a uniform grid with spacing h.
inline double trapezoid(std::span<const double> f, double h) {
    if (f.size() < 2) return 0.0;
    double s = 0.5 * (f.front() + f.back());
    for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
    return s * h;
}

}  // namespace ctq

#endif  // CTQ_QUADRATURE_HPP
