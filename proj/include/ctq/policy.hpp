#ifndef CTQ_POLICY_HPP
#define CTQ_POLICY_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "ctq/common.hpp"
#include "ctq/model.hpp"
#include "ctq/quadrature.hpp"
#include "ctq/rng.hpp"

namespace ctq {

/// Moments of a relaxed policy at one (t, x): mean, differential entropy in
/// nats, normalizing constant of the unnormalized density, and variance.
struct PolicyStats {
    double mean = 0.0;
    double entropy = 0.0;
    double normalizing_constant = 1.0;
    double variance = 0.0;
};

/// Feedback relaxed policy pi(a | t, x) proportional to exp(g(t, x, a) / gamma)
/// on a compact action interval. Normalization, sampling and moments all use
/// the same composite trapezoid rule on M uniformly spaced nodes, so the
/// sampled law is exactly the inverse of the tabulated CDF. Immutable and
/// shareable; sampling needs a caller-owned random stream.
class GibbsPolicy {
  public:
    using Exponent = std::function<double(double, double, double)>;

    GibbsPolicy(Exponent exponent, double gamma, ActionSpace space, int quadrature_points = 0)
        : exponent_(std::move(exponent)),
          gamma_(gamma),
          space_(space),
          points_(quadrature_points > 0 ? quadrature_points : space.quadrature_points) {
        require(static_cast<bool>(exponent_), "GibbsPolicy: null exponent");
        require(gamma_ > 0, "GibbsPolicy: temperature must be positive");
        require(points_ >= 2, "GibbsPolicy: need >= 2 quadrature points");
    }

    const ActionSpace& action_space() const { return space_; }
    double temperature() const { return gamma_; }
    int quadrature_points() const { return points_; }
    double exponent(double t, double x, double a) const { return exponent_(t, x, a); }

    /// Normalization table at one (t, x), reusable across queries at that
    /// point. Holds shifted exponent values, trapezoid node densities and the
    /// cumulative distribution on the node grid.
    struct Slice {
        double lower = 0.0;
        double step = 0.0;
        double shift = 0.0;    // max of g/gamma over the grid, subtracted before exp
        double log_norm = 0.0; // log of the trapezoid integral of the shifted values
        std::vector<double> density;  // normalized density at the nodes
        std::vector<double> cdf;      // cdf[0] = 0, cdf[M-1] = 1

        double node(std::size_t i) const { return lower + step * static_cast<double>(i); }

        /// Inverse-CDF draw with linear interpolation inside grid cells.
        double sample(Rng& rng) const {
            const double u = uniform01(rng);
            const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
            std::size_t j = it == cdf.begin()
                                ? 0
                                : static_cast<std::size_t>(it - cdf.begin()) - 1;
            if (j >= cdf.size() - 1) j = cdf.size() - 2;
            const double w = cdf[j + 1] - cdf[j];
            if (w <= 0) return node(j);
            return node(j) + step * (u - cdf[j]) / w;
        }
    };

    void build_slice(double t, double x, Slice& slice) const {
        const std::size_t m = static_cast<std::size_t>(points_);
        slice.lower = space_.lower;
        slice.step = space_.volume() / static_cast<double>(m - 1);
        slice.density.resize(m);
        slice.cdf.resize(m);
        double maxw = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            const double w = exponent_(t, x, slice.node(i)) / gamma_;
            if (!std::isfinite(w)) throw evaluation_error("GibbsPolicy: non-finite exponent");
            slice.density[i] = w;  // temporarily holds g/gamma
            maxw = std::max(maxw, w);
        }
        slice.shift = maxw;
        for (std::size_t i = 0; i < m; ++i) slice.density[i] = std::exp(slice.density[i] - maxw);
        const double z = trapezoid(slice.density, slice.step);
        slice.log_norm = std::log(z);
        double c = 0.0;
        slice.cdf[0] = 0.0;
        for (std::size_t i = 0; i + 1 < m; ++i) {
            c += 0.5 * slice.step * (slice.density[i] + slice.density[i + 1]);
            slice.cdf[i + 1] = c / z;
        }
        slice.cdf[m - 1] = 1.0;
        for (std::size_t i = 0; i < m; ++i) slice.density[i] /= z;
    }

    Slice slice(double t, double x) const {
        Slice s;
        build_slice(t, x, s);
        return s;
    }

    /// Log-density of an arbitrary action against a prebuilt slice.
    double log_density(double t, double x, double a, const Slice& slice) const {
        const double w = exponent_(t, x, a) / gamma_;
        if (!std::isfinite(w)) throw evaluation_error("GibbsPolicy: non-finite exponent");
        return (w - slice.shift) - slice.log_norm;
    }

    double density(double t, double x, double a) const {
        require(space_.contains(a), "GibbsPolicy::density: action outside the action space");
        Slice s;
        build_slice(t, x, s);
        return std::exp(log_density(t, x, a, s));
    }

    double sample(double t, double x, Rng& rng) const {
        Slice s;
        build_slice(t, x, s);
        return s.sample(rng);
    }

    std::pair<double, double> sample_with_log_density(double t, double x, Rng& rng,
                                                      Slice& workspace) const {
        build_slice(t, x, workspace);
        const double a = workspace.sample(rng);
        return {a, log_density(t, x, a, workspace)};
    }

    PolicyStats stats(double t, double x) const {
        Slice s;
        build_slice(t, x, s);
        const std::size_t m = s.density.size();
        std::vector<double> f(m);
        PolicyStats st;
        for (std::size_t i = 0; i < m; ++i) f[i] = s.node(i) * s.density[i];
        st.mean = trapezoid(f, s.step);
        for (std::size_t i = 0; i < m; ++i) f[i] = s.node(i) * s.node(i) * s.density[i];
        st.variance = trapezoid(f, s.step) - st.mean * st.mean;
        for (std::size_t i = 0; i < m; ++i) {
            const double p = s.density[i];
            f[i] = p > 0 ? -p * std::log(p) : 0.0;
        }
        st.entropy = trapezoid(f, s.step);
        st.normalizing_constant = std::exp(s.shift + s.log_norm);
        return st;
    }

  private:
    Exponent exponent_;
    double gamma_;
    ActionSpace space_;
    int points_;
};

/// Uniform policy over the given action space.
inline GibbsPolicy uniform_policy(const ActionSpace& space) {
    return GibbsPolicy([](double, double, double) { return 0.0; }, 1.0, space);
}

/// Total variation distance (1/2) integral |p - q| da at one (t, x), by
/// trapezoid quadrature on the finer of the two node grids. Symmetric in its
/// arguments by construction.
inline double tv_distance(const GibbsPolicy& p, const GibbsPolicy& q, double t, double x) {
    require(p.action_space().lower == q.action_space().lower &&
                p.action_space().upper == q.action_space().upper,
            "tv_distance: mismatched action spaces");
    const int m = std::max(p.quadrature_points(), q.quadrature_points());
    GibbsPolicy::Slice sp, sq;
    GibbsPolicy pr(
        [&p](double tt, double xx, double aa) { return p.exponent(tt, xx, aa); },
        p.temperature(), p.action_space(), m);
    GibbsPolicy qr(
        [&q](double tt, double xx, double aa) { return q.exponent(tt, xx, aa); },
        q.temperature(), q.action_space(), m);
    pr.build_slice(t, x, sp);
    qr.build_slice(t, x, sq);
    std::vector<double> diff(sp.density.size());
    for (std::size_t i = 0; i < diff.size(); ++i)
        diff[i] = std::fabs(sp.density[i] - sq.density[i]);
    return 0.5 * trapezoid(diff, sp.step);
}

}  // namespace ctq

#endif  // CTQ_POLICY_HPP
