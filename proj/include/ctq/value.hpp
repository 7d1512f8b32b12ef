#ifndef CTQ_VALUE_HPP
#define CTQ_VALUE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ctq/common.hpp"
#include "ctq/csv.hpp"
#include "ctq/model.hpp"
#include "ctq/parallel.hpp"
#include "ctq/policy.hpp"
#include "ctq/quadrature.hpp"
#include "ctq/sim.hpp"

namespace ctq {

/// Monte Carlo estimate with its standard error.
struct Estimate {
    double value = 0.0;
    double stderr_ = 0.0;   // sample standard deviation / sqrt(sample_count)
    std::size_t sample_count = 0;
};

namespace detail {
inline Estimate summarize(const std::vector<double>& samples) {
    Estimate e;
    e.sample_count = samples.size();
    double s = 0.0;
    for (double v : samples) s += v;
    e.value = s / static_cast<double>(samples.size());
    if (samples.size() >= 2) {
        double ss = 0.0;
        for (double v : samples) {
            const double d = v - e.value;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(samples.size() - 1));
        e.stderr_ = sd / std::sqrt(static_cast<double>(samples.size()));
    }
    return e;
}
}  // namespace detail

/// Value function tabulated on a (t, x) grid with bilinear interpolation.
struct ValueSurface {
    std::vector<double> t_grid;  // increasing
    std::vector<double> x_grid;  // increasing
    std::vector<std::vector<double>> values;  // values[i][j] at (t_i, x_j)

    double t_min() const { return t_grid.front(); }
    double t_max() const { return t_grid.back(); }
    double x_min() const { return x_grid.front(); }
    double x_max() const { return x_grid.back(); }

    double value_at(double t, double x) const {
        if (x_grid.size() == 1) {
            require_inside(x_grid, x, "x");
            return column_value(t, 0);
        }
        const auto [j, wx] = locate(x_grid, x, "x");
        return column_value(t, j) * (1 - wx) + column_value(t, j + 1) * wx;
    }

    // Shared by the strict gradient contract and the lenient policy-exponent
    // path. With allow_edges the slope degrades to one-sided at the domain
    // boundary instead of failing.
    double gradient_impl(double t, double x, bool allow_edges) const {
        require_inside(t_grid, t, "t");
        require_inside(x_grid, x, "x");
        const std::size_t nx = x_grid.size();
        if (nx < 2) throw out_of_domain_error("gradient: x grid too small");
        const double snap = 1e-9 * std::max(1.0, x_max() - x_min());
        std::size_t lo, hi;
        std::size_t j = cell_index(x_grid, x);
        if (std::fabs(x - x_grid[j]) <= snap || std::fabs(x - x_grid[j + 1]) <= snap) {
            // On a node: central difference over the two neighbouring columns.
            const std::size_t node = std::fabs(x - x_grid[j]) <= snap ? j : j + 1;
            if (node == 0 || node + 1 >= nx) {
                if (!allow_edges)
                    throw out_of_domain_error("gradient: point not interior to the grid");
                lo = node == 0 ? 0 : nx - 2;
                hi = lo + 1;
            } else {
                lo = node - 1;
                hi = node + 1;
            }
        } else {
            lo = j;
            hi = j + 1;
        }
        const double vlo = column_value(t, lo);
        const double vhi = column_value(t, hi);
        return (vhi - vlo) / (x_grid[hi] - x_grid[lo]);
    }

  private:
    static std::size_t cell_index(const std::vector<double>& g, double v) {
        auto it = std::upper_bound(g.begin(), g.end(), v);
        std::size_t j = it == g.begin() ? 0 : static_cast<std::size_t>(it - g.begin()) - 1;
        if (j >= g.size() - 1) j = g.size() - 2;
        return j;
    }

    static void require_inside(const std::vector<double>& g, double v, const char* axis) {
        const double tol = 1e-9 * std::max(1.0, g.back() - g.front());
        if (v < g.front() - tol || v > g.back() + tol)
            throw out_of_domain_error(std::string("surface query outside grid in ") + axis);
    }

    static std::pair<std::size_t, double> locate(const std::vector<double>& g, double v,
                                                 const char* axis) {
        require_inside(g, v, axis);
        if (g.size() == 1) return {0, 0.0};
        const std::size_t j = cell_index(g, v);
        const double span = g[j + 1] - g[j];
        double w = span > 0 ? (v - g[j]) / span : 0.0;
        w = std::clamp(w, 0.0, 1.0);
        return {j, w};
    }

    double column_value(double t, std::size_t j) const {
        if (t_grid.size() == 1) return values[0][j];
        const auto [i, wt] = locate(t_grid, t, "t");
        return values[i][j] * (1 - wt) + values[i + 1][j] * wt;
    }
};

/// Central finite difference of the surface in x at (t, x), after linear
/// interpolation in time. The point must be interior to the bounding box.
inline double gradient(const ValueSurface& surface, double t, double x) {
    return surface.gradient_impl(t, x, /*allow_edges=*/false);
}

namespace detail {
inline Estimate mc_evaluate_impl(const ProblemSpec& spec, const GibbsPolicy& policy, double t,
                                 double x, std::size_t n_paths, double dt,
                                 std::uint64_t base_seed, bool entropy_bonus, int threads) {
    require(t >= 0 && t <= spec.horizon, "mc_evaluate: t outside [0, T]");
    require(n_paths >= 1, "mc_evaluate: need at least one path");
    const double beta = spec.discount;
    const double gamma = spec.temperature;
    std::vector<double> payoff(n_paths);
    if (t >= spec.horizon - 1e-15) {
        // Empty horizon: the payoff is the terminal reward, exactly.
        std::fill(payoff.begin(), payoff.end(), spec.terminal_reward(x));
        return summarize(payoff);
    }
    parallel_for(n_paths, threads, [&](std::size_t i) {
        Rng rng = derive_stream(base_seed, i);
        const Trajectory traj = rollout(spec, policy, x, dt, rng, t);
        double acc = 0.0;
        for (std::size_t k = 0; k < traj.steps(); ++k) {
            double term = traj.rewards[k];
            if (entropy_bonus) term -= gamma * traj.log_densities[k];
            acc += std::exp(-beta * (traj.times[k] - t)) * term * dt;
        }
        acc += std::exp(-beta * (spec.horizon - t)) * traj.terminal_value;
        payoff[i] = acc;
    });
    return summarize(payoff);
}
}  // namespace detail

/// Entropy-regularized policy value J(t, x; pi): discounted running rewards
/// plus the entropy bonus -gamma log pi at the sampled actions, plus the
/// discounted terminal reward.
inline Estimate mc_evaluate(const ProblemSpec& spec, const GibbsPolicy& policy, double t,
                            double x, std::size_t n_paths, double dt, std::uint64_t base_seed,
                            int threads = 1) {
    return detail::mc_evaluate_impl(spec, policy, t, x, n_paths, dt, base_seed, true, threads);
}

/// Original-problem value of a policy: same as mc_evaluate without the
/// entropy bonus.
inline Estimate mc_evaluate_original(const ProblemSpec& spec, const GibbsPolicy& policy,
                                     double t, double x, std::size_t n_paths, double dt,
                                     std::uint64_t base_seed, int threads = 1) {
    return detail::mc_evaluate_impl(spec, policy, t, x, n_paths, dt, base_seed, false, threads);
}

/// Tabulate mc_evaluate on a grid. The terminal row (t = T) is pinned to the
/// exact terminal reward. Node (i, j) draws from streams derived from
/// (base_seed, i * |x_grid| + j); results do not depend on the thread count.
inline ValueSurface fit_surface(const ProblemSpec& spec, const GibbsPolicy& policy,
                                std::vector<double> t_grid, std::vector<double> x_grid,
                                std::size_t n_paths, double dt, std::uint64_t base_seed,
                                int threads = 1) {
    require(!t_grid.empty() && !x_grid.empty(), "fit_surface: empty grid");
    require(std::is_sorted(t_grid.begin(), t_grid.end()), "fit_surface: t grid not increasing");
    require(std::is_sorted(x_grid.begin(), x_grid.end()), "fit_surface: x grid not increasing");
    require(t_grid.front() >= 0 && t_grid.back() <= spec.horizon + 1e-12,
            "fit_surface: t grid outside [0, T]");
    ValueSurface surf;
    surf.t_grid = std::move(t_grid);
    surf.x_grid = std::move(x_grid);
    const std::size_t nt = surf.t_grid.size(), nx = surf.x_grid.size();
    surf.values.assign(nt, std::vector<double>(nx, 0.0));
    parallel_for(nt * nx, threads, [&](std::size_t idx) {
        const std::size_t i = idx / nx, j = idx % nx;
        const double t = surf.t_grid[i], x = surf.x_grid[j];
        if (t >= spec.horizon - 1e-12) {
            surf.values[i][j] = spec.terminal_reward(x);
        } else {
            surf.values[i][j] = detail::mc_evaluate_impl(spec, policy, t, x, n_paths, dt,
                                                         derive_seed(base_seed, idx), true, 1)
                                    .value;
        }
    });
    return surf;
}

/// Optimal entropy-regularized value by finite differences, marching
/// backward from v(T, .) = h. Diffusion is handled implicitly (tridiagonal
/// solve), the soft-max drift/reward term explicitly with action quadrature
/// at each node. Boundary condition: zero second derivative at the x-grid
/// ends. The explicit part requires dt <= dx / max|b|; violations raise a
/// configuration error naming a sufficient t_steps.
inline ValueSurface hjb_solve(const ProblemSpec& spec, std::size_t t_steps,
                              std::vector<double> x_grid, int quadrature_points = 0,
                              int threads = 1) {
    require(spec.state_dimension == 1, "hjb_solve: one-dimensional state only");
    require(t_steps >= 1, "hjb_solve: need t_steps >= 1");
    require(x_grid.size() >= 3, "hjb_solve: need at least 3 x nodes");
    const std::size_t nx = x_grid.size();
    const double dx = x_grid[1] - x_grid[0];
    for (std::size_t j = 0; j + 1 < nx; ++j)
        require(std::fabs(x_grid[j + 1] - x_grid[j] - dx) <= 1e-9 * std::max(1.0, std::fabs(dx)),
                "hjb_solve: x grid must be uniform");
    const double T = spec.horizon;
    const double dt = T / static_cast<double>(t_steps);
    const double bbar = spec.bounds.max_drift;
    if (bbar > 0 && dt > dx / bbar) {
        const long required = static_cast<long>(std::ceil(T * bbar / dx));
        throw configuration_error(
            "hjb_solve: time step too large for the explicit drift term; need t_steps >= " +
                std::to_string(required),
            required);
    }

    // Tie the action-quadrature resolution to the spatial resolution so a
    // refinement study shrinks every discretization error together.
    const int m_actions =
        quadrature_points > 0 ? quadrature_points : std::max<int>(65, static_cast<int>(nx));
    const std::vector<double> actions =
        linspace(spec.action_space.lower, spec.action_space.upper, m_actions);
    const double da = actions[1] - actions[0];
    const double gamma = spec.temperature;
    const double beta = spec.discount;

    ValueSurface surf;
    surf.t_grid = linspace(0.0, T, t_steps + 1);
    surf.x_grid = x_grid;
    surf.values.assign(t_steps + 1, std::vector<double>(nx, 0.0));
    for (std::size_t j = 0; j < nx; ++j) surf.values[t_steps][j] = spec.terminal_reward(x_grid[j]);

    std::vector<double> rhs(nx), diag(nx), lower(nx), upper(nx), scratch(nx);
    std::vector<std::vector<double>> integrand(worker_count(nx, threads),
                                               std::vector<double>(actions.size()));

    for (std::size_t m = t_steps; m >= 1; --m) {
        const double t_old = surf.t_grid[m];
        const double t_new = surf.t_grid[m - 1];
        const auto& v = surf.values[m];

        // Explicit soft-max source at the old level.
        parallel_for_workers(nx, threads, [&](std::size_t j, std::size_t worker) {
            double vx;
            if (j == 0)
                vx = (v[1] - v[0]) / dx;
            else if (j + 1 == nx)
                vx = (v[nx - 1] - v[nx - 2]) / dx;
            else
                vx = (v[j + 1] - v[j - 1]) / (2.0 * dx);
            auto& f = integrand[worker];
            double w_max = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < actions.size(); ++i) {
                const double w = (spec.drift(t_old, x_grid[j], actions[i]) * vx +
                                  spec.running_reward(t_old, x_grid[j], actions[i])) /
                                 gamma;
                f[i] = w;
                w_max = std::max(w_max, w);
            }
            if (!std::isfinite(w_max)) throw evaluation_error("hjb_solve: non-finite Hamiltonian");
            for (auto& w : f) w = std::exp(w - w_max);
            const double source = gamma * (w_max + std::log(trapezoid(f, da)));
            rhs[j] = v[j] + dt * source;
        });

        // Implicit diffusion + discount at the new level; zero second
        // derivative at the boundaries makes the edge rows diagonal.
        for (std::size_t j = 0; j < nx; ++j) {
            if (j == 0 || j + 1 == nx) {
                diag[j] = 1.0 + dt * beta;
                lower[j] = upper[j] = 0.0;
            } else {
                const double sig = spec.diffusion(t_new, x_grid[j]);
                const double c = 0.5 * dt * sig * sig / (dx * dx);
                diag[j] = 1.0 + dt * beta + 2.0 * c;
                lower[j] = upper[j] = -c;
            }
        }
        // Thomas algorithm.
        auto& out = surf.values[m - 1];
        scratch[0] = upper[0] / diag[0];
        out[0] = rhs[0] / diag[0];
        for (std::size_t j = 1; j < nx; ++j) {
            const double denom = diag[j] - lower[j] * scratch[j - 1];
            scratch[j] = upper[j] / denom;
            out[j] = (rhs[j] - lower[j] * out[j - 1]) / denom;
        }
        for (std::size_t j = nx - 1; j-- > 0;) out[j] -= scratch[j] * out[j + 1];
    }
    return surf;
}

/// Gibbs policy one improvement step ahead of the surface: exponent
/// b(t,x,a) * dJ/dx + r(t,x,a) at temperature gamma. Gradient queries are
/// clamped to the fitted box so that simulated excursions beyond it see the
/// edge gradient (the fixtures have asymptotically affine values there).
inline GibbsPolicy gibbs_policy_from_surface(const ProblemSpec& spec, ValueSurface surface) {
    auto surf = std::make_shared<const ValueSurface>(std::move(surface));
    const double pad = 1e-9 * std::max(1.0, surf->x_max() - surf->x_min());
    auto exponent = [spec_drift = spec.drift, spec_reward = spec.running_reward, surf, pad](
                        double t, double x, double a) {
        const double tc = std::clamp(t, surf->t_min(), surf->t_max());
        const double xc = std::clamp(x, surf->x_min() + pad, surf->x_max() - pad);
        const double grad = surf->gradient_impl(tc, xc, /*allow_edges=*/true);
        return spec_drift(t, x, a) * grad + spec_reward(t, x, a);
    };
    return GibbsPolicy(exponent, spec.temperature, spec.action_space);
}

/// Long-format CSV: t, x, v.
inline void write_csv(const ValueSurface& surf, const std::string& path) {
    CsvWriter w(path);
    w.row({"t", "x", "v"});
    for (std::size_t i = 0; i < surf.t_grid.size(); ++i)
        for (std::size_t j = 0; j < surf.x_grid.size(); ++j)
            w.row({format_number(surf.t_grid[i]), format_number(surf.x_grid[j]),
                   format_number(surf.values[i][j])});
}

}  // namespace ctq

#endif  // CTQ_VALUE_HPP
