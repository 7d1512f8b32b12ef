#ifndef CTQ_IMPROVE_HPP
#define CTQ_IMPROVE_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "ctq/common.hpp"
#include "ctq/linfit.hpp"
#include "ctq/model.hpp"
#include "ctq/policy.hpp"
#include "ctq/qlearn.hpp"
#include "ctq/value.hpp"

namespace ctq {

/// Per-iteration record of a policy-improvement run at one probe point.
struct PiTrace {
    std::vector<double> value;          // J^n(t0, x0) Monte Carlo estimate
    std::vector<double> stderr_;        // its standard error
    std::vector<double> gap;            // |J* - J^n| against the PDE oracle
    std::vector<double> tv_to_optimal;  // d_TV(pi^n, pi*) at the probe

    std::size_t size() const { return value.size(); }
};

/// Monte Carlo resolution for the value surfaces driving the Gibbs updates.
struct SurfaceConfig {
    std::vector<double> t_grid;
    std::vector<double> x_grid;
    std::size_t n_paths = 2000;
    double dt = 0.01;
};

struct PiConfig {
    SurfaceConfig surface;
    std::size_t probe_paths = 20000;  // paths for the per-iteration probe estimate
    double probe_dt = 0.01;
    Probe probe;
    int threads = 1;
};

/// One exploratory policy improvement step: fit a value surface for the
/// current policy, then return the Gibbs policy of its gradient exponent.
inline GibbsPolicy improvement_step(const ProblemSpec& spec, const GibbsPolicy& current,
                                    const SurfaceConfig& cfg, std::uint64_t seed,
                                    int threads = 1) {
    ValueSurface surf = fit_surface(spec, current, cfg.t_grid, cfg.x_grid, cfg.n_paths, cfg.dt,
                                    seed, threads);
    return gibbs_policy_from_surface(spec, std::move(surf));
}

/// Alternate evaluation and improvement for n_iters iterations, recording the
/// probe-point gap against the supplied PDE oracle surface. Iteration n uses
/// fresh streams derived from (base_seed, n).
inline PiTrace run_pi(const ProblemSpec& spec, const GibbsPolicy& initial_policy,
                      std::size_t n_iters, const PiConfig& cfg, const ValueSurface& oracle,
                      std::uint64_t base_seed) {
    require(n_iters >= 1, "run_pi: need n_iters >= 1");
    const double optimal = oracle.value_at(cfg.probe.t, cfg.probe.x);
    const GibbsPolicy optimal_policy = gibbs_policy_from_surface(spec, oracle);

    PiTrace trace;
    GibbsPolicy policy = initial_policy;
    for (std::size_t n = 1; n <= n_iters; ++n) {
        const Estimate est = mc_evaluate(spec, policy, cfg.probe.t, cfg.probe.x, cfg.probe_paths,
                                         cfg.probe_dt, derive_seed(base_seed, 2 * n),
                                         cfg.threads);
        trace.value.push_back(est.value);
        trace.stderr_.push_back(est.stderr_);
        trace.gap.push_back(std::fabs(optimal - est.value));
        trace.tv_to_optimal.push_back(tv_distance(policy, optimal_policy, cfg.probe.t, cfg.probe.x));
        if (n < n_iters)
            policy = improvement_step(spec, policy, cfg.surface,
                                      derive_seed(base_seed, 2 * n + 1), cfg.threads);
    }
    return trace;
}

struct ContractionFit {
    double eta_hat = 1.0;
    double r_squared = 0.0;
};

/// Least-squares fit of log(gap_n^2) = log C + n log eta over the trace,
/// excluding noise-dominated entries (gap below 3 standard errors). Needs at
/// least four usable points.
inline ContractionFit fit_contraction(const PiTrace& trace) {
    std::vector<double> ns, ys;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double g = trace.gap[i];
        if (!(g > 0) || !std::isfinite(g)) continue;
        if (g <= 3.0 * trace.stderr_[i]) continue;  // below the noise floor
        ns.push_back(static_cast<double>(i + 1));
        ys.push_back(2.0 * std::log(g));
    }
    if (ns.size() < 4)
        throw insufficient_data_error("fit_contraction: fewer than 4 usable gap points");
    const LineFit f = fit_line(ns, ys);
    return {std::exp(f.slope), f.r_squared};
}

}  // namespace ctq

#endif  // CTQ_IMPROVE_HPP
