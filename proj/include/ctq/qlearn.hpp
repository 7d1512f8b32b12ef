#ifndef CTQ_QLEARN_HPP
#define CTQ_QLEARN_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctq/common.hpp"
#include "ctq/model.hpp"
#include "ctq/parallel.hpp"
#include "ctq/policy.hpp"
#include "ctq/rng.hpp"
#include "ctq/sim.hpp"
#include "ctq/value.hpp"

namespace ctq {

using ParamVec = std::vector<double>;

/// Parametric value/q families J^theta(t, x) and q^phi(t, x, a) with their
/// parameter gradients. When an analytic gradient is not supplied, a central
/// finite difference with step 1e-5 is used instead.
struct ParamFamily {
    int theta_dim = 0;
    int phi_dim = 0;
    std::function<double(const ParamVec&, double, double)> value;            // J^theta
    std::function<double(const ParamVec&, double, double, double)> q;        // q^phi
    std::function<ParamVec(const ParamVec&, double, double)> value_grad;     // optional
    std::function<ParamVec(const ParamVec&, double, double, double)> q_grad; // optional

    static constexpr double kFdStep = 1e-5;

    ParamVec grad_value(const ParamVec& theta, double t, double x) const {
        if (value_grad) return value_grad(theta, t, x);
        ParamVec g(theta.size());
        ParamVec p = theta;
        for (std::size_t d = 0; d < theta.size(); ++d) {
            const double keep = p[d];
            p[d] = keep + kFdStep;
            const double hi = value(p, t, x);
            p[d] = keep - kFdStep;
            const double lo = value(p, t, x);
            p[d] = keep;
            g[d] = (hi - lo) / (2.0 * kFdStep);
        }
        return g;
    }

    ParamVec grad_q(const ParamVec& phi, double t, double x, double a) const {
        if (q_grad) return q_grad(phi, t, x, a);
        ParamVec g(phi.size());
        ParamVec p = phi;
        for (std::size_t d = 0; d < phi.size(); ++d) {
            const double keep = p[d];
            p[d] = keep + kFdStep;
            const double hi = q(p, t, x, a);
            p[d] = keep - kFdStep;
            const double lo = q(p, t, x, a);
            p[d] = keep;
            g[d] = (hi - lo) / (2.0 * kFdStep);
        }
        return g;
    }
};

/// Learning rates alpha_n = A / (n^nu + B), positive and nonincreasing.
struct Schedule {
    double A = 1.0;
    double B = 0.0;
    double nu = 1.0;

    Schedule() = default;
    Schedule(double A_, double B_, double nu_) : A(A_), B(B_), nu(nu_) {
        require(A > 0, "Schedule: A must be positive");
        require(B >= 0, "Schedule: B must be nonnegative");
        require(nu > 0 && nu <= 1, "Schedule: nu must lie in (0, 1]");
    }

    double alpha(std::size_t n) const {
        return A / (std::pow(static_cast<double>(n), nu) + B);
    }
};

/// Per-iteration record of a learning run. Row n holds the parameters in
/// force when episode n was generated, the gap of the corresponding
/// value/policy at the probe, and the learning step that followed.
struct LearnTrace {
    Schedule schedule_theta;
    Schedule schedule_phi;
    std::vector<ParamVec> theta;       // empty rows when no theta is learned
    std::vector<ParamVec> phi;
    std::vector<double> value_gap;     // |J* - J| at the probe; NaN when J* unknown
    std::vector<double> phi_error;     // |phi_n - phi*|; NaN when phi* unknown
    std::vector<double> alpha;         // alpha_{phi, n}
    std::vector<int> clamped;          // 1 when the projection guard clipped phi

    std::size_t size() const { return phi.size(); }
};

/// Divergence during a learning loop; carries what was recorded so far.
struct qlearn_diverged : divergence_error {
    LearnTrace partial;
    qlearn_diverged(const std::string& what, long n, LearnTrace trace)
        : divergence_error(what, n), partial(std::move(trace)) {}
};

/// The q-family of the one-dimensional example: q^phi(t,x,a) = phi a +
/// log(phi / (e^phi - 1)), an exact normalized log-density on [0, 1] for
/// every phi. The theta slot is the affine family J^theta(t,x) = x +
/// theta (T - t).
inline ParamFamily example_q_family(double T = 1.0) {
    ParamFamily fam;
    fam.theta_dim = 1;
    fam.phi_dim = 1;
    fam.q = [](const ParamVec& phi, double, double, double a) {
        return phi[0] * a + std::log(tilt_inverse_partition(phi[0]));
    };
    fam.q_grad = [](const ParamVec& phi, double, double, double a) {
        return ParamVec{a - tilt_mean(phi[0])};
    };
    fam.value = [T](const ParamVec& theta, double t, double x) {
        return x + theta[0] * (T - t);
    };
    fam.value_grad = [T](const ParamVec&, double t, double) { return ParamVec{T - t}; };
    return fam;
}

/// Exact value oracle for linear_example(B, T) as a function of the current
/// q-parameter: J(t, x; pi^phi) in closed form.
inline std::function<double(double, double, const ParamVec&)> linear_example_value_oracle(
    double B, double T) {
    return [B, T](double t, double x, const ParamVec& phi) {
        return linear_example_value(B, T, phi[0], t, x);
    };
}

/// Discretized martingale residual G_k of a trajectory under candidate value
/// and q functions: discounted terminal reward minus J at (t_k, X_k) plus
/// the left-endpoint sum of discounted (r - q) over the remaining steps.
inline double martingale_residual(const Trajectory& traj,
                                  const std::function<double(double, double)>& J,
                                  const std::function<double(double, double, double)>& q,
                                  double beta, std::size_t k) {
    const std::size_t n = traj.steps();
    require(k <= n, "martingale_residual: step index out of range");
    const double dt = traj.dt();
    const double t_k = traj.times[k];
    double acc = std::exp(-beta * (traj.times[n] - t_k)) * traj.terminal_value -
                 J(t_k, traj.states[k]);
    for (std::size_t j = k; j < n; ++j) {
        const double term =
            traj.rewards[j] - q(traj.times[j], traj.states[j], traj.actions[j]);
        acc += std::exp(-beta * (traj.times[j] - t_k)) * term * dt;
    }
    return acc;
}

namespace detail {

// All residuals G_k, k = 0..N, via one backward sweep: the inner discounted
// sum satisfies S_k = (r_k - q_k) dt + e^{-beta dt} S_{k+1}.
inline std::vector<double> residual_series(const Trajectory& traj,
                                           const std::function<double(double, double)>& J,
                                           const std::function<double(double, double, double)>& q,
                                           double beta) {
    const std::size_t n = traj.steps();
    const double dt = traj.dt();
    const double decay = std::exp(-beta * dt);
    std::vector<double> g(n + 1);
    double suffix = 0.0;
    g[n] = 0.0;
    for (std::size_t j = n; j-- > 0;) {
        const double term =
            traj.rewards[j] - q(traj.times[j], traj.states[j], traj.actions[j]);
        suffix = term * dt + decay * suffix;
        g[j] = suffix;
    }
    for (std::size_t k = 0; k <= n; ++k)
        g[k] += std::exp(-beta * (traj.times[n] - traj.times[k])) * traj.terminal_value -
                J(traj.times[k], traj.states[k]);
    return g;
}

struct Increments {
    ParamVec dtheta;  // empty when theta is not tracked
    ParamVec dphi;
};

// Martingale-loss gradient integrals over one trajectory, before the
// learning rates: dphi[d] = sum_k P_k[d] G_k dt with P the discounted
// suffix sum of dq/dphi, and dtheta[d] = sum_k dJ/dtheta[d](t_k, X_k) G_k dt.
inline Increments sgd_increments(const ParamFamily& family, const ParamVec* theta,
                                 const ParamVec& phi,
                                 const std::function<double(double, double)>& J,
                                 const Trajectory& traj, double beta) {
    const std::size_t n = traj.steps();
    const double dt = traj.dt();
    const double decay = std::exp(-beta * dt);
    const std::size_t pd = phi.size();
    auto qfun = [&](double t, double x, double a) { return family.q(phi, t, x, a); };
    const std::vector<double> g = residual_series(traj, J, qfun, beta);

    // Discounted suffix sums of the q-gradient, one column per parameter.
    std::vector<std::vector<double>> p(pd, std::vector<double>(n, 0.0));
    {
        ParamVec suffix(pd, 0.0);
        for (std::size_t j = n; j-- > 0;) {
            const ParamVec gq =
                family.grad_q(phi, traj.times[j], traj.states[j], traj.actions[j]);
            for (std::size_t d = 0; d < pd; ++d) {
                suffix[d] = gq[d] * dt + decay * suffix[d];
                p[d][j] = suffix[d];
            }
        }
    }
    Increments inc;
    inc.dphi.assign(pd, 0.0);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t d = 0; d < pd; ++d) inc.dphi[d] += p[d][k] * g[k] * dt;
    if (theta) {
        inc.dtheta.assign(theta->size(), 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            const ParamVec gj = family.grad_value(*theta, traj.times[k], traj.states[k]);
            for (std::size_t d = 0; d < gj.size(); ++d) inc.dtheta[d] += gj[d] * g[k] * dt;
        }
    }
    return inc;
}

}  // namespace detail

/// One semi-q SGD step: phi + alpha times the martingale-loss gradient, with
/// the value function supplied by an oracle.
inline ParamVec sgd_step_semi(const ParamVec& phi, const ParamFamily& family,
                              const std::function<double(double, double)>& J_oracle,
                              const Trajectory& traj, double alpha, double beta) {
    require(alpha > 0, "sgd_step_semi: learning rate must be positive");
    const auto inc = detail::sgd_increments(family, nullptr, phi, J_oracle, traj, beta);
    ParamVec out = phi;
    for (std::size_t d = 0; d < out.size(); ++d) {
        out[d] += alpha * inc.dphi[d];
        if (!std::isfinite(out[d]))
            throw divergence_error("sgd_step_semi: non-finite update", -1);
    }
    return out;
}

/// One full q-learning SGD step: theta and phi updated from the same
/// trajectory and the same residuals, with J = J^theta.
inline std::pair<ParamVec, ParamVec> sgd_step_full(const ParamVec& theta, const ParamVec& phi,
                                                   const ParamFamily& family,
                                                   const Trajectory& traj, double alpha_theta,
                                                   double alpha_phi, double beta) {
    require(alpha_theta > 0 && alpha_phi > 0, "sgd_step_full: learning rates must be positive");
    auto J = [&](double t, double x) { return family.value(theta, t, x); };
    const auto inc = detail::sgd_increments(family, &theta, phi, J, traj, beta);
    ParamVec th = theta, ph = phi;
    for (std::size_t d = 0; d < th.size(); ++d) {
        th[d] += alpha_theta * inc.dtheta[d];
        if (!std::isfinite(th[d]))
            throw divergence_error("sgd_step_full: non-finite theta update", -1);
    }
    for (std::size_t d = 0; d < ph.size(); ++d) {
        ph[d] += alpha_phi * inc.dphi[d];
        if (!std::isfinite(ph[d]))
            throw divergence_error("sgd_step_full: non-finite phi update", -1);
    }
    return {std::move(th), std::move(ph)};
}

struct Probe {
    double t = 0.0;
    double x = 0.0;
};

struct QLearnOptions {
    std::size_t batch = 1;          // episodes averaged per SGD step
    double clamp_radius = 50.0;     // projection guard on each phi coordinate
    std::function<double(double, double)> optimal_value;  // J*(t, x) for gaps
    ParamVec phi_star;              // target parameter for phi_error
    std::optional<ParamVec> phi_init;    // default: uniform in [-1, 1]^d per seed
    std::optional<ParamVec> theta_init;  // default: uniform in [-1, 1]^d per seed
    std::optional<double> episode_x0;    // default: probe.x
};

namespace detail {

constexpr std::uint64_t kInitStreamTag = 0x1213F0;

inline ParamVec draw_init(Rng& rng, int dim) {
    ParamVec v(static_cast<std::size_t>(dim));
    for (auto& c : v) c = uniform_in(rng, -1.0, 1.0);
    return v;
}

inline double param_distance(const ParamVec& a, const ParamVec& b) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double diff = a[d] - b[d];
        s += diff * diff;
    }
    return std::sqrt(s);
}

// Shared loop of semi-q and full q-learning. For the semi variant the value
// used in the residuals comes from `semi_oracle`; for the full variant from
// the theta family. Episode e of iteration n draws from the stream derived
// from (derive_seed(base_seed, n), e), so the two variants consume identical
// randomness for identical seeds.
inline LearnTrace run_qlearn_core(
    const ProblemSpec& spec, const ParamFamily& family,
    const std::function<double(double, double, const ParamVec&)>* semi_oracle,
    const Schedule& schedule_theta, const Schedule& schedule_phi, std::size_t n_iters,
    double dt, const Probe& probe, std::uint64_t base_seed, const QLearnOptions& opts) {
    require(n_iters >= 1, "q-learning: need n_iters >= 1");
    require(opts.batch >= 1, "q-learning: batch must be >= 1");
    const bool full = semi_oracle == nullptr;

    Rng init_rng = derive_stream(base_seed, kInitStreamTag);
    ParamVec phi = opts.phi_init ? *opts.phi_init : draw_init(init_rng, family.phi_dim);
    ParamVec theta;
    if (full) theta = opts.theta_init ? *opts.theta_init : draw_init(init_rng, family.theta_dim);
    const double x0 = opts.episode_x0 ? *opts.episode_x0 : probe.x;

    LearnTrace trace;
    trace.schedule_theta = schedule_theta;
    trace.schedule_phi = schedule_phi;

    for (std::size_t n = 1; n <= n_iters; ++n) {
        GibbsPolicy policy(
            [&family, phi](double t, double x, double a) { return family.q(phi, t, x, a); },
            spec.temperature, spec.action_space);

        trace.theta.push_back(theta);
        trace.phi.push_back(phi);
        double gap = std::numeric_limits<double>::quiet_NaN();
        if (opts.optimal_value) {
            const double current = full ? family.value(theta, probe.t, probe.x)
                                        : (*semi_oracle)(probe.t, probe.x, phi);
            gap = std::fabs(opts.optimal_value(probe.t, probe.x) - current);
        }
        trace.value_gap.push_back(gap);
        trace.phi_error.push_back(opts.phi_star.empty()
                                      ? std::numeric_limits<double>::quiet_NaN()
                                      : param_distance(phi, opts.phi_star));
        const double alpha_phi = schedule_phi.alpha(n);
        const double alpha_theta = schedule_theta.alpha(n);
        trace.alpha.push_back(alpha_phi);

        auto J = full ? std::function<double(double, double)>(
                            [&family, &theta](double t, double x) {
                                return family.value(theta, t, x);
                            })
                      : std::function<double(double, double)>(
                            [semi_oracle, &phi](double t, double x) {
                                return (*semi_oracle)(t, x, phi);
                            });

        ParamVec dphi(phi.size(), 0.0);
        ParamVec dtheta(theta.size(), 0.0);
        try {
            const std::uint64_t iter_seed = derive_seed(base_seed, n);
            for (std::size_t e = 0; e < opts.batch; ++e) {
                Rng rng = derive_stream(iter_seed, e);
                const Trajectory traj = rollout(spec, policy, x0, dt, rng, 0.0);
                const auto inc =
                    sgd_increments(family, full ? &theta : nullptr, phi, J, traj, spec.discount);
                for (std::size_t d = 0; d < dphi.size(); ++d) dphi[d] += inc.dphi[d];
                for (std::size_t d = 0; d < dtheta.size(); ++d) dtheta[d] += inc.dtheta[d];
            }
        } catch (const blow_up_error& err) {
            throw qlearn_diverged(std::string("q-learning: episode blow-up: ") + err.what(),
                                  static_cast<long>(n), std::move(trace));
        }
        const double scale = 1.0 / static_cast<double>(opts.batch);
        bool clipped = false;
        for (std::size_t d = 0; d < phi.size(); ++d) {
            double next = phi[d] + alpha_phi * dphi[d] * scale;
            if (!std::isfinite(next))
                throw qlearn_diverged("q-learning: non-finite phi at iteration " +
                                          std::to_string(n),
                                      static_cast<long>(n), std::move(trace));
            if (std::fabs(next) > opts.clamp_radius) {
                next = std::copysign(opts.clamp_radius, next);
                clipped = true;
            }
            phi[d] = next;
        }
        for (std::size_t d = 0; d < theta.size(); ++d) {
            theta[d] += alpha_theta * dtheta[d] * scale;
            if (!std::isfinite(theta[d]))
                throw qlearn_diverged("q-learning: non-finite theta at iteration " +
                                          std::to_string(n),
                                      static_cast<long>(n), std::move(trace));
        }
        trace.clamped.push_back(clipped ? 1 : 0);
    }
    return trace;
}

}  // namespace detail

/// Semi-q-learning: per iteration roll out episodes under the policy induced
/// by q^{phi_n}, take one martingale-loss SGD step on phi with the value
/// function supplied by the oracle, and record the pre-update parameters and
/// gaps. Divergence raises qlearn_diverged carrying the partial trace.
inline LearnTrace run_semi_q(const ProblemSpec& spec, const ParamFamily& family,
                             const std::function<double(double, double, const ParamVec&)>& J_oracle,
                             const Schedule& schedule, std::size_t n_iters, double dt,
                             const Probe& probe, std::uint64_t base_seed,
                             const QLearnOptions& opts = {}) {
    require(static_cast<bool>(J_oracle), "run_semi_q: null value oracle");
    return detail::run_qlearn_core(spec, family, &J_oracle, schedule, schedule, n_iters, dt,
                                   probe, base_seed, opts);
}

/// Full q-learning: theta and phi updated together from the same episodes.
inline LearnTrace run_q_learning(const ProblemSpec& spec, const ParamFamily& family,
                                 const Schedule& schedule_theta, const Schedule& schedule_phi,
                                 std::size_t n_iters, double dt, const Probe& probe,
                                 std::uint64_t base_seed, const QLearnOptions& opts = {}) {
    return detail::run_qlearn_core(spec, family, nullptr, schedule_theta, schedule_phi, n_iters,
                                   dt, probe, base_seed, opts);
}

/// Monte Carlo estimate of the mean SGD increment (the update integrand per
/// unit learning rate) for the example problem at parameter phi. Requires a
/// linear_example spec; the value oracle is its closed form.
inline Estimate mean_field_h_mc(double phi, const ProblemSpec& spec, std::size_t n_episodes,
                                double dt, std::uint64_t base_seed, int threads = 1,
                                double x0 = 0.0) {
    require(n_episodes >= 1, "mean_field_h_mc: need n_episodes >= 1");
    require(spec.name == "linear_example",
            "mean_field_h_mc: closed-form value oracle exists only for linear_example");
    const double B = spec.params.at("B");
    const double T = spec.horizon;
    const ParamFamily family = example_q_family(T);
    const ParamVec phiv{phi};
    GibbsPolicy policy(
        [&family, &phiv](double t, double x, double a) { return family.q(phiv, t, x, a); },
        spec.temperature, spec.action_space);
    auto J = [B, T, phi](double t, double x) { return linear_example_value(B, T, phi, t, x); };
    std::vector<double> samples(n_episodes);
    parallel_for(n_episodes, threads, [&](std::size_t e) {
        Rng rng = derive_stream(base_seed, e);
        const Trajectory traj = rollout(spec, policy, x0, dt, rng, 0.0);
        samples[e] =
            detail::sgd_increments(family, nullptr, phiv, J, traj, spec.discount).dphi[0];
    });
    return detail::summarize(samples);
}

/// Closed-form mean-field drift of the example's q-parameter: the mean SGD
/// increment direction as a function of phi, -(phi/2)(1/phi^2 -
/// e^phi/(e^phi-1)^2) T, evaluated through a series for |phi| < 1e-4.
inline double mean_field_h_closed(double phi, double T) {
    if (std::fabs(phi) < 1e-4) return -(phi / 24.0) * (1.0 - phi * phi / 20.0) * T;
    const double em = std::expm1(phi);
    return -0.5 * phi * (1.0 / (phi * phi) - std::exp(phi) / (em * em)) * T;
}

}  // namespace ctq

#endif  // CTQ_QLEARN_HPP
