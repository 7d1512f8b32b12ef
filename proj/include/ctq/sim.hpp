#ifndef CTQ_SIM_HPP
#define CTQ_SIM_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ctq/common.hpp"
#include "ctq/csv.hpp"
#include "ctq/model.hpp"
#include "ctq/parallel.hpp"
#include "ctq/policy.hpp"
#include "ctq/rng.hpp"

namespace ctq {

/// One discretized episode. states has N+1 entries, actions/rewards/
/// log_densities have N; action k is applied on [t_k, t_{k+1}) and the
/// reward is evaluated at the left endpoint.
struct Trajectory {
    std::vector<double> times;          // t_0 < ... < t_N, uniform step
    std::vector<double> states;
    std::vector<double> actions;
    std::vector<double> rewards;
    std::vector<double> log_densities;  // log pi(a_k | t_k, X_k)
    double terminal_value = 0.0;        // h(X_N)

    std::size_t steps() const { return actions.size(); }
    double dt() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
};

namespace detail {
constexpr double kBlowUpGuard = 1e8;

inline std::size_t step_count(double t0, double horizon, double dt) {
    require(dt > 0, "rollout: dt must be positive");
    require(t0 >= 0 && t0 <= horizon, "rollout: start time outside [0, T]");
    const double span = horizon - t0;
    const double n_real = span / dt;
    const auto n = static_cast<long long>(std::llround(n_real));
    require(std::fabs(static_cast<double>(n) * dt - span) <= 1e-9,
            "rollout: dt must divide the remaining horizon");
    return static_cast<std::size_t>(n);
}
}  // namespace detail

/// Euler-Maruyama episode from (t0, x0) to the horizon, with the action
/// resampled from the policy at every step. Pure given its random stream.
inline Trajectory rollout(const ProblemSpec& spec, const GibbsPolicy& policy, double x0,
                          double dt, Rng& rng, double t0 = 0.0) {
    const std::size_t n = detail::step_count(t0, spec.horizon, dt);
    Trajectory traj;
    traj.times.resize(n + 1);
    traj.states.resize(n + 1);
    traj.actions.resize(n);
    traj.rewards.resize(n);
    traj.log_densities.resize(n);
    for (std::size_t k = 0; k <= n; ++k) traj.times[k] = t0 + dt * static_cast<double>(k);

    GibbsPolicy::Slice slice;
    const double sqrt_dt = std::sqrt(dt);
    double x = x0;
    traj.states[0] = x;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = traj.times[k];
        const auto [a, logp] = policy.sample_with_log_density(t, x, rng, slice);
        traj.actions[k] = a;
        traj.log_densities[k] = logp;
        traj.rewards[k] = spec.running_reward(t, x, a);
        const double noise = normal01(rng);
        x += spec.drift(t, x, a) * dt + spec.diffusion(t, x) * sqrt_dt * noise;
        if (!std::isfinite(x) || std::fabs(x) > detail::kBlowUpGuard)
            throw blow_up_error("rollout: state blow-up at step " + std::to_string(k + 1), k + 1);
        traj.states[k + 1] = x;
    }
    traj.terminal_value = spec.terminal_reward(traj.states[n]);
    return traj;
}

/// Batch of episodes; episode i uses the stream derived from (base_seed, i),
/// so the output is identical for any execution order or worker count.
inline std::vector<Trajectory> rollout_batch(const ProblemSpec& spec, const GibbsPolicy& policy,
                                             double x0, double dt, std::size_t count,
                                             std::uint64_t base_seed, double t0 = 0.0,
                                             int threads = 1) {
    require(count >= 1, "rollout_batch: count must be >= 1");
    std::vector<Trajectory> out(count);
    parallel_for(count, threads, [&](std::size_t i) {
        Rng rng = derive_stream(base_seed, i);
        out[i] = rollout(spec, policy, x0, dt, rng, t0);
    });
    return out;
}

/// Long-format CSV: one row per step plus a terminal row with empty action
/// and reward cells. With several trajectories a leading traj_id column is
/// added.
inline void write_csv(const Trajectory& traj, const std::string& path) {
    CsvWriter w(path);
    w.row({"k", "t", "x", "a", "r"});
    for (std::size_t k = 0; k < traj.steps(); ++k)
        w.row({std::to_string(k), format_number(traj.times[k]), format_number(traj.states[k]),
               format_number(traj.actions[k]), format_number(traj.rewards[k])});
    w.row({std::to_string(traj.steps()), format_number(traj.times.back()),
           format_number(traj.states.back()), "", ""});
}

inline void write_csv(const std::vector<Trajectory>& trajs, const std::string& path) {
    CsvWriter w(path);
    w.row({"traj_id", "k", "t", "x", "a", "r"});
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        const auto& traj = trajs[i];
        for (std::size_t k = 0; k < traj.steps(); ++k)
            w.row({std::to_string(i), std::to_string(k), format_number(traj.times[k]),
                   format_number(traj.states[k]), format_number(traj.actions[k]),
                   format_number(traj.rewards[k])});
        w.row({std::to_string(i), std::to_string(traj.steps()), format_number(traj.times.back()),
               format_number(traj.states.back()), "", ""});
    }
}

}  // namespace ctq

#endif  // CTQ_SIM_HPP
