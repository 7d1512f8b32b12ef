#ifndef CTQ_MODEL_HPP
#define CTQ_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ctq/common.hpp"
#include "ctq/rng.hpp"

namespace ctq {

/// Compact one-dimensional action interval with its quadrature resolution.
struct ActionSpace {
    double lower = 0.0;
    double upper = 1.0;
    int dimension = 1;
    int quadrature_points = 513;

    ActionSpace() = default;
    ActionSpace(double lo, double hi, int quad_points = 513)
        : lower(lo), upper(hi), quadrature_points(quad_points) {
        require(lower < upper, "ActionSpace: lower must be < upper");
        require(quadrature_points >= 2, "ActionSpace: need >= 2 quadrature points");
    }

    double volume() const { return upper - lower; }
    bool contains(double a) const { return a >= lower && a <= upper; }
};

/// Sup/Lipschitz bounds the problem declares for itself. check_assumptions
/// probes against these; the HJB solver uses max_drift for its step guard.
struct DeclaredBounds {
    double max_drift = 0.0;       // bound on |b|
    double max_diffusion = 1.0;   // bound sigma_bar with 1/sigma_bar <= |sigma| <= sigma_bar
    double max_reward = 0.0;      // bound on |r|
    double lipschitz = 0.0;       // bound on the x-Lipschitz quotients of b, sigma, r, h
};

/// The control problem: dX = b(t,X,a) dt + sigma(t,X) dW, running reward r,
/// terminal reward h, discount beta, horizon T, entropy temperature gamma.
/// Callables must be pure, deterministic and total on the probe domain.
/// Immutable after construction and safe to share across workers.
struct ProblemSpec {
    std::function<double(double, double, double)> drift;            // b(t, x, a)
    std::function<double(double, double)> diffusion;                // sigma(t, x) > 0
    std::function<double(double, double, double)> running_reward;   // r(t, x, a)
    std::function<double(double)> terminal_reward;                  // h(x)
    double discount = 0.0;     // beta >= 0, per unit time
    double horizon = 1.0;      // T > 0
    double temperature = 1.0;  // gamma > 0
    ActionSpace action_space;
    int state_dimension = 1;
    DeclaredBounds bounds;

    // Fixture metadata: which named fixture built this spec, with which
    // constants. Used by the CLI config round-trip and the closed-form
    // helpers below.
    std::string name;
    std::map<std::string, double> params;
};

/// Numerical spot-check of the boundedness/regularity assumptions on a
/// seeded probe set.
struct AssumptionReport {
    double max_abs_b = 0.0;
    double min_abs_sigma = 0.0;
    double max_abs_sigma = 0.0;
    double max_abs_r = 0.0;
    double max_lipschitz_quotient = 0.0;
    bool passed = false;
};

/// One-dimensional example problem: b(t,x,a) = B a, sigma = 1, r = 0,
/// h(x) = x, beta = 0, gamma = 1, actions in [0, 1].
inline ProblemSpec linear_example(double B, double T) {
    require(T > 0, "linear_example: horizon must be positive");
    ProblemSpec spec;
    spec.drift = [B](double, double, double a) { return B * a; };
    spec.diffusion = [](double, double) { return 1.0; };
    spec.running_reward = [](double, double, double) { return 0.0; };
    spec.terminal_reward = [](double x) { return x; };
    spec.discount = 0.0;
    spec.horizon = T;
    spec.temperature = 1.0;
    spec.action_space = ActionSpace(0.0, 1.0);
    spec.bounds.max_drift = std::fabs(B);
    spec.bounds.max_diffusion = 1.0;
    spec.bounds.max_reward = 0.0;
    spec.bounds.lipschitz = 1.0;  // h(x) = x dominates; b, sigma, r are flat in x
    spec.name = "linear_example";
    spec.params = {{"B", B}, {"T", T}};
    return spec;
}

/// Quadratic-cost test problem truncated to a compact action box:
/// b = a, sigma = 1, r = -(state_cost x^2 + action_cost a^2)/2, h = 0,
/// actions in [-a_max, a_max]. Differs from a classical linear-quadratic
/// problem only by the action truncation.
inline ProblemSpec lq_fixture(double a_max, double state_cost, double action_cost,
                              double T, double gamma) {
    require(a_max > 0, "lq_fixture: a_max must be positive");
    require(state_cost >= 0, "lq_fixture: state_cost must be nonnegative");
    require(action_cost > 0, "lq_fixture: action_cost must be positive");
    require(T > 0, "lq_fixture: horizon must be positive");
    require(gamma > 0, "lq_fixture: gamma must be positive");
    ProblemSpec spec;
    spec.drift = [](double, double, double a) { return a; };
    spec.diffusion = [](double, double) { return 1.0; };
    spec.running_reward = [state_cost, action_cost](double, double x, double a) {
        return -0.5 * (state_cost * x * x + action_cost * a * a);
    };
    spec.terminal_reward = [](double) { return 0.0; };
    spec.discount = 0.0;
    spec.horizon = T;
    spec.temperature = gamma;
    spec.action_space = ActionSpace(-a_max, a_max);
    // Bounds hold on the probe window x in [-5, 5].
    spec.bounds.max_drift = a_max;
    spec.bounds.max_diffusion = 1.0;
    spec.bounds.max_reward = 0.5 * (state_cost * 25.0 + action_cost * a_max * a_max);
    spec.bounds.lipschitz = 5.0 * state_cost;
    spec.name = "lq";
    spec.params = {{"a_max", a_max},
                   {"state_cost", state_cost},
                   {"action_cost", action_cost},
                   {"T", T},
                   {"gamma", gamma}};
    return spec;
}

// Closed forms for the exponentially tilted uniform density on [0, 1],
// p_phi(a) = phi e^{phi a} / (e^phi - 1). These are the ground-truth
// fixtures behind linear_example: its Gibbs policies, values and q-functions
// are all expressible through them. Each has a series branch near phi = 0
// where the direct expression degenerates to 0/0.

/// phi / (e^phi - 1); series 1 - phi/2 + phi^2/12 for |phi| < 1e-4.
inline double tilt_inverse_partition(double phi) {
    if (std::fabs(phi) < 1e-4) return 1.0 - 0.5 * phi + phi * phi / 12.0;
    return phi / std::expm1(phi);
}

/// log of the partition integral of e^{phi a} over [0, 1].
inline double tilt_log_partition(double phi) {
    return -std::log(tilt_inverse_partition(phi));
}

/// Mean of the tilted density.
inline double tilt_mean(double phi) {
    if (std::fabs(phi) < 1e-4) return 0.5 + phi / 12.0 - phi * phi * phi / 720.0;
    return std::exp(phi) / std::expm1(phi) - 1.0 / phi;
}

/// Variance of the tilted density.
inline double tilt_variance(double phi) {
    if (std::fabs(phi) < 1e-4) return 1.0 / 12.0 - phi * phi / 240.0;
    const double em = std::expm1(phi);
    return 1.0 / (phi * phi) - std::exp(phi) / (em * em);
}

/// Differential entropy of the tilted density (nats).
inline double tilt_entropy(double phi) {
    return -phi * tilt_mean(phi) + tilt_log_partition(phi);
}

/// Exact value of linear_example(B, T) under the feedback policy that tilts
/// the uniform action density by phi at every (t, x).
inline double linear_example_value(double B, double T, double phi, double t, double x) {
    return x + (B * tilt_mean(phi) + tilt_entropy(phi)) * (T - t);
}

/// Exact q-function of linear_example(B, T) under the phi-tilted policy.
inline double linear_example_q(double B, double phi, double a) {
    return B * (a - tilt_mean(phi)) - tilt_entropy(phi);
}

/// Exact optimal entropy-regularized value of linear_example(B, T); the
/// optimal policy is the B-tilted density.
inline double linear_example_optimal_value(double B, double T, double t, double x) {
    return x + tilt_log_partition(B) * (T - t);
}

namespace detail {
// Probe window for assumption checks; the declared bounds are read as
// holding on this box rather than globally.
constexpr double kProbeXMin = -5.0;
constexpr double kProbeXMax = 5.0;
}  // namespace detail

/// Evaluate b, sigma, r, h on `probe_count` seeded pseudo-random (t, x, a)
/// points, plus all probe pairs for x-Lipschitz quotients. Deterministic
/// given (spec, probe_count, seed); failures are carried in the report.
inline AssumptionReport check_assumptions(const ProblemSpec& spec, int probe_count,
                                          std::uint64_t seed) {
    require(probe_count >= 2, "check_assumptions: need probe_count >= 2");
    Rng rng = make_rng(derive_seed(seed, 0xA55));
    const std::size_t n = static_cast<std::size_t>(probe_count);
    std::vector<double> ts(n), xs(n), as(n);
    for (std::size_t i = 0; i < n; ++i) {
        ts[i] = uniform_in(rng, 0.0, spec.horizon);
        xs[i] = uniform_in(rng, detail::kProbeXMin, detail::kProbeXMax);
        as[i] = uniform_in(rng, spec.action_space.lower, spec.action_space.upper);
    }

    AssumptionReport rep;
    rep.min_abs_sigma = std::fabs(spec.diffusion(ts[0], xs[0]));
    for (std::size_t i = 0; i < n; ++i) {
        rep.max_abs_b = std::max(rep.max_abs_b, std::fabs(spec.drift(ts[i], xs[i], as[i])));
        const double sig = std::fabs(spec.diffusion(ts[i], xs[i]));
        rep.min_abs_sigma = std::min(rep.min_abs_sigma, sig);
        rep.max_abs_sigma = std::max(rep.max_abs_sigma, sig);
        rep.max_abs_r =
            std::max(rep.max_abs_r, std::fabs(spec.running_reward(ts[i], xs[i], as[i])));
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = std::fabs(xs[i] - xs[j]);
            if (dx < 1e-9) continue;
            const double qb = std::fabs(spec.drift(ts[i], xs[i], as[i]) -
                                        spec.drift(ts[i], xs[j], as[i])) / dx;
            const double qs = std::fabs(spec.diffusion(ts[i], xs[i]) -
                                        spec.diffusion(ts[i], xs[j])) / dx;
            const double qr = std::fabs(spec.running_reward(ts[i], xs[i], as[i]) -
                                        spec.running_reward(ts[i], xs[j], as[i])) / dx;
            const double qh = std::fabs(spec.terminal_reward(xs[i]) -
                                        spec.terminal_reward(xs[j])) / dx;
            rep.max_lipschitz_quotient =
                std::max({rep.max_lipschitz_quotient, qb, qs, qr, qh});
        }
    }
    const double tol = 1e-9;
    rep.passed = rep.max_abs_b <= spec.bounds.max_drift + tol &&
                 rep.max_abs_sigma <= spec.bounds.max_diffusion + tol &&
                 rep.min_abs_sigma + tol >= 1.0 / spec.bounds.max_diffusion &&
                 rep.max_abs_r <= spec.bounds.max_reward + tol &&
                 rep.max_lipschitz_quotient <= spec.bounds.lipschitz + tol;
    return rep;
}

}  // namespace ctq

#endif  // CTQ_MODEL_HPP
