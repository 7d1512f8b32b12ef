#ifndef CTQ_COMMON_HPP
#define CTQ_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ctq {

/// Thrown when a numeric evaluation produces a non-finite value.
struct evaluation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when a query point lies outside a tabulated surface.
struct out_of_domain_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when a solver is asked to run at an unstable resolution.
/// Carries the number of time steps that would satisfy the stability bound.
struct configuration_error : std::runtime_error {
    long required_t_steps;
    configuration_error(const std::string& what, long required)
        : std::runtime_error(what), required_t_steps(required) {}
};

/// Thrown when a simulated state leaves the sane range.
struct blow_up_error : std::runtime_error {
    std::size_t step_index;
    blow_up_error(const std::string& what, std::size_t step)
        : std::runtime_error(what), step_index(step) {}
};

/// Thrown when an SGD iterate becomes non-finite.
struct divergence_error : std::runtime_error {
    long iteration;
    divergence_error(const std::string& what, long iter)
        : std::runtime_error(what), iteration(iter) {}
};

/// Thrown when a fit is requested on too few usable points.
struct insufficient_data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown on malformed experiment configuration.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown on file-system failures while emitting artifacts.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

inline bool nearly_equal(double a, double b, double tol) {
    return std::fabs(a - b) <= tol;
}

}  // namespace ctq

#endif  // CTQ_COMMON_HPP
