#include "pulseopt/autodiff.hpp"

#include <cstdlib>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pulseopt {

int worker_threads() {
    int n = 1;
#ifdef _OPENMP
    n = omp_get_max_threads();
#else
    n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
#endif
    if (const char* cap = std::getenv("PULSE_THREADS")) {
        const int c = std::atoi(cap);
        if (c >= 1 && c < n) n = c;
    }
    return n;
}

GradientReport grad_dual(const Problem& prob, std::span<const double> params) {
    return detail::grad_dual_impl(
        [&prob](std::span<const DualG> x) { return problem_loss<DualG>(prob, x); }, params);
}

GradientReport grad_fd(const Problem& prob, std::span<const double> params, double h_rel,
                       FdScheme scheme) {
    if (!(h_rel > 0.0)) throw ConfigError("finite-difference step must be positive");
    return detail::grad_fd_impl(
        [&prob](std::span<const double> x) { return problem_loss<double>(prob, x); }, params,
        h_rel, scheme, worker_threads());
}

double gradient_disagreement(std::span<const double> a, std::span<const double> b,
                             double floor) {
    double worst = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double rel = std::abs(a[i] - b[i]) / (std::abs(a[i]) + floor);
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace pulseopt
