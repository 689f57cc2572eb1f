#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pulseopt/dual.hpp"
#include "pulseopt/errors.hpp"
#include "pulseopt/problem.hpp"

namespace pulseopt {

enum class GradMethod { dual, finite_diff };
enum class FdScheme { forward, central };

struct GradientReport {
    double loss_value = 0.0;
    std::vector<double> gradient;
    GradMethod method = GradMethod::dual;
    int evaluations = 0;  ///< objective evaluations consumed
};

/// Worker count for batched evaluations: min(hardware, PULSE_THREADS).
int worker_threads();

namespace detail {

/// f must be callable as f(span<const double>) -> double and as
/// f(span<const DualG>) -> DualG.
template <class F>
GradientReport grad_dual_impl(F&& f, std::span<const double> x) {
    const int n = static_cast<int>(x.size());
    GradientReport rep;
    rep.method = GradMethod::dual;
    rep.gradient.resize(n);
    std::vector<DualG> xd(n);
    for (int base = 0; base < n; base += kGradLanes) {
        const int width = std::min(kGradLanes, n - base);
        for (int i = 0; i < n; ++i) xd[i] = DualG(x[i]);
        for (int l = 0; l < width; ++l) xd[base + l] = DualG::seeded(x[base + l], l);
        const DualG y = f(std::span<const DualG>(xd));
        rep.loss_value = y.v;
        for (int l = 0; l < width; ++l) {
            const double g = y.d[l];
            if (!std::isfinite(g))
                throw NumericalError("non-finite partial derivative for parameter " +
                                     std::to_string(base + l));
            rep.gradient[base + l] = g;
        }
        ++rep.evaluations;
    }
    return rep;
}

template <class F>
GradientReport grad_fd_impl(F&& f, std::span<const double> x, double h_rel, FdScheme scheme,
                            int threads) {
    const int n = static_cast<int>(x.size());
    GradientReport rep;
    rep.method = GradMethod::finite_diff;
    rep.gradient.resize(n);

    // Evaluation batch: the base point plus one (forward) or two (central)
    // perturbed points per parameter. Loss evaluation is pure, so the batch
    // runs in parallel; results are written to fixed slots, keeping the
    // output independent of the schedule.
    const int per = scheme == FdScheme::central ? 2 : 1;
    std::vector<std::vector<double>> points;
    points.reserve(static_cast<size_t>(per) * n + 1);
    points.emplace_back(x.begin(), x.end());
    std::vector<double> steps(n);
    for (int i = 0; i < n; ++i) {
        const double h = h_rel * std::max(std::abs(x[i]), 1.0);
        steps[i] = h;
        auto plus = points.front();
        plus[i] += h;
        points.push_back(std::move(plus));
        if (scheme == FdScheme::central) {
            auto minus = points.front();
            minus[i] -= h;
            points.push_back(std::move(minus));
        }
    }
    std::vector<double> values(points.size());
    const int m = static_cast<int>(points.size());
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int k = 0; k < m; ++k) values[k] = f(std::span<const double>(points[k]));

    rep.loss_value = values[0];
    rep.evaluations = m;
    for (int i = 0; i < n; ++i) {
        const double g =
            scheme == FdScheme::central
                ? (values[1 + 2 * i] - values[2 + 2 * i]) / (2.0 * steps[i])
                : (values[1 + i] - values[0]) / steps[i];
        if (!std::isfinite(g))
            throw NumericalError("non-finite finite-difference gradient for parameter " +
                                 std::to_string(i));
        rep.gradient[i] = g;
    }
    return rep;
}

}  // namespace detail

/// Exact gradient of the realized (discretized) objective in one vector-mode
/// dual pass per 16-parameter chunk.
GradientReport grad_dual(const Problem& prob, std::span<const double> params);

/// Finite-difference gradient with relative step h on scale max(|p_i|, 1).
GradientReport grad_fd(const Problem& prob, std::span<const double> params,
                       double h_rel = 1e-4, FdScheme scheme = FdScheme::central);

/// Generic versions for arbitrary objectives (used by self-tests).
template <class F>
GradientReport grad_dual_fn(F&& f, std::span<const double> x) {
    return detail::grad_dual_impl(std::forward<F>(f), x);
}

template <class F>
GradientReport grad_fd_fn(F&& f, std::span<const double> x, double h_rel = 1e-4,
                          FdScheme scheme = FdScheme::central, int threads = 0) {
    return detail::grad_fd_impl(std::forward<F>(f), x, h_rel, scheme,
                                threads > 0 ? threads : worker_threads());
}

/// Largest component-wise relative disagreement between two gradients,
/// max_i |a_i - b_i| / (|a_i| + floor).
double gradient_disagreement(std::span<const double> a, std::span<const double> b,
                             double floor = 1e-8);

}  // namespace pulseopt
