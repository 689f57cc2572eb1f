#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pulseopt/autodiff.hpp"
#include "pulseopt/problem.hpp"
#include "pulseopt/pulses.hpp"

namespace pulseopt {

enum class OptimMode {
    lbfgsb,           ///< Cauchy point + subspace minimization + Wolfe search
    projected_lbfgs,  ///< two-loop direction + projected backtracking
};

enum class Termination { grad_tol, f_tol, max_iters, line_search_fail };
std::string to_string(Termination t);

struct OptimConfig {
    int memory = 10;
    int max_iters = 500;
    double grad_tol = 1e-6;  ///< on the projected-gradient infinity norm
    double f_tol = 1e-10;    ///< relative decrease per accepted step
    double c1 = 1e-4;        ///< sufficient decrease
    double c2 = 0.9;         ///< curvature
    int max_line_search = 25;
    BoundsSpec bounds;
    OptimMode mode = OptimMode::lbfgsb;

    GradMethod gradient = GradMethod::dual;
    double fd_step = 1e-4;
    FdScheme fd_scheme = FdScheme::central;

    void validate() const;
    friend bool operator==(const OptimConfig&, const OptimConfig&) = default;
};

struct IterateRecord {
    int iter = 0;
    double loss = 0.0;
    double pg_norm = 0.0;  ///< infinity norm of the projected gradient
    double step = 0.0;     ///< accepted line-search step length
    std::vector<double> x;
};

struct OptimReport {
    std::vector<double> best_params;
    double best_loss = std::numeric_limits<double>::infinity();
    double pg_norm = std::numeric_limits<double>::infinity();
    Termination termination = Termination::max_iters;
    int iterations = 0;
    long loss_evals = 0;
    long grad_evals = 0;
    bool x0_clamped = false;
    std::vector<IterateRecord> iterates;
};

/// Objective interface consumed by the optimizer. `value_grad` returns the
/// objective and writes the gradient; `value` is the cheaper value-only path.
/// Both must be pure and callable concurrently.
struct Objective {
    std::function<double(std::span<const double>)> value;
    std::function<double(std::span<const double>, std::span<double>)> value_grad;
};

using IterateCallback = std::function<void(const IterateRecord&)>;

/// Bound-constrained minimization from x0 (clamped into the box if needed).
/// Every reported iterate is feasible; accepted losses are non-increasing.
OptimReport minimize(const Objective& obj, std::vector<double> x0, const OptimConfig& cfg,
                     const IterateCallback& on_iterate = {});

/// One curvature pair of the limited memory, s = x_{k+1} - x_k and
/// y = g_{k+1} - g_k, stored oldest first.
struct CurvaturePair {
    std::vector<double> s;
    std::vector<double> y;
};

/// -H_k g via the standard two-loop recursion with initial scaling
/// gamma = (s.y)/(y.y) from the most recent pair. Empty history gives -g.
std::vector<double> two_loop_direction(std::span<const double> grad,
                                       std::span<const CurvaturePair> history);

/// Objective (value and gradient per cfg.gradient) for a Problem.
Objective problem_objective(const Problem& prob, const OptimConfig& cfg);

struct MultiStartReport {
    std::vector<OptimReport> runs;                ///< in start order
    std::vector<std::vector<double>> start_points;
    int best_index = -1;

    const OptimReport& best() const { return runs[best_index]; }
};

/// Draws n_starts points uniformly in the box (deterministic in seed; start
/// k uses its own generator, so results are independent of scheduling) and
/// minimizes from each, concurrently when OpenMP workers are available.
MultiStartReport multi_start_minimize(const Problem& prob, const OptimConfig& cfg,
                                      int n_starts, std::uint64_t seed);

/// The uniform in-box draw used for start k.
std::vector<double> draw_start(const BoundsSpec& bounds, std::uint64_t seed, int start_index);

}  // namespace pulseopt
