#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pulseopt/dual.hpp"
#include "pulseopt/errors.hpp"
#include "pulseopt/model.hpp"
#include "pulseopt/ode.hpp"
#include "pulseopt/pulses.hpp"

namespace pulseopt {

/// Soft preference on the temporal order of pulse centers.
///
/// reference: compares channel j against every other channel,
///   P = prod_{k != j} sigmoid(s * k_sharp * (t_j - t_k)); with s = +1 the
///   penalty is smallest when channel j peaks last, with s = -1 first.
/// chain: indices listed latest-first, P = prod over consecutive pairs (a, b)
///   of sigmoid(k_sharp * (t_a - t_b)), so [4,2,3,1] asks t4 > t2 > t3 > t1.
///
/// By default the loss gains w_order * (1 - P), rewarding the ordering;
/// penalize flips this to w_order * P to steer away from it.
struct OrderingConstraint {
    enum class Kind { reference, chain };
    Kind kind = Kind::reference;
    int channel = 1;  ///< reference channel j, 1-based
    int sign = 1;     ///< +1: j latest, -1: j earliest
    std::vector<int> chain;  ///< 1-based channel indices, latest first
    bool penalize = false;

    void validate(int n_channels) const;
    friend bool operator==(const OrderingConstraint&, const OrderingConstraint&) = default;
};

/// Weights and shape parameters of the composite objective.
struct LossConfig {
    double w_init = 1.0;     ///< weight of the gated integral of rho11
    double w_mid = 1.0;      ///< weight of the intermediate-population integrals
    double w_final = 1.0;    ///< weight of the terminal-fidelity term
    double w_order = 1.0;    ///< weight of the ordering terms
    double w_barrier = 1.0;  ///< weight of the box barrier
    double k_sharp = 5.0;    ///< ordering sigmoid sharpness, units of Gamma
    double k_barrier = 10.0; ///< barrier softplus sharpness
    double horizon = 45.0;   ///< must match the integration horizon T
    std::vector<OrderingConstraint> ordering;

    void validate(int n_channels) const;
    friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

/// Numerically stable logistic function, 1 / (1 + e^{-x}).
template <class S>
inline S sigmoid(const S& x) {
    using std::exp;
    if (value_of(x) >= 0.0) return 1.0 / (1.0 + exp(-x));
    const S e = exp(x);
    return e / (1.0 + e);
}

/// Numerically stable softplus, ln(1 + e^x).
template <class S>
inline S softplus(const S& x) {
    using std::exp;
    using std::log1p;
    if (value_of(x) > 30.0) return x + log1p(exp(-x));
    return log1p(exp(x));
}

/// P in (0, 1); ~1 when the requested ordering of centers holds with margin
/// >> 1/k_sharp. Depends only on differences of centers.
template <class S>
S ordering_penalty(std::span<const S> centers, const OrderingConstraint& c, double k_sharp) {
    const int n = static_cast<int>(centers.size());
    c.validate(n);
    S p = 1.0;
    if (c.kind == OrderingConstraint::Kind::reference) {
        const S& tj = centers[c.channel - 1];
        for (int k = 0; k < n; ++k) {
            if (k == c.channel - 1) continue;
            p = p * sigmoid<S>(static_cast<double>(c.sign) * k_sharp * (tj - centers[k]));
        }
    } else {
        for (size_t m = 0; m + 1 < c.chain.size(); ++m) {
            const S& ta = centers[c.chain[m] - 1];
            const S& tb = centers[c.chain[m + 1] - 1];
            p = p * sigmoid<S>(k_sharp * (ta - tb));
        }
    }
    return p;
}

/// Smooth box penalty, ~0 inside, slope 1 per unit violation outside:
/// sum_i [softplus(k (l_i - x_i)) + softplus(k (x_i - u_i))] / k.
template <class S>
S barrier_penalty(std::span<const S> params, const BoundsSpec& bounds, double k_barrier) {
    if (static_cast<int>(params.size()) != bounds.size())
        throw ConfigError("barrier: parameter count " + std::to_string(params.size()) +
                          " does not match bounds size " + std::to_string(bounds.size()));
    S total = 0.0;
    for (size_t i = 0; i < params.size(); ++i) {
        total += softplus<S>(k_barrier * (bounds.lower[i] - params[i]));
        total += softplus<S>(k_barrier * (params[i] - bounds.upper[i]));
    }
    return total / k_barrier;
}

/// Dynamical part of the loss from an augmented final state
/// (packed density matrix followed by the quadrature accumulators):
/// w_init * q_1 + w_mid * sum_k q_k + w_final * (rho_NN(T) - 1)^2.
template <class S>
S loss_dynamics_from_state(std::span<const S> y_final, int n_levels, const LossConfig& cfg) {
    const int np = packed_size(n_levels);
    if (static_cast<int>(y_final.size()) != np + n_levels - 1)
        throw ConfigError("loss: augmented state length does not match n_levels");
    S mid = 0.0;
    for (int k = 1; k <= n_levels - 2; ++k) mid += y_final[np + k];
    const S err = y_final[n_levels - 1] - 1.0;
    return cfg.w_init * y_final[np] + cfg.w_mid * mid + cfg.w_final * (err * err);
}

/// Dynamical loss of an integrated trajectory. The trajectory must span the
/// configured horizon.
double loss_dynamics(const Trajectory& traj, const LossConfig& cfg);

/// Sum of the ordering terms, w_order * (1 - P) or w_order * P per constraint.
template <class S>
S ordering_terms(std::span<const S> centers, const LossConfig& cfg) {
    S total = 0.0;
    for (const auto& c : cfg.ordering) {
        const S p = ordering_penalty<S>(centers, c, cfg.k_sharp);
        total += cfg.w_order * (c.penalize ? p : 1.0 - p);
    }
    return total;
}

/// Full objective for a flat parameter vector, generic over the scalar type.
/// rho0 defaults to the ground state |1><1|.
template <class S>
S total_loss_generic(const SystemSpec& spec, std::span<const S> params,
                     const IntegratorConfig& icfg, const LossConfig& lcfg,
                     const BoundsSpec& bounds, const DensityState* rho0 = nullptr) {
    if (std::abs(lcfg.horizon - icfg.t_final) > 1e-9 * std::max(1.0, std::abs(icfg.t_final)))
        throw ConfigError("loss horizon " + std::to_string(lcfg.horizon) +
                          " does not match integration horizon " +
                          std::to_string(icfg.t_final));
    const PulseSetT<S> pulses = unpack<S>(params);
    if (pulses.n_channels() != spec.n_levels - 1)
        throw ConfigError("parameter vector drives " + std::to_string(pulses.n_channels()) +
                          " channels but the system has " +
                          std::to_string(spec.n_levels - 1));
    const DensityState start = rho0 ? *rho0 : ground_state(spec.n_levels);
    const std::vector<S> yf = integrate_final_state<S>(spec, pulses, icfg, start);
    S total = loss_dynamics_from_state<S>(std::span<const S>(yf), spec.n_levels, lcfg);

    std::vector<S> centers(pulses.channels.size());
    for (size_t j = 0; j < centers.size(); ++j) centers[j] = pulses.channels[j].t0;
    total += ordering_terms<S>(std::span<const S>(centers), lcfg);
    if (lcfg.w_barrier != 0.0)
        total += lcfg.w_barrier * barrier_penalty<S>(params, bounds, lcfg.k_barrier);
    if (!all_finite(total)) throw NumericalError("loss evaluated to a non-finite value");
    return total;
}

/// Full objective of a pulse set.
double total_loss(const SystemSpec& spec, const PulseSet& pulses, const IntegratorConfig& icfg,
                  const LossConfig& lcfg, const BoundsSpec& bounds);

}  // namespace pulseopt
