#pragma once

#include <optional>
#include <span>

#include "pulseopt/loss.hpp"
#include "pulseopt/model.hpp"
#include "pulseopt/ode.hpp"
#include "pulseopt/pulses.hpp"

namespace pulseopt {

/// Everything needed to evaluate the objective at a flat parameter vector.
struct Problem {
    SystemSpec system;
    IntegratorConfig integrator;
    LossConfig loss;
    BoundsSpec bounds;
    std::optional<DensityState> initial_state;  ///< default: ground state

    int n_channels() const { return system.n_levels - 1; }
    int n_params() const { return kParamsPerChannel * n_channels(); }
    void validate() const;
};

/// Objective at a flat parameter vector, generic over the scalar type.
template <class S>
S problem_loss(const Problem& prob, std::span<const S> params) {
    const DensityState* rho0 = prob.initial_state ? &*prob.initial_state : nullptr;
    return total_loss_generic<S>(prob.system, params, prob.integrator, prob.loss,
                                 prob.bounds, rho0);
}

}  // namespace pulseopt
