#include "pulseopt/loss.hpp"

#include <algorithm>
#include <cmath>

namespace pulseopt {

void OrderingConstraint::validate(int n_channels) const {
    if (kind == Kind::reference) {
        if (channel < 1 || channel > n_channels)
            throw ConfigError("loss.ordering: channel " + std::to_string(channel) +
                              " out of range 1.." + std::to_string(n_channels));
        if (sign != 1 && sign != -1)
            throw ConfigError("loss.ordering: sign must be +1 or -1");
    } else {
        if (chain.size() < 2)
            throw ConfigError("loss.ordering: chain needs at least two channels");
        std::vector<bool> seen(static_cast<size_t>(n_channels), false);
        for (int idx : chain) {
            if (idx < 1 || idx > n_channels)
                throw ConfigError("loss.ordering: chain index " + std::to_string(idx) +
                                  " out of range 1.." + std::to_string(n_channels));
            if (seen[idx - 1])
                throw ConfigError("loss.ordering: chain index " + std::to_string(idx) +
                                  " repeated");
            seen[idx - 1] = true;
        }
    }
}

void LossConfig::validate(int n_channels) const {
    auto nonneg = [](double w, const char* name) {
        if (!(w >= 0.0) || !std::isfinite(w))
            throw ConfigError(std::string("loss.") + name + " must be nonnegative");
    };
    nonneg(w_init, "w_init");
    nonneg(w_mid, "w_mid");
    nonneg(w_final, "w_final");
    nonneg(w_order, "w_order");
    nonneg(w_barrier, "w_barrier");
    if (!(k_sharp > 0.0)) throw ConfigError("loss.k_sharp must be positive");
    if (!(k_barrier > 0.0)) throw ConfigError("loss.k_barrier must be positive");
    if (!(horizon > 0.0)) throw ConfigError("loss.horizon must be positive");
    for (const auto& c : ordering) c.validate(n_channels);
}

double loss_dynamics(const Trajectory& traj, const LossConfig& cfg) {
    if (std::abs(traj.t_final - cfg.horizon) > 1e-9 * std::max(1.0, std::abs(cfg.horizon)))
        throw ConfigError("trajectory horizon " + std::to_string(traj.t_final) +
                          " does not match loss horizon " + std::to_string(cfg.horizon));
    const auto& fs = traj.final_state;
    const int n = fs.n_levels();
    std::vector<double> y(fs.packed);
    y.insert(y.end(), fs.quad.begin(), fs.quad.end());
    return loss_dynamics_from_state<double>(std::span<const double>(y), n, cfg);
}

double total_loss(const SystemSpec& spec, const PulseSet& pulses, const IntegratorConfig& icfg,
                  const LossConfig& lcfg, const BoundsSpec& bounds) {
    const std::vector<double> params = pack<double>(pulses);
    return total_loss_generic<double>(spec, std::span<const double>(params), icfg, lcfg,
                                      bounds);
}

}  // namespace pulseopt
