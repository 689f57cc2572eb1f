#include "pulseopt/model.hpp"

#include <cmath>
#include <string>

namespace pulseopt {

void SystemSpec::validate() const {
    if (n_levels < 2) throw ConfigError("system.n_levels must be at least 2");
    if (!(gamma_natural >= 0.0) || !std::isfinite(gamma_natural))
        throw ConfigError("system.gamma must be a nonnegative finite value");
    if (!(gamma_collisional >= 0.0) || !std::isfinite(gamma_collisional))
        throw ConfigError("system.gamma_c must be a nonnegative finite value");
    for (size_t k = 0; k < jump_channels.size(); ++k) {
        const auto& j = jump_channels[k];
        const std::string where = "system.jump[" + std::to_string(k) + "]";
        if (j.from < 1 || j.from > n_levels || j.to < 1 || j.to > n_levels)
            throw ConfigError(where + ": levels must lie in 1.." + std::to_string(n_levels));
        if (j.from == j.to) throw ConfigError(where + ": source and target coincide");
        if (!(j.rate >= 0.0) || !std::isfinite(j.rate))
            throw ConfigError(where + ": rate must be nonnegative and finite");
    }
}

std::vector<JumpChannel> default_jump_channels(int n_levels, double gamma) {
    std::vector<JumpChannel> chans;
    for (int e = 2; e <= n_levels; e += 2) {
        if (e - 1 >= 1) chans.push_back({e, e - 1, gamma / 2.0});
        if (e + 1 <= n_levels) chans.push_back({e, e + 1, gamma / 2.0});
    }
    return chans;
}

SystemSpec make_system(int n_levels, double gamma, double gamma_c) {
    SystemSpec spec;
    spec.n_levels = n_levels;
    spec.gamma_natural = gamma;
    spec.gamma_collisional = gamma_c;
    spec.jump_channels = default_jump_channels(n_levels, gamma);
    spec.validate();
    return spec;
}

std::vector<DephasingChannel> dephasing_channels(const SystemSpec& spec) {
    std::vector<DephasingChannel> chans;
    if (spec.gamma_collisional <= 0.0) return chans;
    // Projector dephasing at rate 2*gamma_c on each excited level makes the
    // coherence between a driven pair decay at gamma/2 + gamma_c total.
    for (int e = 2; e <= spec.n_levels; e += 2)
        chans.push_back({e, 2.0 * spec.gamma_collisional});
    return chans;
}

std::vector<DissipatorTerm> expanded_dissipator(const SystemSpec& spec) {
    std::vector<DissipatorTerm> terms;
    terms.reserve(spec.jump_channels.size() + 2);
    for (const auto& j : spec.jump_channels) terms.push_back({j.to - 1, j.from - 1, j.rate});
    for (const auto& d : dephasing_channels(spec)) terms.push_back({d.level - 1, d.level - 1, d.rate});
    return terms;
}

}  // namespace pulseopt
