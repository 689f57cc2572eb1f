#include "pulseopt/pulses.hpp"

#include <cmath>
#include <string>

#include "pulseopt/errors.hpp"

namespace pulseopt {

void validate_pulses(const PulseSet& ps) {
    for (size_t j = 0; j < ps.channels.size(); ++j) {
        const auto& c = ps.channels[j];
        const std::string where = "pulses[" + std::to_string(j) + "]";
        if (!(c.sigma > 0.0))
            throw ConfigError(where + ".sigma must be > 0, got " + std::to_string(c.sigma));
        if (!(c.omega0 >= 0.0))
            throw ConfigError(where + ".omega0 must be >= 0, got " + std::to_string(c.omega0));
        if (!std::isfinite(c.t0) || !std::isfinite(c.delta))
            throw ConfigError(where + " has a non-finite parameter");
    }
}

void BoundsSpec::validate() const {
    if (lower.size() != upper.size())
        throw ConfigError("bounds: lower and upper have different lengths");
    for (size_t i = 0; i < lower.size(); ++i) {
        if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]))
            throw ConfigError("bounds[" + std::to_string(i) + "] is non-finite");
        if (!(lower[i] < upper[i]))
            throw ConfigError("bounds[" + std::to_string(i) +
                              "]: lower must be strictly below upper");
    }
}

bool BoundsSpec::contains(std::span<const double> x) const {
    if (x.size() != lower.size()) return false;
    for (size_t i = 0; i < x.size(); ++i)
        if (x[i] < lower[i] || x[i] > upper[i]) return false;
    return true;
}

BoundsSpec default_bounds(int n_channels) {
    BoundsSpec b;
    for (int j = 0; j < n_channels; ++j) {
        b.lower.insert(b.lower.end(), {15.0, 2.0, 1.0, -5.0});
        b.upper.insert(b.upper.end(), {35.0, 4.0, 35.0, 5.0});
    }
    return b;
}

std::vector<std::string> param_labels(int n_channels) {
    std::vector<std::string> labels;
    labels.reserve(static_cast<size_t>(n_channels) * kParamsPerChannel);
    for (int j = 1; j <= n_channels; ++j) {
        const std::string idx = std::to_string(j);
        labels.push_back("t" + idx);
        labels.push_back("s" + idx);
        labels.push_back("o" + idx);
        labels.push_back("d" + idx);
    }
    return labels;
}

}  // namespace pulseopt
