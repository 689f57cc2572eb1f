#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pulseopt/dual.hpp"
#include "pulseopt/errors.hpp"

namespace pulseopt {

/// One Gaussian control channel. Times are in units of 1/Gamma, frequencies
/// in units of Gamma.
///
/// The envelope is omega0 * exp(-(t - t0)^2 / sigma^2). Note the exponent
/// divides by sigma^2, not the 2*sigma^2 of the statistics convention; all
/// widths in configs and fixtures follow this definition.
template <class S>
struct PulseParamsT {
    S t0{};      ///< pulse center
    S sigma{};   ///< temporal width, > 0
    S omega0{};  ///< peak Rabi amplitude, >= 0
    S delta{};   ///< detuning

    friend bool operator==(const PulseParamsT&, const PulseParamsT&) = default;
};
using PulseParams = PulseParamsT<double>;

/// Ordered channels j = 1..N-1 driving the |j> <-> |j+1> transitions.
template <class S>
struct PulseSetT {
    std::vector<PulseParamsT<S>> channels;

    int n_channels() const { return static_cast<int>(channels.size()); }
    friend bool operator==(const PulseSetT&, const PulseSetT&) = default;
};
using PulseSet = PulseSetT<double>;

/// Gaussian envelope value at time t.
template <class S>
inline S rabi_envelope(const PulseParamsT<S>& p, double t) {
    using std::exp;
    const S u = (t - p.t0) / p.sigma;
    return p.omega0 * exp(-(u * u));
}

/// Validates sigma > 0 and omega0 >= 0 for every channel.
void validate_pulses(const PulseSet& ps);

/// Flat parameter layout [t1, sigma1, omega1, delta1, t2, ...].
inline constexpr int kParamsPerChannel = 4;

template <class S>
std::vector<S> pack(const PulseSetT<S>& ps) {
    std::vector<S> out;
    out.reserve(ps.channels.size() * kParamsPerChannel);
    for (const auto& c : ps.channels) {
        out.push_back(c.t0);
        out.push_back(c.sigma);
        out.push_back(c.omega0);
        out.push_back(c.delta);
    }
    return out;
}

template <class S>
PulseSetT<S> unpack(std::span<const S> params) {
    if (params.size() % kParamsPerChannel != 0)
        throw ConfigError("parameter vector length must be a multiple of 4");
    PulseSetT<S> ps;
    ps.channels.resize(params.size() / kParamsPerChannel);
    for (size_t j = 0; j < ps.channels.size(); ++j) {
        auto& c = ps.channels[j];
        c.t0 = params[4 * j + 0];
        c.sigma = params[4 * j + 1];
        c.omega0 = params[4 * j + 2];
        c.delta = params[4 * j + 3];
    }
    return ps;
}

/// Elementwise box bounds for the flat parameter vector.
struct BoundsSpec {
    std::vector<double> lower;
    std::vector<double> upper;

    int size() const { return static_cast<int>(lower.size()); }
    void validate() const;
    bool contains(std::span<const double> x) const;

    friend bool operator==(const BoundsSpec&, const BoundsSpec&) = default;
};

/// Default optimization box, per channel: t in [15,35], sigma in [2,4],
/// omega0 in [1,35], delta in [-5,5]. Simulation accepts parameters outside
/// this box; the bounds constrain the optimizer only.
BoundsSpec default_bounds(int n_channels);

/// Short column labels t1,s1,o1,d1,... used in CSV traces and reports.
std::vector<std::string> param_labels(int n_channels);

}  // namespace pulseopt
