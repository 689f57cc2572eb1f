#pragma once

#include <string>
#include <vector>

#include "pulseopt/cxmath.hpp"
#include "pulseopt/errors.hpp"
#include "pulseopt/pulses.hpp"

namespace pulseopt {

/// Incoherent decay channel |to><from| with the given rate. Levels are
/// 1-based, matching the ket labels used in configs.
struct JumpChannel {
    int from = 0;
    int to = 0;
    double rate = 0.0;

    friend bool operator==(const JumpChannel&, const JumpChannel&) = default;
};

/// Pure-dephasing channel |level><level| with the given rate.
struct DephasingChannel {
    int level = 0;
    double rate = 0.0;
};

/// N-level chain system with sequential couplings |j> <-> |j+1>.
///
/// The default is the five-level M configuration: ground levels 1, 3, 5 and
/// excited levels 2, 4. All rates are in units of the natural decay rate
/// Gamma, so gamma_natural is 1.0 unless deliberately rescaled.
struct SystemSpec {
    int n_levels = 5;
    double gamma_natural = 1.0;      ///< longitudinal decay rate Gamma
    double gamma_collisional = 0.0;  ///< collisional dephasing rate gamma_c
    std::vector<JumpChannel> jump_channels;

    /// Use e^{-i delta t} on every upper-diagonal coupling instead of the
    /// alternating-sign phase pattern. Off by default; cross-check only.
    bool uniform_phase_convention = false;

    void validate() const;

    friend bool operator==(const SystemSpec&, const SystemSpec&) = default;
};

/// Decay channels for the N-level chain: every even (excited) level relaxes
/// to both neighbors with rate gamma/2, giving each excited level the total
/// rate gamma. For n_levels = 5 this is the four-channel set
/// |1><2|, |3><2|, |3><4|, |5><4|.
std::vector<JumpChannel> default_jump_channels(int n_levels, double gamma);

/// SystemSpec with the default jump channels filled in.
SystemSpec make_system(int n_levels = 5, double gamma = 1.0, double gamma_c = 0.0);

/// Pure-dephasing channels realizing collisional broadening: projectors on
/// the excited levels with rate 2*gamma_c, so the total coherence decay rate
/// of a driven transition is Gamma/2 + gamma_c. Empty when gamma_c = 0.
std::vector<DephasingChannel> dephasing_channels(const SystemSpec& spec);

/// Interaction-picture RWA Hamiltonian of the driven chain at time t.
///
/// Upper-diagonal entries are H(j-1, j) = Omega_j(t) * e^{-i s_j delta_j t}
/// with the alternating sign pattern s_j = +1 for odd channels (1, 3, ...)
/// and s_j = -1 for even channels; the lower diagonal is the conjugate.
/// Zero diagonal, Hermitian by construction.
template <class S>
CxMatrix<S> build_hamiltonian(const SystemSpec& spec, const PulseSetT<S>& pulses, double t) {
    const int n = spec.n_levels;
    if (pulses.n_channels() != n - 1)
        throw ConfigError("pulse channel count " + std::to_string(pulses.n_channels()) +
                          " does not match n_levels-1 = " + std::to_string(n - 1));
    CxMatrix<S> h(n);
    for (int j = 0; j < n - 1; ++j) {
        const auto& p = pulses.channels[j];
        const S omega = rabi_envelope(p, t);
        const double sign = spec.uniform_phase_convention ? 1.0 : (j % 2 == 0 ? 1.0 : -1.0);
        const Cx<S> upper = omega * expi<S>(p.delta * (-sign * t));
        h(j, j + 1) = upper;
        h(j + 1, j) = conj(upper);
    }
    return h;
}

/// Internal 0-based dissipator term gamma * D[|a><b|].
struct DissipatorTerm {
    int a = 0;  ///< target level (row of the jump operator)
    int b = 0;  ///< source level; a == b is a pure-dephasing projector
    double rate = 0.0;
};

/// Jump channels plus dephasing channels, 0-based, ready for the RHS loop.
std::vector<DissipatorTerm> expanded_dissipator(const SystemSpec& spec);

/// out += sum_k gamma_k (L_k rho L_k^dag - 1/2 {L_k^dag L_k, rho}) for
/// single-element jump operators L_k = |a><b|.
template <class S>
void add_dissipator(const std::vector<DissipatorTerm>& terms, const CxMatrix<S>& rho,
                    CxMatrix<S>& out) {
    const int n = rho.n;
    for (const auto& t : terms) {
        out(t.a, t.a) += t.rate * rho(t.b, t.b);
        const double half = 0.5 * t.rate;
        for (int j = 0; j < n; ++j) {
            out(t.b, j) -= half * rho(t.b, j);
            out(j, t.b) -= half * rho(j, t.b);
        }
    }
}

/// Right-hand side of the master equation:
/// drho/dt = -i[H, rho] + sum_k gamma_k (L_k rho L_k^dag - 1/2 {L_k^dag L_k, rho}).
///
/// Reference implementation using a dense commutator; the integrator uses
/// the chain-structured kernel in ode.hpp, which is tested against this.
template <class S>
CxMatrix<S> lindblad_rhs(const SystemSpec& spec, const CxMatrix<S>& h, const CxMatrix<S>& rho) {
    const int n = spec.n_levels;
    if (h.n != n || rho.n != n)
        throw ConfigError("lindblad_rhs: matrix dimension does not match n_levels");
    // A = H rho; then -i[H, rho] = -i (A - A^dag), Hermitian by construction.
    CxMatrix<S> a(n);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            const Cx<S>& hik = h(i, k);
            for (int j = 0; j < n; ++j) a(i, j) += hik * rho(k, j);
        }
    CxMatrix<S> out(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out(i, j) = mul_neg_i(a(i, j) - conj(a(j, i)));
    add_dissipator(expanded_dissipator(spec), rho, out);
    return out;
}

}  // namespace pulseopt
