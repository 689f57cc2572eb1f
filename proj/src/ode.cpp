#include "pulseopt/ode.hpp"

#include <cmath>

namespace pulseopt {

void IntegratorConfig::validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
        throw ConfigError("integrator tolerances must be positive");
    if (initial_step < 0.0) throw ConfigError("integrator.initial_step must be >= 0");
    if (max_steps < 1) throw ConfigError("integrator.max_steps must be positive");
    if (!(t_final > 0.0)) throw ConfigError("integrator.t_final must be positive");
    if (!(gate_sharpness > 0.0)) throw ConfigError("integrator.gate_sharpness must be positive");
    if (dense_samples < 2) throw ConfigError("output.samples must be at least 2");
}

int DensityState::n_levels() const {
    return static_cast<int>(std::lround(std::sqrt(static_cast<double>(packed.size()))));
}

double DensityState::population(int level) const { return packed[level - 1]; }

CxMatrix<double> DensityState::density_matrix() const {
    CxMatrix<double> rho(n_levels());
    unpack_hermitian<double>(std::span<const double>(packed), rho);
    return rho;
}

DensityState basis_state(int n_levels, int level) {
    DensityState s;
    s.packed.assign(static_cast<size_t>(packed_size(n_levels)), 0.0);
    s.quad.assign(static_cast<size_t>(n_levels - 1), 0.0);
    s.packed[level - 1] = 1.0;
    return s;
}

DensityState ground_state(int n_levels) { return basis_state(n_levels, 1); }

DensityState state_from_matrix(const CxMatrix<double>& rho) {
    DensityState s;
    s.packed.assign(static_cast<size_t>(packed_size(rho.n)), 0.0);
    s.quad.assign(static_cast<size_t>(rho.n - 1), 0.0);
    pack_hermitian<double>(rho, std::span<double>(s.packed));
    return s;
}

namespace {

double coherence_norm_packed(std::span<const double> y, int n) {
    double sum = 0.0;
    for (int k = n; k < n * n; k += 2) sum += y[k] * y[k] + y[k + 1] * y[k + 1];
    return std::sqrt(2.0 * sum);
}

}  // namespace

Trajectory integrate(const SystemSpec& spec, const PulseSet& pulses,
                     const IntegratorConfig& cfg, const DensityState& rho0) {
    spec.validate();
    cfg.validate();
    validate_pulses(pulses);

    const int n = spec.n_levels;
    const int np = packed_size(n);
    const int samples = cfg.dense_samples;

    Trajectory traj;
    traj.t_final = cfg.t_final;
    traj.times.resize(samples);
    for (int i = 0; i < samples; ++i)
        traj.times[i] = cfg.t_final * static_cast<double>(i) / (samples - 1);
    traj.populations.reserve(samples);
    traj.omegas.reserve(samples);
    traj.coherence_norms.reserve(samples);

    std::vector<double> y(np + n - 1, 0.0);
    for (int i = 0; i < np; ++i) y[i] = rho0.packed[i];
    for (int i = 0; i < n - 1; ++i) y[np + i] = rho0.quad[i];

    auto record = [&](std::span<const double> state) {
        std::vector<double> pops(state.begin(), state.begin() + n);
        traj.populations.push_back(std::move(pops));
        traj.coherence_norms.push_back(coherence_norm_packed(state, n));
    };
    record(y);  // sample 0 is the initial state

    size_t next = 1;
    std::vector<double> yi(y.size());
    auto observer = [&](double t, double h, const std::vector<double>& y_old,
                        const StageArray<double>& k, const std::vector<double>& y_new) {
        while (next + 1 < traj.times.size() && traj.times[next] <= t + h) {
            const double theta = (traj.times[next] - t) / h;
            const auto b = tsit5::interp_weights(theta);
            for (size_t i = 0; i < y_old.size(); ++i) {
                double acc = y_old[i];
                for (int s = 0; s < 7; ++s) acc += h * b[s] * k[s][i];
                yi[i] = acc;
            }
            record(yi);
            ++next;
        }
        (void)y_new;
    };

    const detail::StepCounters counters = detail::run_master<double>(spec, pulses, cfg, y, observer);
    traj.steps_accepted = counters.accepted;
    traj.steps_rejected = counters.rejected;

    record(y);  // final sample is the integration end state, not interpolated

    traj.final_state.packed.assign(y.begin(), y.begin() + np);
    traj.final_state.quad.assign(y.begin() + np, y.end());

    for (double t : traj.times) {
        std::vector<double> om(pulses.channels.size());
        for (size_t j = 0; j < om.size(); ++j) om[j] = rabi_envelope(pulses.channels[j], t);
        traj.omegas.push_back(std::move(om));
    }
    return traj;
}

Trajectory integrate(const SystemSpec& spec, const PulseSet& pulses,
                     const IntegratorConfig& cfg) {
    return integrate(spec, pulses, cfg, ground_state(spec.n_levels));
}

}  // namespace pulseopt
