#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pulseopt/dual.hpp"
#include "pulseopt/errors.hpp"
#include "pulseopt/model.hpp"
#include "pulseopt/pulses.hpp"

namespace pulseopt {

/// Adaptive integration settings for the master equation over [0, t_final].
struct IntegratorConfig {
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double initial_step = 0.0;  ///< 0 = choose automatically
    long max_steps = 2000000;
    double t_final = 45.0;

    /// Steepness of the sigmoid replacing the t >= T/2 indicator in the
    /// initial-state quadrature. Keeps the RHS smooth for differentiation.
    double gate_sharpness = 50.0;
    /// Integrate [0, T/2] and [T/2, T] separately with a hard indicator
    /// instead of the sigmoid. Validation variant.
    bool hard_gate = false;

    int dense_samples = 1000;  ///< uniform output grid size (including both endpoints)

    void validate() const;

    friend bool operator==(const IntegratorConfig&, const IntegratorConfig&) = default;
};

// ---------------------------------------------------------------------------
// Hermitian packing
//
// A Hermitian N x N matrix is stored as N^2 reals: the N real diagonal
// entries first, then (re, im) of each strict upper-triangle entry in
// row-major order. Hermiticity of the stored state is therefore exact by
// representation.
// ---------------------------------------------------------------------------

inline int packed_size(int n) { return n * n; }

template <class S>
void pack_hermitian(const CxMatrix<S>& rho, std::span<S> out) {
    const int n = rho.n;
    int k = n;
    for (int i = 0; i < n; ++i) out[i] = rho(i, i).re;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            out[k++] = rho(i, j).re;
            out[k++] = rho(i, j).im;
        }
}

template <class S>
void unpack_hermitian(std::span<const S> in, CxMatrix<S>& rho) {
    const int n = rho.n;
    int k = n;
    for (int i = 0; i < n; ++i) rho(i, i) = Cx<S>{in[i]};
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            rho(i, j) = Cx<S>{in[k], in[k + 1]};
            rho(j, i) = Cx<S>{in[k], -in[k + 1]};
            k += 2;
        }
}

/// Density matrix plus the running loss integrals
/// [gated integral of rho11, integral of rho22, ..., integral of rho_{N-1,N-1}].
struct DensityState {
    std::vector<double> packed;  ///< N^2 reals, Hermitian packing
    std::vector<double> quad;    ///< N-1 quadrature accumulators

    int n_levels() const;
    double population(int level) const;  ///< level is 1-based
    CxMatrix<double> density_matrix() const;
};

/// |1><1| with zeroed quadratures.
DensityState ground_state(int n_levels);
/// |level><level| (1-based) with zeroed quadratures.
DensityState basis_state(int n_levels, int level);
/// DensityState from an explicit Hermitian matrix.
DensityState state_from_matrix(const CxMatrix<double>& rho);

/// Sampled solution of one integration run.
struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> populations;  ///< one row per time, N columns
    std::vector<std::vector<double>> omegas;       ///< pulse envelopes, N-1 columns
    std::vector<double> coherence_norms;  ///< Frobenius norm of the off-diagonal part
    DensityState final_state;
    double t_final = 0.0;
    long steps_accepted = 0;
    long steps_rejected = 0;
};

// ---------------------------------------------------------------------------
// Tsitouras 5(4) embedded pair
//
// Coefficients from Tsitouras, Comput. Math. Appl. 62 (2011) 770-775, with
// the standard free 4th-order interpolant. FSAL: the 7th stage is the first
// stage of the next step.
// ---------------------------------------------------------------------------
namespace tsit5 {

inline constexpr double c2 = 0.161;
inline constexpr double c3 = 0.327;
inline constexpr double c4 = 0.9;
inline constexpr double c5 = 0.9800255409045097;

inline constexpr double a21 = 0.161;
inline constexpr double a31 = -0.008480655492356989;
inline constexpr double a32 = 0.335480655492357;
inline constexpr double a41 = 2.8971530571054935;
inline constexpr double a42 = -6.359448489975075;
inline constexpr double a43 = 4.3622954328695815;
inline constexpr double a51 = 5.325864828439257;
inline constexpr double a52 = -11.748883564062828;
inline constexpr double a53 = 7.4955393428898365;
inline constexpr double a54 = -0.09249506636175525;
inline constexpr double a61 = 5.86145544294642;
inline constexpr double a62 = -12.92096931784711;
inline constexpr double a63 = 8.159367898576159;
inline constexpr double a64 = -0.071584973281401;
inline constexpr double a65 = -0.028269050394068383;
// 5th-order solution weights (row 7 of the tableau; also the FSAL stage node).
inline constexpr double b1 = 0.09646076681806523;
inline constexpr double b2 = 0.01;
inline constexpr double b3 = 0.4798896504144996;
inline constexpr double b4 = 1.379008574103742;
inline constexpr double b5 = -3.290069515436081;
inline constexpr double b6 = 2.324710524099774;
// b - bhat: weights of the embedded error estimate.
inline constexpr double e1 = -0.001780011052225771;
inline constexpr double e2 = -0.0008164344596567469;
inline constexpr double e3 = 0.007880878010261995;
inline constexpr double e4 = -0.1447110071732629;
inline constexpr double e5 = 0.5823571654525552;
inline constexpr double e6 = -0.45808210592918697;
inline constexpr double e7 = 0.015151515151515152;

/// Interpolation weights b_i(theta) of the free interpolant,
/// y(t + theta h) = y + h sum_i b_i(theta) k_i.
inline std::array<double, 7> interp_weights(double theta) {
    const double t2 = theta * theta;
    std::array<double, 7> b;
    b[0] = -1.0530884977290216 * theta * (theta - 1.3299890189751412) *
           (t2 - 1.4364028541716351 * theta + 0.7139816917074209);
    b[1] = 0.1017 * t2 * (t2 - 2.1966568338249754 * theta + 1.2949852507374631);
    b[2] = 2.490627285651252793 * t2 *
           (t2 - 2.38535645472061657 * theta + 1.57803468208092486);
    b[3] = -16.54810288924490272 * (theta - 1.21712927295533244) *
           (theta - 0.61620406037800089) * t2;
    b[4] = 47.37952196281928122 * (theta - 1.203071208372362603) *
           (theta - 0.658047292653547382) * t2;
    b[5] = -34.87065786149660974 * (theta - 1.2) * (theta - 0.666666666666666667) * t2;
    b[6] = 2.5 * (theta - 1.0) * (theta - 0.6) * t2;
    return b;
}

}  // namespace tsit5

/// Seven stage derivatives of one step; k[0] is the derivative at the step
/// start and k[6] (FSAL) the derivative at the accepted end point.
template <class S>
using StageArray = std::array<std::vector<S>, 7>;

namespace detail {

template <class S, class Rhs>
void tsit5_stages(Rhs& f, double t, double h, const std::vector<S>& y, StageArray<S>& k,
                  std::vector<S>& ytmp, std::vector<S>& y5) {
    using namespace tsit5;
    const size_t m = y.size();
    for (size_t i = 0; i < m; ++i) ytmp[i] = y[i] + h * (a21 * k[0][i]);
    f(t + c2 * h, ytmp, k[1]);
    for (size_t i = 0; i < m; ++i) ytmp[i] = y[i] + h * (a31 * k[0][i] + a32 * k[1][i]);
    f(t + c3 * h, ytmp, k[2]);
    for (size_t i = 0; i < m; ++i)
        ytmp[i] = y[i] + h * (a41 * k[0][i] + a42 * k[1][i] + a43 * k[2][i]);
    f(t + c4 * h, ytmp, k[3]);
    for (size_t i = 0; i < m; ++i)
        ytmp[i] = y[i] + h * (a51 * k[0][i] + a52 * k[1][i] + a53 * k[2][i] + a54 * k[3][i]);
    f(t + c5 * h, ytmp, k[4]);
    for (size_t i = 0; i < m; ++i)
        ytmp[i] = y[i] + h * (a61 * k[0][i] + a62 * k[1][i] + a63 * k[2][i] + a64 * k[3][i] +
                              a65 * k[4][i]);
    f(t + h, ytmp, k[5]);
    for (size_t i = 0; i < m; ++i) {
        y5[i] = y[i] + h * (b1 * k[0][i] + b2 * k[1][i] + b3 * k[2][i] + b4 * k[3][i] +
                            b5 * k[4][i] + b6 * k[5][i]);
    }
    f(t + h, y5, k[6]);  // FSAL
}

/// Scaled RMS norm of the embedded error estimate, from value parts only so
/// that dual-number integrations take exactly the same steps as plain ones.
template <class S>
double error_norm(const std::vector<S>& y0, const std::vector<S>& y1, const StageArray<S>& k,
                  double h, double rel_tol, double abs_tol) {
    using namespace tsit5;
    double sum = 0.0;
    const size_t m = y0.size();
    for (size_t i = 0; i < m; ++i) {
        const double err =
            h * (e1 * value_of(k[0][i]) + e2 * value_of(k[1][i]) + e3 * value_of(k[2][i]) +
                 e4 * value_of(k[3][i]) + e5 * value_of(k[4][i]) + e6 * value_of(k[5][i]) +
                 e7 * value_of(k[6][i]));
        const double scale =
            abs_tol + rel_tol * std::max(std::abs(value_of(y0[i])), std::abs(value_of(y1[i])));
        const double q = err / scale;
        sum += q * q;
    }
    return std::sqrt(sum / static_cast<double>(m));
}

/// Automatic initial step (Hairer-Norsett-Wanner II.4 heuristic).
template <class S, class Rhs>
double initial_step_heuristic(Rhs& f, double t0, const std::vector<S>& y0,
                              const std::vector<S>& f0, double t_final, double rel_tol,
                              double abs_tol) {
    const size_t m = y0.size();
    auto scaled_norm = [&](const std::vector<S>& v, const std::vector<S>& ref) {
        double s = 0.0;
        for (size_t i = 0; i < m; ++i) {
            const double sc = abs_tol + rel_tol * std::abs(value_of(ref[i]));
            const double q = value_of(v[i]) / sc;
            s += q * q;
        }
        return std::sqrt(s / static_cast<double>(m));
    };
    const double d0 = scaled_norm(y0, y0);
    const double d1 = scaled_norm(f0, y0);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, t_final - t0);
    std::vector<S> y1(m), f1(m);
    for (size_t i = 0; i < m; ++i) y1[i] = y0[i] + h0 * f0[i];
    f(t0 + h0, y1, f1);
    std::vector<S> df(m);
    for (size_t i = 0; i < m; ++i) df[i] = f1[i] - f0[i];
    const double d2 = scaled_norm(df, y0) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm > 1e-15 ? std::pow(0.01 / dm, 0.2) : std::max(1e-6, h0 * 1e-3);
    return std::min({100.0 * h0, h1, t_final - t0});
}

struct StepCounters {
    long accepted = 0;
    long rejected = 0;
};

/// Adaptive loop over [t0, t1]. The observer is called after every accepted
/// step as obs(t, h, y_old, stages, y_new) and may interpolate within the
/// step. Throws IntegrationError / NumericalError on failure.
template <class S, class Rhs, class Observer>
void integrate_adaptive(Rhs& f, std::vector<S>& y, double t0, double t1,
                        const IntegratorConfig& cfg, StepCounters& counters, Observer&& obs) {
    const size_t m = y.size();
    StageArray<S> k;
    for (auto& ki : k) ki.resize(m);
    std::vector<S> ytmp(m), y5(m);

    f(t0, y, k[0]);
    for (size_t i = 0; i < m; ++i)
        if (!std::isfinite(value_of(k[0][i])))
            throw NumericalError("non-finite right-hand side at t = " + std::to_string(t0));

    double t = t0;
    double h = cfg.initial_step > 0.0
                   ? std::min(cfg.initial_step, t1 - t0)
                   : initial_step_heuristic(f, t0, y, k[0], t1, cfg.rel_tol, cfg.abs_tol);
    // PI step-size controller (orders: error estimator 4, exponent 1/5).
    constexpr double kAlpha = 0.7 / 5.0;
    constexpr double kBeta = 0.4 / 5.0;
    constexpr double kSafety = 0.9;
    double err_prev = 1.0;
    bool rejected_last = false;

    while (t < t1) {
        if (counters.accepted + counters.rejected >= cfg.max_steps)
            throw IntegrationError("max_steps exceeded at t = " + std::to_string(t), t);
        if (h < 16.0 * 2.220446049250313e-16 * std::max(1.0, std::abs(t)))
            throw IntegrationError("step size underflow at t = " + std::to_string(t), t);
        const bool last = t + h >= t1;
        if (last) h = t1 - t;

        tsit5_stages(f, t, h, y, k, ytmp, y5);
        const double err = error_norm(y, y5, k, h, cfg.rel_tol, cfg.abs_tol);

        if (!std::isfinite(err)) {
            h *= 0.5;
            ++counters.rejected;
            rejected_last = true;
            continue;
        }
        if (err <= 1.0) {
            obs(t, h, y, k, y5);
            std::swap(y, y5);
            std::swap(k[0], k[6]);  // FSAL
            t = last ? t1 : t + h;
            ++counters.accepted;
            const double e = std::max(err, 1e-10);
            double fac = kSafety * std::pow(e, -kAlpha) * std::pow(err_prev, kBeta);
            fac = std::clamp(fac, 0.2, rejected_last ? 1.0 : 5.0);
            h *= fac;
            err_prev = e;
            rejected_last = false;
        } else {
            ++counters.rejected;
            const double fac = std::max(0.1, kSafety * std::pow(err, -0.2));
            h *= fac;
            rejected_last = true;
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Master-equation system
// ---------------------------------------------------------------------------

namespace detail {

/// RHS of the packed, quadrature-augmented master equation. Exploits the
/// chain sparsity of H (couplings only between adjacent levels), so one
/// evaluation is O(N^2) instead of the O(N^3) dense reference.
template <class S>
class MasterSystem {
   public:
    MasterSystem(const SystemSpec& spec, PulseSetT<S> pulses, double gate_center,
                 double gate_sharpness)
        : spec_(&spec),
          pulses_(std::move(pulses)),
          terms_(expanded_dissipator(spec)),
          n_(spec.n_levels),
          gate_center_(gate_center),
          gate_sharpness_(gate_sharpness),
          rho_(spec.n_levels),
          a_(spec.n_levels),
          drho_(spec.n_levels) {}

    /// 0: indicator off, 1: on, 2: sigmoid of gate_sharpness (default).
    void set_gate_mode(int mode) { gate_mode_ = mode; }

    int dim() const { return packed_size(n_) + (n_ - 1); }

    void operator()(double t, const std::vector<S>& y, std::vector<S>& dy) {
        const int n = n_;
        unpack_hermitian<S>(std::span<const S>(y.data(), packed_size(n)), rho_);

        // Upper-diagonal couplings of the chain Hamiltonian.
        for (int j = 0; j < n - 1; ++j) {
            const auto& p = pulses_.channels[j];
            const S omega = rabi_envelope(p, t);
            const double sign =
                spec_->uniform_phase_convention ? 1.0 : (j % 2 == 0 ? 1.0 : -1.0);
            coupling_[j] = omega * expi<S>(p.delta * (-sign * t));
        }

        // A = H rho with tridiagonal H; then -i[H,rho] = -i(A - A^dag).
        for (int i = 0; i < n; ++i) {
            const bool has_up = i < n - 1;
            const bool has_dn = i > 0;
            for (int j = 0; j < n; ++j) {
                Cx<S> acc{};
                if (has_up) acc += coupling_[i] * rho_(i + 1, j);
                if (has_dn) acc += conj(coupling_[i - 1]) * rho_(i - 1, j);
                a_(i, j) = acc;
            }
        }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) drho_(i, j) = mul_neg_i(a_(i, j) - conj(a_(j, i)));
        add_dissipator(terms_, rho_, drho_);

        pack_hermitian<S>(drho_, std::span<S>(dy.data(), packed_size(n)));

        // Quadratures: gated rho11, then the intermediate populations.
        dy[packed_size(n)] = gate(t) * rho_(0, 0).re;
        for (int kq = 1; kq <= n - 2; ++kq) dy[packed_size(n) + kq] = rho_(kq, kq).re;
    }

   private:
    double gate(double t) const {
        if (gate_mode_ == 0) return 0.0;
        if (gate_mode_ == 1) return 1.0;
        const double x = gate_sharpness_ * (t - gate_center_);
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    }

    const SystemSpec* spec_;
    PulseSetT<S> pulses_;
    std::vector<DissipatorTerm> terms_;
    int n_;
    double gate_center_;
    double gate_sharpness_;
    int gate_mode_ = 2;
    std::array<Cx<S>, 16> coupling_{};
    CxMatrix<S> rho_;
    CxMatrix<S> a_;
    CxMatrix<S> drho_;
};

/// Runs the full horizon, honoring hard_gate by splitting at T/2.
template <class S, class Observer>
StepCounters run_master(const SystemSpec& spec, const PulseSetT<S>& pulses,
                        const IntegratorConfig& cfg, std::vector<S>& y, Observer&& obs) {
    if (spec.n_levels - 1 > 16)
        throw ConfigError("chain systems above 17 levels are not supported");
    if (pulses.n_channels() != spec.n_levels - 1)
        throw ConfigError("pulse channel count " + std::to_string(pulses.n_channels()) +
                          " does not match n_levels-1 = " + std::to_string(spec.n_levels - 1));
    MasterSystem<S> sys(spec, pulses, 0.5 * cfg.t_final, cfg.gate_sharpness);
    StepCounters counters;
    if (cfg.hard_gate) {
        const double tm = 0.5 * cfg.t_final;
        sys.set_gate_mode(0);
        integrate_adaptive(sys, y, 0.0, tm, cfg, counters, obs);
        sys.set_gate_mode(1);
        integrate_adaptive(sys, y, tm, cfg.t_final, cfg, counters, obs);
    } else {
        integrate_adaptive(sys, y, 0.0, cfg.t_final, cfg, counters, obs);
    }
    return counters;
}

}  // namespace detail

/// Final augmented state of the master equation for generic scalars; the
/// differentiable core behind the loss.
template <class S>
std::vector<S> integrate_final_state(const SystemSpec& spec, const PulseSetT<S>& pulses,
                                     const IntegratorConfig& cfg,
                                     const DensityState& rho0) {
    const int np = packed_size(spec.n_levels);
    std::vector<S> y(np + spec.n_levels - 1, S{});
    for (int i = 0; i < np; ++i) y[i] = rho0.packed[i];
    for (int i = 0; i < spec.n_levels - 1; ++i) y[np + i] = rho0.quad[i];
    detail::run_master<S>(spec, pulses, cfg, y,
                          [](double, double, const auto&, const auto&, const auto&) {});
    return y;
}

/// Integrates the master equation and samples it on a uniform grid of
/// cfg.dense_samples points via the interpolant of the embedded pair.
Trajectory integrate(const SystemSpec& spec, const PulseSet& pulses,
                     const IntegratorConfig& cfg, const DensityState& rho0);

/// Same, starting from |1><1|.
Trajectory integrate(const SystemSpec& spec, const PulseSet& pulses,
                     const IntegratorConfig& cfg);

/// One explicit embedded 5(4) step from (t, y): the higher-order solution,
/// the scaled error norm, and the step the controller would try next.
struct RkStepResult {
    std::vector<double> y_new;
    double error_norm = 0.0;
    double suggested_step = 0.0;
};

template <class Rhs>
RkStepResult embedded_rk_step(Rhs&& f, double t, double h, const std::vector<double>& y,
                              const IntegratorConfig& cfg) {
    const size_t m = y.size();
    StageArray<double> k;
    for (auto& ki : k) ki.resize(m);
    std::vector<double> ytmp(m), y5(m);
    f(t, y, k[0]);
    detail::tsit5_stages(f, t, h, y, k, ytmp, y5);
    RkStepResult r;
    r.error_norm = detail::error_norm(y, y5, k, h, cfg.rel_tol, cfg.abs_tol);
    r.y_new = std::move(y5);
    const double e = std::max(r.error_norm, 1e-10);
    r.suggested_step = h * std::clamp(0.9 * std::pow(e, -0.2), 0.1, 5.0);
    return r;
}

}  // namespace pulseopt
