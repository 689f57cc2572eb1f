// Micro-benchmarks: the chain-structured RHS kernel against the dense
// reference, and the gradient paths (dual, finite-difference serial,
// finite-difference with the OpenMP batch).

#include <chrono>
#include <cstdio>
#include <span>
#include <vector>

#include "pulseopt/autodiff.hpp"
#include "pulseopt/io.hpp"
#include "pulseopt/model.hpp"
#include "pulseopt/ode.hpp"
#include "pulseopt/optim.hpp"
#include "pulseopt/problem.hpp"

using Clock = std::chrono::steady_clock;

static double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int main() {
    const pulseopt::SystemSpec spec = pulseopt::make_system(5, 1.0, 0.0);
    const pulseopt::BoundsSpec bounds = pulseopt::default_bounds(4);
    const std::vector<double> params = pulseopt::draw_start(bounds, 1, 0);
    const pulseopt::PulseSet pulses = pulseopt::unpack<double>(std::span<const double>(params));

    pulseopt::IntegratorConfig icfg;
    pulseopt::Problem prob{spec, icfg, pulseopt::LossConfig{}, bounds, {}};

    // RHS kernel comparison at a fixed state and time.
    {
        pulseopt::detail::MasterSystem<double> sys(spec, pulses, 22.5, 50.0);
        std::vector<double> y(static_cast<size_t>(sys.dim()), 0.0);
        y[0] = 0.55;
        y[2] = 0.45;
        y[25] = 0.12;  // a coherence entry, so the commutator path is exercised
        std::vector<double> dy(y.size());

        const int evals = 200000;
        auto t0 = Clock::now();
        double sink = 0.0;
        for (int i = 0; i < evals; ++i) {
            sys(20.0 + 1e-6 * i, y, dy);
            sink += dy[0];
        }
        const double chain_s = seconds_since(t0);

        t0 = Clock::now();
        pulseopt::CxMatrix<double> rho(5);
        pulseopt::unpack_hermitian<double>(std::span<const double>(y.data(), 25), rho);
        for (int i = 0; i < evals; ++i) {
            const auto h = pulseopt::build_hamiltonian<double>(spec, pulses, 20.0 + 1e-6 * i);
            const auto out = pulseopt::lindblad_rhs<double>(spec, h, rho);
            sink += out(0, 0).re;
        }
        const double dense_s = seconds_since(t0);

        std::printf("rhs chain kernel:    %8.1f ns/eval\n", 1e9 * chain_s / evals);
        std::printf("rhs dense reference: %8.1f ns/eval  (%.2fx)\n", 1e9 * dense_s / evals,
                    dense_s / chain_s);
        std::printf("(sink %g)\n", sink);
    }

    // One full loss evaluation.
    {
        auto t0 = Clock::now();
        const double loss = pulseopt::problem_loss<double>(prob, std::span<const double>(params));
        const double loss_s = seconds_since(t0);
        std::printf("loss eval:           %8.2f ms  (loss = %s)\n", 1e3 * loss_s,
                    pulseopt::format_double(loss).c_str());
    }

    // Gradient paths.
    {
        auto t0 = Clock::now();
        const auto dual = pulseopt::grad_dual(prob, std::span<const double>(params));
        const double dual_s = seconds_since(t0);
        std::printf("grad dual:           %8.2f ms  (%d evals)\n", 1e3 * dual_s,
                    dual.evaluations);

        auto fd_serial = [&](std::span<const double> x) {
            return pulseopt::problem_loss<double>(prob, x);
        };
        t0 = Clock::now();
        const auto fd1 = pulseopt::grad_fd_fn(fd_serial, std::span<const double>(params),
                                              1e-4, pulseopt::FdScheme::central, 1);
        const double fd1_s = seconds_since(t0);
        std::printf("grad fd serial:      %8.2f ms  (%d evals)\n", 1e3 * fd1_s,
                    fd1.evaluations);

        const int threads = pulseopt::worker_threads();
        t0 = Clock::now();
        const auto fdp = pulseopt::grad_fd(prob, std::span<const double>(params), 1e-4,
                                           pulseopt::FdScheme::central);
        const double fdp_s = seconds_since(t0);
        std::printf("grad fd %2d threads:  %8.2f ms  (%d evals, %.2fx vs serial)\n", threads,
                    1e3 * fdp_s, fdp.evaluations, fd1_s / fdp_s);
        std::printf("max |dual - fd| rel: %.3e\n",
                    pulseopt::gradient_disagreement(
                        std::span<const double>(dual.gradient),
                        std::span<const double>(fdp.gradient)));
    }
    return 0;
}
