#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "CLI11.hpp"
#include "pulseopt/autodiff.hpp"
#include "pulseopt/errors.hpp"
#include "pulseopt/io.hpp"
#include "pulseopt/loss.hpp"
#include "pulseopt/optim.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIntegration = 3;
constexpr int kExitIo = 4;

std::string output_prefix(const pulseopt::ProblemConfig& cfg, const std::string& out_flag) {
    if (!out_flag.empty()) return out_flag;
    if (!cfg.output.prefix.empty()) return cfg.output.prefix;
    return "run";
}

void print_summary(const pulseopt::SummaryLines& lines) {
    std::fputs(pulseopt::render_summary(lines).c_str(), stdout);
}

int run_simulate(const std::string& config_path, const std::string& out_flag) {
    const pulseopt::ProblemConfig cfg = pulseopt::load_config(config_path);
    const pulseopt::Problem prob = pulseopt::make_problem(cfg);
    const pulseopt::Trajectory traj =
        pulseopt::integrate(prob.system, cfg.pulses, prob.integrator);
    const pulseopt::SummaryLines summary = pulseopt::simulation_summary(cfg, prob, traj);
    const std::string prefix = output_prefix(cfg, out_flag);
    pulseopt::write_trajectory(traj, prefix + "_traj.csv");
    pulseopt::write_summary(summary, prefix + "_summary.txt");
    print_summary(summary);
    std::printf("wrote %s_traj.csv and %s_summary.txt\n", prefix.c_str(), prefix.c_str());
    return 0;
}

int run_optimize(const std::string& config_path, const std::string& out_flag, bool trace,
                 int starts_flag, long long seed_flag) {
    pulseopt::ProblemConfig cfg = pulseopt::load_config(config_path);
    if (starts_flag > 0) cfg.starts = starts_flag;
    if (seed_flag >= 0) cfg.seed = static_cast<std::uint64_t>(seed_flag);
    const pulseopt::Problem prob = pulseopt::make_problem(cfg);

    const pulseopt::MultiStartReport rep =
        pulseopt::multi_start_minimize(prob, cfg.optim, cfg.starts, cfg.seed);
    for (size_t k = 0; k < rep.runs.size(); ++k) {
        const auto& r = rep.runs[k];
        std::printf("start %zu: loss=%s pgnorm=%s iters=%d %s\n", k,
                    pulseopt::format_double(r.best_loss).c_str(),
                    pulseopt::format_double(r.pg_norm).c_str(), r.iterations,
                    pulseopt::to_string(r.termination).c_str());
    }

    const auto& best = rep.best();
    pulseopt::ProblemConfig best_cfg = cfg;
    best_cfg.pulses =
        pulseopt::unpack<double>(std::span<const double>(best.best_params));
    const std::string prefix = output_prefix(cfg, out_flag);
    pulseopt::save_config(best_cfg, prefix + "_best.cfg");

    const pulseopt::Trajectory traj =
        pulseopt::integrate(prob.system, best_cfg.pulses, prob.integrator);
    pulseopt::write_trajectory(traj, prefix + "_traj.csv");

    pulseopt::SummaryLines summary = pulseopt::optimization_summary(cfg, prob, rep);
    const pulseopt::SummaryLines sim = pulseopt::simulation_summary(best_cfg, prob, traj);
    summary.insert(summary.end(), sim.begin(), sim.end());
    pulseopt::write_summary(summary, prefix + "_summary.txt");
    print_summary(summary);

    if (trace) {
        for (size_t k = 0; k < rep.runs.size(); ++k)
            pulseopt::write_optim_trace(rep.runs[k].iterates, prob.n_channels(),
                                        prefix + "_trace_" + std::to_string(k) + ".csv");
        std::printf("wrote %zu iterate traces\n", rep.runs.size());
    }
    std::printf("wrote %s_best.cfg, %s_traj.csv, %s_summary.txt\n", prefix.c_str(),
                prefix.c_str(), prefix.c_str());
    return 0;
}

int gradcheck_table(const std::vector<std::string>& labels,
                    const pulseopt::GradientReport& dual,
                    const pulseopt::GradientReport& fd, double tol) {
    std::printf("%-6s %22s %22s %12s\n", "param", "dual", "finite_diff", "rel_err");
    double worst = 0.0;
    for (size_t i = 0; i < dual.gradient.size(); ++i) {
        const double rel = std::abs(dual.gradient[i] - fd.gradient[i]) /
                           (std::abs(dual.gradient[i]) + 1e-8);
        worst = std::max(worst, rel);
        std::printf("%-6s %22.14e %22.14e %12.3e\n", labels[i].c_str(), dual.gradient[i],
                    fd.gradient[i], rel);
    }
    std::printf("loss = %s, evaluations: dual=%d fd=%d\n",
                pulseopt::format_double(dual.loss_value).c_str(), dual.evaluations,
                fd.evaluations);
    std::printf("max relative error = %.3e (tolerance %.1e): %s\n", worst, tol,
                worst <= tol ? "PASS" : "FAIL");
    return worst <= tol ? 0 : 1;
}

int run_gradcheck(const std::string& config_path, double h, const std::string& scheme_name,
                  double tol, bool quadratic) {
    const pulseopt::FdScheme scheme = scheme_name == "forward"
                                          ? pulseopt::FdScheme::forward
                                          : pulseopt::FdScheme::central;
    if (quadratic) {
        // Self-test on sum(p_i^2): both differentiators must reproduce 2p.
        const std::vector<double> x = {0.3, -1.7, 2.5, 0.0, 4.0, -0.25, 10.0, 1.0};
        auto f = [](auto&& p) {
            std::decay_t<decltype(p[0])> s = 0.0;
            for (const auto& v : p) s += v * v;
            return s;
        };
        const auto dual = pulseopt::grad_dual_fn(f, std::span<const double>(x));
        const auto fd = pulseopt::grad_fd_fn(f, std::span<const double>(x), h, scheme);
        std::vector<std::string> labels(x.size());
        for (size_t i = 0; i < x.size(); ++i) labels[i] = "p" + std::to_string(i);
        return gradcheck_table(labels, dual, fd, scheme == pulseopt::FdScheme::central ? 1e-9 : 1e-5);
    }
    const pulseopt::ProblemConfig cfg = pulseopt::load_config(config_path);
    const pulseopt::Problem prob = pulseopt::make_problem(cfg);
    const std::vector<double> params = pulseopt::pack<double>(cfg.pulses);
    const auto dual = pulseopt::grad_dual(prob, std::span<const double>(params));
    const auto fd = pulseopt::grad_fd(prob, std::span<const double>(params), h, scheme);
    return gradcheck_table(pulseopt::param_labels(prob.n_channels()), dual, fd, tol);
}

std::string key_reference() {
    std::string out = "Config keys (sections in brackets):\n";
    std::string section;
    for (const auto& d : pulseopt::config_key_docs()) {
        if (d.section != section) {
            section = d.section;
            out += "  [" + section + "]\n";
        }
        out += "    " + d.key + "  " + d.doc + "\n";
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and gradient-based pulse design for laser-driven chain systems"};
    app.require_subcommand(1);
    app.footer(key_reference());

    std::string config_path;
    std::string out_path;
    bool trace = false;
    int starts = 0;
    long long seed = -1;
    double h = 1e-4;
    std::string scheme = "central";
    double tol = 1e-4;
    bool quadratic = false;

    CLI::App* sim = app.add_subcommand("simulate", "Integrate the master equation and write the trajectory");
    sim->add_option("--config", config_path, "config file path")->required();
    sim->add_option("--out", out_path, "output file prefix");

    CLI::App* opt = app.add_subcommand("optimize", "Design pulses by multi-start bound-constrained minimization");
    opt->add_option("--config", config_path, "config file path")->required();
    opt->add_option("--out", out_path, "output file prefix");
    opt->add_flag("--trace", trace, "write per-start iterate traces");
    opt->add_option("--starts", starts, "override the number of starts");
    opt->add_option("--seed", seed, "override the start-draw seed");

    CLI::App* grad = app.add_subcommand("gradcheck", "Compare dual-number and finite-difference gradients");
    grad->set_help_flag("--help", "print help");  // frees -h for the --h step flag
    grad->add_option("--config", config_path, "config file path");
    grad->add_option("--h", h, "relative finite-difference step");
    grad->add_option("--scheme", scheme, "forward or central")
        ->check(CLI::IsMember({"forward", "central"}));
    grad->add_option("--tol", tol, "max allowed relative disagreement");
    grad->add_flag("--quadratic", quadratic, "self-test on a quadratic instead of the physics loss");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return run_simulate(config_path, out_path);
        if (opt->parsed()) return run_optimize(config_path, out_path, trace, starts, seed);
        if (!quadratic && config_path.empty()) {
            std::fprintf(stderr, "error: gradcheck needs --config (or --quadratic)\n");
            return kExitConfig;
        }
        return run_gradcheck(config_path, h, scheme, tol, quadratic);
    } catch (const pulseopt::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const pulseopt::IntegrationError& e) {
        std::fprintf(stderr, "integration error: %s\n", e.what());
        return kExitIntegration;
    } catch (const pulseopt::NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return kExitIntegration;
    } catch (const pulseopt::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
