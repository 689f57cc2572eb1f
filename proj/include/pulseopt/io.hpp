#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pulseopt/model.hpp"
#include "pulseopt/ode.hpp"
#include "pulseopt/optim.hpp"
#include "pulseopt/problem.hpp"
#include "pulseopt/pulses.hpp"

namespace pulseopt {

struct OutputConfig {
    std::string prefix;   ///< output file prefix; CLI --out overrides
    int samples = 1000;   ///< trajectory sample grid size

    friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

/// Full run description as read from a config file. The member structs map
/// 1:1 to config sections; see FORMATS.md for the grammar.
struct ProblemConfig {
    SystemSpec system;
    PulseSet pulses;
    IntegratorConfig integrator;
    LossConfig loss;
    OptimConfig optim;  ///< includes the bounds box
    OutputConfig output;
    int starts = 8;            ///< multi-start count for optimize
    std::uint64_t seed = 42;   ///< multi-start seed
    double gamma_mhz = 5.0;    ///< physical value of Gamma, for SI echo only

    /// Full validation; errors name the offending key, e.g. pulses[0].sigma.
    void validate() const;

    friend bool operator==(const ProblemConfig&, const ProblemConfig&) = default;
};

/// All-defaults config: 5-level system, zero-drive pulses centered mid
/// horizon, default box, T = 45.
ProblemConfig default_config(int n_levels = 5);

/// Parses config text; `origin` appears in error messages.
ProblemConfig parse_config(const std::string& text, const std::string& origin);

ProblemConfig load_config(const std::string& path);

/// Lossless serialization: parse(render(cfg)) == cfg exactly.
std::string render_config(const ProblemConfig& cfg);
void save_config(const ProblemConfig& cfg, const std::string& path);

/// Runtime Problem for the config (resolves the sample grid and horizon).
Problem make_problem(const ProblemConfig& cfg);

/// CSV with header t,rho11,...,rhoNN,omega1,...,omega{N-1}; one row per
/// sample, 12 significant digits.
void write_trajectory(const Trajectory& traj, const std::string& path);

/// CSV with header iter,loss,pgnorm,step,t1,s1,o1,d1,...; one row per
/// optimizer iterate.
void write_optim_trace(std::span<const IterateRecord> iterates, int n_channels,
                       const std::string& path);

/// Ordered key = value lines of the human-readable summaries.
using SummaryLines = std::vector<std::pair<std::string, std::string>>;

SummaryLines simulation_summary(const ProblemConfig& cfg, const Problem& prob,
                                const Trajectory& traj);
SummaryLines optimization_summary(const ProblemConfig& cfg, const Problem& prob,
                                  const MultiStartReport& rep);

std::string render_summary(const SummaryLines& lines);
void write_summary(const SummaryLines& lines, const std::string& path);

/// One accepted config key with its section and help line; the parser and
/// the CLI help are both driven by this table.
struct ConfigKeyDoc {
    std::string section;
    std::string key;
    std::string doc;
};
std::span<const ConfigKeyDoc> config_key_docs();

/// 12 significant digits, the precision of CSV and summary output.
std::string format_double(double v);
/// 17 significant digits, enough to round-trip a double exactly.
std::string format_double_full(double v);

std::string read_text_file(const std::string& path);    ///< IoError on failure
void write_text_file(const std::string& path, const std::string& text);

}  // namespace pulseopt
