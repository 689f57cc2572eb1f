#include "pulseopt/io.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pulseopt/errors.hpp"
#include "pulseopt/loss.hpp"

namespace pulseopt {

std::string format_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string format_double_full(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path + " for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failure on " + path);
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write failure on " + path);
}

// ---------------------------------------------------------------------------
// Key table: single source of truth for the parser and the CLI help.
// ---------------------------------------------------------------------------

namespace {

const std::vector<ConfigKeyDoc>& key_docs() {
    static const std::vector<ConfigKeyDoc> docs = {
        {"system", "n_levels", "number of chain levels N (default 5)"},
        {"system", "gamma", "natural decay rate of the excited levels, in units of itself (default 1)"},
        {"system", "gamma_c", "collisional dephasing rate gamma_c in units of gamma (default 0)"},
        {"system", "gamma_mhz", "physical value of gamma in MHz, used only for the SI echo in summaries (default 5)"},
        {"system", "uniform_phase", "use e^{-i delta t} on every coupling instead of the alternating-sign phases (default false)"},
        {"system", "jump", "decay channel 'FROM TO RATE', repeatable; replaces the default gamma/2 branching when present"},
        {"pulse.J", "t0", "center of the Gaussian pulse on channel J (default 22.5)"},
        {"pulse.J", "sigma", "width of the Gaussian, envelope exp(-(t-t0)^2/sigma^2) (default 3)"},
        {"pulse.J", "omega0", "peak Rabi amplitude in units of gamma (default 0)"},
        {"pulse.J", "delta", "detuning of channel J in units of gamma (default 0)"},
        {"integrator", "t_final", "integration horizon T in units of 1/gamma (default 45)"},
        {"integrator", "rel_tol", "relative tolerance of the adaptive stepper (default 1e-8)"},
        {"integrator", "abs_tol", "absolute tolerance of the adaptive stepper (default 1e-10)"},
        {"integrator", "initial_step", "first trial step; 0 picks it automatically (default 0)"},
        {"integrator", "max_steps", "step budget before the run is abandoned (default 2000000)"},
        {"integrator", "gate_sharpness", "sigmoid steepness of the smooth t>T/2 gate on the rho11 penalty (default 50)"},
        {"integrator", "hard_gate", "split the run at T/2 and use an exact indicator instead of the sigmoid (default false)"},
        {"loss", "w_init", "weight of the gated integral of rho11 over [T/2,T] (default 1)"},
        {"loss", "w_mid", "weight of the integrals of the intermediate populations (default 1)"},
        {"loss", "w_final", "weight of the terminal term (rho_NN(T)-1)^2 (default 1)"},
        {"loss", "w_order", "weight of each ordering term (default 1)"},
        {"loss", "w_barrier", "weight of the softplus box barrier (default 1)"},
        {"loss", "k_sharp", "sharpness of the ordering sigmoids (default 5)"},
        {"loss", "k_barrier", "sharpness of the barrier softplus (default 10)"},
        {"loss", "ordering", "'ref J S' or 'chain I1 I2 ...', optionally followed by 'penalize'; repeatable"},
        {"bounds", "t", "'LO HI' box for every pulse center (default 15 35)"},
        {"bounds", "sigma", "'LO HI' box for every pulse width (default 2 4)"},
        {"bounds", "omega", "'LO HI' box for every peak amplitude (default 1 35)"},
        {"bounds", "delta", "'LO HI' box for every detuning (default -5 5)"},
        {"optim", "mode", "lbfgsb or projected_lbfgs (default lbfgsb)"},
        {"optim", "memory", "number of stored curvature pairs m (default 10)"},
        {"optim", "max_iters", "iteration budget per start (default 500)"},
        {"optim", "grad_tol", "stop when the projected-gradient infinity norm falls below this (default 1e-6)"},
        {"optim", "f_tol", "stop on relative loss decrease below this (default 1e-10)"},
        {"optim", "c1", "sufficient-decrease constant of the line search (default 1e-4)"},
        {"optim", "c2", "curvature constant of the line search (default 0.9)"},
        {"optim", "max_line_search", "line-search trial budget (default 25)"},
        {"optim", "gradient", "dual or fd: gradient used by the optimizer (default dual)"},
        {"optim", "fd_step", "relative finite-difference step when gradient = fd (default 1e-4)"},
        {"optim", "fd_scheme", "central or forward, when gradient = fd (default central)"},
        {"optim", "starts", "number of multi-start runs (default 8)"},
        {"optim", "seed", "seed of the uniform in-box start draws (default 42)"},
        {"output", "prefix", "output path prefix; the --out flag overrides it"},
        {"output", "samples", "trajectory sample grid size (default 1000)"},
    };
    return docs;
}

bool known_key(const std::string& section, const std::string& key) {
    const std::string canon =
        section.rfind("pulse.", 0) == 0 ? std::string("pulse.J") : section;
    for (const auto& d : key_docs())
        if (d.section == canon && d.key == key) return true;
    return false;
}

struct Entry {
    std::string section;
    std::string key;
    std::string value;
    int line = 0;
};

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_tokens(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

double parse_double_tok(const std::string& tok, const std::string& origin, int line,
                        const std::string& what) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || tok.empty() || errno == ERANGE)
        fail(origin, line, what + ": '" + tok + "' is not a number");
    return v;
}

long long parse_int_tok(const std::string& tok, const std::string& origin, int line,
                        const std::string& what) {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(tok.c_str(), &end, 10);
    if (end != tok.c_str() + tok.size() || tok.empty() || errno == ERANGE)
        fail(origin, line, what + ": '" + tok + "' is not an integer");
    return v;
}

bool parse_bool_tok(const std::string& tok, const std::string& origin, int line,
                    const std::string& what) {
    if (tok == "true" || tok == "1" || tok == "yes") return true;
    if (tok == "false" || tok == "0" || tok == "no") return false;
    fail(origin, line, what + ": '" + tok + "' is not a boolean");
}

std::vector<Entry> tokenize_config(const std::string& text, const std::string& origin) {
    std::vector<Entry> entries;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const size_t hash = raw.find_first_of("#;");
        std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(origin, line_no, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) fail(origin, line_no, "empty section name");
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            fail(origin, line_no, "expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(origin, line_no, "empty key");
        if (section.empty())
            fail(origin, line_no, "key '" + key + "' appears before any [section]");
        entries.push_back({section, key, value, line_no});
    }
    return entries;
}

int parse_pulse_index(const std::string& section, int n_channels, const std::string& origin,
                      int line) {
    const std::string num = section.substr(6);
    errno = 0;
    char* end = nullptr;
    const long j = std::strtol(num.c_str(), &end, 10);
    if (end != num.c_str() + num.size() || num.empty())
        fail(origin, line, "bad pulse section [" + section + "]");
    if (j < 1 || j > n_channels)
        fail(origin, line, "section [" + section + "]: channel must lie in 1.." +
                               std::to_string(n_channels));
    return static_cast<int>(j) - 1;
}

void apply_bounds_kind(BoundsSpec& b, int slot, double lo, double hi) {
    for (size_t i = static_cast<size_t>(slot); i < b.lower.size();
         i += kParamsPerChannel) {
        b.lower[i] = lo;
        b.upper[i] = hi;
    }
}

}  // namespace

std::span<const ConfigKeyDoc> config_key_docs() { return key_docs(); }

ProblemConfig default_config(int n_levels) {
    ProblemConfig cfg;
    cfg.system = make_system(n_levels, 1.0, 0.0);
    cfg.pulses.channels.assign(static_cast<size_t>(n_levels - 1), PulseParams{22.5, 3.0, 0.0, 0.0});
    cfg.loss.horizon = cfg.integrator.t_final;
    cfg.optim.bounds = default_bounds(n_levels - 1);
    return cfg;
}

ProblemConfig parse_config(const std::string& text, const std::string& origin) {
    const std::vector<Entry> entries = tokenize_config(text, origin);

    int n_levels = 5;
    for (const auto& e : entries) {
        if (e.section == "system" && e.key == "n_levels") {
            const long long v = parse_int_tok(e.value, origin, e.line, "system.n_levels");
            if (v < 2 || v > 17)
                fail(origin, e.line, "system.n_levels must lie in 2..17");
            n_levels = static_cast<int>(v);
        }
    }

    ProblemConfig cfg = default_config(n_levels);
    const int n_channels = n_levels - 1;
    std::vector<JumpChannel> explicit_jumps;
    bool gamma_set = false;

    for (const auto& e : entries) {
        const bool is_pulse = e.section.rfind("pulse.", 0) == 0;
        if (e.section != "system" && e.section != "integrator" && e.section != "loss" &&
            e.section != "bounds" && e.section != "optim" && e.section != "output" &&
            !is_pulse)
            fail(origin, e.line, "unknown section [" + e.section + "]");
        if (!known_key(e.section, e.key))
            fail(origin, e.line, "unknown key '" + e.key + "' in section [" + e.section + "]");

        auto dval = [&](const char* what) { return parse_double_tok(e.value, origin, e.line, what); };
        auto ival = [&](const char* what) { return parse_int_tok(e.value, origin, e.line, what); };
        auto bval = [&](const char* what) { return parse_bool_tok(e.value, origin, e.line, what); };

        if (e.section == "system") {
            if (e.key == "n_levels") continue;  // handled in the first pass
            if (e.key == "gamma") {
                cfg.system.gamma_natural = dval("system.gamma");
                gamma_set = true;
            } else if (e.key == "gamma_c") {
                cfg.system.gamma_collisional = dval("system.gamma_c");
            } else if (e.key == "gamma_mhz") {
                cfg.gamma_mhz = dval("system.gamma_mhz");
            } else if (e.key == "uniform_phase") {
                cfg.system.uniform_phase_convention = bval("system.uniform_phase");
            } else if (e.key == "jump") {
                const auto toks = split_tokens(e.value);
                if (toks.size() != 3)
                    fail(origin, e.line, "system.jump needs 'FROM TO RATE'");
                JumpChannel j;
                j.from = static_cast<int>(parse_int_tok(toks[0], origin, e.line, "system.jump from"));
                j.to = static_cast<int>(parse_int_tok(toks[1], origin, e.line, "system.jump to"));
                j.rate = parse_double_tok(toks[2], origin, e.line, "system.jump rate");
                explicit_jumps.push_back(j);
            }
        } else if (is_pulse) {
            const int j = parse_pulse_index(e.section, n_channels, origin, e.line);
            auto& p = cfg.pulses.channels[static_cast<size_t>(j)];
            const std::string what = e.section + "." + e.key;
            if (e.key == "t0") p.t0 = parse_double_tok(e.value, origin, e.line, what);
            else if (e.key == "sigma") p.sigma = parse_double_tok(e.value, origin, e.line, what);
            else if (e.key == "omega0") p.omega0 = parse_double_tok(e.value, origin, e.line, what);
            else p.delta = parse_double_tok(e.value, origin, e.line, what);
        } else if (e.section == "integrator") {
            if (e.key == "t_final") cfg.integrator.t_final = dval("integrator.t_final");
            else if (e.key == "rel_tol") cfg.integrator.rel_tol = dval("integrator.rel_tol");
            else if (e.key == "abs_tol") cfg.integrator.abs_tol = dval("integrator.abs_tol");
            else if (e.key == "initial_step") cfg.integrator.initial_step = dval("integrator.initial_step");
            else if (e.key == "max_steps") cfg.integrator.max_steps = ival("integrator.max_steps");
            else if (e.key == "gate_sharpness") cfg.integrator.gate_sharpness = dval("integrator.gate_sharpness");
            else cfg.integrator.hard_gate = bval("integrator.hard_gate");
        } else if (e.section == "loss") {
            if (e.key == "w_init") cfg.loss.w_init = dval("loss.w_init");
            else if (e.key == "w_mid") cfg.loss.w_mid = dval("loss.w_mid");
            else if (e.key == "w_final") cfg.loss.w_final = dval("loss.w_final");
            else if (e.key == "w_order") cfg.loss.w_order = dval("loss.w_order");
            else if (e.key == "w_barrier") cfg.loss.w_barrier = dval("loss.w_barrier");
            else if (e.key == "k_sharp") cfg.loss.k_sharp = dval("loss.k_sharp");
            else if (e.key == "k_barrier") cfg.loss.k_barrier = dval("loss.k_barrier");
            else {
                auto toks = split_tokens(e.value);
                if (toks.empty()) fail(origin, e.line, "loss.ordering needs a value");
                OrderingConstraint c;
                if (!toks.empty() && toks.back() == "penalize") {
                    c.penalize = true;
                    toks.pop_back();
                }
                if (toks.empty())
                    fail(origin, e.line, "loss.ordering: missing constraint kind");
                if (toks[0] == "ref") {
                    if (toks.size() != 3)
                        fail(origin, e.line, "loss.ordering: ref needs 'ref J S'");
                    c.kind = OrderingConstraint::Kind::reference;
                    c.channel = static_cast<int>(parse_int_tok(toks[1], origin, e.line, "loss.ordering channel"));
                    const std::string s = toks[2] == "+1" ? "1" : toks[2];
                    c.sign = static_cast<int>(parse_int_tok(s, origin, e.line, "loss.ordering sign"));
                } else if (toks[0] == "chain") {
                    c.kind = OrderingConstraint::Kind::chain;
                    for (size_t i = 1; i < toks.size(); ++i)
                        c.chain.push_back(static_cast<int>(
                            parse_int_tok(toks[i], origin, e.line, "loss.ordering chain index")));
                } else {
                    fail(origin, e.line,
                         "loss.ordering: kind must be 'ref' or 'chain', got '" + toks[0] + "'");
                }
                cfg.loss.ordering.push_back(std::move(c));
            }
        } else if (e.section == "bounds") {
            const auto toks = split_tokens(e.value);
            if (toks.size() != 2)
                fail(origin, e.line, "bounds." + e.key + " needs 'LO HI'");
            const double lo = parse_double_tok(toks[0], origin, e.line, "bounds." + e.key);
            const double hi = parse_double_tok(toks[1], origin, e.line, "bounds." + e.key);
            const int slot = e.key == "t" ? 0 : e.key == "sigma" ? 1 : e.key == "omega" ? 2 : 3;
            apply_bounds_kind(cfg.optim.bounds, slot, lo, hi);
        } else if (e.section == "optim") {
            if (e.key == "mode") {
                if (e.value == "lbfgsb") cfg.optim.mode = OptimMode::lbfgsb;
                else if (e.value == "projected_lbfgs") cfg.optim.mode = OptimMode::projected_lbfgs;
                else fail(origin, e.line, "optim.mode must be lbfgsb or projected_lbfgs");
            } else if (e.key == "memory") cfg.optim.memory = static_cast<int>(ival("optim.memory"));
            else if (e.key == "max_iters") cfg.optim.max_iters = static_cast<int>(ival("optim.max_iters"));
            else if (e.key == "grad_tol") cfg.optim.grad_tol = dval("optim.grad_tol");
            else if (e.key == "f_tol") cfg.optim.f_tol = dval("optim.f_tol");
            else if (e.key == "c1") cfg.optim.c1 = dval("optim.c1");
            else if (e.key == "c2") cfg.optim.c2 = dval("optim.c2");
            else if (e.key == "max_line_search") cfg.optim.max_line_search = static_cast<int>(ival("optim.max_line_search"));
            else if (e.key == "gradient") {
                if (e.value == "dual") cfg.optim.gradient = GradMethod::dual;
                else if (e.value == "fd") cfg.optim.gradient = GradMethod::finite_diff;
                else fail(origin, e.line, "optim.gradient must be dual or fd");
            } else if (e.key == "fd_step") cfg.optim.fd_step = dval("optim.fd_step");
            else if (e.key == "fd_scheme") {
                if (e.value == "central") cfg.optim.fd_scheme = FdScheme::central;
                else if (e.value == "forward") cfg.optim.fd_scheme = FdScheme::forward;
                else fail(origin, e.line, "optim.fd_scheme must be central or forward");
            } else if (e.key == "starts") {
                const long long v = ival("optim.starts");
                if (v < 1) fail(origin, e.line, "optim.starts must be >= 1");
                cfg.starts = static_cast<int>(v);
            } else {
                errno = 0;
                char* end = nullptr;
                const unsigned long long v = std::strtoull(e.value.c_str(), &end, 10);
                if (end != e.value.c_str() + e.value.size() || e.value.empty() || errno == ERANGE)
                    fail(origin, e.line, "optim.seed: '" + e.value + "' is not an unsigned integer");
                cfg.seed = v;
            }
        } else {  // output
            if (e.key == "prefix") cfg.output.prefix = e.value;
            else {
                const long long v = ival("output.samples");
                if (v < 2 || v > 10000000) fail(origin, e.line, "output.samples must lie in 2..10000000");
                cfg.output.samples = static_cast<int>(v);
            }
        }
    }

    if (!explicit_jumps.empty()) {
        cfg.system.jump_channels = std::move(explicit_jumps);
    } else if (gamma_set) {
        cfg.system.jump_channels =
            default_jump_channels(cfg.system.n_levels, cfg.system.gamma_natural);
    }
    cfg.loss.horizon = cfg.integrator.t_final;
    cfg.integrator.dense_samples = cfg.output.samples;

    cfg.validate();
    return cfg;
}

void ProblemConfig::validate() const {
    system.validate();
    validate_pulses(pulses);
    if (pulses.n_channels() != system.n_levels - 1)
        throw ConfigError("pulses: expected " + std::to_string(system.n_levels - 1) +
                          " channels, got " + std::to_string(pulses.n_channels()));
    integrator.validate();
    loss.validate(system.n_levels - 1);
    optim.validate();
    if (optim.bounds.size() != kParamsPerChannel * (system.n_levels - 1))
        throw ConfigError("bounds: size does not match the channel count");
    if (starts < 1) throw ConfigError("optim.starts must be >= 1");
    if (!(gamma_mhz > 0.0)) throw ConfigError("system.gamma_mhz must be positive");
}

ProblemConfig load_config(const std::string& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const IoError& e) {
        throw ConfigError(std::string(e.what()));
    }
    return parse_config(text, path);
}

std::string render_config(const ProblemConfig& cfg) {
    std::ostringstream out;
    const auto f = format_double_full;
    out << "[system]\n";
    out << "n_levels = " << cfg.system.n_levels << "\n";
    out << "gamma = " << f(cfg.system.gamma_natural) << "\n";
    out << "gamma_c = " << f(cfg.system.gamma_collisional) << "\n";
    out << "gamma_mhz = " << f(cfg.gamma_mhz) << "\n";
    out << "uniform_phase = " << (cfg.system.uniform_phase_convention ? "true" : "false") << "\n";
    for (const auto& j : cfg.system.jump_channels)
        out << "jump = " << j.from << " " << j.to << " " << f(j.rate) << "\n";
    for (int j = 0; j < cfg.pulses.n_channels(); ++j) {
        const auto& p = cfg.pulses.channels[static_cast<size_t>(j)];
        out << "\n[pulse." << j + 1 << "]\n";
        out << "t0 = " << f(p.t0) << "\n";
        out << "sigma = " << f(p.sigma) << "\n";
        out << "omega0 = " << f(p.omega0) << "\n";
        out << "delta = " << f(p.delta) << "\n";
    }
    out << "\n[integrator]\n";
    out << "t_final = " << f(cfg.integrator.t_final) << "\n";
    out << "rel_tol = " << f(cfg.integrator.rel_tol) << "\n";
    out << "abs_tol = " << f(cfg.integrator.abs_tol) << "\n";
    out << "initial_step = " << f(cfg.integrator.initial_step) << "\n";
    out << "max_steps = " << cfg.integrator.max_steps << "\n";
    out << "gate_sharpness = " << f(cfg.integrator.gate_sharpness) << "\n";
    out << "hard_gate = " << (cfg.integrator.hard_gate ? "true" : "false") << "\n";
    out << "\n[loss]\n";
    out << "w_init = " << f(cfg.loss.w_init) << "\n";
    out << "w_mid = " << f(cfg.loss.w_mid) << "\n";
    out << "w_final = " << f(cfg.loss.w_final) << "\n";
    out << "w_order = " << f(cfg.loss.w_order) << "\n";
    out << "w_barrier = " << f(cfg.loss.w_barrier) << "\n";
    out << "k_sharp = " << f(cfg.loss.k_sharp) << "\n";
    out << "k_barrier = " << f(cfg.loss.k_barrier) << "\n";
    for (const auto& c : cfg.loss.ordering) {
        out << "ordering =";
        if (c.kind == OrderingConstraint::Kind::reference) {
            out << " ref " << c.channel << " " << c.sign;
        } else {
            out << " chain";
            for (int idx : c.chain) out << " " << idx;
        }
        if (c.penalize) out << " penalize";
        out << "\n";
    }
    const auto& b = cfg.optim.bounds;
    out << "\n[bounds]\n";
    out << "t = " << f(b.lower[0]) << " " << f(b.upper[0]) << "\n";
    out << "sigma = " << f(b.lower[1]) << " " << f(b.upper[1]) << "\n";
    out << "omega = " << f(b.lower[2]) << " " << f(b.upper[2]) << "\n";
    out << "delta = " << f(b.lower[3]) << " " << f(b.upper[3]) << "\n";
    out << "\n[optim]\n";
    out << "mode = " << (cfg.optim.mode == OptimMode::lbfgsb ? "lbfgsb" : "projected_lbfgs") << "\n";
    out << "memory = " << cfg.optim.memory << "\n";
    out << "max_iters = " << cfg.optim.max_iters << "\n";
    out << "grad_tol = " << f(cfg.optim.grad_tol) << "\n";
    out << "f_tol = " << f(cfg.optim.f_tol) << "\n";
    out << "c1 = " << f(cfg.optim.c1) << "\n";
    out << "c2 = " << f(cfg.optim.c2) << "\n";
    out << "max_line_search = " << cfg.optim.max_line_search << "\n";
    out << "gradient = " << (cfg.optim.gradient == GradMethod::dual ? "dual" : "fd") << "\n";
    out << "fd_step = " << f(cfg.optim.fd_step) << "\n";
    out << "fd_scheme = " << (cfg.optim.fd_scheme == FdScheme::central ? "central" : "forward") << "\n";
    out << "starts = " << cfg.starts << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "\n[output]\n";
    if (!cfg.output.prefix.empty()) out << "prefix = " << cfg.output.prefix << "\n";
    out << "samples = " << cfg.output.samples << "\n";
    return out.str();
}

void save_config(const ProblemConfig& cfg, const std::string& path) {
    write_text_file(path, render_config(cfg));
}

Problem make_problem(const ProblemConfig& cfg) {
    Problem prob;
    prob.system = cfg.system;
    prob.integrator = cfg.integrator;
    prob.integrator.dense_samples = cfg.output.samples;
    prob.loss = cfg.loss;
    prob.loss.horizon = cfg.integrator.t_final;
    prob.bounds = cfg.optim.bounds;
    return prob;
}

void Problem::validate() const {
    system.validate();
    integrator.validate();
    loss.validate(system.n_levels - 1);
    bounds.validate();
    if (bounds.size() != n_params())
        throw ConfigError("bounds: size does not match the channel count");
}

void write_trajectory(const Trajectory& traj, const std::string& path) {
    if (traj.populations.empty()) throw IoError("trajectory is empty");
    const int n = static_cast<int>(traj.populations.front().size());
    const int nc = static_cast<int>(traj.omegas.front().size());
    std::ostringstream out;
    out << "t";
    for (int i = 1; i <= n; ++i) out << ",rho" << i << i;
    for (int j = 1; j <= nc; ++j) out << ",omega" << j;
    out << "\n";
    for (size_t r = 0; r < traj.times.size(); ++r) {
        out << format_double(traj.times[r]);
        for (int i = 0; i < n; ++i) out << "," << format_double(traj.populations[r][static_cast<size_t>(i)]);
        for (int j = 0; j < nc; ++j) out << "," << format_double(traj.omegas[r][static_cast<size_t>(j)]);
        out << "\n";
    }
    write_text_file(path, out.str());
}

void write_optim_trace(std::span<const IterateRecord> iterates, int n_channels,
                       const std::string& path) {
    std::ostringstream out;
    out << "iter,loss,pgnorm,step";
    for (const auto& label : param_labels(n_channels)) out << "," << label;
    out << "\n";
    for (const auto& r : iterates) {
        out << r.iter << "," << format_double(r.loss) << "," << format_double(r.pg_norm)
            << "," << format_double(r.step);
        for (double x : r.x) out << "," << format_double(x);
        out << "\n";
    }
    write_text_file(path, out.str());
}

SummaryLines simulation_summary(const ProblemConfig& cfg, const Problem& prob,
                                const Trajectory& traj) {
    SummaryLines lines;
    const int n = prob.system.n_levels;
    lines.emplace_back("t_final", format_double(traj.t_final));
    lines.emplace_back("steps_accepted", std::to_string(traj.steps_accepted));
    lines.emplace_back("steps_rejected", std::to_string(traj.steps_rejected));
    double trace = 0.0;
    for (int i = 1; i <= n; ++i) {
        const double p = traj.final_state.population(i);
        trace += p;
        lines.emplace_back("rho" + std::to_string(i) + std::to_string(i) + "_final",
                           format_double(p));
    }
    lines.emplace_back("trace_final", format_double(trace));
    for (int i = 2; i <= n - 1; ++i) {
        double peak = 0.0;
        for (const auto& row : traj.populations)
            peak = std::max(peak, row[static_cast<size_t>(i - 1)]);
        lines.emplace_back("max_rho" + std::to_string(i) + std::to_string(i),
                           format_double(peak));
    }
    lines.emplace_back("quad_init", format_double(traj.final_state.quad[0]));
    double qmid = 0.0;
    for (size_t k = 1; k < traj.final_state.quad.size(); ++k) qmid += traj.final_state.quad[k];
    lines.emplace_back("quad_mid_total", format_double(qmid));

    const std::vector<double> params = pack<double>(cfg.pulses);
    std::vector<double> centers(cfg.pulses.channels.size());
    for (size_t j = 0; j < centers.size(); ++j) centers[j] = cfg.pulses.channels[j].t0;
    const double l_dyn = loss_dynamics(traj, prob.loss);
    const double l_ord = ordering_terms<double>(std::span<const double>(centers), prob.loss);
    const double l_bar =
        prob.loss.w_barrier *
        barrier_penalty<double>(std::span<const double>(params), prob.bounds, prob.loss.k_barrier);
    lines.emplace_back("loss_dynamics", format_double(l_dyn));
    lines.emplace_back("loss_ordering", format_double(l_ord));
    lines.emplace_back("loss_barrier", format_double(l_bar));
    lines.emplace_back("loss_total", format_double(l_dyn + l_ord + l_bar));

    lines.emplace_back("si_gamma_mhz", format_double(cfg.gamma_mhz));
    lines.emplace_back("si_time_unit_us", format_double(1.0 / cfg.gamma_mhz));
    lines.emplace_back("si_t_final_us", format_double(traj.t_final / cfg.gamma_mhz));
    return lines;
}

SummaryLines optimization_summary(const ProblemConfig& cfg, const Problem& prob,
                                  const MultiStartReport& rep) {
    SummaryLines lines;
    lines.emplace_back("starts", std::to_string(rep.runs.size()));
    lines.emplace_back("seed", std::to_string(cfg.seed));
    lines.emplace_back("best_start", std::to_string(rep.best_index));
    const OptimReport& best = rep.best();
    lines.emplace_back("best_loss", format_double(best.best_loss));
    lines.emplace_back("best_pgnorm", format_double(best.pg_norm));
    lines.emplace_back("best_termination", to_string(best.termination));
    lines.emplace_back("best_iterations", std::to_string(best.iterations));
    const auto labels = param_labels(prob.n_channels());
    for (size_t i = 0; i < labels.size(); ++i)
        lines.emplace_back("best_" + labels[i], format_double(best.best_params[i]));
    long loss_evals = 0, grad_evals = 0;
    for (const auto& r : rep.runs) {
        loss_evals += r.loss_evals;
        grad_evals += r.grad_evals;
    }
    lines.emplace_back("total_loss_evals", std::to_string(loss_evals));
    lines.emplace_back("total_grad_evals", std::to_string(grad_evals));
    for (size_t k = 0; k < rep.runs.size(); ++k) {
        const auto& r = rep.runs[k];
        lines.emplace_back("start" + std::to_string(k) + "_loss", format_double(r.best_loss));
        lines.emplace_back("start" + std::to_string(k) + "_termination",
                           to_string(r.termination));
        lines.emplace_back("start" + std::to_string(k) + "_iterations",
                           std::to_string(r.iterations));
    }
    return lines;
}

std::string render_summary(const SummaryLines& lines) {
    std::ostringstream out;
    for (const auto& [k, v] : lines) out << k << " = " << v << "\n";
    return out.str();
}

void write_summary(const SummaryLines& lines, const std::string& path) {
    write_text_file(path, render_summary(lines));
}

}  // namespace pulseopt
