#include "pulseopt/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "pulseopt/errors.hpp"

namespace pulseopt {

std::string to_string(Termination t) {
    switch (t) {
        case Termination::grad_tol: return "grad_tol";
        case Termination::f_tol: return "f_tol";
        case Termination::max_iters: return "max_iters";
        case Termination::line_search_fail: return "line_search_fail";
    }
    return "unknown";
}

void OptimConfig::validate() const {
    if (memory < 1) throw ConfigError("optim.memory must be >= 1");
    if (max_iters < 1) throw ConfigError("optim.max_iters must be >= 1");
    if (!(grad_tol > 0.0)) throw ConfigError("optim.grad_tol must be positive");
    if (!(f_tol >= 0.0)) throw ConfigError("optim.f_tol must be nonnegative");
    if (!(0.0 < c1 && c1 < c2 && c2 < 1.0))
        throw ConfigError("optim line search requires 0 < c1 < c2 < 1");
    if (max_line_search < 1) throw ConfigError("optim.max_line_search must be >= 1");
    if (!(fd_step > 0.0)) throw ConfigError("optim.fd_step must be positive");
    bounds.validate();
}

namespace {

using Vec = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

void clamp_into(Vec& x, const BoundsSpec& b) {
    for (size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], b.lower[i], b.upper[i]);
}

/// P(x - g) - x, the projected steepest-descent step; its infinity norm is
/// the first-order optimality measure on the box.
Vec projected_gradient_step(std::span<const double> x, std::span<const double> g,
                            const BoundsSpec& b) {
    Vec d(x.size());
    for (size_t i = 0; i < x.size(); ++i)
        d[i] = std::clamp(x[i] - g[i], b.lower[i], b.upper[i]) - x[i];
    return d;
}

/// Row-major dense matrix just big enough for the limited-memory model.
struct Mat {
    int n = 0;
    Vec a;
    explicit Mat(int dim) : n(dim), a(static_cast<size_t>(dim) * dim, 0.0) {}
    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * n + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * n + j]; }
};

Vec matvec(const Mat& m, std::span<const double> v) {
    Vec out(static_cast<size_t>(m.n), 0.0);
    for (int i = 0; i < m.n; ++i) {
        double s = 0.0;
        for (int j = 0; j < m.n; ++j) s += m(i, j) * v[j];
        out[static_cast<size_t>(i)] = s;
    }
    return out;
}

/// Dense Hessian model B = theta I updated with every stored pair, the
/// explicit form of the limited-memory compact representation. For the
/// parameter counts here (<= a few dozen) this is simpler than W M W^T
/// bookkeeping and numerically identical.
Mat build_model_hessian(int n, std::span<const CurvaturePair> history) {
    double theta = 1.0;
    if (!history.empty()) {
        const auto& last = history.back();
        const double sy = dot(last.s, last.y);
        const double yy = dot(last.y, last.y);
        if (sy > 0.0 && yy > 0.0) theta = yy / sy;
    }
    Mat b(n);
    for (int i = 0; i < n; ++i) b(i, i) = theta;
    for (const auto& p : history) {
        const Vec bs = matvec(b, p.s);
        const double sbs = dot(p.s, bs);
        const double sy = dot(p.s, p.y);
        if (sbs <= 0.0 || sy <= 0.0) continue;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                b(i, j) += p.y[static_cast<size_t>(i)] * p.y[static_cast<size_t>(j)] / sy -
                           bs[static_cast<size_t>(i)] * bs[static_cast<size_t>(j)] / sbs;
    }
    return b;
}

/// In-place Cholesky solve of A x = rhs for SPD A; false if A is not SPD.
bool cholesky_solve(Mat a, Vec rhs, Vec& out) {
    const int n = a.n;
    for (int j = 0; j < n; ++j) {
        double d = a(j, j);
        for (int k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
        if (d <= 0.0) return false;
        const double l = std::sqrt(d);
        a(j, j) = l;
        for (int i = j + 1; i < n; ++i) {
            double v = a(i, j);
            for (int k = 0; k < j; ++k) v -= a(i, k) * a(j, k);
            a(i, j) = v / l;
        }
    }
    for (int i = 0; i < n; ++i) {
        double v = rhs[static_cast<size_t>(i)];
        for (int k = 0; k < i; ++k) v -= a(i, k) * rhs[static_cast<size_t>(k)];
        rhs[static_cast<size_t>(i)] = v / a(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
        double v = rhs[static_cast<size_t>(i)];
        for (int k = i + 1; k < n; ++k) v -= a(k, i) * rhs[static_cast<size_t>(k)];
        rhs[static_cast<size_t>(i)] = v / a(i, i);
    }
    out = std::move(rhs);
    return true;
}

/// Generalized Cauchy point: minimizes the quadratic model along the
/// piecewise-linear projected steepest-descent path, fixing variables as
/// they hit their bounds (breakpoint search).
Vec cauchy_point(std::span<const double> x, std::span<const double> g, const Mat& b,
                 const BoundsSpec& bounds) {
    const int n = static_cast<int>(x.size());
    constexpr double kInf = std::numeric_limits<double>::infinity();
    Vec d(static_cast<size_t>(n), 0.0), bp(static_cast<size_t>(n), kInf);
    for (int i = 0; i < n; ++i) {
        const size_t ui = static_cast<size_t>(i);
        if (g[ui] < 0.0)
            bp[ui] = (x[ui] - bounds.upper[ui]) / g[ui];
        else if (g[ui] > 0.0)
            bp[ui] = (x[ui] - bounds.lower[ui]) / g[ui];
        if (bp[ui] > 0.0) d[ui] = -g[ui];
    }
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return bp[static_cast<size_t>(i)] < bp[static_cast<size_t>(j)]; });

    Vec z(static_cast<size_t>(n), 0.0);
    double t_old = 0.0;
    size_t next_bp = 0;
    while (true) {
        while (next_bp < order.size() &&
               bp[static_cast<size_t>(order[next_bp])] <= t_old + 1e-300)
            ++next_bp;
        const Vec bz = matvec(b, z);
        const Vec bd = matvec(b, d);
        const double f1 = dot(g, d) + dot(z, bd);
        const double f2 = dot(d, bd);
        if (f1 >= -1e-15) break;
        const double dt_star = f2 > 0.0 ? -f1 / f2 : kInf;
        const double t_next =
            next_bp < order.size() ? bp[static_cast<size_t>(order[next_bp])] : kInf;
        const double dt_max = t_next - t_old;
        if (dt_star < dt_max) {
            for (int i = 0; i < n; ++i) z[static_cast<size_t>(i)] += dt_star * d[static_cast<size_t>(i)];
            break;
        }
        if (!std::isfinite(dt_max)) break;
        for (int i = 0; i < n; ++i) z[static_cast<size_t>(i)] += dt_max * d[static_cast<size_t>(i)];
        t_old = t_next;
        // Pin every variable whose breakpoint has been reached.
        while (next_bp < order.size() &&
               bp[static_cast<size_t>(order[next_bp])] <= t_old * (1.0 + 1e-15)) {
            const size_t i = static_cast<size_t>(order[next_bp]);
            d[i] = 0.0;
            z[i] = (g[i] < 0.0 ? bounds.upper[i] : bounds.lower[i]) - x[i];
            ++next_bp;
        }
        if (next_bp >= order.size()) break;
    }
    Vec xc(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) xc[static_cast<size_t>(i)] = x[static_cast<size_t>(i)] + z[static_cast<size_t>(i)];
    Vec xcv = std::move(xc);
    clamp_into(xcv, bounds);
    return xcv;
}

struct EvalCounters {
    long loss = 0;
    long grad = 0;
};

struct LinePoint {
    double alpha = 0.0;
    double f = 0.0;
    double slope = 0.0;
    Vec x;
    Vec g;
};

/// phi(alpha) and phi'(alpha) for f along x + alpha d.
template <class VG>
LinePoint eval_line(const VG& value_grad, std::span<const double> x, std::span<const double> d,
                    double alpha, const BoundsSpec& bounds, EvalCounters& ev) {
    LinePoint p;
    p.alpha = alpha;
    p.x.resize(x.size());
    for (size_t i = 0; i < x.size(); ++i) p.x[i] = x[i] + alpha * d[i];
    clamp_into(p.x, bounds);  // rounding guard; the segment itself is feasible
    p.g.resize(x.size());
    p.f = value_grad(std::span<const double>(p.x), std::span<double>(p.g));
    ++ev.loss;
    ++ev.grad;
    p.slope = dot(p.g, d);
    return p;
}

struct WolfeResult {
    bool ok = false;
    LinePoint pt;
};

/// Strong Wolfe search on the feasible segment alpha in (0, alpha_max],
/// bracketing plus bisection zoom. Returns the best sufficient-decrease
/// point even when the curvature condition cannot be met in budget.
template <class VG>
WolfeResult wolfe_search(const VG& value_grad, std::span<const double> x,
                         std::span<const double> d, double f0, double slope0,
                         const OptimConfig& cfg, double alpha_max, EvalCounters& ev) {
    WolfeResult res;
    int trials = 0;
    auto armijo = [&](const LinePoint& p) { return p.f <= f0 + cfg.c1 * p.alpha * slope0; };
    auto curvature = [&](const LinePoint& p) { return std::abs(p.slope) <= -cfg.c2 * slope0; };

    LinePoint lo;  // best Armijo point so far (alpha 0 = start)
    lo.f = f0;
    lo.slope = slope0;
    LinePoint prev = lo;
    double alpha = std::min(1.0, alpha_max);
    bool in_zoom = false;
    LinePoint zlo, zhi;

    while (trials < cfg.max_line_search) {
        if (!in_zoom) {
            LinePoint p = eval_line(value_grad, x, d, alpha, cfg.bounds, ev);
            ++trials;
            if (!std::isfinite(p.f)) {
                alpha *= 0.5;
                if (alpha < 1e-16) break;
                continue;
            }
            if (!armijo(p) || (trials > 1 && p.f >= prev.f)) {
                zlo = prev;
                zhi = p;
                in_zoom = true;
                continue;
            }
            res = {true, p};
            if (curvature(p)) return res;
            if (p.slope >= 0.0) {
                zlo = p;
                zhi = prev;
                in_zoom = true;
                continue;
            }
            if (alpha >= alpha_max) return res;  // cannot extend past the box
            prev = p;
            alpha = std::min(2.0 * alpha, alpha_max);
        } else {
            const double amid = 0.5 * (zlo.alpha + zhi.alpha);
            LinePoint p = eval_line(value_grad, x, d, amid, cfg.bounds, ev);
            ++trials;
            if (!std::isfinite(p.f) || !armijo(p) || p.f >= zlo.f) {
                zhi = p;
            } else {
                res = {true, p};
                if (curvature(p)) return res;
                if (p.slope * (zhi.alpha - zlo.alpha) >= 0.0) zhi = zlo;
                zlo = p;
            }
            if (std::abs(zhi.alpha - zlo.alpha) < 1e-14) break;
        }
    }
    return res;  // ok=false if no sufficient-decrease point was ever found
}

}  // namespace

std::vector<double> two_loop_direction(std::span<const double> grad,
                                       std::span<const CurvaturePair> history) {
    Vec q(grad.begin(), grad.end());
    const size_t m = history.size();
    Vec alpha(m, 0.0), rho(m, 0.0);
    for (size_t idx = m; idx-- > 0;) {
        const auto& p = history[idx];
        rho[idx] = 1.0 / dot(p.s, p.y);
        alpha[idx] = rho[idx] * dot(p.s, q);
        for (size_t i = 0; i < q.size(); ++i) q[i] -= alpha[idx] * p.y[i];
    }
    if (m > 0) {
        const auto& last = history[m - 1];
        const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
        for (double& v : q) v *= gamma;
    }
    for (size_t idx = 0; idx < m; ++idx) {
        const auto& p = history[idx];
        const double beta = rho[idx] * dot(p.y, q);
        for (size_t i = 0; i < q.size(); ++i) q[i] += (alpha[idx] - beta) * p.s[i];
    }
    for (double& v : q) v = -v;
    return q;
}

OptimReport minimize(const Objective& obj, std::vector<double> x0, const OptimConfig& cfg,
                     const IterateCallback& on_iterate) {
    cfg.validate();
    const int n = cfg.bounds.size();
    if (static_cast<int>(x0.size()) != n)
        throw ConfigError("optimizer start point length " + std::to_string(x0.size()) +
                          " does not match bounds size " + std::to_string(n));

    OptimReport rep;
    EvalCounters ev;
    Vec x = std::move(x0);
    {
        Vec before = x;
        clamp_into(x, cfg.bounds);
        rep.x0_clamped = x != before;
    }

    Vec g(x.size());
    double f = obj.value_grad(std::span<const double>(x), std::span<double>(g));
    ++ev.loss;
    ++ev.grad;
    if (!std::isfinite(f))
        throw NumericalError("objective is not finite at the optimizer start point");

    std::vector<CurvaturePair> history;
    rep.best_params = x;
    rep.best_loss = f;

    auto record = [&](int iter, double step) {
        IterateRecord r{iter, f, inf_norm(projected_gradient_step(x, g, cfg.bounds)), step, x};
        rep.pg_norm = r.pg_norm;
        rep.iterates.push_back(r);
        if (on_iterate) on_iterate(rep.iterates.back());
    };
    record(0, 0.0);

    int iter = 0;
    while (true) {
        if (rep.pg_norm <= cfg.grad_tol) {
            rep.termination = Termination::grad_tol;
            break;
        }
        if (iter >= cfg.max_iters) {
            rep.termination = Termination::max_iters;
            break;
        }
        ++iter;

        Vec d;
        if (cfg.mode == OptimMode::lbfgsb) {
            const Mat b = build_model_hessian(n, history);
            const Vec xc = cauchy_point(x, g, b, cfg.bounds);
            // Identify the variables freed by the Cauchy point and minimize
            // the model over them, keeping the active ones fixed.
            std::vector<int> free_idx;
            for (int i = 0; i < n; ++i) {
                const size_t ui = static_cast<size_t>(i);
                const double span_i = cfg.bounds.upper[ui] - cfg.bounds.lower[ui];
                const double eps = 1e-12 * std::max(1.0, span_i);
                if (xc[ui] > cfg.bounds.lower[ui] + eps && xc[ui] < cfg.bounds.upper[ui] - eps)
                    free_idx.push_back(i);
            }
            Vec xbar = xc;
            if (!free_idx.empty()) {
                Vec zc(static_cast<size_t>(n));
                for (int i = 0; i < n; ++i)
                    zc[static_cast<size_t>(i)] = xc[static_cast<size_t>(i)] - x[static_cast<size_t>(i)];
                const Vec bzc = matvec(b, zc);
                const int nf = static_cast<int>(free_idx.size());
                Mat bff(nf);
                Vec rhs(static_cast<size_t>(nf));
                for (int a = 0; a < nf; ++a) {
                    const size_t ia = static_cast<size_t>(free_idx[static_cast<size_t>(a)]);
                    rhs[static_cast<size_t>(a)] = -(g[ia] + bzc[ia]);
                    for (int c = 0; c < nf; ++c)
                        bff(a, c) = b(free_idx[static_cast<size_t>(a)], free_idx[static_cast<size_t>(c)]);
                }
                Vec delta;
                if (!cholesky_solve(bff, rhs, delta)) delta = rhs;  // fallback: model gradient
                // Shrink toward xc until the free block stays inside the box.
                double scale = 1.0;
                for (int a = 0; a < nf; ++a) {
                    const size_t ia = static_cast<size_t>(free_idx[static_cast<size_t>(a)]);
                    const double di = delta[static_cast<size_t>(a)];
                    if (di > 0.0)
                        scale = std::min(scale, (cfg.bounds.upper[ia] - xc[ia]) / di);
                    else if (di < 0.0)
                        scale = std::min(scale, (cfg.bounds.lower[ia] - xc[ia]) / di);
                }
                scale = std::max(scale, 0.0);
                for (int a = 0; a < nf; ++a) {
                    const size_t ia = static_cast<size_t>(free_idx[static_cast<size_t>(a)]);
                    xbar[ia] = xc[ia] + scale * delta[static_cast<size_t>(a)];
                }
                clamp_into(xbar, cfg.bounds);
            }
            d.resize(static_cast<size_t>(n));
            for (int i = 0; i < n; ++i)
                d[static_cast<size_t>(i)] = xbar[static_cast<size_t>(i)] - x[static_cast<size_t>(i)];
        } else {
            d = two_loop_direction(std::span<const double>(g), history);
            // The raw direction may point outside the box; use its projected
            // displacement so the Wolfe segment stays feasible.
            Vec xt(x.size());
            for (size_t i = 0; i < x.size(); ++i) xt[i] = x[i] + d[i];
            clamp_into(xt, cfg.bounds);
            for (size_t i = 0; i < x.size(); ++i) d[i] = xt[i] - x[i];
        }

        double slope0 = dot(g, d);
        if (!(slope0 < 0.0) || inf_norm(d) == 0.0) {
            d = projected_gradient_step(x, g, cfg.bounds);
            slope0 = dot(g, d);
            if (!(slope0 < 0.0)) {
                rep.termination = Termination::grad_tol;
                break;
            }
        }

        WolfeResult ls;
        if (cfg.mode == OptimMode::lbfgsb) {
            ls = wolfe_search(obj.value_grad, x, d, f, slope0, cfg, 1.0, ev);
        } else {
            // Projected backtracking with the Armijo condition only.
            double alpha = 1.0;
            for (int trial = 0; trial < cfg.max_line_search; ++trial) {
                Vec xt(x.size());
                for (size_t i = 0; i < x.size(); ++i) xt[i] = x[i] + alpha * d[i];
                clamp_into(xt, cfg.bounds);
                Vec step(x.size());
                for (size_t i = 0; i < x.size(); ++i) step[i] = xt[i] - x[i];
                const double ft = obj.value(std::span<const double>(xt));
                ++ev.loss;
                if (std::isfinite(ft) && ft <= f + cfg.c1 * dot(g, step)) {
                    ls.ok = true;
                    ls.pt.alpha = alpha;
                    ls.pt.f = ft;
                    ls.pt.x = std::move(xt);
                    ls.pt.g.resize(x.size());
                    ls.pt.f = obj.value_grad(std::span<const double>(ls.pt.x),
                                             std::span<double>(ls.pt.g));
                    ++ev.loss;
                    ++ev.grad;
                    break;
                }
                alpha *= 0.5;
            }
        }

        if (!ls.ok) {
            rep.termination = Termination::line_search_fail;
            break;
        }

        const double f_prev = f;
        Vec s(x.size()), yv(x.size());
        for (size_t i = 0; i < x.size(); ++i) {
            s[i] = ls.pt.x[i] - x[i];
            yv[i] = ls.pt.g[i] - g[i];
        }
        x = std::move(ls.pt.x);
        g = std::move(ls.pt.g);
        f = ls.pt.f;

        const double sy = dot(s, yv);
        const double ss = std::sqrt(dot(s, s));
        const double yy = std::sqrt(dot(yv, yv));
        if (sy > 1e-10 * ss * yy) {
            history.push_back({std::move(s), std::move(yv)});
            if (static_cast<int>(history.size()) > cfg.memory) history.erase(history.begin());
        }

        record(iter, ls.pt.alpha);
        if (f < rep.best_loss) {
            rep.best_loss = f;
            rep.best_params = x;
        }
        if (f_prev - f <= cfg.f_tol * std::max({std::abs(f_prev), std::abs(f), 1.0})) {
            rep.termination = Termination::f_tol;
            break;
        }
    }

    rep.iterations = iter;
    rep.loss_evals = ev.loss;
    rep.grad_evals = ev.grad;
    return rep;
}

Objective problem_objective(const Problem& prob, const OptimConfig& cfg) {
    Objective obj;
    obj.value = [&prob](std::span<const double> x) { return problem_loss<double>(prob, x); };
    if (cfg.gradient == GradMethod::dual) {
        obj.value_grad = [&prob](std::span<const double> x, std::span<double> g) {
            const GradientReport r = grad_dual(prob, x);
            std::copy(r.gradient.begin(), r.gradient.end(), g.begin());
            return r.loss_value;
        };
    } else {
        const double h = cfg.fd_step;
        const FdScheme scheme = cfg.fd_scheme;
        obj.value_grad = [&prob, h, scheme](std::span<const double> x, std::span<double> g) {
            const GradientReport r = grad_fd(prob, x, h, scheme);
            std::copy(r.gradient.begin(), r.gradient.end(), g.begin());
            return r.loss_value;
        };
    }
    return obj;
}

std::vector<double> draw_start(const BoundsSpec& bounds, std::uint64_t seed, int start_index) {
    // splitmix-style per-start stream; the draw is reproducible bit for bit
    // independent of library distributions and thread schedule.
    std::uint64_t state = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(start_index + 1);
    auto next_u01 = [&state]() {
        state += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return static_cast<double>(z >> 11) * 0x1.0p-53;
    };
    Vec x(bounds.lower.size());
    for (size_t i = 0; i < x.size(); ++i)
        x[i] = bounds.lower[i] + (bounds.upper[i] - bounds.lower[i]) * next_u01();
    return x;
}

MultiStartReport multi_start_minimize(const Problem& prob, const OptimConfig& cfg,
                                      int n_starts, std::uint64_t seed) {
    if (n_starts < 1) throw ConfigError("optim.starts must be >= 1");
    cfg.validate();
    prob.validate();

    MultiStartReport rep;
    rep.runs.resize(static_cast<size_t>(n_starts));
    rep.start_points.resize(static_cast<size_t>(n_starts));
    std::vector<std::string> errors(static_cast<size_t>(n_starts));
    for (int k = 0; k < n_starts; ++k)
        rep.start_points[static_cast<size_t>(k)] = draw_start(cfg.bounds, seed, k);

    const Objective obj = problem_objective(prob, cfg);
    const int threads = std::min(worker_threads(), n_starts);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int k = 0; k < n_starts; ++k) {
        try {
            rep.runs[static_cast<size_t>(k)] =
                minimize(obj, rep.start_points[static_cast<size_t>(k)], cfg);
        } catch (const std::exception& e) {
            errors[static_cast<size_t>(k)] = e.what();
        }
    }
    for (int k = 0; k < n_starts; ++k)
        if (!errors[static_cast<size_t>(k)].empty())
            throw NumericalError("start " + std::to_string(k) +
                                 " failed: " + errors[static_cast<size_t>(k)]);

    rep.best_index = 0;
    for (int k = 1; k < n_starts; ++k)
        if (rep.runs[static_cast<size_t>(k)].best_loss <
            rep.runs[static_cast<size_t>(rep.best_index)].best_loss)
            rep.best_index = k;
    return rep;
}

}  // namespace pulseopt
