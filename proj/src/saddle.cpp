#include "shallowbayes/saddle.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>

#include "shallowbayes/errors.hpp"
#include "shallowbayes/generalization.hpp"
#include "shallowbayes/quadrature.hpp"

namespace shallowbayes {

namespace {

const double kTwoPi = 2 * std::numbers::pi;

double normal_pdf(double x, double var) { return std::exp(-0.5 * x * x / var) / std::sqrt(kTwoPi * var); }

double log_cosh(double x) {
    const double a = std::abs(x);
    return a + std::log1p(std::exp(-2 * a)) - std::numbers::ln2;
}

const Rule& gh(int n) {
    thread_local std::vector<std::pair<int, Rule>> cache;
    for (const auto& [m, r] : cache)
        if (m == n) return r;
    cache.emplace_back(n, gauss_hermite(n));
    return cache.back().second;
}

// int_lo^hi f(y) dy on `panels` equal Gauss-Legendre panels
template <class F>
double panel_integral(F&& f, double lo, double hi, int panels, const Rule& ref) {
    const double h = (hi - lo) / panels;
    double s = 0;
    for (int p = 0; p < panels; ++p) {
        const double a = lo + p * h;
        for (std::size_t i = 0; i < ref.x.size(); ++i) s += ref.w[i] * h * f(a + ref.x[i] * h);
    }
    return s;
}

double tol_for(const Channel& c, const SolverConfig& cfg) {
    if (cfg.tol > 0) return cfg.tol;
    return c.kind == Channel::Kind::gaussian ? 1e-8 : 1e-6;
}

struct Damper {
    double theta, theta_min;
    std::vector<double> prev;
    int alternations = 0;

    // returns the scaled residual sup-norm and moves x toward the update
    double step(std::vector<double>& x, const std::vector<double>& upd, const std::vector<bool>& relative) {
        std::vector<double> r(x.size());
        double sup = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            r[i] = upd[i] - x[i];
            const double scaled = relative[i] ? r[i] / (1 + std::abs(x[i])) : r[i];
            sup = std::max(sup, std::abs(scaled));
        }
        if (!prev.empty()) {
            double dot = 0;
            for (std::size_t i = 0; i < r.size(); ++i) dot += r[i] * prev[i];
            alternations = dot < 0 ? alternations + 1 : 0;
            if (alternations >= 2) {
                theta = std::max(theta / 2, theta_min);
                alternations = 0;
            }
        }
        prev = r;
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += theta * r[i];
        return sup;
    }
};

struct Cached {
    double g1, mu1s, mu2s;
    explicit Cached(const ActivationSpec& s) : g1(g_eval(1.0, s)), mu1s(s.mu1() * s.mu1()), mu2s(s.mu2() * s.mu2()) {}
};

double dpsi(double qK, double rK, const Channel& c, const QuadConfig& q) {
    return psi_out_dqK(qK, rK, c, q);
}

}  // namespace

// ---------------------------------------------------------------- channels

Channel Channel::gaussian(double delta) {
    if (!(delta > 0)) throw DomainError("gaussian channel needs delta > 0");
    Channel c;
    c.kind = Kind::gaussian;
    c.name = "gaussian";
    c.delta = delta;
    c.density = [delta](double y, double l) { return normal_pdf(y - l, delta); };
    c.mean = [](double l) { return l; };
    c.second_moment = [delta](double l) { return l * l + delta; };
    c.scale = std::sqrt(delta);
    return c;
}

Channel Channel::gaussian_generic(double delta) {
    Channel c = gaussian(delta);
    c.kind = Kind::generic;
    c.name = "gaussian-generic";
    return c;
}

Channel Channel::laplace(double b) {
    if (!(b > 0)) throw DomainError("laplace channel needs b > 0");
    Channel c;
    c.kind = Kind::generic;
    c.name = "laplace";
    c.delta = 2 * b * b;
    c.density = [b](double y, double l) { return std::exp(-std::abs(y - l) / b) / (2 * b); };
    c.mean = [](double l) { return l; };
    c.second_moment = [b](double l) { return l * l + 2 * b * b; };
    c.scale = b * 3;
    return c;
}

Channel Channel::custom(std::string name, std::function<double(double, double)> density, double scale,
                        std::function<double(double)> mean, std::function<double(double)> second) {
    if (!density || !mean) throw ConfigError("custom channel needs a density and a conditional mean");
    Channel c;
    c.kind = Kind::generic;
    c.name = std::move(name);
    c.density = density;
    c.mean = mean;
    c.scale = scale;
    if (second) {
        c.second_moment = second;
    } else {
        c.second_moment = [density, mean, scale](double l) {
            const Rule ref = gauss_legendre(24, 0, 1);
            const double m = mean(l);
            return panel_integral([&](double y) { return y * y * density(y, l); }, m - 16 * scale, m + 16 * scale, 64,
                                  ref);
        };
    }
    // noise variance at lambda = 0, for reporting
    c.delta = c.second_moment(0.0) - std::pow(mean(0.0), 2);
    return c;
}

std::string to_string(Phase p) { return p == Phase::universal ? "universal" : "specialisation"; }

double PhaseSolution::q2_centered(double gamma, VPrior v) const {
    const double m = v_mean(v);
    return state.q2 - gamma * m * m;
}

DenoisingCurve DenoisingCurve::from_table(SpectralTable table) {
    auto t = std::make_shared<SpectralTable>(std::move(table));
    return {[t](double q) { return t->mmse_at(q); }, [t](double q) { return t->iota_at(q); }};
}

// ---------------------------------------------------------------- scalar pieces

double r2_of(double gamma, VPrior v) {
    const double m = v_mean(v);
    return 1 + gamma * m * m;
}

double r_K(const ActivationSpec& s, double r2) {
    return s.mu1() * s.mu1() + s.mu2() * s.mu2() * r2 / 2 + g_eval(1.0, s);
}

double q_K(double q2, double qW, double qv, const ActivationSpec& s) {
    const double tail = qW == 0.0 ? 0.0 : qv * g_eval(qW, s);
    return s.mu1() * s.mu1() + s.mu2() * s.mu2() * q2 / 2 + tail;
}

double psi_out_gaussian(double qK, double rK, double delta) {
    const double v = delta + rK - qK;
    if (!(v > 0)) throw DomainError("psi_out: nonpositive effective variance");
    return -0.5 * std::log(kTwoPi * v) - 0.5;
}

double psi_out_gaussian_dqK(double qK, double rK, double delta) {
    const double v = delta + rK - qK;
    if (!(v > 0)) throw DomainError("psi_out: nonpositive effective variance");
    return 0.5 / v;
}

double psi_out_generic(double qK, double rK, const Channel& c, const QuadConfig& qc, PsiDiagnostics* diag) {
    if (qK < -1e-15 || qK > rK + 1e-15) throw DomainError("psi_out_generic: need 0 <= qK <= rK");
    qK = std::clamp(qK, 0.0, rK);
    const Rule& xi = gh(qc.n_xi);
    const Rule& u = gh(qc.n_u);
    const Rule ref = gauss_legendre(qc.y_nodes, 0, 1);
    const double sq = std::sqrt(qK), sr = std::sqrt(rK - qK);
    const bool flat = sr == 0.0;
    double total = 0, mass_err = 0;
    int panels_used = 0;
    bool truncated = false;
    std::vector<double> lam(u.x.size()), breaks;
    for (std::size_t i = 0; i < xi.x.size(); ++i) {
        // the conditional densities may be non-smooth at their centres, so those are panel boundaries
        breaks.clear();
        for (std::size_t j = 0; j < u.x.size(); ++j) {
            lam[j] = sq * xi.x[i] + sr * u.x[j];
            breaks.push_back(c.mean(lam[j]));
            if (flat) break;
        }
        std::sort(breaks.begin(), breaks.end());
        breaks.insert(breaks.begin(), breaks.front() - qc.y_width * c.scale);
        breaks.push_back(breaks.back() + qc.y_width * c.scale);
        auto Z = [&](double y) {
            if (flat) return c.density(y, lam[0]);
            double z = 0;
            for (std::size_t j = 0; j < u.x.size(); ++j) z += u.w[j] * c.density(y, lam[j]);
            return z;
        };
        auto zlogz = [&](double y) {
            const double z = Z(y);
            return z > 0 ? z * std::log(z) : 0.0;
        };
        auto segments = [&](auto&& f, int level) {
            double acc = 0;
            for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
                const double len = breaks[b + 1] - breaks[b];
                if (len <= 0) continue;
                const int n = (qc.y_panels * std::max(1, int(len / c.scale) + 1) / 8 + 1) << level;
                acc += panel_integral(f, breaks[b], breaks[b + 1], n, ref);
            }
            return acc;
        };
        int level = 0;
        double prev = segments(zlogz, 0), cur = prev;
        for (; level < 6;) {
            cur = segments(zlogz, ++level);
            if (std::abs(cur - prev) < qc.y_tol) break;
            prev = cur;
            if (level == 6) truncated = true;
        }
        panels_used = std::max(panels_used, level);
        mass_err = std::max(mass_err, std::abs(segments(Z, level) - 1));
        total += xi.w[i] * cur;
    }
    if (mass_err > 1e-6) truncated = true;
    if (diag) *diag = {mass_err, panels_used, truncated};
    return total;
}

double psi_out(double qK, double rK, const Channel& c, const QuadConfig& q) {
    if (c.kind == Channel::Kind::gaussian) return psi_out_gaussian(qK, rK, c.delta);
    return psi_out_generic(qK, rK, c, q);
}

double psi_out_dqK(double qK, double rK, const Channel& c, const QuadConfig& q) {
    if (c.kind == Channel::Kind::gaussian) return psi_out_gaussian_dqK(qK, rK, c.delta);
    double h = 1e-4 * std::max(rK, 1e-3);
    const double up = std::min(qK + h, rK), dn = std::max(qK - h, 0.0);
    return (psi_out_generic(up, rK, c, q) - psi_out_generic(dn, rK, c, q)) / (up - dn);
}

double psi_w(double q, WPrior p) {
    if (q < 0) throw DomainError("psi_w: negative q_hatW");
    if (p == WPrior::gaussian) return q / 2 - 0.5 * std::log1p(q);
    const Rule& r = gh(120);
    const double s = std::sqrt(q);
    return -q / 2 + r.integrate([&](double z) { return log_cosh(s * z + q); });
}

double m_w(double q, WPrior p) {
    if (q < 0) throw DomainError("m_w: negative q_hatW");
    if (p == WPrior::gaussian) return q / (1 + q);
    const Rule& r = gh(120);
    const double s = std::sqrt(q);
    return r.integrate([&](double z) { return std::tanh(s * z + q); });
}

// ---------------------------------------------------------------- free entropies

double f_universal(double q2, double qh2, const TheoryParams& p, const DenoisingCurve& dc) {
    const auto& s = p.activation;
    const double r2 = r2_of(p.gamma, p.v_prior);
    const double rK = r_K(s, r2);
    const double qK = q_K(q2, 0.0, 1.0, s);
    return psi_out(qK, rK, p.channel) + qh2 * (r2 - q2) / (4 * p.alpha) - dc.iota(qh2) / p.alpha;
}

double f_specialisation(const OverlapState& st, const TheoryParams& p) {
    const auto& s = p.activation;
    const double a = p.alpha, g = p.gamma;
    const double r2 = r2_of(g, p.v_prior);
    const double rK = r_K(s, r2);
    const double qK = q_K(st.q2, st.qW, 1.0, s);
    const double one_m = 1 - st.qW * st.qW;
    return g / a * psi_w(st.q_hatW, p.w_prior) + psi_out(qK, rK, p.channel) - g / (2 * a) * st.qW * st.q_hatW +
           (r2 - st.q2) * st.q_hat2 / (4 * a) - std::log1p(st.q_hat2 * one_m) / (4 * a);
}

double mutual_information(double f, const TheoryParams& p, const QuadConfig& q) {
    if (p.channel.kind == Channel::Kind::gaussian)
        return -(p.alpha / p.gamma) * f - p.alpha / (2 * p.gamma) * std::log(kTwoPi * std::numbers::e * p.delta());
    const double rK = r_K(p.activation, r2_of(p.gamma, p.v_prior));
    return p.alpha / p.gamma * (psi_out_generic(rK, rK, p.channel, q) - f);
}

// ---------------------------------------------------------------- fixed-point maps

namespace {

OverlapState universal_map(const OverlapState& x, const TheoryParams& p, const DenoisingCurve& dc, double r2,
                           double rK, const Cached& cc, const QuadConfig& q) {
    OverlapState u;
    const double qK = cc.mu1s + cc.mu2s * x.q2 / 2;
    u.q_hat2 = cc.mu2s == 0 ? 0.0 : 2 * p.alpha * cc.mu2s * dpsi(qK, rK, p.channel, q);
    u.q2 = r2 - dc.mmse(std::max(x.q_hat2, 0.0));
    return u;
}

OverlapState specialisation_map(const OverlapState& x, const TheoryParams& p, double r2, double rK, const Cached& cc,
                                const QuadConfig& q) {
    const auto& s = p.activation;
    const double qW = std::clamp(x.qW, 0.0, 1.0);
    const double qK = cc.mu1s + cc.mu2s * x.q2 / 2 + g_eval(qW, s);
    const double dp = dpsi(qK, rK, p.channel, q);
    const double qh2 = std::max(x.q_hat2, 0.0);
    const double one_m = 1 - qW * qW;
    OverlapState u;
    u.q_hat2 = 2 * p.alpha * cc.mu2s * dp;
    u.q_hatW = std::max(qh2 * qW / (p.gamma * (1 + qh2 * one_m)) + 2 * p.alpha / p.gamma * g_prime(qW, s) * dp, 0.0);
    u.qW = m_w(std::max(x.q_hatW, 0.0), p.w_prior);
    u.q2 = r2 - one_m / (1 + qh2 * one_m);
    return u;
}

void finish(PhaseSolution& sol, const TheoryParams& p, const DenoisingCurve* dc, const QuadConfig& q) {
    const auto& s = p.activation;
    sol.r2 = r2_of(p.gamma, p.v_prior);
    sol.r_K = r_K(s, sol.r2);
    const double qW = sol.phase == Phase::universal ? 0.0 : sol.state.qW;
    sol.q_K = q_K(sol.state.q2, qW, 1.0, s);
    sol.f = sol.phase == Phase::universal ? f_universal(sol.state.q2, sol.state.q_hat2, p, *dc)
                                          : f_specialisation(sol.state, p);
    sol.mi = mutual_information(sol.f, p, q);
    if (p.channel.kind == Channel::Kind::gaussian) {
        sol.eps_opt = p.delta() + s.mu2() * s.mu2() / 2 * (sol.r2 - sol.state.q2) + g_eval(1.0, s) -
                      (qW == 0.0 ? 0.0 : g_eval(qW, s));
    } else {
        sol.eps_opt = eps_opt_generic(sol.q_K, sol.r_K, p.channel, q);
    }
}

}  // namespace

double residual_universal(const OverlapState& x, const TheoryParams& p, const DenoisingCurve& dc,
                          const QuadConfig& q) {
    const double r2 = r2_of(p.gamma, p.v_prior);
    const Cached cc(p.activation);
    const double rK = cc.mu1s + cc.mu2s * r2 / 2 + cc.g1;
    const OverlapState u = universal_map(x, p, dc, r2, rK, cc, q);
    return std::max(std::abs(u.q2 - x.q2), std::abs(u.q_hat2 - x.q_hat2) / (1 + x.q_hat2));
}

double residual_specialisation(const OverlapState& x, const TheoryParams& p, const QuadConfig& q) {
    const double r2 = r2_of(p.gamma, p.v_prior);
    const Cached cc(p.activation);
    const double rK = cc.mu1s + cc.mu2s * r2 / 2 + cc.g1;
    const OverlapState u = specialisation_map(x, p, r2, rK, cc, q);
    return std::max({std::abs(u.q2 - x.q2), std::abs(u.qW - x.qW), std::abs(u.q_hat2 - x.q_hat2) / (1 + x.q_hat2),
                     std::abs(u.q_hatW - x.q_hatW) / (1 + x.q_hatW)});
}

PhaseSolution solve_universal(const TheoryParams& p, const DenoisingCurve& dc, const SolverConfig& cfg,
                              const OverlapState* warm) {
    if (!(p.alpha > 0)) throw DomainError("solve_universal: alpha must be positive");
    const double r2 = r2_of(p.gamma, p.v_prior);
    const Cached cc(p.activation);
    const double rK = cc.mu1s + cc.mu2s * r2 / 2 + cc.g1;
    const double tol = tol_for(p.channel, cfg);

    PhaseSolution sol;
    sol.phase = Phase::universal;
    std::vector<double> x{0.5 * r2, 1.0};
    if (warm) x = {warm->q2, warm->q_hat2};
    if (cc.mu2s == 0) x = {r2 - dc.mmse(0.0), 0.0};
    Damper damp{cfg.theta, cfg.theta_min, {}, 0};
    const std::vector<bool> rel{false, true};
    for (int it = 1; it <= cfg.max_iter; ++it) {
        const OverlapState u = universal_map({x[0], x[1], 0, 0}, p, dc, r2, rK, cc, cfg.quad);
        sol.residual = damp.step(x, {u.q2, u.q_hat2}, rel);
        sol.iters = it;
        if (sol.residual < tol) {
            sol.converged = true;
            break;
        }
    }
    sol.state = {x[0], x[1], 0, 0};
    finish(sol, p, &dc, cfg.quad);
    return sol;
}

PhaseSolution solve_specialisation(const TheoryParams& p, const SolverConfig& cfg, const OverlapState* warm) {
    if (!(p.alpha > 0)) throw DomainError("solve_specialisation: alpha must be positive");
    const double r2 = r2_of(p.gamma, p.v_prior);
    const Cached cc(p.activation);
    const double rK = cc.mu1s + cc.mu2s * r2 / 2 + cc.g1;
    const double tol = tol_for(p.channel, cfg);

    OverlapState seed{0.99 * r2, 0, 0.99, 0};
    if (warm) {
        seed = *warm;
    } else {
        // conjugates from the informative primal seed
        const OverlapState u = specialisation_map(seed, p, r2, rK, cc, cfg.quad);
        seed.q_hat2 = u.q_hat2;
        seed.q_hatW = specialisation_map({seed.q2, seed.q_hat2, seed.qW, 0}, p, r2, rK, cc, cfg.quad).q_hatW;
    }
    std::vector<double> x{seed.qW, seed.q_hatW, seed.q2, seed.q_hat2};
    Damper damp{cfg.theta, cfg.theta_min, {}, 0};
    const std::vector<bool> rel{false, true, false, true};
    PhaseSolution sol;
    sol.phase = Phase::specialisation;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        const OverlapState u = specialisation_map({x[2], x[3], x[0], x[1]}, p, r2, rK, cc, cfg.quad);
        sol.residual = damp.step(x, {u.qW, u.q_hatW, u.q2, u.q_hat2}, rel);
        x[0] = std::clamp(x[0], 0.0, 1.0);
        sol.iters = it;
        if (sol.residual < tol) {
            sol.converged = true;
            break;
        }
        if (x[0] < cfg.collapse * 1e-2 && it > 10) {
            sol.branch_absent = true;
            break;
        }
    }
    sol.state = {x[2], x[3], x[0], x[1]};
    // critical slowing down next to the bifurcation from qW = 0 leaves small unconverged iterates
    if (sol.state.qW < cfg.collapse || (!sol.converged && sol.state.qW < 1e-3)) sol.branch_absent = true;
    finish(sol, p, nullptr, cfg.quad);
    return sol;
}

Equilibrium solve_equilibrium(const TheoryParams& p, const DenoisingCurve& dc, const SolverConfig& cfg,
                              const OverlapState* warm_uni, const OverlapState* warm_sp) {
    Equilibrium e;
    e.universal = solve_universal(p, dc, cfg, warm_uni);
    e.selected = e.universal;
    const PhaseSolution sp = solve_specialisation(p, cfg, warm_sp);
    if (sp.branch_absent) return e;
    e.specialisation = sp;
    const double df = sp.f - e.universal.f;
    if (std::abs(df) < cfg.tie) {
        e.selected.degenerate = true;
    } else if (df > 0) {
        e.selected = sp;
    }
    return e;
}

std::optional<double> find_alpha_sp(TheoryParams p, const DenoisingCurve& dc, double lo, double hi, double tol,
                                    const SolverConfig& cfg) {
    if (!(lo > 0) || !(hi > lo)) throw ConfigError("find_alpha_sp: need 0 < lo < hi");
    if (!(tol > 0)) throw ConfigError("find_alpha_sp: tol must be positive");
    struct Eval {
        double alpha, df;
        bool absent;
        OverlapState uni, sp;
    };
    auto eval = [&](double a, const Eval* near) {
        p.alpha = a;
        const PhaseSolution u = solve_universal(p, dc, cfg, near ? &near->uni : nullptr);
        PhaseSolution s = solve_specialisation(p, cfg, near && !near->absent ? &near->sp : nullptr);
        if (s.branch_absent && near && !near->absent) s = solve_specialisation(p, cfg);
        if (!s.converged && !s.branch_absent) {
            SolverConfig longer = cfg;
            longer.max_iter *= 5;
            s = solve_specialisation(p, longer, &s.state);
            // still creeping next to the bifurcation from qW = 0: indistinguishable from the trivial branch
            if (!s.converged && s.state.qW < 0.05) s.branch_absent = true;
        }
        if (!u.converged || (!s.converged && !s.branch_absent))
            throw ConvergenceError("find_alpha_sp: fixed point did not converge at alpha = " + std::to_string(a));
        return Eval{a, s.f - u.f, s.branch_absent, u.state, s.state};
    };
    Eval top = eval(hi, nullptr);
    if (top.absent || top.df < 0) return std::nullopt;
    Eval bot = eval(lo, nullptr);
    if (!bot.absent && bot.df >= 0) throw DomainError("find_alpha_sp: no sign change, f_sp >= f_uni already at lo");
    while (top.alpha - bot.alpha > tol) {
        const double mid = 0.5 * (bot.alpha + top.alpha);
        Eval m = eval(mid, &top);
        if (!m.absent && m.df >= 0)
            top = m;
        else
            bot = m;
    }
    return 0.5 * (bot.alpha + top.alpha);
}

// ---------------------------------------------------------------- linear regime

double delta1_of(const ActivationSpec& s, double delta) {
    const double m1 = s.mu1();
    if (m1 == 0) throw DomainError("linear regime undefined for mu1 = 0");
    return (delta + s.nu - s.mu0() * s.mu0() - m1 * m1) / (m1 * m1);
}

double solve_linear_regime_delta1(double a, double d1) {
    if (a < 0 || d1 < 0) throw DomainError("solve_linear_regime: need alpha1 >= 0 and Delta1 >= 0");
    // q^2 - (1 + Delta1 + alpha1) q + alpha1 = 0, smaller root in its cancellation-free form
    const double b = 1 + d1 + a;
    return 2 * a / (b + std::sqrt(b * b - 4 * a));
}

double solve_linear_regime(double alpha1, const ActivationSpec& s, double delta) {
    return solve_linear_regime_delta1(alpha1, delta1_of(s, delta));
}

// ---------------------------------------------------------------- sweeps

std::vector<std::string> sweep_columns() {
    return {"alpha", "gamma", "delta", "phase", "q2", "qhat2", "qW", "qhatW", "f", "mi", "eps_opt", "converged", "iters"};
}

SweepRow make_row(const PhaseSolution& s, const TheoryParams& p) {
    SweepRow r;
    r.alpha = p.alpha;
    r.gamma = p.gamma;
    r.delta = p.delta();
    r.phase = to_string(s.phase);
    r.q2 = s.q2_centered(p.gamma, p.v_prior);
    r.qhat2 = s.state.q_hat2;
    r.qW = s.state.qW;
    r.qhatW = s.state.q_hatW;
    r.f = s.f;
    r.mi = s.mi;
    r.eps_opt = s.eps_opt;
    r.converged = s.converged;
    r.iters = s.iters;
    return r;
}

std::vector<SweepRow> sweep_theory(TheoryParams p, const DenoisingCurve& dc, const std::vector<double>& alphas,
                                   const SolverConfig& cfg, int workers) {
    // contiguous chunks, each warm-started along its own alpha line
    auto run = [&](std::size_t b, std::size_t e) {
        std::vector<std::vector<SweepRow>> out;
        TheoryParams q = p;
        std::optional<OverlapState> wu, ws;
        for (std::size_t i = b; i < e; ++i) {
            q.alpha = alphas[i];
            Equilibrium eq = solve_equilibrium(q, dc, cfg, wu ? &*wu : nullptr, ws ? &*ws : nullptr);
            wu = eq.universal.state;
            std::vector<SweepRow> rows;
            const bool sp_wins = eq.selected.phase == Phase::specialisation;
            SweepRow ru = make_row(eq.universal, q);
            ru.phase = sp_wins ? "universal_metastable" : (eq.selected.degenerate ? "universal_degenerate" : "universal");
            rows.push_back(ru);
            if (eq.specialisation) {
                ws = eq.specialisation->state;
                SweepRow rs = make_row(*eq.specialisation, q);
                rs.phase = sp_wins ? "specialisation" : "specialisation_metastable";
                rows.push_back(rs);
            } else {
                ws.reset();
            }
            out.push_back(std::move(rows));
        }
        return out;
    };
    const std::size_t n = alphas.size();
    workers = std::max(1, std::min<int>(workers, int(n)));
    std::vector<std::future<std::vector<std::vector<SweepRow>>>> jobs;
    for (int w = 0; w < workers; ++w) {
        const std::size_t b = n * w / workers, e = n * (w + 1) / workers;
        jobs.push_back(std::async(workers == 1 ? std::launch::deferred : std::launch::async, run, b, e));
    }
    std::vector<SweepRow> rows;
    for (auto& j : jobs)
        for (auto& group : j.get())
            for (auto& r : group) rows.push_back(std::move(r));
    return rows;
}

}  // namespace shallowbayes
