// Acceptance suite. One PASS/FAIL line per criterion; exit status 1 if any criterion fails.
//   acceptance [fast|slow|all] [--cache DIR] [--only GROUP]
// The spectral cache defaults to $SHALLOWBAYES_CACHE, else the tables shipped in data/spectral.

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "shallowbayes/activation.hpp"
#include "shallowbayes/gamp.hpp"
#include "shallowbayes/generalization.hpp"
#include "shallowbayes/mcmc.hpp"
#include "shallowbayes/saddle.hpp"
#include "shallowbayes/spectral.hpp"

using namespace shallowbayes;

namespace {

const double kPi = std::numbers::pi;
const double kLn2 = std::numbers::ln2;

std::string g_cache;
int g_failures = 0;

void report(const std::string& name, bool pass, const char* fmt, ...) __attribute__((format(printf, 3, 4)));
void report(const std::string& name, bool pass, const char* fmt, ...) {
    char buf[1024];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    std::printf("%s %-34s %s\n", pass ? "PASS" : "FAIL", name.c_str(), buf);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const DenoisingCurve& curve(VPrior v) {
    static std::map<VPrior, DenoisingCurve> cache;
    auto it = cache.find(v);
    if (it == cache.end())
        it = cache.emplace(v, DenoisingCurve::from_table(cached_table(0.5, v, SpectralConfig{}, g_cache))).first;
    return it->second;
}

TheoryParams theory(const std::string& act, double alpha, double delta, VPrior v = VPrior::constant_one,
                    WPrior w = WPrior::gaussian) {
    TheoryParams p;
    p.activation = builtin(act);
    p.alpha = alpha;
    p.gamma = 0.5;
    p.channel = Channel::gaussian(delta);
    p.v_prior = v;
    p.w_prior = w;
    return p;
}

double rel(double x, double ref) { return std::abs(x / ref - 1); }

// ---------------------------------------------------------------------------------------------- fast

void hermite() {
    auto t0 = std::chrono::steady_clock::now();
    auto relu = builtin("relu");
    auto elu = builtin("elu");
    const double el = seconds_since(t0);
    const double s = 1 / std::sqrt(2 * kPi);
    const double relu_ref[] = {s, 0.5, s, 0.0, -s};
    const double elu_ref[] = {0.16052, 0.76158, 0.26158, -0.13736, -0.13736};
    double er = 0, ee = 0;
    for (int l = 0; l <= 4; ++l) {
        er = std::max(er, std::abs(relu.mu[l] - relu_ref[l]));
        ee = std::max(ee, std::abs(elu.mu[l] - elu_ref[l]));
    }
    report("hermite/relu", er < 1e-6, "max|mu-ref| = %.2e (tol 1e-6)", er);
    // five printed digits: rounding leaves at most half a unit in the last place
    report("hermite/elu", ee <= 5e-6, "max|mu-ref| = %.2e (tol 5e-6)", ee);
    report("hermite/runtime", el < 1.0, "%.3f s for both activations (limit 1 s)", el);
}

void spectral_oracles() {
    auto e = sample_spectrum(0.0, 0.5, VPrior::constant_one, 1000, 4, 11);
    auto cube = mu_cubed_integral(e, {0.1, 0.05, 0.025}, false);
    report("spectral/cube_at_zero", rel(cube.value, 1.0) < 0.01, "cube = %.5f (target 1 within 1%%)", cube.value);

    IotaConfig ic;
    ic.control_variate = false;
    ic.seed = 12;
    auto io = iota(0.0, 0.5, VPrior::constant_one, ic);
    report("spectral/iota_at_zero", std::abs(io.value) < 1e-3, "iota = %.2e (tol 1e-3)", io.value);

    Engine rng = make_stream(13, Stream::spectral, 0);
    const int d = 1000;
    auto l = symmetric_eigenvalues(sample_goe(d, rng));
    auto xi = rie_shrink(l, 1.0, rie_default_eta(l));
    double ss = 0;
    for (double x : xi) ss += x * x;
    const double rms = std::sqrt(ss / d);
    report("spectral/rie_pure_goe", rms < 0.05, "rms(xi) = %.4f at d=1000 (limit 0.05)", rms);
}

void relu_transition() {
    auto p = theory("relu", 1.0, 0.1);
    auto t0 = std::chrono::steady_clock::now();
    auto a = find_alpha_sp(p, curve(VPrior::constant_one), 2.0, 10.0, 1e-3);
    const double v = a ? *a : NAN;
    report("alpha_sp/relu", a && std::abs(v - 5.54) <= 0.1, "alpha_sp = %.4f (target 5.54 +- 0.1, %.1f s)", v,
           seconds_since(t0));
}

void sigma3_triple() {
    struct Row {
        VPrior v;
        const char* name;
        double alpha_sp, q2_uni, q2_tol;
    };
    const Row rows[] = {{VPrior::constant_one, "constant", 0.790, 0.883, 0.01},
                        {VPrior::rademacher, "rademacher", 0.678, 0.868, 0.01},
                        {VPrior::gaussian, "gaussian", 0.933, 0.903, 0.02}};
    for (const auto& r : rows) {
        auto p = theory("he2he3", 1.0, 0.1, r.v);
        const auto& dc = curve(r.v);
        auto u = solve_universal(p, dc);
        const double q = u.q2_centered(0.5, r.v);
        report(std::string("sigma3/q2_uni/") + r.name, u.converged && std::abs(q - r.q2_uni) <= r.q2_tol,
               "q2 = %.4f (target %.3f +- %.2f)", q, r.q2_uni, r.q2_tol);
        auto a = find_alpha_sp(p, dc, 0.3, 2.0, 1e-4);
        const double v = a ? *a : NAN;
        report(std::string("sigma3/alpha_sp/") + r.name, a && std::abs(v - r.alpha_sp) <= 0.02,
               "alpha_sp = %.4f (target %.3f +- 0.02)", v, r.alpha_sp);
    }
    auto s = solve_specialisation(theory("he2he3", 1.0, 0.1));
    const double q = s.q2_centered(0.5, VPrior::constant_one);
    report("sigma3/q2_sp", s.converged && !s.branch_absent && std::abs(q - 0.941) <= 0.01,
           "q2 = %.4f (target 0.941 +- 0.01)", q);
}

void small_noise_errors() {
    auto p = theory("relu", 5.0, 1e-4);
    auto s = solve_specialisation(p);
    const double esp = s.eps_opt - 1e-4;
    report("errors/relu_sp", s.converged && rel(esp, 1.115e-5) <= 0.05, "eps-Delta = %.4e (target 1.115e-5 +- 5%%)",
           esp);
    struct Row {
        VPrior v;
        const char* name;
        double target;
    };
    const Row rows[] = {{VPrior::constant_one, "constant", 1.217e-2},
                        {VPrior::rademacher, "rademacher", 1.218e-2},
                        {VPrior::gaussian, "gaussian", 1.210e-2}};
    for (const auto& r : rows) {
        p.v_prior = r.v;
        auto u = solve_universal(p, curve(r.v));
        const double e = u.eps_opt - 1e-4;
        report(std::string("errors/relu_uni/") + r.name, u.converged && rel(e, r.target) <= 0.01,
               "eps-Delta = %.5e (target %.3e +- 1%%)", e, r.target);
    }
}

void gamp_vs_theory() {
    const int d = 150, instances = 8;
    const long n_test = 10000;
    for (double alpha : {1.0, 2.0, 4.0}) {
        ModelParams mp;
        mp.d = d;
        mp.alpha = alpha;
        mp.delta = 0.1;
        mp.activation = builtin("relu");
        auto u = solve_universal(theory("relu", alpha, 0.1), curve(VPrior::constant_one));
        double mean = 0, worst = 0;
        int conv = 0;
        auto t0 = std::chrono::steady_clock::now();
        for (int i = 0; i < instances; ++i) {
            auto t = sample_teacher(mp, 31, i);
            auto ds = generate_dataset(t, mp, 31, i);
            auto te = generate_test_set(t, mp, n_test, 31, i);
            auto st = gamp_rie_fit(ds, mp.activation, mp.delta);
            conv += st.converged;
            const double mse = (predict(st, te.X) - te.y).squaredNorm() / double(n_test);
            mean += mse / instances;
            worst = std::max(worst, rel(mse, u.eps_opt));
        }
        char name[64];
        std::snprintf(name, sizeof name, "gamp/relu_alpha%g", alpha);
        report(name, rel(mean, u.eps_opt) <= 0.10 && conv == instances,
               "test mse %.5f vs eps_uni %.5f (rel %.3f, tol 0.10; worst instance %.3f; %d/%d converged; %.0f s)",
               mean, u.eps_opt, rel(mean, u.eps_opt), worst, conv, instances, seconds_since(t0));
    }
}

// -------------------------------------------------------------------------------------------- properties

double central(const std::function<double(double)>& f, double x, double h) { return (f(x + h) - f(x - h)) / (2 * h); }

void fixed_points() {
    const auto& dc = curve(VPrior::constant_one);
    double res = 0, grad = 0;
    bool conv = true;
    for (double alpha : {0.5, 1.0, 3.0}) {
        auto p = theory("he2he3", alpha, 0.1);
        auto u = solve_universal(p, dc);
        auto s = solve_specialisation(p);
        conv = conv && u.converged && s.converged;
        res = std::max({res, residual_universal(u.state, p, dc), s.branch_absent ? 0.0 : residual_specialisation(s.state, p)});

        const double q = u.state.q2, h = u.state.q_hat2;
        grad = std::max(grad, std::abs(central([&](double x) { return f_universal(x, h, p, dc); }, q, 1e-5)));
        grad = std::max(grad, std::abs(central([&](double x) { return f_universal(q, x, p, dc); }, h, 1e-5)));
        if (s.branch_absent) continue;
        const OverlapState x = s.state;
        const double vals[] = {x.q2, x.q_hat2, x.qW, x.q_hatW};
        for (int i = 0; i < 4; ++i) {
            auto at = [&](double v) {
                OverlapState y = x;
                (i == 0 ? y.q2 : i == 1 ? y.q_hat2 : i == 2 ? y.qW : y.q_hatW) = v;
                return f_specialisation(y, p);
            };
            double step = 1e-5 * std::max(1.0, std::abs(vals[i]));
            if (i == 2) step = std::min(step, (1 - vals[i]) / 2);
            grad = std::max(grad, std::abs(central(at, vals[i], step)));
        }
    }
    report("property/fixed_point_residual", conv && res < 1e-7, "max residual %.2e (tol 1e-7)", res);
    report("property/stationarity", grad < 1e-4, "max |df/dx| by central differences %.2e (tol 1e-4)", grad);
}

void monotone_error() {
    std::vector<double> alphas;
    for (double a = 0.25; a <= 10.0 + 1e-9; a += 0.25) alphas.push_back(a);
    auto rows = sweep_theory(theory("relu", 1.0, 0.1), curve(VPrior::constant_one), alphas);
    // equilibrium curve, and each branch on its own
    std::map<std::string, std::vector<double>> curves;
    bool conv = true;
    for (const auto& r : rows) {
        conv = conv && r.converged;
        const bool meta = r.phase.find("metastable") != std::string::npos;
        if (!meta) curves["equilibrium"].push_back(r.eps_opt);
        curves[r.phase.substr(0, r.phase.find('_'))].push_back(r.eps_opt);
    }
    double worst = -1e300;
    for (const auto& [name, e] : curves)
        for (size_t i = 1; i < e.size(); ++i) worst = std::max(worst, e[i] - e[i - 1]);
    report("property/eps_monotone", conv && curves["equilibrium"].size() == alphas.size() && worst <= 1e-9,
           "largest step %.2e along equilibrium and both branches, %zu alphas in [0.25, 10]", worst, alphas.size());
}

// The bound is on the equilibrium MI; the universal branch does not see the binary prior and is not bounded.
void rademacher_mi() {
    auto p = theory("he2he3", 1.0, 0.1, VPrior::constant_one, WPrior::rademacher);
    const auto& dc = curve(VPrior::constant_one);
    double worst = -1e300, at20 = 0;
    for (double a : {0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 20.0}) {
        p.alpha = a;
        const double mi = solve_equilibrium(p, dc).selected.mi;
        worst = std::max(worst, mi);
        if (a == 20.0) at20 = mi;
    }
    report("property/mi_bound", worst <= kLn2 + 0.01, "max equilibrium MI %.5f over alpha in [0.25, 20] (bound %.5f)",
           worst, kLn2 + 0.01);
    report("property/mi_saturates", rel(at20, kLn2) <= 0.02, "MI(alpha=20) = %.5f (ln2 = %.5f, tol 2%%)", at20, kLn2);
}

void nishimori_toy() {
    ModelParams p;
    p.d = 10;
    p.alpha = 1.0;
    p.delta = 1.25;
    p.w_prior = WPrior::rademacher;
    p.activation = builtin("he2he3");
    const int datasets = 16, chains = 2;
    std::vector<NishimoriDataset> data;
    for (int i = 0; i < datasets; ++i) {
        auto t = sample_teacher(p, 41, i);
        auto ds = generate_dataset(t, p, 41, i);
        NishimoriDataset nd{{t.W, t.v}, {}};
        for (int c = 0; c < chains; ++c) {
            ChainConfig cc;
            cc.init = InitKind::uninformative;
            cc.steps = 4000;
            cc.seed = 42;
            cc.chain_index = i * chains + c;
            cc.check_every = 4000;
            auto r = metropolis_binary(ds, t, p, cc);
            nd.samples.push_back({r.W, r.v});
        }
        data.push_back(std::move(nd));
    }
    auto rep = nishimori_check(data, p.activation);
    double zmax = 0;
    for (double z : rep.z) zmax = std::max(zmax, std::abs(z));
    report("property/nishimori", rep.pass, "max |z| = %.2f over Q1, Q2, g(QW) on %d toy datasets (limit 3)", zmax,
           rep.datasets);
}

void two_spin_toy() {
    ModelParams p;
    p.d = 2;
    p.alpha = 0.75;
    p.delta = 2.0;
    p.w_prior = WPrior::rademacher;
    p.v_prior = VPrior::rademacher;
    p.activation = builtin("he2he3");
    auto t = sample_teacher(p, 8);
    auto ds = generate_dataset(t, p, 8);
    double worst = 0;
    for (bool fixed : {true, false}) {
        std::map<int, double> exact, counts;
        double Z = 0;
        for (int s = 0; s < (fixed ? 4 : 8); ++s) {
            Matrix W(1, 2);
            W << (s & 1 ? 1.0 : -1.0), (s & 2 ? 1.0 : -1.0);
            Vector v = t.v;
            if (!fixed) v[0] = s & 4 ? 1.0 : -1.0;
            exact[s] = std::exp(-potential_energy(ds, W, v, p));
            Z += exact[s];
        }
        ChainConfig c;
        c.steps = 1000000;
        c.fixed_readouts = fixed;
        c.seed = 19;
        c.on_step = [&](long, const Matrix& W, const Vector& v) {
            int s = (W(0, 0) > 0 ? 1 : 0) + (W(0, 1) > 0 ? 2 : 0);
            if (!fixed && v[0] > 0) s += 4;
            counts[s] += 1.0;
        };
        metropolis_binary(ds, t, p, c);
        double tv = 0;
        for (auto& [s, w] : exact) tv += 0.5 * std::abs(w / Z - counts[s] / double(c.steps));
        worst = std::max(worst, tv);
    }
    report("property/two_spin_toy", worst < 0.01, "TV to exact enumeration %.4f (limit 0.01)", worst);
}

// he2 network with Rademacher read-outs: the effective matrix-sensing problem is exact, and the
// same S2 is observed through GOE sensing matrices for comparison.
void sensing_equivalence() {
    const int d = 60, instances = 8;
    const double alpha = 1.0, delta = 0.1;
    ModelParams mp;
    mp.d = d;
    mp.alpha = alpha;
    mp.delta = delta;
    mp.v_prior = VPrior::rademacher;
    mp.activation = builtin("he2");
    const double dt = delta_tilde(mp.activation, delta);
    double mse_real = 0, mse_goe = 0, q_goe = 0;
    bool conv = true;
    for (int i = 0; i < instances; ++i) {
        auto t = sample_teacher(mp, 51, i);
        auto ds = generate_dataset(t, mp, 51, i);
        const Matrix S = teacher_s2(t);
        const double norm = S.squaredNorm() / d;
        auto st = gamp_rie_fit(ds, mp.activation, delta);
        Engine rng = make_stream(51, Stream::spectral, 1000 + i);
        const Matrix G = sample_goe_sensing(ds.X.rows(), d, rng);
        const auto A = goe_sensing(G, d);
        Vector y = A.forward(S);
        std::normal_distribution<double> N;
        for (long m = 0; m < y.size(); ++m) y[m] += std::sqrt(dt) * N(rng);
        auto r = amp_matrix_sensing(A, y, dt);
        conv = conv && st.converged && r.converged;
        mse_real += (st.S2_hat - S).squaredNorm() / d / instances;
        mse_goe += (r.S - S).squaredNorm() / d / instances;
        // overlap in units of the teacher's own norm, whose large-d value is r2 = 1
        q_goe += (r.S.array() * S.array()).sum() / d / norm / instances;
    }
    report("property/glm_equivalence", conv && rel(mse_real, mse_goe) <= 0.05,
           "S2 mse real %.5f vs GOE %.5f (rel %.3f, tol 0.05; d=%d, %d instances)", mse_real, mse_goe,
           rel(mse_real, mse_goe), d, instances);
    auto u = solve_universal(theory("he2", alpha, delta, VPrior::rademacher), curve(VPrior::rademacher));
    const double q = u.q2_centered(0.5, VPrior::rademacher);
    report("property/amp_state_evolution", rel(q_goe, q) <= 0.05, "AMP overlap %.4f vs q2* %.4f (rel %.3f, tol 0.05)",
           q_goe, q, rel(q_goe, q));
}

// ---------------------------------------------------------------------------------------------- slow

struct Plateau {
    double mean = 0, se = 0;
    bool equilibrated = false;
};

// Mean of the centred q2 ratio over trace points with step in [from, to). Read-outs are fixed to the teacher's.
Plateau plateau(const ChainResult& r, const TeacherInstance& t, long from, long to) {
    std::vector<double> x;
    for (const auto& pt : r.trace.points)
        if (pt.step >= from && pt.step < to) x.push_back(centred_q2_ratio(pt.q[1], t.v.mean(), t));
    auto [m, se] = batch_mean(x);
    return {m, se, equilibration_gate(x).equilibrated};
}

void mcmc_case(const std::string& name, const ModelParams& mp, bool hmc, InitKind init, long steps, long from,
               double target) {
    auto t = sample_teacher(mp, 61);
    auto ds = generate_dataset(t, mp, 61);
    ChainConfig c;
    c.init = init;
    c.steps = steps;
    c.seed = 62;
    auto t0 = std::chrono::steady_clock::now();
    auto r = hmc ? hmc_gaussian(ds, t, mp, c) : metropolis_binary(ds, t, mp, c);
    auto pl = plateau(r, t, from, steps + 1);
    report(name, rel(pl.mean, target) <= 0.05,
           "q2 plateau %.4f +- %.4f over steps [%ld, %ld] vs theory %.4f (rel %.3f, tol 0.05; acc %.2f; gate %s; %.0f s)",
           pl.mean, pl.se, from, steps, target, rel(pl.mean, target), r.acceptance, pl.equilibrated ? "ok" : "drift",
           seconds_since(t0));
}

// Informative chains past alpha_sp are compared to the specialisation branch. Uninformative chains are
// compared to the universal branch both below alpha_sp (where it is the equilibrium) and past it (where
// it is metastable and the chain escapes slowly, so the plateau is read before the escape).
void mcmc_suite() {
    const auto& dc = curve(VPrior::constant_one);
    auto q2 = [](const PhaseSolution& s) { return s.q2_centered(0.5, VPrior::constant_one); };

    ModelParams mp;
    mp.d = 100;
    mp.delta = 0.1;
    mp.activation = builtin("he2he3");
    auto tg = theory("he2he3", 1.0, 0.1);
    auto ag = find_alpha_sp(tg, dc, 0.3, 2.0, 1e-3);
    std::printf("INFO hmc setting: gaussian W, delta 0.1, alpha_sp = %.3f\n", ag ? *ag : NAN);
    auto e1 = solve_equilibrium(tg, dc);
    mp.alpha = 1.0;
    mcmc_case("mcmc/hmc_informative_a1", mp, true, InitKind::informative, 300, 100, q2(*e1.specialisation));
    mcmc_case("mcmc/hmc_uninformative_a1", mp, true, InitKind::uninformative, 500, 100, q2(e1.universal));
    tg.alpha = mp.alpha = 0.6;
    mcmc_case("mcmc/hmc_uninformative_a0.6", mp, true, InitKind::uninformative, 400, 100,
              q2(solve_universal(tg, dc)));

    mp.delta = 1.25;
    mp.w_prior = WPrior::rademacher;
    auto tb = theory("he2he3", 2.0, 1.25, VPrior::constant_one, WPrior::rademacher);
    auto ab = find_alpha_sp(tb, dc, 0.2, 20.0, 1e-3);
    std::printf("INFO metropolis setting: binary W, delta 1.25, alpha_sp = %.3f\n", ab ? *ab : NAN);
    auto e2 = solve_equilibrium(tb, dc);
    mp.alpha = 2.0;
    mcmc_case("mcmc/metropolis_informative_a2", mp, false, InitKind::informative, 200, 50, q2(*e2.specialisation));
    mcmc_case("mcmc/metropolis_uninformative_a2", mp, false, InitKind::uninformative, 3000, 1000, q2(e2.universal));
    tb.alpha = mp.alpha = 1.2;
    mcmc_case("mcmc/metropolis_uninformative_a1.2", mp, false, InitKind::uninformative, 1500, 300,
              q2(solve_universal(tb, dc)));
}

}  // namespace

int main(int argc, char** argv) {
    std::string suite = "fast", only;
    if (const char* env = std::getenv("SHALLOWBAYES_CACHE")) g_cache = env;
    else g_cache = SHALLOWBAYES_DATA_DIR "/spectral";
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--cache" && i + 1 < argc) g_cache = argv[++i];
        else if (a == "--only" && i + 1 < argc) only = argv[++i];
        else if (a == "fast" || a == "slow" || a == "all") suite = a;
        else {
            std::fprintf(stderr, "usage: %s [fast|slow|all] [--cache DIR] [--only GROUP]\n", argv[0]);
            return 2;
        }
    }
    std::printf("INFO spectral cache: %s\n", g_cache.c_str());
    const std::vector<std::pair<std::string, std::function<void()>>> fast = {
        {"hermite", hermite},
        {"spectral", spectral_oracles},
        {"relu_transition", relu_transition},
        {"sigma3", sigma3_triple},
        {"errors", small_noise_errors},
        {"gamp", gamp_vs_theory},
        {"fixed_points", fixed_points},
        {"monotone", monotone_error},
        {"mi", rademacher_mi},
        {"nishimori", nishimori_toy},
        {"two_spin", two_spin_toy},
        {"sensing", sensing_equivalence},
    };
    const std::vector<std::pair<std::string, std::function<void()>>> slow = {{"mcmc", mcmc_suite}};
    auto run = [&](const auto& groups) {
        for (const auto& [name, fn] : groups) {
            if (!only.empty() && name != only) continue;
            try {
                fn();
            } catch (const std::exception& ex) {
                report(name, false, "uncaught exception: %s", ex.what());
            }
        }
    };
    if (suite != "slow") run(fast);
    if (suite != "fast") run(slow);
    std::printf("%s: %d failure(s)\n", g_failures ? "FAILED" : "ALL PASSED", g_failures);
    return g_failures ? 1 : 0;
}
