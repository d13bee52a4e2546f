// Command-line driver: theory sweeps, alpha_sp, GAMP-RIE and MCMC experiments, spectral tables.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <set>

#include "CLI11.hpp"

#include "shallowbayes/config.hpp"
#include "shallowbayes/errors.hpp"
#include "shallowbayes/io.hpp"
#include "shallowbayes/version.hpp"

namespace fs = std::filesystem;
using namespace shallowbayes;

namespace {

constexpr int kOk = 0, kFailure = 1, kConfig = 2, kNoConvergence = 3;

struct Globals {
    std::string config_path;
    std::vector<std::string> sets;
    long seed = -1;
    int workers = 0;
    std::string out_dir;
    bool dry_run = false;
};

struct Context {
    RunConfig cfg;
    std::string out_dir;
    int workers = 1;
    OutputMeta meta(const std::string& command) const {
        return {command, cfg.hash(), kVersion, cfg.json()};
    }
    std::string out(const std::string& name) const { return (fs::path(out_dir) / name).string(); }
};

Context make_context(const Globals& g, const std::string& positional) {
    Context ctx;
    const std::string path = !positional.empty() ? positional : g.config_path;
    if (!path.empty()) ctx.cfg = RunConfig::from_toml_file(path);
    for (const auto& s : g.sets) ctx.cfg.set(s);
    if (g.seed >= 0) ctx.cfg.set("run.seed=" + std::to_string(g.seed));
    ctx.cfg.validate();
    ctx.workers = g.workers > 0 ? g.workers : int(ctx.cfg.get_int("run.workers", 1));
    if (ctx.workers < 1) throw ConfigError("workers must be >= 1");
    ctx.out_dir = !g.out_dir.empty() ? g.out_dir : ctx.cfg.get_string("run.out_dir", ".");
    return ctx;
}

void prepare_out(const Context& ctx) { fs::create_directories(ctx.out_dir); }

DenoisingCurve load_curve(const Context& ctx, const TheoryParams& p) {
    const std::string dir = cache_dir(ctx.cfg);
    return DenoisingCurve::from_table(cached_table(p.gamma, p.v_prior, spectral_config(ctx.cfg), dir, true));
}

// ---------------------------------------------------------------- hermite

int cmd_hermite(const std::string& name, const std::vector<double>& coeffs, int L, const Globals& g) {
    const ActivationSpec s = builtin(name, coeffs, std::max(L, 50));
    nlohmann::json conf = {{"activation", name}, {"he_coeffs", coeffs}, {"L", L}};
    const OutputMeta meta{"hermite", fnv1a_hex(conf.dump()), kVersion, conf};
    nlohmann::json body;
    body["activation"] = name;
    std::vector<double> mu(s.mu.begin(), s.mu.begin() + std::min<std::size_t>(L + 1, s.mu.size()));
    body["mu"] = mu;
    body["nu"] = s.nu;
    body["g1"] = g_eval(1.0, s);
    std::printf("# config_hash: %s\n# code_version: %s\n", meta.config_hash.c_str(), kVersion);
    for (std::size_t l = 0; l < mu.size(); ++l) std::printf("mu_%zu %.10g\n", l, mu[l]);
    std::printf("nu %.10g\ng(1) %.10g\n", s.nu, g_eval(1.0, s));
    if (!g.out_dir.empty()) {
        fs::create_directories(g.out_dir);
        write_json((fs::path(g.out_dir) / "hermite.json").string(), meta, body);
    }
    return kOk;
}

// ---------------------------------------------------------------- sweep-theory

std::vector<std::string> sweep_cells(const SweepRow& r) {
    return {format_double(r.alpha), format_double(r.gamma), format_double(r.delta), r.phase,
            format_double(r.q2),    format_double(r.qhat2), format_double(r.qW),    format_double(r.qhatW),
            format_double(r.f),     format_double(r.mi),    format_double(r.eps_opt), r.converged ? "1" : "0",
            std::to_string(r.iters)};
}

int cmd_sweep(const Context& ctx) {
    const TheoryParams p = theory_params(ctx.cfg);
    const std::vector<double> alphas = alpha_grid(ctx.cfg);
    prepare_out(ctx);
    const std::string path = ctx.out("sweep.csv");

    // resume: keep rows of an interrupted run with the same config
    std::set<std::string> done;
    bool append = false;
    if (fs::exists(path)) {
        const CsvTable old = read_csv(path);
        if (old.config_hash == ctx.cfg.hash() && old.columns == sweep_columns()) {
            append = true;
            for (const auto& r : old.rows)
                if (!r.empty()) done.insert(r[0]);
        }
    }
    CsvWriter w(path, ctx.meta("sweep-theory"), sweep_columns(), append);
    std::vector<double> todo;
    for (double a : alphas)
        if (!done.count(format_double(a))) todo.push_back(a);
    if (todo.empty()) return kOk;

    const DenoisingCurve dc = load_curve(ctx, p);
    const SolverConfig sc = solver_config(ctx.cfg);
    bool all_converged = true;
    // one grid point per worker per batch so an interruption loses at most one batch
    for (std::size_t i = 0; i < todo.size(); i += std::size_t(ctx.workers)) {
        std::vector<double> batch(todo.begin() + long(i), todo.begin() + long(std::min(todo.size(), i + ctx.workers)));
        for (const auto& r : sweep_theory(p, dc, batch, sc, ctx.workers)) {
            w.row(sweep_cells(r));
            all_converged = all_converged && r.converged;
        }
    }
    return all_converged ? kOk : kNoConvergence;
}

// ---------------------------------------------------------------- alpha-sp

int cmd_alpha_sp(const Context& ctx) {
    const TheoryParams p = theory_params(ctx.cfg);
    const double lo = ctx.cfg.get_double("sweep.lo", 0.1), hi = ctx.cfg.get_double("sweep.hi", 10.0);
    const double tol = ctx.cfg.get_double("sweep.tol", 1e-4);
    prepare_out(ctx);
    const DenoisingCurve dc = load_curve(ctx, p);
    const auto a = find_alpha_sp(p, dc, lo, hi, tol, solver_config(ctx.cfg));
    nlohmann::json body = {{"lo", lo}, {"hi", hi}, {"tol", tol}};
    body["alpha_sp"] = a ? nlohmann::json(*a) : nlohmann::json(nullptr);
    if (a) {
        TheoryParams q = p;
        q.alpha = *a;
        const auto eq = solve_equilibrium(q, dc, solver_config(ctx.cfg));
        body["universal"] = {{"q2", eq.universal.q2_centered(p.gamma, p.v_prior)}, {"f", eq.universal.f}};
        if (eq.specialisation)
            body["specialisation"] = {{"q2", eq.specialisation->q2_centered(p.gamma, p.v_prior)},
                                      {"qW", eq.specialisation->state.qW},
                                      {"f", eq.specialisation->f}};
        std::printf("alpha_sp %.6f\n", *a);
    } else {
        std::printf("alpha_sp none\n");
    }
    write_json(ctx.out("alpha_sp.json"), ctx.meta("alpha-sp"), body);
    return kOk;
}

// ---------------------------------------------------------------- gamp-run

nlohmann::json model_json(const ModelParams& p) {
    return {{"d", p.d},
            {"k", p.k()},
            {"n", p.n()},
            {"gamma", p.gamma},
            {"alpha", p.alpha},
            {"delta", p.delta},
            {"w_prior", to_string(p.w_prior)},
            {"v_prior", to_string(p.v_prior)},
            {"activation", p.activation.name}};
}

int cmd_gamp(const Context& ctx) {
    const ModelParams p = model_params(ctx.cfg);
    const GampConfig gc = gamp_config(ctx.cfg);
    const long instances = ctx.cfg.get_int("run.instances", 1);
    const long n_test = ctx.cfg.get_int("gamp.n_test", 10000);
    const bool trace = ctx.cfg.get_bool("gamp.trace", false);
    const std::uint64_t seed = std::uint64_t(ctx.cfg.get_int("run.seed", 0));
    if (instances < 1 || n_test < 1) throw ConfigError("run.instances and gamp.n_test must be positive");
    prepare_out(ctx);

    struct Out {
        GampState st;
        double mse_train = 0, mse_test = 0, time = 0;
    };
    auto run = [&](long i) {
        const auto t0 = std::chrono::steady_clock::now();
        Out o;
        const auto teacher = sample_teacher(p, seed, std::uint64_t(i));
        const auto train = generate_dataset(teacher, p, seed, std::uint64_t(i));
        const auto test = generate_test_set(teacher, p, n_test, seed, std::uint64_t(i));
        o.st = gamp_rie_fit(train, p.activation, p.delta, gc);
        o.mse_train = (predict(o.st, train.X) - train.y).squaredNorm() / double(train.y.size());
        o.mse_test = (predict(o.st, test.X) - test.y).squaredNorm() / double(test.y.size());
        o.time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return o;
    };
    std::vector<Out> outs(instances);
    for (long i = 0; i < instances; i += ctx.workers) {
        std::vector<std::future<Out>> fut;
        for (long j = i; j < std::min(instances, i + ctx.workers); ++j) fut.push_back(std::async(std::launch::async, run, j));
        for (long j = i; j < std::min(instances, i + ctx.workers); ++j) outs[j] = fut[j - i].get();
    }

    nlohmann::json per = nlohmann::json::array();
    double iters = 0, tr = 0, te = 0, tm = 0;
    bool converged = true;
    for (long i = 0; i < instances; ++i) {
        const auto& o = outs[i];
        per.push_back({{"instance", i},
                       {"iters", o.st.iters},
                       {"converged", o.st.converged},
                       {"diverged", o.st.diverged},
                       {"mse_train", o.mse_train},
                       {"mse_test", o.mse_test},
                       {"time", o.time}});
        iters += o.st.iters / double(instances);
        tr += o.mse_train / double(instances);
        te += o.mse_test / double(instances);
        tm += o.time;
        converged = converged && o.st.converged;
        if (trace) {
            CsvWriter w(ctx.out("gamp_trace_" + std::to_string(i) + ".csv"), ctx.meta("gamp-run"),
                        {"iter", "sigma2", "V", "change", "residual"});
            for (const auto& it : o.st.trace) w.row(std::vector<double>{double(it.iter), it.sigma2, it.V, it.change, it.residual});
        }
    }
    nlohmann::json params = model_json(p);
    params["instances"] = instances;
    params["n_test"] = n_test;
    params["seed"] = seed;
    params["damping"] = gc.damping;
    params["tol"] = gc.tol;
    params["max_iter"] = gc.max_iter;
    nlohmann::json body = {{"params", params}, {"iters", iters},       {"mse_train", tr},
                           {"mse_test", te},   {"time", tm},           {"converged", converged},
                           {"instances", per}};
    write_json(ctx.out("gamp.json"), ctx.meta("gamp-run"), body);
    std::printf("gamp mse_test %.6g mse_train %.6g iters %.1f\n", te, tr, iters);
    return converged ? kOk : kNoConvergence;
}

// ---------------------------------------------------------------- mcmc-run

void save_snapshot(const std::string& path, const ChainResult& r) {
    nlohmann::json j;
    j["k"] = r.W.rows();
    j["d"] = r.W.cols();
    j["W"] = std::vector<double>(r.W.data(), r.W.data() + r.W.size());  // column-major
    j["v"] = std::vector<double>(r.v.data(), r.v.data() + r.v.size());
    j["steps"] = r.steps;
    j["step_size"] = r.step_size;
    std::ofstream(path) << j.dump() << "\n";
}

void load_snapshot(const std::string& path, ChainConfig& c) {
    std::ifstream in(path);
    if (!in) throw ConfigError("missing snapshot " + path);
    const auto j = nlohmann::json::parse(in);
    const long k = j.at("k"), d = j.at("d");
    const auto W = j.at("W").get<std::vector<double>>();
    const auto v = j.at("v").get<std::vector<double>>();
    c.start_W = Eigen::Map<const Matrix>(W.data(), k, d);
    c.start_v = Eigen::Map<const Vector>(v.data(), k);
    if (j.at("step_size").get<double>() > 0) c.hmc.step_size = j.at("step_size");
}

int cmd_mcmc(const Context& ctx) {
    const ModelParams p = model_params(ctx.cfg);
    const ChainConfig base = chain_config(ctx.cfg);
    const long instances = ctx.cfg.get_int("run.instances", 1);
    const long chains = ctx.cfg.get_int("mcmc.chains", 1);
    const std::string resume = ctx.cfg.get_string("mcmc.resume", "");
    if (instances < 1 || chains < 1) throw ConfigError("run.instances and mcmc.chains must be positive");
    prepare_out(ctx);

    struct Job {
        long inst, chain;
    };
    std::vector<Job> jobs;
    for (long i = 0; i < instances; ++i)
        for (long c = 0; c < chains; ++c) jobs.push_back({i, c});
    auto tag = [](const Job& j) { return std::to_string(j.inst) + "_" + std::to_string(j.chain); };

    auto run = [&](const Job& j) {
        const auto teacher = sample_teacher(p, base.seed, std::uint64_t(j.inst));
        const auto ds = generate_dataset(teacher, p, base.seed, std::uint64_t(j.inst));
        ChainConfig c = base;
        c.chain_index = std::uint64_t(j.inst * chains + j.chain);
        if (!resume.empty()) load_snapshot((fs::path(resume) / ("snapshot_" + tag(j) + ".json")).string(), c);
        return p.w_prior == WPrior::rademacher ? metropolis_binary(ds, teacher, p, c) : hmc_gaussian(ds, teacher, p, c);
    };
    std::vector<ChainResult> res(jobs.size());
    for (std::size_t i = 0; i < jobs.size(); i += std::size_t(ctx.workers)) {
        std::vector<std::future<ChainResult>> fut;
        const std::size_t hi = std::min(jobs.size(), i + std::size_t(ctx.workers));
        for (std::size_t j = i; j < hi; ++j) fut.push_back(std::async(std::launch::async, run, jobs[j]));
        for (std::size_t j = i; j < hi; ++j) res[j] = fut[j - i].get();
    }

    const OutputMeta meta = ctx.meta("mcmc-run");
    nlohmann::json per = nlohmann::json::array();
    std::vector<NishimoriDataset> nish(instances);
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const auto& r = res[j];
        const auto teacher = sample_teacher(p, base.seed, std::uint64_t(jobs[j].inst));
        CsvWriter w(ctx.out("trace_" + tag(jobs[j]) + ".csv"), meta, trace_columns());
        std::vector<double> q2n;
        for (const auto& tp : r.trace.points) {
            w.row(trace_row(tp));
            q2n.push_back(centred_q2_ratio(tp.q[1], r.v.mean(), teacher));
        }
        save_snapshot(ctx.out("snapshot_" + tag(jobs[j]) + ".json"), r);
        const auto gate = equilibration_gate(q2n);
        const std::vector<double> qw_all = r.trace.column(0);
        const auto qw = batch_mean(std::vector<double>(qw_all.begin() + long(qw_all.size() / 2), qw_all.end()));
        per.push_back({{"instance", jobs[j].inst},
                       {"chain", jobs[j].chain},
                       {"acceptance", r.acceptance},
                       {"step_size", r.step_size},
                       {"divergences", r.divergences},
                       {"max_incremental_error", r.max_incremental_error},
                       {"q2_plateau", gate.plateau},
                       {"q2_plateau_stderr", gate.plateau_stderr},
                       {"qW_plateau", qw.first},
                       {"equilibrated", gate.equilibrated}});
        nish[jobs[j].inst].teacher = {teacher.W, teacher.v};
        nish[jobs[j].inst].samples.push_back({r.W, r.v});
    }
    nlohmann::json body = {{"params", model_json(p)},
                           {"sampler", p.w_prior == WPrior::rademacher ? "metropolis" : "hmc"},
                           {"init", to_string(base.init)},
                           {"steps", base.steps},
                           {"chains", per}};
    if (instances >= 8 && chains >= 2) {
        const auto rep = nishimori_check(nish, p.activation);
        body["nishimori"] = {{"names", rep.names}, {"q01", rep.q01}, {"q12", rep.q12}, {"z", rep.z}, {"pass", rep.pass}};
    }
    write_json(ctx.out("mcmc.json"), meta, body);
    return kOk;
}

// ---------------------------------------------------------------- build-spectral-table

int cmd_table(const Context& ctx) {
    const TheoryParams p = theory_params(ctx.cfg);
    prepare_out(ctx);
    const SpectralTable t = cached_table(p.gamma, p.v_prior, spectral_config(ctx.cfg), cache_dir(ctx.cfg), true);
    CsvWriter w(ctx.out("spectral_" + t.cache_key() + ".csv"), ctx.meta("build-spectral-table"),
                {"q_hat2", "cube", "mmse", "iota", "iota_se"});
    for (std::size_t i = 0; i < t.grid.size(); ++i)
        w.row(std::vector<double>{t.grid[i], t.cube[i], t.mmse_at(t.grid[i]), t.iota[i], t.iota_se[i]});
    std::printf("table %s\n", t.cache_key().c_str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayes-optimal theory and samplers for extensive-width two-layer networks"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config_path, "TOML config file");
    app.add_option("--set", g.sets, "override, section.key=value (repeatable)");
    app.add_option("--seed", g.seed, "master seed (run.seed)");
    app.add_option("--workers", g.workers, "worker threads");
    app.add_option("--out-dir", g.out_dir, "output directory");
    app.add_flag("--dry-run", g.dry_run, "validate the config and exit");

    std::string act, positional;
    std::vector<double> coeffs;
    int L = 4;
    auto* hermite = app.add_subcommand("hermite", "print Hermite coefficients mu_0..mu_L, nu and g(1)");
    hermite->add_option("activation", act, "relu, elu, he2, he3, he2he3, identity, custom-poly")->required();
    hermite->add_option("--coeffs", coeffs, "Hermite coefficients for custom-poly")->delimiter(',');
    hermite->add_option("--L", L, "highest order printed");
    std::vector<CLI::App*> with_config;
    for (auto [name, help] : std::vector<std::pair<const char*, const char*>>{
             {"sweep-theory", "solve both branches on an alpha grid, write sweep.csv"},
             {"alpha-sp", "locate the specialisation transition"},
             {"gamp-run", "run GAMP-RIE on synthetic instances"},
             {"mcmc-run", "run Metropolis (binary W) or HMC (Gaussian W) chains"},
             {"build-spectral-table", "build or refresh the cached spectral table"}}) {
        auto* sc = app.add_subcommand(name, help);
        sc->add_option("config", positional, "TOML config file");
        with_config.push_back(sc);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        if (hermite->parsed()) {
            if (g.dry_run) {
                builtin(act, coeffs);
                std::printf("config ok\n");
                return kOk;
            }
            return cmd_hermite(act, coeffs, L, g);
        }
        CLI::App* sc = nullptr;
        for (auto* s : with_config)
            if (s->parsed()) sc = s;
        const Context ctx = make_context(g, positional);
        if (g.dry_run) {
            std::printf("config ok %s\n", ctx.cfg.hash().c_str());
            return kOk;
        }
        const std::string name = sc->get_name();
        if (name == "sweep-theory") return cmd_sweep(ctx);
        if (name == "alpha-sp") return cmd_alpha_sp(ctx);
        if (name == "gamp-run") return cmd_gamp(ctx);
        if (name == "mcmc-run") return cmd_mcmc(ctx);
        return cmd_table(ctx);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "invalid parameters: %s\n", e.what());
        return kConfig;
    } catch (const ConvergenceError& e) {
        std::fprintf(stderr, "no convergence: %s\n", e.what());
        return kNoConvergence;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kFailure;
    }
}
