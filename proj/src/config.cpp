#include "shallowbayes/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "toml.hpp"

#include "shallowbayes/errors.hpp"

namespace shallowbayes {

namespace {

nlohmann::json to_json(const toml::node& n) {
    if (auto t = n.as_table()) {
        nlohmann::json out = nlohmann::json::object();
        for (auto&& [k, v] : *t) out[std::string(k.str())] = to_json(v);
        return out;
    }
    if (auto a = n.as_array()) {
        nlohmann::json out = nlohmann::json::array();
        for (auto&& v : *a) out.push_back(to_json(v));
        return out;
    }
    if (auto v = n.as_string()) return v->get();
    if (auto v = n.as_integer()) return v->get();
    if (auto v = n.as_floating_point()) return v->get();
    if (auto v = n.as_boolean()) return v->get();
    throw ConfigError("unsupported TOML value (dates and times are not used)");
}

std::pair<std::string, std::string> split_key(const std::string& key) {
    const auto dot = key.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == key.size())
        throw ConfigError("config key must look like section.key: " + key);
    return {key.substr(0, dot), key.substr(dot + 1)};
}

// Known keys per section.
const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"run", {"seed", "workers", "out_dir", "instances", "label"}},
        {"model", {"d", "gamma", "alpha", "delta", "w_prior", "v_prior", "activation", "he_coeffs"}},
        {"channel", {"kind", "b"}},
        {"solver", {"theta", "theta_min", "max_iter", "tol", "tie", "collapse", "n_xi", "n_u", "y_nodes", "y_panels",
                    "y_tol", "y_width"}},
        {"spectral", {"d_spec", "n_seeds", "etas", "iota_sizes", "grid_nodes", "grid_min", "grid_max", "seed",
                      "cache_dir"}},
        {"sweep", {"alphas", "alpha_min", "alpha_max", "alpha_steps", "spacing", "lo", "hi", "tol"}},
        {"gamp", {"damping", "sigma_floor", "max_iter", "tol", "max_increases", "s1_method", "n_test", "trace"}},
        {"mcmc", {"init", "steps", "leapfrog_steps", "step_size", "adapt", "adapt_iters", "target_accept",
                  "divergence", "fixed_readouts", "chains", "check_every", "max_trace_points", "ell_max", "resume"}},
    };
    return s;
}

}  // namespace

std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunConfig RunConfig::from_toml_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_toml_string(ss.str());
}

RunConfig RunConfig::from_toml_string(const std::string& text) {
    toml::table t;
    try {
        t = toml::parse(text);
    } catch (const toml::parse_error& e) {
        throw ConfigError(std::string("TOML parse error: ") + std::string(e.description()));
    }
    RunConfig c;
    for (auto&& [k, v] : t) {
        const std::string sec(k.str());
        if (!v.is_table()) throw ConfigError("top-level key outside a section: " + sec);
        c.data_[sec] = to_json(v);
    }
    return c;
}

void RunConfig::set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + assignment);
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    const auto [sec, name] = split_key(key);
    nlohmann::json value;
    try {
        toml::table t = toml::parse("v = " + raw);
        value = to_json(*t.get("v"));
    } catch (const toml::parse_error&) {
        value = raw;
    }
    data_[sec][name] = value;
}

const nlohmann::json* RunConfig::find(const std::string& key) const {
    const auto [sec, name] = split_key(key);
    auto s = data_.find(sec);
    if (s == data_.end() || !s->is_object()) return nullptr;
    auto v = s->find(name);
    return v == s->end() ? nullptr : &*v;
}

bool RunConfig::has(const std::string& key) const { return find(key) != nullptr; }

double RunConfig::get_double(const std::string& key, double def) const {
    const auto* v = find(key);
    if (!v) return def;
    if (!v->is_number()) throw ConfigError(key + " must be a number");
    return v->get<double>();
}

long RunConfig::get_int(const std::string& key, long def) const {
    const auto* v = find(key);
    if (!v) return def;
    if (v->is_number_integer()) return v->get<long>();
    if (v->is_number_float()) {
        const double x = v->get<double>();
        if (x == std::floor(x)) return long(x);
    }
    throw ConfigError(key + " must be an integer");
}

bool RunConfig::get_bool(const std::string& key, bool def) const {
    const auto* v = find(key);
    if (!v) return def;
    if (!v->is_boolean()) throw ConfigError(key + " must be true or false");
    return v->get<bool>();
}

std::string RunConfig::get_string(const std::string& key, const std::string& def) const {
    const auto* v = find(key);
    if (!v) return def;
    if (!v->is_string()) throw ConfigError(key + " must be a string");
    return v->get<std::string>();
}

std::vector<double> RunConfig::get_doubles(const std::string& key, const std::vector<double>& def) const {
    const auto* v = find(key);
    if (!v) return def;
    if (v->is_number()) return {v->get<double>()};
    if (!v->is_array()) throw ConfigError(key + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : *v) {
        if (!x.is_number()) throw ConfigError(key + " must be an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

void RunConfig::validate() const {
    for (auto it = data_.begin(); it != data_.end(); ++it) {
        auto s = schema().find(it.key());
        if (s == schema().end()) throw ConfigError("unknown config section [" + it.key() + "]");
        for (auto jt = it->begin(); jt != it->end(); ++jt)
            if (!s->second.count(jt.key())) throw ConfigError("unknown config key " + it.key() + "." + jt.key());
    }
    // parse everything once so type errors surface before any computation
    model_params(*this).validate();
    theory_params(*this);
    solver_config(*this);
    spectral_config(*this);
    gamp_config(*this);
    chain_config(*this).validate();
    alpha_grid(*this);
}

std::string RunConfig::hash() const {
    // scheduling and output location do not change results
    nlohmann::json copy = data_;
    if (copy.contains("run")) {
        copy["run"].erase("workers");
        copy["run"].erase("out_dir");
        if (copy["run"].empty()) copy.erase("run");
    }
    return fnv1a_hex(copy.dump());
}

ModelParams model_params(const RunConfig& c) {
    ModelParams p;
    p.d = int(c.get_int("model.d", p.d));
    p.gamma = c.get_double("model.gamma", p.gamma);
    p.alpha = c.get_double("model.alpha", p.alpha);
    p.delta = c.get_double("model.delta", p.delta);
    p.w_prior = parse_w_prior(c.get_string("model.w_prior", "gaussian"));
    p.v_prior = parse_v_prior(c.get_string("model.v_prior", "constant_one"));
    p.activation = builtin(c.get_string("model.activation", "relu"), c.get_doubles("model.he_coeffs", {}));
    return p;
}

TheoryParams theory_params(const RunConfig& c) {
    const ModelParams m = model_params(c);
    TheoryParams p;
    p.alpha = m.alpha;
    p.gamma = m.gamma;
    p.w_prior = m.w_prior;
    p.v_prior = m.v_prior;
    p.activation = m.activation;
    const std::string kind = c.get_string("channel.kind", "gaussian");
    if (kind == "gaussian") {
        p.channel = Channel::gaussian(m.delta);
    } else if (kind == "gaussian_generic") {
        p.channel = Channel::gaussian_generic(m.delta);
    } else if (kind == "laplace") {
        const double b = c.get_double("channel.b", std::sqrt(m.delta / 2));
        if (!(b > 0)) throw ConfigError("channel.b must be positive");
        p.channel = Channel::laplace(b);
    } else {
        throw ConfigError("unknown channel.kind: " + kind);
    }
    if (!(p.channel.delta >= 0)) throw ConfigError("model.delta must be nonnegative");
    return p;
}

SolverConfig solver_config(const RunConfig& c) {
    SolverConfig s;
    s.theta = c.get_double("solver.theta", s.theta);
    s.theta_min = c.get_double("solver.theta_min", s.theta_min);
    s.max_iter = int(c.get_int("solver.max_iter", s.max_iter));
    s.tol = c.get_double("solver.tol", s.tol);
    s.tie = c.get_double("solver.tie", s.tie);
    s.collapse = c.get_double("solver.collapse", s.collapse);
    s.quad.n_xi = int(c.get_int("solver.n_xi", s.quad.n_xi));
    s.quad.n_u = int(c.get_int("solver.n_u", s.quad.n_u));
    s.quad.y_nodes = int(c.get_int("solver.y_nodes", s.quad.y_nodes));
    s.quad.y_panels = int(c.get_int("solver.y_panels", s.quad.y_panels));
    s.quad.y_tol = c.get_double("solver.y_tol", s.quad.y_tol);
    s.quad.y_width = c.get_double("solver.y_width", s.quad.y_width);
    if (!(s.theta > 0 && s.theta <= 1) || !(s.theta_min > 0 && s.theta_min <= s.theta))
        throw ConfigError("solver.theta must be in (0,1] and theta_min in (0, theta]");
    if (s.max_iter < 1) throw ConfigError("solver.max_iter must be positive");
    return s;
}

SpectralConfig spectral_config(const RunConfig& c) {
    SpectralConfig s;
    s.d_spec = int(c.get_int("spectral.d_spec", s.d_spec));
    s.n_seeds = int(c.get_int("spectral.n_seeds", s.n_seeds));
    s.etas = c.get_doubles("spectral.etas", s.etas);
    std::vector<double> sizes(s.iota_sizes.begin(), s.iota_sizes.end());
    sizes = c.get_doubles("spectral.iota_sizes", sizes);
    s.iota_sizes.assign(sizes.begin(), sizes.end());
    s.grid_nodes = int(c.get_int("spectral.grid_nodes", s.grid_nodes));
    s.grid_min = c.get_double("spectral.grid_min", s.grid_min);
    s.grid_max = c.get_double("spectral.grid_max", s.grid_max);
    s.seed = std::uint64_t(c.get_int("spectral.seed", long(s.seed)));
    if (s.d_spec < 2 || s.n_seeds < 1 || s.grid_nodes < 4 || s.etas.empty() || s.iota_sizes.empty())
        throw ConfigError("spectral: d_spec >= 2, n_seeds >= 1, grid_nodes >= 4 and nonempty etas/iota_sizes needed");
    if (!(s.grid_min > 0 && s.grid_max > s.grid_min)) throw ConfigError("spectral: need 0 < grid_min < grid_max");
    return s;
}

GampConfig gamp_config(const RunConfig& c) {
    GampConfig g;
    g.damping = c.get_double("gamp.damping", g.damping);
    g.sigma_floor = c.get_double("gamp.sigma_floor", g.sigma_floor);
    g.max_iter = int(c.get_int("gamp.max_iter", g.max_iter));
    g.tol = c.get_double("gamp.tol", g.tol);
    g.max_increases = int(c.get_int("gamp.max_increases", g.max_increases));
    g.s1_method = c.get_string("gamp.s1_method", g.s1_method);
    if (!(g.damping >= 0 && g.damping < 1)) throw ConfigError("gamp.damping must be in [0,1)");
    if (g.max_iter < 1 || !(g.tol > 0)) throw ConfigError("gamp: max_iter >= 1 and tol > 0 needed");
    return g;
}

ChainConfig chain_config(const RunConfig& c) {
    ChainConfig ch;
    ch.init = parse_init(c.get_string("mcmc.init", "uninformative"));
    ch.steps = c.get_int("mcmc.steps", ch.steps);
    ch.hmc.leapfrog_steps = int(c.get_int("mcmc.leapfrog_steps", ch.hmc.leapfrog_steps));
    ch.hmc.step_size = c.get_double("mcmc.step_size", ch.hmc.step_size);
    ch.hmc.adapt = c.get_bool("mcmc.adapt", ch.hmc.adapt);
    ch.hmc.adapt_iters = c.get_int("mcmc.adapt_iters", ch.hmc.adapt_iters);
    ch.hmc.target_accept = c.get_double("mcmc.target_accept", ch.hmc.target_accept);
    ch.hmc.divergence = c.get_double("mcmc.divergence", ch.hmc.divergence);
    ch.fixed_readouts = c.get_bool("mcmc.fixed_readouts", ch.fixed_readouts);
    ch.check_every = c.get_int("mcmc.check_every", ch.check_every);
    ch.max_trace_points = c.get_int("mcmc.max_trace_points", ch.max_trace_points);
    ch.ell_max = int(c.get_int("mcmc.ell_max", ch.ell_max));
    ch.seed = std::uint64_t(c.get_int("run.seed", 0));
    return ch;
}

std::vector<double> alpha_grid(const RunConfig& c) {
    if (c.has("sweep.alphas")) {
        auto a = c.get_doubles("sweep.alphas", {});
        for (double x : a)
            if (!(x > 0)) throw ConfigError("sweep.alphas must be positive");
        return a;
    }
    if (!c.has("sweep.alpha_min") && !c.has("sweep.alpha_max")) return {};
    const double lo = c.get_double("sweep.alpha_min", 0.1), hi = c.get_double("sweep.alpha_max", 10.0);
    const long n = c.get_int("sweep.alpha_steps", 50);
    const std::string spacing = c.get_string("sweep.spacing", "linear");
    if (!(lo > 0) || !(hi >= lo) || n < 1) throw ConfigError("sweep: need 0 < alpha_min <= alpha_max, alpha_steps >= 1");
    if (spacing != "linear" && spacing != "log") throw ConfigError("sweep.spacing must be linear or log");
    std::vector<double> out;
    for (long i = 0; i < n; ++i) {
        const double t = n == 1 ? 0.0 : double(i) / double(n - 1);
        out.push_back(spacing == "log" ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t);
    }
    return out;
}

std::string cache_dir(const RunConfig& c) {
    if (c.has("spectral.cache_dir")) return c.get_string("spectral.cache_dir", "");
    if (const char* env = std::getenv("SHALLOWBAYES_CACHE")) return env;
    return "spectral-cache";
}

}  // namespace shallowbayes
