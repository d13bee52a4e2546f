#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "shallowbayes/gamp.hpp"
#include "shallowbayes/mcmc.hpp"
#include "shallowbayes/saddle.hpp"
#include "shallowbayes/spectral.hpp"

namespace shallowbayes {

// Run configuration: a TOML document held as a JSON tree so that it can be hashed and embedded in outputs.
// Sections: [run] [model] [channel] [solver] [spectral] [sweep] [gamp] [mcmc].
class RunConfig {
public:
    RunConfig() : data_(nlohmann::json::object()) {}
    static RunConfig from_toml_file(const std::string& path);
    static RunConfig from_toml_string(const std::string& text);

    // "section.key=value"; the value is read as a TOML value, falling back to a bare string.
    void set(const std::string& assignment);

    bool has(const std::string& key) const;
    double get_double(const std::string& key, double def) const;
    long get_int(const std::string& key, long def) const;
    bool get_bool(const std::string& key, bool def) const;
    std::string get_string(const std::string& key, const std::string& def) const;
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& def) const;

    // Throws ConfigError on keys outside the known schema.
    void validate() const;

    const nlohmann::json& json() const { return data_; }
    // FNV-1a 64 of the canonical (key-sorted, compact) JSON without run.workers and run.out_dir.
    std::string hash() const;

private:
    const nlohmann::json* find(const std::string& key) const;
    nlohmann::json data_;
};

std::string fnv1a_hex(const std::string& s);

ModelParams model_params(const RunConfig& c);
TheoryParams theory_params(const RunConfig& c);
SolverConfig solver_config(const RunConfig& c);
SpectralConfig spectral_config(const RunConfig& c);
GampConfig gamp_config(const RunConfig& c);
ChainConfig chain_config(const RunConfig& c);

// [sweep] alphas = [...], or alpha_min / alpha_max / alpha_steps with spacing = "linear" | "log".
std::vector<double> alpha_grid(const RunConfig& c);

// [spectral] cache_dir, else $SHALLOWBAYES_CACHE, else "spectral-cache".
std::string cache_dir(const RunConfig& c);

}  // namespace shallowbayes
