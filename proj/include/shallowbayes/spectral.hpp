#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shallowbayes/model.hpp"

namespace shallowbayes {

// Ascending eigenvalues of a symmetric matrix (LAPACK dsyevd). Throws on solver failure.
std::vector<double> symmetric_eigenvalues(const Matrix& A);
// Eigenvalues (ascending) and eigenvectors (columns).
void symmetric_eigensystem(const Matrix& A, std::vector<double>& values, Matrix& vectors);

// GOE matrix with off-diagonal variance 1/d and diagonal variance 2/d.
Matrix sample_goe(int d, Engine& rng);
// W^T diag(v) W / sqrt(kd) with k = round(gamma d), W i.i.d. standard normal, v from the read-out prior.
Matrix sample_signal(int d, double gamma, VPrior v_prior, Engine& rng);

struct SpectrumEnsemble {
    std::vector<std::vector<double>> eigenvalues;  // one sorted list per seed
    std::vector<std::vector<double>> goe;          // eigenvalues of the GOE part alone, same seeds
    int d_spec = 0;
    int n_seeds = 0;
    double q_hat2 = 0;
    double gamma = 0;
    VPrior v_prior = VPrior::constant_one;

    std::vector<double> concatenated() const;
};

// Eigenvalues of sqrt(q_hat2) Sbar + Z over n_seeds independent draws.
SpectrumEnsemble sample_spectrum(double q_hat2, double gamma, VPrior v_prior, int d_spec, int n_seeds,
                                 std::uint64_t seed);

// Integral of the cubed Cauchy-smoothed density of one eigenvalue list.
double smoothed_cube_integral(const std::vector<double>& eigs, double eta, double* refine_change = nullptr);

struct CubeEstimate {
    double value = 0;                 // (4 pi^2 / 3) * integral, extrapolated to eta -> 0
    std::vector<double> per_eta;      // scaled values at each eta
    double residual = 0;              // |linear - quadratic| extrapolation
    bool under_resolved = false;
};

// (4 pi^2/3) * int mu^3 from the ensemble, extrapolated in eta. When the ensemble carries its GOE part the
// estimate is 1 + [I(Y) - I(Z)] on shared draws, which cancels most of the smoothing bias.
CubeEstimate mu_cubed_integral(const SpectrumEnsemble& e, const std::vector<double>& etas = {0.1, 0.05, 0.025},
                               bool control_variate = true);

// (1/N^2) sum_{i != j} ln|l_i - l_j|. Pairs closer than 1e-14 are skipped and counted.
double log_energy(const std::vector<double>& eigs, long* excluded = nullptr);

struct IotaConfig {
    std::vector<int> sizes{500, 1000, 2000};
    int n_seeds = 10;          // at d = 1000; other sizes use seeds_for_size
    bool control_variate = true;
    std::uint64_t seed = 1;
};

struct IotaEstimate {
    double value = 0;
    double stderr_ = 0;
    double residual = 0;          // spread between extrapolated and largest-size values
    std::vector<double> per_size; // iota at each size before extrapolation
    long excluded_pairs = 0;
};

// Log-energy fluctuations scale as 1/d, so seeds scale as (1000/d)^2 for equal error; at least 2.
int seeds_for_size(int d, int n_seeds_at_1000);

// iota(q) = 1/8 + (1/2) double integral of ln|x - y| under the limiting spectral law, extrapolated in 1/d.
IotaEstimate iota(double q_hat2, double gamma, VPrior v_prior, const IotaConfig& cfg = {});

// RIE eigenvalue shrinkage xi_i = l_i - 2 noise_var h_i for sorted eigenvalues. eta <= 0 gives the
// principal-value sum; eta > 0 a Cauchy-regularised Hilbert transform.
std::vector<double> rie_shrink(const std::vector<double>& eigs, double noise_var, double eta);
// Default regularisation width: N^{-1/2} times the eigenvalue standard deviation.
double rie_default_eta(const std::vector<double>& eigs);

struct RieResult {
    Matrix estimate;
    std::vector<double> eigenvalues;
    std::vector<double> shrunk;
    double mmse = 0;  // noise_var * (1 - (4 pi^2/3) noise_var int rho^3)
};
// Denoise R = S + sqrt(noise_var) Z in the observed eigenbasis.
RieResult rie_denoise(const Matrix& R, double noise_var);

// ---------------------------------------------------------------- tables

struct SpectralConfig {
    int d_spec = 1000;
    int n_seeds = 10;
    std::vector<double> etas{0.1, 0.05, 0.025};
    std::vector<int> iota_sizes{500, 1000, 2000};
    int grid_nodes = 48;
    double grid_min = 1e-3;
    double grid_max = 1e4;
    std::uint64_t seed = 1;
};

struct SpectralTable {
    double gamma = 0;
    VPrior v_prior = VPrior::constant_one;
    std::vector<double> grid;   // first node is 0
    std::vector<double> cube;   // (4 pi^2/3) int mu^3
    std::vector<double> iota;
    std::vector<double> iota_se;
    SpectralConfig config;
    std::string code_version;

    double cube_at(double q) const;
    double iota_at(double q) const;
    // (1/q)(1 - cube); at q = 0 the limit extrapolated from the first positive node.
    double mmse_at(double q) const;
    std::string cache_key() const;
};

std::vector<double> default_grid(const SpectralConfig& c);

SpectralTable build_spectral_table(double gamma, VPrior v_prior, const SpectralConfig& cfg,
                                   void (*progress)(int, int) = nullptr);

// Persist as <path>.json header plus <path>.bin arrays.
void save_table(const SpectralTable& t, const std::string& path);
SpectralTable load_table(const std::string& path);
// Load from cache_dir if a table with the same key exists, else build and store it.
SpectralTable cached_table(double gamma, VPrior v_prior, const SpectralConfig& cfg, const std::string& cache_dir,
                           bool verbose = false);

// Monotone cubic (Fritsch-Carlson) interpolation.
double pchip(const std::vector<double>& x, const std::vector<double>& y, double t);

}  // namespace shallowbayes
