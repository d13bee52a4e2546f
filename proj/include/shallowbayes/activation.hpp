#pragma once

#include <functional>
#include <string>
#include <vector>

namespace shallowbayes {

struct QuadratureReport {
    int nodes = 0;          // final node count (per panel for kinked activations)
    double max_change = 0;  // max |c_l(n) - c_l(n/2)| on normalised coefficients
    bool converged = true;
};

struct ActivationSpec {
    std::string name;
    std::function<double(double)> evaluate;
    std::function<double(double)> derivative;
    std::vector<double> mu;       // mu_0..mu_L
    int L = 0;
    double nu = 0;                // E[sigma(z)^2]
    double tail_bound = 0;        // nu - sum_l mu_l^2 / l!
    double tail_even = 0;         // even-order part of the tail, from E[sigma(z)sigma(-z)]
    double tail_odd = 0;
    std::vector<double> kinks;    // points where sigma is not smooth
    std::vector<double> he_coeffs;  // sigma = sum a_l He_l; nonempty only for polynomial activations
    QuadratureReport quad;

    double mu0() const { return mu[0]; }
    double mu1() const { return mu[1]; }
    double mu2() const { return mu[2]; }
    double c2(int l) const;  // mu_l^2 / l!
    bool polynomial() const { return !he_coeffs.empty(); }
    // Copy with the constant Hermite component removed.
    ActivationSpec centered() const;
};

// mu_l = E[He_l(z) sigma(z)] for l = 0..L. Panels split at kinks when given, Gauss-Hermite otherwise.
// Node count doubles 64 -> 128 -> 256 -> 512 until normalised coefficients agree to tol.
std::vector<double> hermite_coefficients(const std::function<double(double)>& sigma, int L,
                                         const std::vector<double>& kinks = {}, double tol = 1e-8,
                                         QuadratureReport* report = nullptr);

ActivationSpec make_activation(std::string name, std::function<double(double)> sigma,
                               std::function<double(double)> dsigma, std::vector<double> kinks,
                               int L = 50);

// sigma = sum_l a_l He_l(x); coefficients are exact.
ActivationSpec polynomial_activation(std::string name, std::vector<double> he_coeffs, int L = 50);

// relu, elu, he2, he3, he2he3, identity; custom-poly needs he_coeffs.
ActivationSpec builtin(const std::string& name, const std::vector<double>& he_coeffs = {}, int L = 50);
std::vector<std::string> builtin_names();

// g(x) = sum_{l>=3} mu_l^2/l! x^l. Uses the series when its tail bound is negligible, the kernel otherwise.
double g_eval(double x, const ActivationSpec& s);
double g_prime(double x, const ActivationSpec& s);
// Truncated series with the measured even/odd tails folded into the first omitted orders.
double g_series(double x, const ActivationSpec& s);
double g_prime_series(double x, const ActivationSpec& s);
// E[sigma(y)sigma(z)] - mu0^2 - mu1^2 x - mu2^2 x^2/2 with corr(y,z) = x, by nested quadrature.
double g_kernel(double x, const ActivationSpec& s, int n_per_panel = 64);
// E[sigma'(y)sigma'(z)] - mu1^2 - mu2^2 x.
double g_prime_kernel(double x, const ActivationSpec& s, int n_per_panel = 64);

// E[f1(y) f2(z)] for standard bivariate normal with correlation rho.
double bivariate_expectation(const std::function<double(double)>& f1, const std::function<double(double)>& f2,
                             double rho, const std::vector<double>& kinks, int n_per_panel = 64);

// He_l(x) for l = 0..L (unnormalised).
std::vector<double> hermite_he(double x, int L);

}  // namespace shallowbayes
