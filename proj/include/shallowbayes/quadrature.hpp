#pragma once

#include <vector>

namespace shallowbayes {

struct Rule {
    std::vector<double> x;
    std::vector<double> w;

    template <class F>
    double integrate(F&& f) const {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * f(x[i]);
        return s;
    }
};

// Probabilists' Gauss-Hermite rule: weights sum to one and integrate against the standard normal density.
Rule gauss_hermite(int n);

// Gauss-Legendre on [a, b].
Rule gauss_legendre(int n, double a, double b);

// Rule for E_z[f(z)], z ~ N(0,1), built from Gauss-Legendre panels on [-cutoff, cutoff]
// split at the given breakpoints. Weights include the Gaussian density.
Rule gaussian_panels(int n_per_panel, std::vector<double> breaks, double cutoff);

// Normalised probabilists' Hermite values h_l = He_l / sqrt(l!) for l = 0..L at x.
void normalized_hermite(double x, int L, double* out);

}  // namespace shallowbayes
