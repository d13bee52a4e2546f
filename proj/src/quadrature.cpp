#include "shallowbayes/quadrature.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace shallowbayes {

void normalized_hermite(double x, int L, double* out) {
    out[0] = 1.0;
    if (L == 0) return;
    out[1] = x;
    for (int l = 1; l < L; ++l)
        out[l + 1] = (x * out[l] - std::sqrt(double(l)) * out[l - 1]) / std::sqrt(double(l + 1));
}

Rule gauss_hermite(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite: n must be positive");
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(std::max(n - 1, 0));
    for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(double(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);

    Rule r;
    r.x.resize(n);
    r.w.resize(n);
    std::vector<double> h(n + 1);
    for (int i = 0; i < n; ++i) {
        double x = es.eigenvalues()[i];
        // Newton polish on h_n, using h_n' = sqrt(n) h_{n-1}.
        for (int it = 0; it < 3; ++it) {
            normalized_hermite(x, n, h.data());
            x -= h[n] / (std::sqrt(double(n)) * h[n - 1]);
        }
        normalized_hermite(x, n - 1, h.data());
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += h[k] * h[k];
        r.x[i] = x;
        r.w[i] = 1.0 / s;
    }
    double tot = 0.0;
    for (double w : r.w) tot += w;
    for (double& w : r.w) w /= tot;
    return r;
}

Rule gauss_legendre(int n, double a, double b) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
    Rule r;
    r.x.resize(n);
    r.w.resize(n);
    const double xm = 0.5 * (b + a), xl = 0.5 * (b - a);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) {
                // one more evaluation for a consistent derivative
                p1 = 1.0, p2 = 0.0;
                for (int j = 0; j < n; ++j) {
                    double p3 = p2;
                    p2 = p1;
                    p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
                }
                pp = n * (z * p1 - p2) / (z * z - 1.0);
                break;
            }
        }
        r.x[i] = xm - xl * z;
        r.x[n - 1 - i] = xm + xl * z;
        r.w[i] = 2.0 * xl / ((1.0 - z * z) * pp * pp);
        r.w[n - 1 - i] = r.w[i];
    }
    return r;
}

Rule gaussian_panels(int n_per_panel, std::vector<double> breaks, double cutoff) {
    breaks.push_back(-cutoff);
    breaks.push_back(cutoff);
    breaks.push_back(0.0);
    std::sort(breaks.begin(), breaks.end());
    std::vector<double> b;
    for (double x : breaks) {
        x = std::clamp(x, -cutoff, cutoff);
        if (b.empty() || x - b.back() > 1e-14) b.push_back(x);
    }
    const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    thread_local std::map<int, Rule> reference;
    auto it = reference.find(n_per_panel);
    if (it == reference.end()) it = reference.emplace(n_per_panel, gauss_legendre(n_per_panel, -1.0, 1.0)).first;
    const Rule& g = it->second;
    Rule r;
    r.x.reserve((b.size() - 1) * n_per_panel);
    r.w.reserve((b.size() - 1) * n_per_panel);
    for (std::size_t p = 0; p + 1 < b.size(); ++p) {
        const double xm = 0.5 * (b[p] + b[p + 1]), xl = 0.5 * (b[p + 1] - b[p]);
        for (int i = 0; i < n_per_panel; ++i) {
            const double x = xm + xl * g.x[i];
            r.x.push_back(x);
            r.w.push_back(xl * g.w[i] * c * std::exp(-0.5 * x * x));
        }
    }
    return r;
}

}  // namespace shallowbayes
