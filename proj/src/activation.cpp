#include "shallowbayes/activation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "shallowbayes/errors.hpp"
#include "shallowbayes/quadrature.hpp"

namespace shallowbayes {

namespace {

constexpr double kSeriesTailTol = 1e-12;
constexpr double kGaussCutoff = 12.0;

double check_corr(double x) {
    if (!(std::abs(x) <= 1.0 + 1e-12)) throw DomainError("g: argument outside [-1, 1]");
    return std::clamp(x, -1.0, 1.0);
}

Rule coefficient_rule(int n, int L, const std::vector<double>& kinks) {
    if (kinks.empty()) return gauss_hermite(n);
    return gaussian_panels(n, kinks, 12.0 + 2.0 * std::sqrt(double(L)));
}

std::vector<double> normalized_coefficients(const std::function<double(double)>& sigma, int L, const Rule& r) {
    std::vector<double> c(L + 1, 0.0), h(L + 1);
    for (std::size_t i = 0; i < r.x.size(); ++i) {
        const double f = sigma(r.x[i]) * r.w[i];
        if (f == 0.0) continue;
        normalized_hermite(r.x[i], L, h.data());
        for (int l = 0; l <= L; ++l) c[l] += f * h[l];
    }
    return c;
}

double log_factorial(int l) { return std::lgamma(l + 1.0); }

void fill_moments(ActivationSpec& s) {
    if (s.polynomial()) {
        s.tail_bound = s.tail_even = s.tail_odd = 0.0;
        return;
    }
    Rule r = coefficient_rule(s.quad.nodes, s.L, s.kinks);
    double nu = 0.0, alt = 0.0;
    for (std::size_t i = 0; i < r.x.size(); ++i) {
        const double f = s.evaluate(r.x[i]);
        nu += r.w[i] * f * f;
        alt += r.w[i] * f * s.evaluate(-r.x[i]);
    }
    s.nu = nu;
    double sum = 0.0, sum_alt = 0.0;
    for (int l = 0; l <= s.L; ++l) {
        sum += s.c2(l);
        sum_alt += (l % 2 ? -1.0 : 1.0) * s.c2(l);
    }
    s.tail_bound = nu - sum;
    s.tail_even = 0.5 * ((nu - sum) + (alt - sum_alt));
    s.tail_odd = 0.5 * ((nu - sum) - (alt - sum_alt));
}

}  // namespace

std::vector<double> hermite_he(double x, int L) {
    std::vector<double> he(L + 1);
    he[0] = 1.0;
    if (L >= 1) he[1] = x;
    for (int l = 1; l < L; ++l) he[l + 1] = x * he[l] - l * he[l - 1];
    return he;
}

double ActivationSpec::c2(int l) const {
    if (l < 0 || l > L) return 0.0;
    if (mu[l] == 0.0) return 0.0;
    return std::exp(2.0 * std::log(std::abs(mu[l])) - log_factorial(l));
}

ActivationSpec ActivationSpec::centered() const {
    ActivationSpec c = *this;
    const double m0 = mu[0];
    if (m0 == 0.0) return c;
    auto f = evaluate;
    c.evaluate = [f, m0](double x) { return f(x) - m0; };
    c.mu[0] = 0.0;
    c.nu = nu - m0 * m0;
    if (!c.he_coeffs.empty()) c.he_coeffs[0] = 0.0;
    c.name = name;
    return c;
}

std::vector<double> hermite_coefficients(const std::function<double(double)>& sigma, int L,
                                         const std::vector<double>& kinks, double tol,
                                         QuadratureReport* report) {
    if (L < 4) throw ConfigError("hermite_coefficients: L must be at least 4");
    std::vector<double> prev = normalized_coefficients(sigma, L, coefficient_rule(64, L, kinks));
    QuadratureReport rep;
    rep.nodes = 64;
    rep.converged = false;
    for (int n = 128; n <= 512; n *= 2) {
        std::vector<double> cur = normalized_coefficients(sigma, L, coefficient_rule(n, L, kinks));
        double change = 0.0;
        for (int l = 0; l <= L; ++l) change = std::max(change, std::abs(cur[l] - prev[l]));
        prev = std::move(cur);
        rep.nodes = n;
        rep.max_change = change;
        if (change < tol) {
            rep.converged = true;
            break;
        }
    }
    if (report) *report = rep;
    std::vector<double> mu(L + 1);
    for (int l = 0; l <= L; ++l) mu[l] = prev[l] * std::exp(0.5 * log_factorial(l));
    return mu;
}

ActivationSpec make_activation(std::string name, std::function<double(double)> sigma,
                               std::function<double(double)> dsigma, std::vector<double> kinks, int L) {
    ActivationSpec s;
    s.name = std::move(name);
    s.evaluate = std::move(sigma);
    s.derivative = std::move(dsigma);
    s.kinks = std::move(kinks);
    s.L = L;
    s.mu = hermite_coefficients(s.evaluate, L, s.kinks, 1e-8, &s.quad);
    fill_moments(s);
    return s;
}

ActivationSpec polynomial_activation(std::string name, std::vector<double> a, int L) {
    while (!a.empty() && a.back() == 0.0) a.pop_back();
    if (a.empty()) a.push_back(0.0);
    const int deg = int(a.size()) - 1;
    ActivationSpec s;
    s.name = std::move(name);
    s.L = std::max({L, deg, 4});
    s.he_coeffs = a;
    s.mu.assign(s.L + 1, 0.0);
    s.nu = 0.0;
    for (int l = 0; l <= deg; ++l) {
        s.mu[l] = std::exp(log_factorial(l)) * a[l];
        s.nu += std::exp(log_factorial(l)) * a[l] * a[l];
    }
    s.evaluate = [a, deg](double x) {
        double hm = 1.0, h = x, acc = a[0];
        if (deg >= 1) acc += a[1] * x;
        for (int l = 1; l < deg; ++l) {
            const double hp = x * h - l * hm;
            hm = h;
            h = hp;
            acc += a[l + 1] * h;
        }
        return acc;
    };
    s.derivative = [a, deg](double x) {
        // d/dx He_l = l He_{l-1}
        double hm = 0.0, h = 1.0, acc = 0.0;
        for (int l = 1; l <= deg; ++l) {
            acc += a[l] * l * h;
            const double hp = x * h - (l - 1) * hm;
            hm = h;
            h = hp;
        }
        return acc;
    };
    s.quad.nodes = 0;
    return s;
}

std::vector<std::string> builtin_names() { return {"relu", "elu", "he2", "he3", "he2he3", "identity", "custom-poly"}; }

ActivationSpec builtin(const std::string& name, const std::vector<double>& he_coeffs, int L) {
    if (name == "relu")
        return make_activation(
            name, [](double x) { return x > 0 ? x : 0.0; }, [](double x) { return x > 0 ? 1.0 : 0.0; }, {0.0}, L);
    if (name == "elu")
        return make_activation(
            name, [](double x) { return x > 0 ? x : std::expm1(x); },
            [](double x) { return x > 0 ? 1.0 : std::exp(x); }, {0.0}, L);
    if (name == "he2") return polynomial_activation(name, {0.0, 0.0, 1.0 / std::sqrt(2.0)}, L);
    if (name == "he3") return polynomial_activation(name, {0.0, 0.0, 0.0, 1.0 / std::sqrt(6.0)}, L);
    if (name == "he2he3") return polynomial_activation(name, {0.0, 0.0, 1.0 / std::sqrt(2.0), 1.0 / 6.0}, L);
    if (name == "identity") return polynomial_activation(name, {0.0, 1.0}, L);
    if (name == "custom-poly") {
        if (he_coeffs.empty()) throw ConfigError("custom-poly activation needs Hermite coefficients");
        return polynomial_activation(name, he_coeffs, L);
    }
    throw ConfigError("unknown activation: " + name);
}

double g_series(double x, const ActivationSpec& s) {
    x = check_corr(x);
    double acc = 0.0, p = x * x * x;
    for (int l = 3; l <= s.L; ++l, p *= x) acc += s.c2(l) * p;
    const int le = (s.L + 1) % 2 == 0 ? s.L + 1 : s.L + 2;
    const int lo = (s.L + 1) % 2 == 1 ? s.L + 1 : s.L + 2;
    acc += s.tail_even * std::pow(x, le) + s.tail_odd * std::pow(x, lo);
    return acc;
}

double g_prime_series(double x, const ActivationSpec& s) {
    x = check_corr(x);
    double acc = 0.0, p = x * x;
    for (int l = 3; l <= s.L; ++l, p *= x) acc += l * s.c2(l) * p;
    return acc;
}

double bivariate_expectation(const std::function<double(double)>& f1, const std::function<double(double)>& f2,
                             double rho, const std::vector<double>& kinks, int n) {
    const double sd = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    std::vector<double> outer_breaks = kinks;
    if (std::abs(rho) > 1e-14) {
        for (double k : kinks) {
            const double c = k / rho, w = sd / std::abs(rho);
            for (double m : {0.0, -1.0, 1.0, -8.0, 8.0}) outer_breaks.push_back(c + m * w);
        }
    }
    const Rule outer = gaussian_panels(n, outer_breaks, kGaussCutoff);
    double acc = 0.0;
    std::vector<double> inner_breaks(kinks.size());
    for (std::size_t i = 0; i < outer.x.size(); ++i) {
        const double z1 = outer.x[i];
        const double a = f1(z1);
        if (a == 0.0) continue;
        double inner;
        if (sd < 1e-15) {
            inner = f2(rho * z1);
        } else {
            for (std::size_t j = 0; j < kinks.size(); ++j) inner_breaks[j] = (kinks[j] - rho * z1) / sd;
            const Rule r = gaussian_panels(n, inner_breaks, kGaussCutoff);
            inner = r.integrate([&](double z2) { return f2(rho * z1 + sd * z2); });
        }
        acc += outer.w[i] * a * inner;
    }
    return acc;
}

double g_kernel(double x, const ActivationSpec& s, int n) {
    x = check_corr(x);
    const double k = bivariate_expectation(s.evaluate, s.evaluate, x, s.kinks, n);
    return k - s.mu[0] * s.mu[0] - s.mu[1] * s.mu[1] * x - s.c2(2) * x * x;
}

double g_prime_kernel(double x, const ActivationSpec& s, int n) {
    x = check_corr(x);
    const double k = bivariate_expectation(s.derivative, s.derivative, x, s.kinks, n);
    return k - s.mu[1] * s.mu[1] - s.mu[2] * s.mu[2] * x;
}

double g_eval(double x, const ActivationSpec& s) {
    if (s.tail_bound <= kSeriesTailTol) return g_series(x, s);
    return g_kernel(x, s);
}

double g_prime(double x, const ActivationSpec& s) {
    if (s.tail_bound <= kSeriesTailTol) return g_prime_series(x, s);
    return g_prime_kernel(x, s);
}

}  // namespace shallowbayes
