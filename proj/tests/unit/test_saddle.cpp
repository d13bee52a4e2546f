#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "shallowbayes/errors.hpp"
#include "shallowbayes/saddle.hpp"

using namespace shallowbayes;

namespace {

const double kPi = std::numbers::pi;

// Scalar Gaussian denoising: mmse = 1/(1+q), iota = ln(1+q)/4. Exactly I-MMSE consistent.
DenoisingCurve scalar_curve() {
    return {[](double q) { return 1 / (1 + q); }, [](double q) { return 0.25 * std::log1p(q); }};
}

TheoryParams sigma3(double alpha, WPrior w = WPrior::gaussian) {
    TheoryParams p;
    p.activation = builtin("he2he3");
    p.alpha = alpha;
    p.gamma = 0.5;
    p.w_prior = w;
    p.channel = Channel::gaussian(0.1);
    return p;
}

double central(const std::function<double(double)>& f, double x, double h) { return (f(x + h) - f(x - h)) / (2 * h); }

}  // namespace

TEST_CASE("psi_out gaussian closed form and derivative") {
    CHECK(psi_out_gaussian(0.4, 0.4, 1.0) == doctest::Approx(-0.5 * std::log(2 * kPi) - 0.5));
    CHECK(psi_out_gaussian(0.4, 0.4, 1.0) == doctest::Approx(-1.41894).epsilon(1e-5));
    auto f = [](double q) { return psi_out_gaussian(q, 0.5, 0.1); };
    for (double q : {0.0 + 1e-3, 0.2, 0.45}) CHECK(std::abs(central(f, q, 1e-5) - psi_out_gaussian_dqK(q, 0.5, 0.1)) < 1e-6);
    CHECK(psi_out_gaussian(0.3, 0.5, 0.1) > psi_out_gaussian(0.2, 0.5, 0.1));
    CHECK_THROWS_AS(psi_out_gaussian(0.7, 0.5, 0.1), DomainError);
}

TEST_CASE("generic psi_out agrees with the gaussian closed form") {
    const double triples[][3] = {{0.1, 0.38, 0.1}, {0.3, 0.5, 0.05}, {0.9, 1.2, 0.5}};
    for (const auto& t : triples) {
        PsiDiagnostics diag;
        const double g = psi_out_generic(t[0], t[1], Channel::gaussian_generic(t[2]), {}, &diag);
        CHECK(g == doctest::Approx(psi_out_gaussian(t[0], t[1], t[2])).epsilon(1e-4));
        CHECK_FALSE(diag.truncated);
    }
}

TEST_CASE("generic psi_out at qK = 0 is minus the marginal entropy") {
    const double rK = 0.6, delta = 0.2;
    const double h = 0.5 * std::log(2 * kPi * std::numbers::e * (rK + delta));
    CHECK(psi_out_generic(0.0, rK, Channel::gaussian_generic(delta)) == doctest::Approx(-h).epsilon(1e-6));
}

TEST_CASE("generic psi_out is translation invariant in y") {
    const double b = 0.3, c = 2.5;
    Channel base = Channel::laplace(b);
    Channel shifted = Channel::custom(
        "shifted-laplace", [b, c](double y, double l) { return std::exp(-std::abs(y - c - l) / b) / (2 * b); }, 3 * b,
        [c](double l) { return l + c; });
    for (double qK : {0.0, 0.2, 0.5})
        CHECK(psi_out_generic(qK, 0.5, shifted) == doctest::Approx(psi_out_generic(qK, 0.5, base)).epsilon(1e-6));
}

TEST_CASE("prior free entropies and magnetisations") {
    for (auto w : {WPrior::gaussian, WPrior::rademacher}) {
        CHECK(psi_w(0.0, w) == doctest::Approx(0.0).scale(1));
        CHECK(m_w(0.0, w) == doctest::Approx(0.0).scale(1));
        // d psi / d qhat = m / 2
        auto f = [w](double q) { return psi_w(q, w); };
        for (double q : {0.3, 1.0, 4.0}) CHECK(central(f, q, 1e-5) == doctest::Approx(m_w(q, w) / 2).epsilon(1e-6));
    }
    CHECK(psi_w(1.0, WPrior::gaussian) == doctest::Approx(0.5 - 0.5 * std::log(2.0)));
    CHECK(psi_w(1.0, WPrior::gaussian) == doctest::Approx(0.153426).epsilon(1e-5));
    CHECK(m_w(1.0, WPrior::gaussian) == 0.5);
    CHECK_THROWS_AS(m_w(-1.0, WPrior::gaussian), DomainError);
}

TEST_CASE("rademacher magnetisation against monte carlo") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd;
    const int n = 1000000;
    const double q = 2.0;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double t = std::tanh(std::sqrt(q) * nd(rng) + q);
        s += t;
        s2 += t * t;
    }
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(m_w(q, WPrior::rademacher) - mean) < 3 * se);
}

TEST_CASE("r_K and q_K") {
    auto relu = builtin("relu");
    const double r2 = r2_of(0.5, VPrior::constant_one);
    CHECK(r2 == 1.5);
    CHECK(r2_of(0.5, VPrior::rademacher) == 1.0);
    // mu1^2 = 1/4, mu2^2 = 1/(2 pi), g(1) = E relu^2 - mu0^2 - mu1^2 - mu2^2/2
    const double g1 = 0.5 - 1 / (2 * kPi) - 0.25 - 1 / (4 * kPi);
    const double rK = 0.25 + r2 / (4 * kPi) + g1;
    CHECK(r_K(relu, r2) == doctest::Approx(rK).epsilon(1e-9));
    CHECK(r_K(relu, r2) == doctest::Approx(0.38064).epsilon(1e-4));
    CHECK(q_K(r2, 1.0, 1.0, relu) == doctest::Approx(r_K(relu, r2)).epsilon(1e-12));
    CHECK(q_K(0.7, 0.0, 1.0, relu) == doctest::Approx(0.25 + 0.7 / (4 * kPi)).epsilon(1e-12));
}

TEST_CASE("mutual information vanishes at perfect learning") {
    TheoryParams p = sigma3(2.0);
    const double f = -0.5 * std::log(2 * kPi * p.delta()) - 0.5;
    CHECK(mutual_information(f, p) == doctest::Approx(0.0).scale(1));
}

TEST_CASE("universal solve: residual and stationarity") {
    const auto dc = scalar_curve();
    for (double alpha : {0.3, 1.0, 3.0}) {
        TheoryParams p = sigma3(alpha);
        auto s = solve_universal(p, dc);
        REQUIRE(s.converged);
        CHECK(residual_universal(s.state, p, dc) < 1e-8);
        CHECK(s.state.q2 <= s.r2);
        auto fq = [&](double q) { return f_universal(q, s.state.q_hat2, p, dc); };
        auto fh = [&](double h) { return f_universal(s.state.q2, h, p, dc); };
        CHECK(std::abs(central(fq, s.state.q2, 1e-5)) < 1e-4);
        CHECK(std::abs(central(fh, s.state.q_hat2, 1e-5)) < 1e-4);
        CHECK(s.f == doctest::Approx(f_universal(s.state.q2, s.state.q_hat2, p, dc)));
    }
}

TEST_CASE("universal solve at large alpha recovers S2") {
    TheoryParams p = sigma3(1e3);
    p.activation = builtin("he2");
    auto s = solve_universal(p, scalar_curve());
    CHECK(s.converged);
    CHECK(s.r2 - s.state.q2 < 1e-3);
    CHECK(s.eps_opt - p.delta() < 1e-3);
}

TEST_CASE("odd activation keeps q_hat2 at zero") {
    TheoryParams p = sigma3(2.0);
    p.activation = builtin("he3");
    auto s = solve_universal(p, scalar_curve());
    CHECK(s.converged);
    CHECK(s.state.q_hat2 == 0.0);
    CHECK(s.state.q2 == doctest::Approx(s.r2 - 1.0));
}

TEST_CASE("specialisation solve: residual and stationarity") {
    for (auto w : {WPrior::gaussian, WPrior::rademacher}) {
        TheoryParams p = sigma3(1.5, w);
        auto s = solve_specialisation(p);
        REQUIRE(s.converged);
        CHECK_FALSE(s.branch_absent);
        CHECK(residual_specialisation(s.state, p) < 1e-8);
        const OverlapState x = s.state;
        auto at = [&](int which, double v) {
            OverlapState y = x;
            (which == 0 ? y.q2 : which == 1 ? y.q_hat2 : which == 2 ? y.qW : y.q_hatW) = v;
            return f_specialisation(y, p);
        };
        const double vals[] = {x.q2, x.q_hat2, x.qW, x.q_hatW};
        for (int i = 0; i < 4; ++i) {
            double h = 1e-5 * std::max(1.0, std::abs(vals[i]));
            if (i == 2) h = std::min(h, (1 - vals[i]) / 2);
            CHECK(std::abs((at(i, vals[i] + h) - at(i, vals[i] - h)) / (2 * h)) < 1e-4);
        }
    }
}

TEST_CASE("uninformative start stays on qW = 0") {
    TheoryParams p = sigma3(1.0);
    OverlapState zero{0.5, 1.0, 0.0, 0.0};
    auto s = solve_specialisation(p, {}, &zero);
    CHECK(s.branch_absent);
    CHECK(s.state.qW == 0.0);
}

TEST_CASE("specialisation error decreases with alpha and mi grows") {
    double prev_eps = 1e9, prev_mi = -1;
    for (double alpha : {1.0, 1.5, 2.0, 3.0, 5.0}) {
        auto s = solve_specialisation(sigma3(alpha));
        REQUIRE(s.converged);
        CHECK(s.eps_opt <= prev_eps);
        CHECK(s.mi >= prev_mi);
        prev_eps = s.eps_opt;
        prev_mi = s.mi;
    }
}

TEST_CASE("generic channel path reproduces the gaussian solution") {
    TheoryParams p = sigma3(1.0);
    const auto dc = scalar_curve();
    auto a = solve_universal(p, dc);
    p.channel = Channel::gaussian_generic(0.1);
    SolverConfig cfg;
    cfg.quad.n_xi = cfg.quad.n_u = 24;
    auto b = solve_universal(p, dc, cfg);
    CHECK(b.converged);
    CHECK(b.state.q2 == doctest::Approx(a.state.q2).epsilon(1e-4));
    CHECK(b.f == doctest::Approx(a.f).epsilon(1e-4));
    CHECK(b.mi == doctest::Approx(a.mi).epsilon(1e-3));
    CHECK(b.eps_opt == doctest::Approx(a.eps_opt).epsilon(1e-5));
}

TEST_CASE("laplace channel converges") {
    TheoryParams p = sigma3(1.0);
    p.channel = Channel::laplace(0.2);
    SolverConfig cfg;
    cfg.quad.n_xi = cfg.quad.n_u = 20;
    auto s = solve_universal(p, scalar_curve(), cfg);
    CHECK(s.converged);
    CHECK(residual_universal(s.state, p, scalar_curve(), cfg.quad) < 1e-6);
    CHECK(s.eps_opt > p.delta());
}

TEST_CASE("equilibrium selects the larger free entropy") {
    const auto dc = scalar_curve();
    for (double alpha : {0.5, 3.0}) {
        auto e = solve_equilibrium(sigma3(alpha), dc);
        if (e.specialisation) {
            const bool sp = e.specialisation->f > e.universal.f;
            CHECK((e.selected.phase == Phase::specialisation) == sp);
        } else {
            CHECK(e.selected.phase == Phase::universal);
        }
    }
}

TEST_CASE("find_alpha_sp brackets") {
    const auto dc = scalar_curve();
    CHECK_THROWS_AS(find_alpha_sp(sigma3(1.0), dc, 2.0, 1.0), ConfigError);
    CHECK_THROWS_AS(find_alpha_sp(sigma3(1.0), dc, 0.0, 1.0), ConfigError);
    auto a = find_alpha_sp(sigma3(1.0), dc, 0.2, 10.0, 1e-5);
    REQUIRE(a.has_value());
    auto below = solve_equilibrium(sigma3(*a - 1e-2), dc);
    auto above = solve_equilibrium(sigma3(*a + 1e-2), dc);
    CHECK(below.selected.phase == Phase::universal);
    CHECK(above.selected.phase == Phase::specialisation);
    CHECK_THROWS_AS(find_alpha_sp(sigma3(1.0), dc, *a + 0.5, 10.0), DomainError);
}

TEST_CASE("linear regime") {
    CHECK(solve_linear_regime_delta1(0.0, 1.0) == 0.0);
    CHECK(solve_linear_regime_delta1(1e8, 1.0) == doctest::Approx(1.0).epsilon(1e-7));
    // bisection on q - qh/(qh + 1), qh = a/(1 + D - q)
    auto h = [](double q) {
        const double qh = 1.0 / (2.0 - q);
        return q - qh / (qh + 1);
    };
    double lo = 0, hi = 1;
    for (int i = 0; i < 200; ++i) {
        const double m = 0.5 * (lo + hi);
        (h(m) < 0 ? lo : hi) = m;
    }
    CHECK(solve_linear_regime_delta1(1.0, 1.0) == doctest::Approx(lo).epsilon(1e-12));
    CHECK_THROWS_AS(solve_linear_regime(1.0, builtin("he2"), 0.1), DomainError);
    auto relu = builtin("relu");
    CHECK(delta1_of(relu, 0.1) == doctest::Approx((0.1 + 0.5 - 1 / (2 * kPi) - 0.25) / 0.25).epsilon(1e-8));
}

TEST_CASE("theory sweep rows") {
    const auto dc = scalar_curve();
    TheoryParams p = sigma3(1.0);
    CHECK(sweep_theory(p, dc, {}).empty());
    CHECK(sweep_columns().size() == 13);
    auto rows = sweep_theory(p, dc, {0.5, 1.0, 2.0}, {}, 2);
    int uni = 0;
    for (const auto& r : rows) {
        CHECK(r.converged);
        if (r.phase.rfind("universal", 0) == 0) ++uni;
    }
    CHECK(uni == 3);
    p.alpha = 1.0;
    auto single = solve_universal(p, dc);
    for (const auto& r : rows)
        if (r.alpha == 1.0 && r.phase.rfind("universal", 0) == 0)
            CHECK(r.q2 == doctest::Approx(single.q2_centered(0.5, p.v_prior)).epsilon(1e-7));
}
