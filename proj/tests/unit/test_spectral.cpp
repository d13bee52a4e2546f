#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "doctest.h"
#include "shallowbayes/saddle.hpp"
#include "shallowbayes/spectral.hpp"

using namespace shallowbayes;

namespace {

const double kPi = std::numbers::pi;

// Free-probability reference values for gamma = 0.5 (subordination solve of the R-transform of
// sqrt(q) Sbar + Z, density on a 6001-point grid; iota by integrating the I-MMSE relation).
struct Golden {
    VPrior v;
    double q, cube, iota;
};
const Golden kGolden[] = {
    {VPrior::constant_one, 1.0, 0.6030514, 0.1545319},
    {VPrior::constant_one, 5.0, 0.3934109, 0.3595336},
    {VPrior::rademacher, 1.0, 0.5609593, 0.1641375},
    {VPrior::gaussian, 1.0, 0.6565995, 0.1419785},
    {VPrior::gaussian, 5.0, 0.4766568, 0.3181203},
};

double semicircle_cdf(double x) {
    x = std::clamp(x, -2.0, 2.0);
    return 0.5 + (x * std::sqrt(4 - x * x) / 4 + std::asin(x / 2)) / kPi;
}

}  // namespace

TEST_CASE("goe entry variances") {
    Engine rng = make_stream(1, Stream::spectral, 77);
    const int d = 400;
    Matrix Z = sample_goe(d, rng);
    CHECK((Z - Z.transpose()).norm() == 0.0);
    double off = 0, diag = 0;
    for (int i = 0; i < d; ++i) {
        diag += Z(i, i) * Z(i, i);
        for (int j = i + 1; j < d; ++j) off += Z(i, j) * Z(i, j);
    }
    off /= d * (d - 1) / 2.0;
    diag /= d;
    CHECK(off * d == doctest::Approx(1.0).epsilon(0.02));
    CHECK(diag * d == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("zero signal gives the semicircle") {
    auto e = sample_spectrum(0.0, 0.5, VPrior::constant_one, 1000, 10, 5);
    auto all = e.concatenated();
    CHECK(all.size() == 10000);
    std::sort(all.begin(), all.end());
    double ks = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const double F = semicircle_cdf(all[i]);
        ks = std::max({ks, std::abs(F - double(i) / all.size()), std::abs(F - double(i + 1) / all.size())});
    }
    CHECK(ks < 0.02);
    auto raw = mu_cubed_integral(e, {0.1, 0.05, 0.025}, false);
    CHECK(raw.value == doctest::Approx(1.0).epsilon(0.01));
    CHECK_FALSE(raw.under_resolved);
    CHECK(mu_cubed_integral(e).value == 1.0);
}

TEST_CASE("semicircle cube integral closed form") {
    // int ((1/2pi) sqrt(4 - x^2))^3 dx = 3 / (4 pi^2)
    const int m = 200000;
    double acc = 0;
    for (int i = 0; i < m; ++i) {
        const double x = -2 + 4 * (i + 0.5) / m;
        const double r = std::sqrt(4 - x * x) / (2 * kPi);
        acc += r * r * r * 4.0 / m;
    }
    CHECK(acc == doctest::Approx(3 / (4 * kPi * kPi)).epsilon(1e-6));
}

TEST_CASE("cube integral scales as 1/c^2") {
    auto e = sample_spectrum(0.7, 0.5, VPrior::gaussian, 300, 1, 2);
    const auto& l = e.eigenvalues[0];
    std::vector<double> scaled(l);
    for (double& x : scaled) x *= 3.0;
    const double a = smoothed_cube_integral(l, 0.05), b = smoothed_cube_integral(scaled, 0.15);
    CHECK(b == doctest::Approx(a / 9).epsilon(1e-9));
    CHECK_THROWS(smoothed_cube_integral({}, 0.1));
    CHECK_THROWS(smoothed_cube_integral(l, 0.0));
}

TEST_CASE("rademacher read-outs give a symmetric spectrum") {
    auto e = sample_spectrum(3.0, 0.5, VPrior::rademacher, 400, 10, 9);
    std::vector<double> means;
    for (const auto& l : e.eigenvalues) {
        double m = 0;
        for (double x : l) m += x / l.size();
        means.push_back(m);
    }
    double mu = 0, var = 0;
    for (double m : means) mu += m / means.size();
    for (double m : means) var += (m - mu) * (m - mu) / (means.size() - 1);
    CHECK(std::abs(mu) < 3 * std::sqrt(var / means.size()) + 1e-12);
    CHECK(std::abs(mu) < 5 / std::sqrt(400.0 * 10));
}

TEST_CASE("large signal edge follows the scaled Wishart edge") {
    // Sbar = sqrt(k/d) W^T W / k; Marchenko-Pastur edge of W^T W / k with ratio d/k = 2 is (1 + sqrt 2)^2
    const double q = 1e4;
    auto e = sample_spectrum(q, 0.5, VPrior::constant_one, 1000, 2, 4);
    const double edge = std::sqrt(0.5) * std::pow(1 + std::sqrt(2.0), 2);
    for (const auto& l : e.eigenvalues) CHECK(l.back() / std::sqrt(q) == doctest::Approx(edge).epsilon(0.02));
}

TEST_CASE("cube integral matches free-probability values") {
    for (const auto& g : kGolden) {
        auto e = sample_spectrum(g.q, 0.5, g.v, 1000, 6, 11);
        auto c = mu_cubed_integral(e);
        CHECK(c.value == doctest::Approx(g.cube).epsilon(0.005));
        CHECK(c.value > 0);
        CHECK(c.value < 1);
    }
}

TEST_CASE("shipped tables reproduce the free-probability values") {
    const std::string dir = SHALLOWBAYES_DATA_DIR "/spectral";
    REQUIRE(std::filesystem::exists(dir));
    for (const auto& g : kGolden) {
        auto dc = DenoisingCurve::from_table(cached_table(0.5, g.v, SpectralConfig{}, dir));
        CHECK(dc.mmse(g.q) == doctest::Approx((1 - g.cube) / g.q).epsilon(0.01));
        CHECK(dc.iota(g.q) == doctest::Approx(g.iota).epsilon(0.01));
    }
}

TEST_CASE("log energy") {
    const std::vector<double> l{0.0, 1.0, 3.0};
    CHECK(log_energy(l) == doctest::Approx(2 * (std::log(1.0) + std::log(3.0) + std::log(2.0)) / 9));
    long ex = 0;
    log_energy({0.0, 0.0, 1.0}, &ex);
    CHECK(ex == 1);
}

TEST_CASE("iota at zero, monotonicity and reference value") {
    IotaConfig cfg;
    cfg.sizes = {250, 500};
    cfg.n_seeds = 2;
    CHECK(iota(0.0, 0.5, VPrior::constant_one, cfg).value == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    const double lo = iota(0.1, 0.5, VPrior::constant_one, cfg).value;
    const double hi = iota(1.0, 0.5, VPrior::constant_one, cfg).value;
    CHECK(hi > lo);
    CHECK(lo > 0);
    cfg.sizes = {500, 1000};
    cfg.n_seeds = 4;
    for (const auto& g : kGolden) {
        if (g.q != 1.0) continue;
        auto est = iota(g.q, 0.5, g.v, cfg);
        CHECK(est.value == doctest::Approx(g.iota).epsilon(2e-3 / g.iota));
        CHECK(est.per_size.size() == 2);
    }
}

TEST_CASE("raw log-energy route also vanishes at zero signal") {
    IotaConfig cfg;
    cfg.sizes = {250, 500, 1000};
    cfg.n_seeds = 4;
    cfg.control_variate = false;
    auto est = iota(0.0, 0.5, VPrior::constant_one, cfg);
    CHECK(std::abs(est.value) < 2e-3);
    CHECK(est.per_size[0] > est.per_size[2]);
}

TEST_CASE("rie shrinkage") {
    Engine rng = make_stream(3, Stream::spectral, 0);
    const int d = 1000;
    auto l = symmetric_eigenvalues(sample_goe(d, rng));
    CHECK(rie_shrink(l, 0.0, 0.1) == l);
    auto xi = rie_shrink(l, 1.0, rie_default_eta(l));
    double ss = 0;
    for (double x : xi) ss += x * x;
    CHECK(std::sqrt(ss / d) < 0.05);
    // principal-value version is dominated by nearest-neighbour noise
    auto pv = rie_shrink(l, 1.0, 0.0);
    double sp = 0;
    for (double x : pv) sp += x * x;
    CHECK(std::sqrt(sp / d) > std::sqrt(ss / d));
}

TEST_CASE("rie contracts toward the bulk") {
    auto e = sample_spectrum(2.0, 0.5, VPrior::gaussian, 300, 1, 3);
    const auto& l = e.eigenvalues[0];
    auto xi = rie_shrink(l, 0.5, rie_default_eta(l));
    auto var = [](const std::vector<double>& v) {
        double m = 0, s = 0;
        for (double x : v) m += x / v.size();
        for (double x : v) s += (x - m) * (x - m) / v.size();
        return s;
    };
    CHECK(var(xi) <= var(l));
}

TEST_CASE("rie denoising error matches the cube-integral mmse") {
    const int d = 500;
    const double q = 1.0;
    double mse = 0;
    const int reps = 3;
    for (int r = 0; r < reps; ++r) {
        Engine rng = make_stream(21, Stream::spectral, r);
        Matrix Z = sample_goe(d, rng);
        Matrix S = sample_signal(d, 0.5, VPrior::constant_one, rng);
        Matrix R = S + Z / std::sqrt(q);
        auto res = rie_denoise(R, 1.0 / q);
        mse += (res.estimate - S).squaredNorm() / d / reps;
    }
    auto e = sample_spectrum(q, 0.5, VPrior::constant_one, 1000, 4, 8);
    const double mmse = (1 - mu_cubed_integral(e).value) / q;
    CHECK(mse == doctest::Approx(mmse).epsilon(0.05));
}

TEST_CASE("pchip is monotone and interpolating") {
    std::vector<double> x{0, 1, 2, 3}, y{0, 1, 1, 4};
    for (int i = 0; i < 4; ++i) CHECK(pchip(x, y, x[i]) == doctest::Approx(y[i]));
    double prev = -1;
    for (int i = 0; i <= 300; ++i) {
        const double v = pchip(x, y, i / 100.0);
        CHECK(v >= prev - 1e-15);
        prev = v;
    }
    CHECK(pchip(x, y, 1.5) == doctest::Approx(1.0));
}

TEST_CASE("small spectral table round trip and interpolation") {
    SpectralConfig cfg;
    cfg.d_spec = 300;
    cfg.n_seeds = 3;
    cfg.iota_sizes = {200, 300};
    cfg.grid_nodes = 9;
    cfg.grid_min = 0.01;
    cfg.grid_max = 100;
    auto t = build_spectral_table(0.5, VPrior::constant_one, cfg);
    CHECK(t.grid.size() == 10);
    CHECK(t.grid[0] == 0.0);
    CHECK(t.cube[0] == 1.0);
    CHECK(t.iota[0] == 0.0);
    CHECK(t.cube_at(0.0) == 1.0);
    CHECK(t.iota_at(0.0) == 0.0);
    for (std::size_t i = 1; i < t.grid.size(); ++i) {
        CHECK(t.iota[i] >= t.iota[i - 1]);
        CHECK(t.cube[i] > 0);
        CHECK(t.cube[i] <= 1);
    }
    // node values reproduce the direct estimators on the same draws
    auto e = sample_spectrum(t.grid[5], 0.5, VPrior::constant_one, 300, 3, cfg.seed);
    CHECK(t.cube[5] == doctest::Approx(mu_cubed_integral(e, cfg.etas).value).epsilon(1e-12));
    // off-grid interpolation against a direct run
    const double q = std::sqrt(t.grid[5] * t.grid[6]);
    auto eq = sample_spectrum(q, 0.5, VPrior::constant_one, 300, 3, cfg.seed);
    CHECK(t.cube_at(q) == doctest::Approx(mu_cubed_integral(eq, cfg.etas).value).epsilon(0.01));

    const auto dir = std::filesystem::temp_directory_path() / "sb_table_test";
    std::filesystem::create_directories(dir);
    const auto path = (dir / t.cache_key()).string();
    save_table(t, path);
    auto back = load_table(path);
    CHECK(back.grid == t.grid);
    CHECK(back.cube == t.cube);
    CHECK(back.iota == t.iota);
    CHECK(back.cache_key() == t.cache_key());
    auto cached = cached_table(0.5, VPrior::constant_one, cfg, dir.string());
    CHECK(cached.iota == t.iota);
    std::filesystem::remove_all(dir);
}
