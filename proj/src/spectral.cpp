#include "shallowbayes/spectral.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "shallowbayes/errors.hpp"
#include "shallowbayes/version.hpp"

namespace shallowbayes {

namespace {

constexpr double kCubeScale = 4.0 * std::numbers::pi * std::numbers::pi / 3.0;

std::uint64_t sample_index(int d, int s) { return std::uint64_t(d) * 1000003ULL + std::uint64_t(s); }

// Line through (x1, y1), (x2, y2) evaluated at 0.
double extrapolate_linear(double x1, double y1, double x2, double y2) { return (x1 * y2 - x2 * y1) / (x1 - x2); }

// Quadratic through three points evaluated at 0.
double extrapolate_quadratic(const double* x, const double* y) {
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) {
        double l = 1.0;
        for (int j = 0; j < 3; ++j)
            if (j != i) l *= (0.0 - x[j]) / (x[i] - x[j]);
        acc += l * y[i];
    }
    return acc;
}

struct EtaCubes {
    std::vector<double> per_eta;  // scaled cube integrals in the order of the eta list
};

EtaCubes cubes_for(const std::vector<double>& eigs, const std::vector<double>& etas) {
    EtaCubes c;
    for (double eta : etas) c.per_eta.push_back(kCubeScale * smoothed_cube_integral(eigs, eta));
    return c;
}

// Value at eta -> 0: quadratic through the three smallest widths (linear with two), residual = |quad - lin|.
std::pair<double, double> extrapolate_eta(const std::vector<double>& etas, const std::vector<double>& v) {
    std::vector<std::size_t> idx(etas.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return etas[a] < etas[b]; });
    if (etas.size() == 1) return {v[0], 0.0};
    const double lin = extrapolate_linear(etas[idx[0]], v[idx[0]], etas[idx[1]], v[idx[1]]);
    if (etas.size() < 3) return {lin, 0.0};
    const double x[3] = {etas[idx[0]], etas[idx[1]], etas[idx[2]]};
    const double y[3] = {v[idx[0]], v[idx[1]], v[idx[2]]};
    const double quad = extrapolate_quadratic(x, y);
    return {quad, std::abs(quad - lin)};
}

// Weighted least-squares line in 1/d, returns (intercept, intercept stderr).
std::pair<double, double> extrapolate_inverse_size(const std::vector<int>& sizes, const std::vector<double>& m,
                                                   const std::vector<double>& se) {
    if (sizes.size() == 1) return {m[0], se[0]};
    double S = 0, Sx = 0, Sxx = 0, Sy = 0, Sxy = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const double x = 1.0 / sizes[i];
        const double w = 1.0 / std::max(se[i] * se[i], 1e-20);
        S += w;
        Sx += w * x;
        Sxx += w * x * x;
        Sy += w * m[i];
        Sxy += w * x * m[i];
    }
    const double det = S * Sxx - Sx * Sx;
    const double a = (Sxx * Sy - Sx * Sxy) / det;
    return {a, std::sqrt(Sxx / det)};
}

double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / double(v.size());
}

double stderr_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / double(v.size() - 1) / double(v.size()));
}

}  // namespace

std::vector<double> symmetric_eigenvalues(const Matrix& A) {
    if (A.rows() != A.cols()) throw DomainError("symmetric_eigenvalues: matrix not square");
    Matrix a = A;
    std::vector<double> w(A.rows());
    const lapack_int info =
        LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'U', lapack_int(a.rows()), a.data(), lapack_int(a.rows()), w.data());
    if (info != 0) throw ConvergenceError("dsyevd failed with info " + std::to_string(info));
    return w;
}

void symmetric_eigensystem(const Matrix& A, std::vector<double>& values, Matrix& vectors) {
    if (A.rows() != A.cols()) throw DomainError("symmetric_eigensystem: matrix not square");
    vectors = A;
    values.resize(A.rows());
    const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', lapack_int(A.rows()), vectors.data(),
                                           lapack_int(A.rows()), values.data());
    if (info != 0) throw ConvergenceError("dsyevd failed with info " + std::to_string(info));
}

Matrix sample_goe(int d, Engine& rng) {
    std::normal_distribution<double> nd;
    Matrix Z(d, d);
    const double off = 1.0 / std::sqrt(double(d)), diag = std::sqrt(2.0 / d);
    for (int j = 0; j < d; ++j) {
        Z(j, j) = diag * nd(rng);
        for (int i = j + 1; i < d; ++i) {
            Z(i, j) = off * nd(rng);
            Z(j, i) = Z(i, j);
        }
    }
    return Z;
}

Matrix sample_signal(int d, double gamma, VPrior v_prior, Engine& rng) {
    const int k = std::max(1, int(std::lround(gamma * d)));
    std::normal_distribution<double> nd;
    Matrix W(k, d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < k; ++i) W(i, j) = nd(rng);
    Vector v(k);
    for (int i = 0; i < k; ++i) v[i] = sample_v(v_prior, rng);
    Matrix VW = v.asDiagonal() * W;
    Matrix S = W.transpose() * VW / std::sqrt(double(k) * d);
    return 0.5 * (S + S.transpose());
}

std::vector<double> SpectrumEnsemble::concatenated() const {
    std::vector<double> all;
    for (const auto& e : eigenvalues) all.insert(all.end(), e.begin(), e.end());
    return all;
}

namespace {

struct SpectralSample {
    Matrix S, Z;
    std::vector<double> goe;
};

SpectralSample draw_sample(double gamma, VPrior v_prior, int d, int s, std::uint64_t seed, int attempt = 0) {
    Engine rng = make_stream(seed + std::uint64_t(attempt) * 0x5851f42d4c957f2dULL, Stream::spectral,
                             sample_index(d, s));
    SpectralSample out;
    out.Z = sample_goe(d, rng);
    out.S = sample_signal(d, gamma, v_prior, rng);
    out.goe = symmetric_eigenvalues(out.Z);
    return out;
}

std::vector<double> eigs_with_retry(const Matrix& Y) {
    try {
        return symmetric_eigenvalues(Y);
    } catch (const ConvergenceError&) {
        // perturb by a negligible symmetric jitter once before giving up
        Matrix J = Y;
        J.diagonal().array() += 1e-13;
        return symmetric_eigenvalues(J);
    }
}

}  // namespace

SpectrumEnsemble sample_spectrum(double q_hat2, double gamma, VPrior v_prior, int d_spec, int n_seeds,
                                 std::uint64_t seed) {
    if (q_hat2 < 0) throw DomainError("sample_spectrum: q_hat2 must be nonnegative");
    if (d_spec < 2 || n_seeds < 1) throw DomainError("sample_spectrum: need d_spec >= 2 and n_seeds >= 1");
    SpectrumEnsemble e;
    e.d_spec = d_spec;
    e.n_seeds = n_seeds;
    e.q_hat2 = q_hat2;
    e.gamma = gamma;
    e.v_prior = v_prior;
    for (int s = 0; s < n_seeds; ++s) {
        SpectralSample sm;
        try {
            sm = draw_sample(gamma, v_prior, d_spec, s, seed);
        } catch (const ConvergenceError&) {
            sm = draw_sample(gamma, v_prior, d_spec, s, seed, 1);
        }
        e.goe.push_back(sm.goe);
        if (q_hat2 == 0.0)
            e.eigenvalues.push_back(sm.goe);
        else
            e.eigenvalues.push_back(eigs_with_retry(std::sqrt(q_hat2) * sm.S + sm.Z));
    }
    return e;
}

double smoothed_cube_integral(const std::vector<double>& eigs, double eta, double* refine_change) {
    if (eigs.empty()) throw DomainError("smoothed_cube_integral: empty spectrum");
    if (!(eta > 0)) throw DomainError("smoothed_cube_integral: eta must be positive");
    const auto [mn, mx] = std::minmax_element(eigs.begin(), eigs.end());
    const double lo = *mn - 8 * eta, hi = *mx + 8 * eta;
    const double N = double(eigs.size());
    auto integrate = [&](double h) {
        const long m = long(std::ceil((hi - lo) / h));
        const double step = (hi - lo) / m;
        const double e2 = eta * eta;
        double acc = 0.0;
        for (long g = 0; g <= m; ++g) {
            const double x = lo + g * step;
            double r = 0.0;
            for (double l : eigs) {
                const double u = x - l;
                r += 1.0 / (u * u + e2);
            }
            r *= eta / (std::numbers::pi * N);
            acc += (g == 0 || g == m ? 0.5 : 1.0) * r * r * r;
        }
        return acc * step;
    };
    const double v = integrate(eta / 4);
    if (refine_change) {
        const double fine = integrate(eta / 8);
        *refine_change = std::abs(fine - v) / std::max(std::abs(fine), 1e-300);
    }
    return v;
}

CubeEstimate mu_cubed_integral(const SpectrumEnsemble& e, const std::vector<double>& etas, bool control_variate) {
    if (e.eigenvalues.empty()) throw DomainError("mu_cubed_integral: empty ensemble");
    if (etas.empty()) throw DomainError("mu_cubed_integral: no smoothing widths");
    CubeEstimate out;
    const bool cv = control_variate && e.goe.size() == e.eigenvalues.size();
    std::vector<double> mean_y(etas.size(), 0.0), mean_z(etas.size(), 0.0);
    for (std::size_t s = 0; s < e.eigenvalues.size(); ++s) {
        const auto cy = cubes_for(e.eigenvalues[s], etas);
        for (std::size_t i = 0; i < etas.size(); ++i) mean_y[i] += cy.per_eta[i] / double(e.eigenvalues.size());
        if (cv) {
            const auto cz = e.q_hat2 == 0.0 ? cy : cubes_for(e.goe[s], etas);
            for (std::size_t i = 0; i < etas.size(); ++i) mean_z[i] += cz.per_eta[i] / double(e.goe.size());
        }
    }
    // resolution check on the first seed at the smallest width
    double change = 0.0;
    smoothed_cube_integral(e.eigenvalues[0], *std::min_element(etas.begin(), etas.end()), &change);
    out.under_resolved = change > 5e-3;
    out.per_eta = mean_y;
    auto [ly, ry] = extrapolate_eta(etas, mean_y);
    if (cv) {
        // the GOE part shares its draws with Y; its limit is exactly one
        std::vector<double> diff(etas.size());
        for (std::size_t i = 0; i < etas.size(); ++i) diff[i] = mean_y[i] - mean_z[i];
        auto [ld, rd] = extrapolate_eta(etas, diff);
        out.value = 1.0 + ld;
        out.residual = rd;
    } else {
        out.value = ly;
        out.residual = ry;
    }
    return out;
}

double log_energy(const std::vector<double>& eigs, long* excluded) {
    std::vector<double> l = eigs;
    std::sort(l.begin(), l.end());
    const std::size_t N = l.size();
    double acc = 0.0;
    long skipped = 0;
    for (std::size_t i = 0; i < N; ++i) {
        double row = 0.0;
        for (std::size_t j = i + 1; j < N; ++j) {
            const double dl = l[j] - l[i];
            if (dl < 1e-14) {
                ++skipped;
                continue;
            }
            row += std::log(dl);
        }
        acc += row;
    }
    if (excluded) *excluded = skipped;
    return 2.0 * acc / (double(N) * double(N));
}

int seeds_for_size(int d, int n_seeds_at_1000) {
    const double r = 1000.0 / d;
    return std::max(2, int(std::lround(n_seeds_at_1000 * r * r)));
}

IotaEstimate iota(double q_hat2, double gamma, VPrior v_prior, const IotaConfig& cfg) {
    if (q_hat2 < 0) throw DomainError("iota: q_hat2 must be nonnegative");
    IotaEstimate out;
    std::vector<double> m, se;
    long pairs = 0, excluded = 0;
    for (int d : cfg.sizes) {
        auto e = sample_spectrum(q_hat2, gamma, v_prior, d, seeds_for_size(d, cfg.n_seeds), cfg.seed);
        std::vector<double> vals;
        for (int s = 0; s < e.n_seeds; ++s) {
            long ex = 0;
            double le = log_energy(e.eigenvalues[s], &ex);
            excluded += ex;
            pairs += long(d) * (d - 1) / 2;
            if (cfg.control_variate) le -= q_hat2 == 0.0 ? le : log_energy(e.goe[s]);
            vals.push_back(le);
        }
        m.push_back(mean_of(vals));
        se.push_back(std::max(stderr_of(vals), 1e-12));
        const double base = cfg.control_variate ? -0.25 : 0.0;
        out.per_size.push_back(0.125 + 0.5 * (base + m.back()));
    }
    auto [a, ase] = extrapolate_inverse_size(cfg.sizes, m, se);
    const double base = cfg.control_variate ? -0.25 : 0.0;
    out.value = 0.125 + 0.5 * (base + a);
    out.stderr_ = 0.5 * ase;
    out.residual = std::abs(out.value - out.per_size.back());
    out.excluded_pairs = excluded;
    if (pairs > 0 && double(excluded) / double(pairs) > 1e-3)
        throw ConvergenceError("iota: more than 0.1% of eigenvalue pairs are degenerate");
    return out;
}

double rie_default_eta(const std::vector<double>& eigs) {
    const double N = double(eigs.size());
    double m = 0, s = 0;
    for (double l : eigs) m += l / N;
    for (double l : eigs) s += (l - m) * (l - m) / N;
    return std::sqrt(s) / std::sqrt(N);
}

std::vector<double> rie_shrink(const std::vector<double>& eigs, double noise_var, double eta) {
    if (noise_var < 0) throw DomainError("rie_shrink: negative noise variance");
    const std::size_t N = eigs.size();
    std::vector<double> out(eigs);
    if (noise_var == 0.0) return out;
    const double e2 = eta > 0 ? eta * eta : 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        double h = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            if (j == i) continue;
            double u = eigs[i] - eigs[j];
            if (eta > 0) {
                h += u / (u * u + e2);
            } else {
                if (std::abs(u) < 1e-12) u = u >= 0 ? 1e-12 : -1e-12;
                h += 1.0 / u;
            }
        }
        out[i] = eigs[i] - 2.0 * noise_var * h / double(N);
    }
    return out;
}

RieResult rie_denoise(const Matrix& R, double noise_var) {
    RieResult r;
    Matrix U;
    symmetric_eigensystem(R, r.eigenvalues, U);
    r.shrunk = rie_shrink(r.eigenvalues, noise_var, rie_default_eta(r.eigenvalues));
    Eigen::Map<const Vector> xi(r.shrunk.data(), Eigen::Index(r.shrunk.size()));
    r.estimate = U * xi.asDiagonal() * U.transpose();
    // MMSE from the cube integral of the observation, smoothing scaled to the spectrum
    if (noise_var > 0) {
        std::vector<double> y(r.eigenvalues.size());
        const double sc = 1.0 / std::sqrt(noise_var);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = sc * r.eigenvalues[i];
        const double N = double(y.size());
        const std::vector<double> etas{4.0 / std::sqrt(N), 2.0 / std::sqrt(N)};
        std::vector<double> v;
        for (double eta : etas) v.push_back(kCubeScale * smoothed_cube_integral(y, eta));
        const double cube = extrapolate_eta(etas, v).first;
        r.mmse = noise_var * (1.0 - cube);
    }
    return r;
}

// ---------------------------------------------------------------- tables

double pchip(const std::vector<double>& x, const std::vector<double>& y, double t) {
    const std::size_t n = x.size();
    if (n == 0) throw DomainError("pchip: empty table");
    if (n == 1 || t <= x.front()) return y.front();
    if (t >= x.back()) return y.back();
    const std::size_t k = std::size_t(std::upper_bound(x.begin(), x.end(), t) - x.begin()) - 1;
    auto slope = [&](std::size_t i) { return (y[i + 1] - y[i]) / (x[i + 1] - x[i]); };
    auto deriv = [&](std::size_t i) {
        if (i == 0) return slope(0);
        if (i == n - 1) return slope(n - 2);
        const double a = slope(i - 1), b = slope(i);
        if (a * b <= 0) return 0.0;
        const double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
        const double w1 = 2 * h1 + h0, w2 = h1 + 2 * h0;
        return (w1 + w2) / (w1 / a + w2 / b);
    };
    const double h = x[k + 1] - x[k], s = (t - x[k]) / h;
    const double d0 = deriv(k), d1 = deriv(k + 1);
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    return h00 * y[k] + h10 * h * d0 + h01 * y[k + 1] + h11 * h * d1;
}

std::vector<double> default_grid(const SpectralConfig& c) {
    std::vector<double> g{0.0};
    const double a = std::log(c.grid_min), b = std::log(c.grid_max);
    for (int i = 0; i < c.grid_nodes; ++i)
        g.push_back(std::exp(a + (b - a) * i / std::max(1, c.grid_nodes - 1)));
    return g;
}

namespace {

std::vector<double> log_nodes(const SpectralTable& t) {
    std::vector<double> x;
    for (std::size_t i = 1; i < t.grid.size(); ++i) x.push_back(std::log(t.grid[i]));
    return x;
}

}  // namespace

double SpectralTable::mmse_at(double q) const {
    if (q < 0) throw DomainError("mmse_at: negative q_hat2");
    if (grid.size() < 2) throw DomainError("spectral table has no positive nodes");
    std::vector<double> mm;
    for (std::size_t i = 1; i < grid.size(); ++i) mm.push_back((1.0 - cube[i]) / grid[i]);
    if (q <= grid[1]) return mm.front();
    if (q >= grid.back()) return mm.back() * grid.back() / q;
    return pchip(log_nodes(*this), mm, std::log(q));
}

double SpectralTable::cube_at(double q) const {
    if (q == 0.0) return 1.0;
    return 1.0 - q * mmse_at(q);
}

double SpectralTable::iota_at(double q) const {
    if (q < 0) throw DomainError("iota_at: negative q_hat2");
    if (q == 0.0) return 0.0;
    if (q <= grid[1]) return iota[1] * q / grid[1];
    std::vector<double> io(iota.begin() + 1, iota.end());
    if (q >= grid.back()) {
        // beyond the grid: integrate the 1/q tail of the mmse
        return io.back() + 0.25 * mmse_at(grid.back()) * grid.back() * std::log(q / grid.back());
    }
    return pchip(log_nodes(*this), io, std::log(q));
}

std::string SpectralTable::cache_key() const {
    std::ostringstream os;
    os.precision(6);
    os << "g" << gamma << "_" << to_string(v_prior) << "_d" << config.d_spec << "_s" << config.n_seeds << "_n"
       << config.grid_nodes << "_e";
    for (double e : config.etas) os << e << "-";
    os << "_i";
    for (int d : config.iota_sizes) os << d << "-";
    os << "_seed" << config.seed;
    return os.str();
}

SpectralTable build_spectral_table(double gamma, VPrior v_prior, const SpectralConfig& cfg,
                                   void (*progress)(int, int)) {
    SpectralTable t;
    t.gamma = gamma;
    t.v_prior = v_prior;
    t.config = cfg;
    t.code_version = kTableFormat;
    t.grid = default_grid(cfg);
    const std::size_t G = t.grid.size();
    const auto& etas = cfg.etas;

    std::vector<int> sizes = cfg.iota_sizes;
    if (std::find(sizes.begin(), sizes.end(), cfg.d_spec) == sizes.end()) sizes.push_back(cfg.d_spec);
    std::sort(sizes.begin(), sizes.end());

    // per node: cube differences at d_spec (per eta); log-energy differences per iota size
    std::vector<std::vector<double>> cube_diff(G, std::vector<double>(etas.size(), 0.0));
    std::vector<std::vector<std::vector<double>>> le_diff(
        G, std::vector<std::vector<double>>(cfg.iota_sizes.size()));

    int done = 0, total = 0;
    for (int d : sizes) total += seeds_for_size(d, cfg.n_seeds);
    for (int d : sizes) {
        const int ns = d == cfg.d_spec ? cfg.n_seeds : seeds_for_size(d, cfg.n_seeds);
        const auto it = std::find(cfg.iota_sizes.begin(), cfg.iota_sizes.end(), d);
        const bool do_iota = it != cfg.iota_sizes.end();
        const std::size_t iota_slot = std::size_t(it - cfg.iota_sizes.begin());
        const bool do_cube = d == cfg.d_spec;
        for (int s = 0; s < ns; ++s) {
            SpectralSample sm;
            try {
                sm = draw_sample(gamma, v_prior, d, s, cfg.seed);
            } catch (const ConvergenceError&) {
                sm = draw_sample(gamma, v_prior, d, s, cfg.seed, 1);
            }
            const double le_z = do_iota ? log_energy(sm.goe) : 0.0;
            const auto cz = do_cube ? cubes_for(sm.goe, etas) : EtaCubes{};
            for (std::size_t g = 1; g < G; ++g) {
                const auto ey = eigs_with_retry(std::sqrt(t.grid[g]) * sm.S + sm.Z);
                if (do_iota) le_diff[g][iota_slot].push_back(log_energy(ey) - le_z);
                if (do_cube) {
                    const auto cy = cubes_for(ey, etas);
                    for (std::size_t i = 0; i < etas.size(); ++i)
                        cube_diff[g][i] += (cy.per_eta[i] - cz.per_eta[i]) / ns;
                }
            }
            ++done;
            if (progress) progress(done, total);
        }
    }

    t.cube.assign(G, 1.0);
    t.iota.assign(G, 0.0);
    t.iota_se.assign(G, 0.0);
    for (std::size_t g = 1; g < G; ++g) {
        t.cube[g] = 1.0 + extrapolate_eta(etas, cube_diff[g]).first;
        std::vector<double> m, se;
        for (const auto& v : le_diff[g]) {
            m.push_back(mean_of(v));
            se.push_back(std::max(stderr_of(v), 1e-12));
        }
        auto [a, ase] = extrapolate_inverse_size(cfg.iota_sizes, m, se);
        t.iota[g] = 0.125 + 0.5 * (-0.25 + a);
        t.iota_se[g] = 0.5 * ase;
    }
    return t;
}

void save_table(const SpectralTable& t, const std::string& path) {
    nlohmann::json h = {{"gamma", t.gamma},
                        {"v_prior", to_string(t.v_prior)},
                        {"nodes", t.grid.size()},
                        {"code_version", t.code_version},
                        {"provenance",
                         {{"d_spec", t.config.d_spec},
                          {"n_seeds", t.config.n_seeds},
                          {"etas", t.config.etas},
                          {"iota_sizes", t.config.iota_sizes},
                          {"grid_nodes", t.config.grid_nodes},
                          {"grid_min", t.config.grid_min},
                          {"grid_max", t.config.grid_max},
                          {"seed", t.config.seed}}},
                        {"layout", "grid, cube, iota, iota_se as float64 little-endian arrays"}};
    std::ofstream(path + ".json") << h.dump(2) << "\n";
    std::ofstream out(path + ".bin", std::ios::binary);
    for (const auto* v : {&t.grid, &t.cube, &t.iota, &t.iota_se})
        out.write(reinterpret_cast<const char*>(v->data()), std::streamsize(v->size() * sizeof(double)));
    if (!out) throw std::runtime_error("failed to write " + path + ".bin");
}

SpectralTable load_table(const std::string& path) {
    std::ifstream hj(path + ".json");
    if (!hj) throw ConfigError("missing table header " + path + ".json");
    const auto h = nlohmann::json::parse(hj);
    SpectralTable t;
    t.gamma = h.at("gamma");
    t.v_prior = parse_v_prior(h.at("v_prior"));
    t.code_version = h.at("code_version");
    const auto& p = h.at("provenance");
    t.config.d_spec = p.at("d_spec");
    t.config.n_seeds = p.at("n_seeds");
    t.config.etas = p.at("etas").get<std::vector<double>>();
    t.config.iota_sizes = p.at("iota_sizes").get<std::vector<int>>();
    t.config.grid_nodes = p.at("grid_nodes");
    t.config.grid_min = p.at("grid_min");
    t.config.grid_max = p.at("grid_max");
    t.config.seed = p.at("seed");
    const std::size_t n = h.at("nodes");
    std::ifstream in(path + ".bin", std::ios::binary);
    for (auto* v : {&t.grid, &t.cube, &t.iota, &t.iota_se}) {
        v->resize(n);
        in.read(reinterpret_cast<char*>(v->data()), std::streamsize(n * sizeof(double)));
    }
    if (!in) throw ConfigError("truncated table " + path + ".bin");
    return t;
}

SpectralTable cached_table(double gamma, VPrior v_prior, const SpectralConfig& cfg, const std::string& cache_dir,
                           bool verbose) {
    SpectralTable probe;
    probe.gamma = gamma;
    probe.v_prior = v_prior;
    probe.config = cfg;
    const std::string path = (std::filesystem::path(cache_dir) / probe.cache_key()).string();
    if (std::filesystem::exists(path + ".json") && std::filesystem::exists(path + ".bin")) {
        try {
            SpectralTable t = load_table(path);
            if (t.code_version == kTableFormat) return t;
        } catch (const std::exception&) {
        }
    }
    if (verbose) std::fprintf(stderr, "building spectral table %s\n", probe.cache_key().c_str());
    SpectralTable t = build_spectral_table(gamma, v_prior, cfg);
    std::filesystem::create_directories(cache_dir);
    save_table(t, path);
    return t;
}

}  // namespace shallowbayes
