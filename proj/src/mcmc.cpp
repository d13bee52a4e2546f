#include "shallowbayes/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "shallowbayes/errors.hpp"

namespace shallowbayes {

std::string to_string(InitKind k) { return k == InitKind::informative ? "informative" : "uninformative"; }

InitKind parse_init(const std::string& s) {
    if (s == "informative") return InitKind::informative;
    if (s == "uninformative") return InitKind::uninformative;
    throw ConfigError("unknown init: " + s);
}

void ChainConfig::validate() const {
    if (steps < 0) throw ConfigError("chain steps must be nonnegative");
    if (!(hmc.step_size > 0)) throw ConfigError("hmc step_size must be positive");
    if (hmc.leapfrog_steps < 1) throw ConfigError("hmc leapfrog_steps must be >= 1");
    if (!(hmc.target_accept > 0 && hmc.target_accept < 1)) throw ConfigError("hmc target_accept must be in (0,1)");
    if (check_every < 1) throw ConfigError("check_every must be >= 1");
    if (max_trace_points < 2) throw ConfigError("max_trace_points must be >= 2");
    if (ell_max < 1 || ell_max > 5) throw ConfigError("ell_max must be in 1..5");
}

void OverlapTrace::record(const TracePoint& p) {
    if (p.step % stride != 0) return;
    points.push_back(p);
    if (long(points.size()) >= max_points) {
        std::vector<TracePoint> kept;
        kept.reserve(points.size() / 2 + 1);
        stride *= 2;
        for (const auto& q : points)
            if (q.step % stride == 0) kept.push_back(q);
        points.swap(kept);
    }
}

std::vector<double> OverlapTrace::column(int which) const {
    std::vector<double> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(trace_row(p)[which + 1]);
    return out;
}

std::vector<std::string> trace_columns() { return {"step", "qW", "q1", "q2", "q3", "q4", "q5", "energy", "acc_rate"}; }

std::vector<double> trace_row(const TracePoint& p) {
    return {double(p.step), p.qW, p.q[0], p.q[1], p.q[2], p.q[3], p.q[4], p.energy, p.acc_rate};
}

namespace {

// Elementwise sigma and sigma' on arrays; polynomials go through monomial Horner.
class ArrayActivation {
public:
    explicit ArrayActivation(const ActivationSpec& s) : s_(s) {
        if (!s.polynomial()) return;
        const auto& a = s.he_coeffs;
        std::vector<double> hm{1.0}, h{0.0, 1.0};
        c_.assign(a.size(), 0.0);
        c_[0] = a[0];
        if (a.size() > 1) c_[1] += a[1];
        for (std::size_t l = 1; l + 1 < a.size(); ++l) {
            std::vector<double> hp(l + 2, 0.0);
            for (std::size_t i = 0; i < h.size(); ++i) hp[i + 1] += h[i];
            for (std::size_t i = 0; i < hm.size(); ++i) hp[i] -= double(l) * hm[i];
            hm = h;
            h = hp;
            for (std::size_t i = 0; i < h.size(); ++i) c_[i] += a[l + 1] * h[i];
        }
        for (std::size_t i = 1; i < c_.size(); ++i) dc_.push_back(double(i) * c_[i]);
        if (dc_.empty()) dc_.push_back(0.0);
    }

    template <class In>
    Eigen::ArrayXd value(const In& x) const {
        if (c_.empty()) return x.unaryExpr([this](double t) { return s_.evaluate(t); });
        return horner(c_, x);
    }
    template <class In>
    Eigen::ArrayXXd value2(const In& x) const {
        if (c_.empty()) return x.unaryExpr([this](double t) { return s_.evaluate(t); });
        return horner2(c_, x);
    }
    template <class In>
    Eigen::ArrayXXd derivative2(const In& x) const {
        if (dc_.empty()) return x.unaryExpr([this](double t) { return s_.derivative(t); });
        return horner2(dc_, x);
    }

private:
    template <class In>
    static Eigen::ArrayXd horner(const std::vector<double>& c, const In& x) {
        Eigen::ArrayXd acc = Eigen::ArrayXd::Constant(x.size(), c.back());
        for (int i = int(c.size()) - 2; i >= 0; --i) acc = acc * x + c[i];
        return acc;
    }
    template <class In>
    static Eigen::ArrayXXd horner2(const std::vector<double>& c, const In& x) {
        Eigen::ArrayXXd acc = Eigen::ArrayXXd::Constant(x.rows(), x.cols(), c.back());
        for (int i = int(c.size()) - 2; i >= 0; --i) acc = acc * x + c[i];
        return acc;
    }

    const ActivationSpec& s_;
    std::vector<double> c_, dc_;
};

struct Caches {
    Matrix H;   // n x k pre-activations
    Matrix F;   // sigma(H)
    Vector r;   // y - lambda
    double E = 0;
};

Caches build_caches(const Dataset& ds, const Matrix& W, const Vector& v, const ArrayActivation& act, double delta) {
    Caches c;
    const double sd = std::sqrt(double(W.cols())), sk = std::sqrt(double(W.rows()));
    if (ds.X.rows() == 0) {
        c.H.resize(0, W.rows());
        c.F.resize(0, W.rows());
        c.r.resize(0);
        return c;
    }
    c.H = ds.X * W.transpose() / sd;
    c.F = act.value2(c.H.array()).matrix();
    c.r = ds.y - c.F * v / sk;
    c.E = c.r.squaredNorm() / (2 * delta);
    return c;
}

void init_state(const TeacherInstance& teacher, const ModelParams& p, const ChainConfig& cfg, Matrix& W, Vector& v) {
    Engine rng = make_stream(cfg.seed, Stream::chain_init, cfg.chain_index);
    const int k = p.k(), d = p.d;
    if (cfg.start_W) {
        W = *cfg.start_W;
    } else if (cfg.init == InitKind::informative) {
        W = teacher.W;
    } else {
        W.resize(k, d);
        if (p.w_prior == WPrior::rademacher) {
            std::bernoulli_distribution b;
            for (long i = 0; i < W.size(); ++i) W.data()[i] = b(rng) ? 1.0 : -1.0;
        } else {
            std::normal_distribution<double> nd;
            for (long i = 0; i < W.size(); ++i) W.data()[i] = nd(rng);
        }
    }
    if (cfg.start_v) {
        v = *cfg.start_v;
    } else if (cfg.fixed_readouts || cfg.init == InitKind::informative) {
        v = teacher.v;
    } else {
        v.resize(k);
        for (int i = 0; i < k; ++i) v[i] = sample_v(p.v_prior, rng);
    }
    if (W.rows() != k || W.cols() != d || v.size() != k) throw ConfigError("chain start state has wrong shape");
}

TracePoint measure(long step, const Matrix& W, const Vector& v, const TeacherInstance& t, int ell_max, double E,
                   double acc) {
    TracePoint tp = overlap_trace(W, v, t, ell_max);
    tp.step = step;
    tp.energy = E;
    tp.acc_rate = acc;
    return tp;
}

}  // namespace

double potential_energy(const Dataset& ds, const Matrix& W, const Vector& v, const ModelParams& p, bool v_sampled) {
    return potential_gradient(ds, W, v, p, v_sampled).U;
}

PotentialGradient potential_gradient(const Dataset& ds, const Matrix& W, const Vector& v, const ModelParams& p,
                                     bool v_sampled) {
    if (!(p.delta > 0)) throw DomainError("posterior sampling needs delta > 0");
    const double sd = std::sqrt(double(W.cols())), sk = std::sqrt(double(W.rows()));
    const bool gauss_w = p.w_prior == WPrior::gaussian;
    if (ds.X.rows() == 0) {
        // BLAS rejects empty operands
        PotentialGradient g;
        g.U = (gauss_w ? 0.5 * W.squaredNorm() : 0.0) + (v_sampled ? 0.5 * v.squaredNorm() : 0.0);
        g.dW = gauss_w ? W : Matrix::Zero(W.rows(), W.cols());
        if (v_sampled) g.dv = v;
        return g;
    }
    const ArrayActivation act(p.activation);
    const Matrix H = ds.X * W.transpose() / sd;
    const Matrix F = act.value2(H.array()).matrix();
    const Vector r = ds.y - F * v / sk;
    PotentialGradient g;
    g.U = r.squaredNorm() / (2 * p.delta);
    if (gauss_w) g.U += 0.5 * W.squaredNorm();
    if (v_sampled) g.U += 0.5 * v.squaredNorm();
    // B_{mu i} = r_mu v_i sigma'(h_{mu i}) / sqrt(k)
    const Matrix B = (act.derivative2(H.array()) * (r * v.transpose()).array()).matrix() / sk;
    g.dW = -(B.transpose() * ds.X) / (p.delta * sd);
    if (gauss_w) g.dW += W;
    if (v_sampled) g.dv = v - F.transpose() * r / (p.delta * sk);
    return g;
}

ChainResult metropolis_binary(const Dataset& ds, const TeacherInstance& teacher, const ModelParams& p,
                              const ChainConfig& cfg) {
    cfg.validate();
    if (p.w_prior != WPrior::rademacher) throw ConfigError("metropolis_binary needs w_prior = rademacher");
    if (!(p.delta > 0)) throw DomainError("metropolis_binary needs delta > 0");
    const bool flip_v = !cfg.fixed_readouts;
    if (flip_v && p.v_prior != VPrior::rademacher) throw ConfigError("sampled read-outs need v_prior = rademacher");

    ChainResult res;
    init_state(teacher, p, cfg, res.W, res.v);
    Matrix& W = res.W;
    Vector& v = res.v;
    if ((W.array().abs() != 1.0).any()) throw ConfigError("metropolis_binary: start state must have entries +-1");
    const int k = p.k(), d = p.d;
    const long n = ds.X.rows();
    const double sd = std::sqrt(double(d)), sk = std::sqrt(double(k)), two_delta = 2 * p.delta;
    const ArrayActivation act(p.activation);
    Caches c = build_caches(ds, W, v, act, p.delta);

    Engine rng = make_stream(cfg.seed, Stream::chain, cfg.chain_index);
    std::uniform_real_distribution<double> unif;
    const long sites = long(k) * d + (flip_v ? k : 0);
    std::uniform_int_distribution<long> pick(0, sites - 1);
    Eigen::ArrayXd hnew(n), dl(n);
    long proposed = 0, accepted = 0;
    res.trace.max_points = cfg.max_trace_points;
    res.trace.record(measure(0, W, v, teacher, cfg.ell_max, c.E, 0.0));

    auto check = [&]() {
        Caches s = build_caches(ds, W, v, act, p.delta);
        res.max_incremental_error = std::max(res.max_incremental_error, std::abs(s.E - c.E) / std::max(1.0, std::abs(s.E)));
        ++res.energy_checks;
        c = std::move(s);
    };

    for (long sweep = 1; sweep <= cfg.steps; ++sweep) {
        for (long t = 0; t < sites; ++t) {
            const long site = pick(rng);
            ++proposed;
            if (site < long(k) * d) {
                const int i = int(site % k), j = int(site / k);
                const double w = W(i, j);
                hnew = c.H.col(i).array() - (2 * w / sd) * ds.X.col(j).array();
                const Eigen::ArrayXd fnew = act.value(hnew);
                dl = (v[i] / sk) * (fnew - c.F.col(i).array());
                const double dE = (dl * (dl - 2 * c.r.array())).sum() / two_delta;
                if (dE <= 0 || unif(rng) < std::exp(-dE)) {
                    W(i, j) = -w;
                    c.H.col(i) = hnew.matrix();
                    c.F.col(i) = fnew.matrix();
                    c.r.array() -= dl;
                    c.E += dE;
                    ++accepted;
                }
            } else {
                const int i = int(site - long(k) * d);
                dl = (-2 * v[i] / sk) * c.F.col(i).array();
                const double dE = (dl * (dl - 2 * c.r.array())).sum() / two_delta;
                if (dE <= 0 || unif(rng) < std::exp(-dE)) {
                    v[i] = -v[i];
                    c.r.array() -= dl;
                    c.E += dE;
                    ++accepted;
                }
            }
        }
        if (sweep % cfg.check_every == 0) check();
        res.trace.record(measure(sweep, W, v, teacher, cfg.ell_max, c.E, double(accepted) / double(proposed)));
        if (cfg.on_step) cfg.on_step(sweep, W, v);
    }
    if (cfg.steps > 0 && cfg.steps % cfg.check_every != 0) check();
    res.steps = cfg.steps;
    res.acceptance = proposed ? double(accepted) / double(proposed) : 0.0;
    return res;
}

ChainResult hmc_gaussian(const Dataset& ds, const TeacherInstance& teacher, const ModelParams& p,
                         const ChainConfig& cfg) {
    cfg.validate();
    if (p.w_prior != WPrior::gaussian) throw ConfigError("hmc_gaussian needs w_prior = gaussian");
    if (!(p.delta > 0)) throw DomainError("hmc_gaussian needs delta > 0");
    const bool move_v = !cfg.fixed_readouts;
    if (move_v && p.v_prior != VPrior::gaussian) throw ConfigError("HMC-sampled read-outs need v_prior = gaussian");

    ChainResult res;
    init_state(teacher, p, cfg, res.W, res.v);
    Matrix& W = res.W;
    Vector& v = res.v;
    Engine rng = make_stream(cfg.seed, Stream::chain, cfg.chain_index);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> unif;

    // dual averaging (Hoffman and Gelman) on log step size
    const double da_gamma = 0.05, da_t0 = 10, da_kappa = 0.75;
    double eps = cfg.hmc.step_size, mu = std::log(10 * eps), hbar = 0, log_eps_bar = std::log(eps);
    long da_t = 0;
    const long adapt_until = cfg.hmc.adapt ? (cfg.hmc.adapt_iters < 0 ? cfg.steps : cfg.hmc.adapt_iters) : 0;

    PotentialGradient cur = potential_gradient(ds, W, v, p, move_v);
    double acc_sum = 0;
    res.trace.max_points = cfg.max_trace_points;
    res.trace.record(measure(0, W, v, teacher, cfg.ell_max, cur.U, 0.0));

    for (long it = 1; it <= cfg.steps; ++it) {
        Matrix pW(W.rows(), W.cols());
        for (long i = 0; i < pW.size(); ++i) pW.data()[i] = nd(rng);
        Vector pv;
        if (move_v) {
            pv.resize(v.size());
            for (long i = 0; i < pv.size(); ++i) pv[i] = nd(rng);
        }
        const double H0 = cur.U + 0.5 * pW.squaredNorm() + (move_v ? 0.5 * pv.squaredNorm() : 0.0);

        Matrix W1 = W;
        Vector v1 = v;
        PotentialGradient g = cur;
        bool finite = true;
        for (int l = 0; l < cfg.hmc.leapfrog_steps && finite; ++l) {
            pW -= 0.5 * eps * g.dW;
            if (move_v) pv -= 0.5 * eps * g.dv;
            W1 += eps * pW;
            if (move_v) v1 += eps * pv;
            g = potential_gradient(ds, W1, v1, p, move_v);
            pW -= 0.5 * eps * g.dW;
            if (move_v) pv -= 0.5 * eps * g.dv;
            finite = std::isfinite(g.U);
        }
        const double H1 = g.U + 0.5 * pW.squaredNorm() + (move_v ? 0.5 * pv.squaredNorm() : 0.0);
        const double dH = H1 - H0;
        double a = 0;
        const bool divergent = !finite || !std::isfinite(dH) || std::abs(dH) > cfg.hmc.divergence;
        if (divergent) {
            ++res.divergences;
            mu -= std::log(2.0);
        } else {
            res.max_energy_error = std::max(res.max_energy_error, std::abs(dH) / std::max(std::abs(H0), 1e-300));
            a = dH <= 0 ? 1.0 : std::exp(-dH);
            if (unif(rng) < a) {
                W = std::move(W1);
                v = std::move(v1);
                cur = std::move(g);
            }
        }
        const double eps_old = eps;
        if (it <= adapt_until) {
            ++da_t;
            const double t = double(da_t);
            hbar = (1 - 1 / (t + da_t0)) * hbar + (cfg.hmc.target_accept - a) / (t + da_t0);
            const double log_eps = mu - std::sqrt(t) / da_gamma * hbar;
            const double w = std::pow(t, -da_kappa);
            log_eps_bar = w * log_eps + (1 - w) * log_eps_bar;
            eps = std::exp(log_eps);
            if (it == adapt_until) eps = std::exp(log_eps_bar);
        }
        if (divergent) eps = std::min(eps, 0.5 * eps_old);
        acc_sum += a;
        res.trace.record(measure(it, W, v, teacher, cfg.ell_max, cur.U, acc_sum / double(it)));
        if (cfg.on_step) cfg.on_step(it, W, v);
    }
    res.steps = cfg.steps;
    res.acceptance = cfg.steps ? acc_sum / double(cfg.steps) : 0.0;
    res.step_size = eps;
    return res;
}

TracePoint overlap_trace(const Matrix& W, const Vector& v, const TeacherInstance& teacher, int ell_max) {
    if (ell_max < 1 || ell_max > 5) throw DomainError("overlap_trace: ell_max must be in 1..5");
    const TensorOverlaps o = tensor_overlaps(W, v, teacher.W, teacher.v, ell_max);
    TracePoint tp;
    tp.qW = o.qW;
    for (int l = 1; l <= ell_max; ++l) tp.q[l - 1] = o.Q[l];
    return tp;
}

double centred_q2_ratio(double Q2, double vbar, const TeacherInstance& teacher) {
    const double g = double(teacher.W.rows()) / double(teacher.W.cols());
    const double v0bar = teacher.v.mean();
    const double self = tensor_overlaps(teacher.W, teacher.v, teacher.W, teacher.v, 2).Q[2] - g * v0bar * v0bar;
    return (Q2 - g * vbar * v0bar) / self;
}

NishimoriReport nishimori_check(const std::vector<NishimoriDataset>& data, const ActivationSpec& s,
                                int min_datasets) {
    if (int(data.size()) < min_datasets)
        throw DomainError("nishimori_check: need at least " + std::to_string(min_datasets) + " datasets");
    NishimoriReport rep;
    rep.names = {"Q1", "Q2", "gQW"};
    rep.datasets = int(data.size());
    auto values = [&](const NetworkSample& a, const NetworkSample& b) {
        const TensorOverlaps o = tensor_overlaps(a.W, a.v, b.W, b.v, 2);
        return std::array<double, 3>{o.Q[1], o.Q[2], o.qv * g_eval(std::clamp(o.qW, -1.0, 1.0), s)};
    };
    std::vector<std::array<double, 3>> diffs;
    std::array<double, 3> s01{}, s12{};
    for (const auto& ds : data) {
        if (ds.samples.size() < 2) throw DomainError("nishimori_check: need samples from at least two chains");
        std::array<double, 3> a01{}, a12{};
        for (const auto& smp : ds.samples) {
            const auto q = values(smp, ds.teacher);
            for (int m = 0; m < 3; ++m) a01[m] += q[m] / double(ds.samples.size());
        }
        int pairs = 0;
        for (std::size_t a = 0; a < ds.samples.size(); ++a)
            for (std::size_t b = a + 1; b < ds.samples.size(); ++b, ++pairs) {
                const auto q = values(ds.samples[a], ds.samples[b]);
                for (int m = 0; m < 3; ++m) a12[m] += q[m];
            }
        std::array<double, 3> dd{};
        for (int m = 0; m < 3; ++m) {
            a12[m] /= pairs;
            dd[m] = a01[m] - a12[m];
            s01[m] += a01[m];
            s12[m] += a12[m];
        }
        diffs.push_back(dd);
    }
    const double S = double(data.size());
    rep.pass = true;
    for (int m = 0; m < 3; ++m) {
        double mean = 0, var = 0;
        for (const auto& dd : diffs) mean += dd[m] / S;
        for (const auto& dd : diffs) var += (dd[m] - mean) * (dd[m] - mean) / (S - 1);
        const double se = std::sqrt(var / S);
        const double z = se > 0 ? mean / se : (mean == 0 ? 0.0 : INFINITY);
        rep.q01.push_back(s01[m] / S);
        rep.q12.push_back(s12[m] / S);
        rep.z.push_back(z);
        if (!(std::abs(z) < 3)) rep.pass = false;
    }
    return rep;
}

std::pair<double, double> batch_mean(const std::vector<double>& x, int batches) {
    const long n = long(x.size());
    if (n == 0) return {NAN, NAN};
    const int B = int(std::min<long>(batches, n));
    if (B < 2) return {x[0], INFINITY};
    std::vector<double> means(B, 0.0);
    for (int b = 0; b < B; ++b) {
        const long lo = n * b / B, hi = n * (b + 1) / B;
        for (long i = lo; i < hi; ++i) means[b] += x[i];
        means[b] /= double(hi - lo);
    }
    double m = 0, v = 0;
    for (double u : means) m += u / B;
    for (double u : means) v += (u - m) * (u - m) / (B - 1);
    return {m, std::sqrt(v / B)};
}

EquilibrationReport equilibration_gate(const std::vector<double>& series, const NishimoriReport* nish, int batches) {
    EquilibrationReport r;
    const long n = long(series.size());
    auto slice = [&](long lo, long hi) { return std::vector<double>(series.begin() + lo, series.begin() + hi); };
    if (n < 8) {
        if (n > 0) std::tie(r.plateau, r.plateau_stderr) = batch_mean(slice(n / 2, n), batches);
        return r;
    }
    const auto [ma, sa] = batch_mean(slice(n / 4, 3 * n / 4), batches);
    const auto [mb, sb] = batch_mean(slice(n / 2, n), batches);
    r.mean_a = ma;
    r.mean_b = mb;
    r.stderr_ = std::sqrt(sa * sa + sb * sb);
    r.plateau = mb;
    r.plateau_stderr = sb;
    if (nish) r.nishimori_ok = nish->pass;
    r.equilibrated = std::abs(ma - mb) <= r.stderr_ && r.nishimori_ok;
    return r;
}

}  // namespace shallowbayes
