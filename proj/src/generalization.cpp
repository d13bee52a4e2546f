#include "shallowbayes/generalization.hpp"

#include <algorithm>
#include <cmath>

#include "shallowbayes/errors.hpp"
#include "shallowbayes/quadrature.hpp"

namespace shallowbayes {

double eps_opt_gaussian(double q2, double qW, const TheoryParams& p) {
    const auto& s = p.activation;
    const double r2 = r2_of(p.gamma, p.v_prior);
    if (q2 > r2 + 1e-12) throw DomainError("eps_opt_gaussian: q2 > r2");
    const double tail = g_eval(1.0, s) - (qW == 0.0 ? 0.0 : g_eval(qW, s));
    return p.delta() + s.mu2() * s.mu2() / 2 * (r2 - q2) + tail;
}

double eps_opt_generic(double qK, double rK, const Channel& c, const QuadConfig& q) {
    if (qK < -1e-15 || qK > rK + 1e-15) throw DomainError("eps_opt_generic: need 0 <= qK <= rK");
    const Rule xi = gauss_hermite(q.n_xi);
    const Rule u = gauss_hermite(q.n_u);
    const double sq = std::sqrt(std::max(qK, 0.0)), sr = std::sqrt(std::max(rK - qK, 0.0));
    double second = 0, cross = 0;
    for (std::size_t i = 0; i < xi.x.size(); ++i) {
        double m1 = 0, m2 = 0;
        for (std::size_t j = 0; j < u.x.size(); ++j) {
            const double l = sq * xi.x[i] + sr * u.x[j];
            m1 += u.w[j] * c.mean(l);
            m2 += u.w[j] * c.second_moment(l);
        }
        second += xi.w[i] * m2;
        cross += xi.w[i] * m1 * m1;
    }
    return second - cross;
}

ErrorReport error_report(const PhaseSolution& sol, const TheoryParams& p) {
    const auto& s = p.activation;
    ErrorReport r;
    r.phase = to_string(sol.phase);
    r.eps_opt = sol.eps_opt;
    r.eps_minus_delta = sol.eps_opt - p.delta();
    r.eps_gibbs = eps_gibbs_from_opt(sol.eps_opt, p.delta());
    r.mu2_term = s.mu2() * s.mu2() / 2 * (sol.r2 - sol.state.q2);
    const double qW = sol.phase == Phase::universal ? 0.0 : sol.state.qW;
    r.tail_term = g_eval(1.0, s) - (qW == 0.0 ? 0.0 : g_eval(qW, s));
    return r;
}

double eps_opt_from_gibbs(double eps_gibbs, double delta, bool* flagged) {
    if (flagged) *flagged = eps_gibbs < delta;
    return delta + (eps_gibbs - delta) / 2;
}

double eps_gibbs_from_opt(double eps_opt, double delta) { return delta + 2 * (eps_opt - delta); }

TensorOverlaps tensor_overlaps(const Matrix& Wa, const Vector& va, const Matrix& Wb, const Vector& vb, int ell_max) {
    if (ell_max < 0 || ell_max > 5) throw DomainError("tensor_overlaps: ell_max must be in [0, 5]");
    if (Wa.rows() != Wb.rows() || Wa.cols() != Wb.cols()) throw DomainError("tensor_overlaps: shape mismatch");
    const double k = double(Wa.rows()), d = double(Wa.cols());
    const Matrix omega = Wa * Wb.transpose() / d;
    TensorOverlaps o;
    o.qW = omega.trace() / k;
    o.qv = va.dot(vb) / k;
    Matrix power = Matrix::Ones(omega.rows(), omega.cols());
    for (int l = 0; l <= ell_max; ++l) {
        o.Q[l] = va.dot(power * vb) / k;
        power = power.cwiseProduct(omega);
    }
    return o;
}

namespace {

struct Kernel {
    double c0, c1, c2;
    const ActivationSpec* s;
    bool exact;

    // per-order contributions of E[lambda_a lambda_b]
    std::array<double, 4> parts(const TensorOverlaps& o) const {
        double tail = 0;
        if (exact) {
            for (int l = 3; l <= 5; ++l) tail += s->c2(l) * o.Q[l];
        } else {
            tail = o.qv * g_eval(std::clamp(o.qW, -1.0, 1.0), *s);
        }
        return {c0 * o.Q[0], c1 * o.Q[1], c2 * o.Q[2], tail};
    }
};

}  // namespace

ErrorReport eps_from_samples(const NetworkSample& teacher, const std::vector<NetworkSample>& samples,
                             const ActivationSpec& s, double delta, SampleMode mode) {
    const std::size_t need = mode == SampleMode::nishimori ? 1 : 2;
    if (samples.size() < need) throw DomainError("eps_from_samples: not enough samples for the chosen mode");
    const bool exact = mode == SampleMode::exact5;
    const int lmax = exact ? 5 : 2;
    Kernel K{s.c2(0), s.c2(1), s.c2(2), &s, exact};
    auto parts = [&](const NetworkSample& a, const NetworkSample& b) {
        return K.parts(tensor_overlaps(a.W, a.v, b.W, b.v, lmax));
    };

    const auto p00 = parts(teacher, teacher);
    std::vector<std::array<double, 4>> p0a, paa;
    for (const auto& smp : samples) {
        p0a.push_back(parts(teacher, smp));
        paa.push_back(parts(smp, smp));
    }

    std::vector<std::array<double, 4>> terms;
    if (mode == SampleMode::nishimori) {
        for (const auto& x : p0a) {
            std::array<double, 4> t;
            for (int j = 0; j < 4; ++j) t[j] = p00[j] - x[j];
            terms.push_back(t);
        }
    } else {
        for (std::size_t a = 0; a < samples.size(); ++a)
            for (std::size_t b = a + 1; b < samples.size(); ++b) {
                const auto pab = parts(samples[a], samples[b]);
                std::array<double, 4> t;
                for (int j = 0; j < 4; ++j) t[j] = p00[j] - p0a[a][j] - p0a[b][j] + pab[j];
                terms.push_back(t);
            }
    }

    ErrorReport r;
    r.phase = "samples";
    r.pairs = int(terms.size());
    std::array<double, 4> mean{};
    std::vector<double> tot;
    for (const auto& t : terms) {
        double sum = 0;
        for (int j = 0; j < 4; ++j) {
            mean[j] += t[j] / terms.size();
            sum += t[j];
        }
        tot.push_back(sum);
    }
    double m = 0;
    for (double x : tot) m += x / tot.size();
    double var = 0;
    for (double x : tot) var += (x - m) * (x - m);
    r.stderr_ = tot.size() > 1 ? std::sqrt(var / (tot.size() - 1) / tot.size()) : 0.0;
    r.eps_minus_delta = m;
    r.eps_opt = delta + m;
    r.mu1_term = mean[1];
    r.mu2_term = mean[2];
    r.tail_term = mean[3];

    // Gibbs error: one sample against the teacher, Q00 - 2 Q0a + Qaa
    double gibbs = 0;
    for (std::size_t a = 0; a < samples.size(); ++a)
        for (int j = 0; j < 4; ++j) gibbs += (p00[j] - 2 * p0a[a][j] + paa[a][j]) / samples.size();
    r.eps_gibbs = delta + gibbs;
    return r;
}

}  // namespace shallowbayes
