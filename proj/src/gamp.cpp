#include "shallowbayes/gamp.hpp"

#include <cmath>

#include "shallowbayes/errors.hpp"
#include "shallowbayes/spectral.hpp"

namespace shallowbayes {

double estimate_mean(const Dataset& ds) {
    if (ds.y.size() == 0) throw DomainError("estimate_mean: empty dataset");
    return ds.y.mean();
}

Vector estimate_s1(const Dataset& ds, double y0_hat, const ActivationSpec& s, bool* skipped) {
    const long n = ds.X.rows();
    const int d = int(ds.X.cols());
    if (s.mu1() == 0.0) {
        if (skipped) *skipped = true;
        return Vector::Zero(d);
    }
    if (skipped) *skipped = false;
    if (n < d) throw DomainError("estimate_s1: fewer samples than dimensions");
    // normal equations; X^T X / n is well conditioned for n >> d
    const Matrix G = ds.X.transpose() * ds.X;
    Eigen::LLT<Matrix> llt(G);
    if (llt.info() != Eigen::Success) throw DomainError("estimate_s1: rank-deficient design");
    const Vector beta = llt.solve(ds.X.transpose() * (ds.y.array() - y0_hat).matrix()) * std::sqrt(double(d));
    return beta / s.mu1();
}

double delta_tilde(const ActivationSpec& s, double delta) {
    const double m2 = s.mu2();
    if (m2 == 0.0) throw DomainError("GAMP-RIE needs mu2 != 0");
    return (delta + g_eval(1.0, s)) / (m2 * m2 / 4);
}

SensingOperator quadratic_sensing(const Matrix& X) {
    SensingOperator A;
    A.n = X.rows();
    A.d = int(X.cols());
    const double sd = std::sqrt(double(A.d));
    A.forward = [&X, sd](const Matrix& S) -> Vector {
        const Matrix XS = X * S;
        return ((XS.cwiseProduct(X)).rowwise().sum().array() - S.trace()) / sd;
    };
    A.adjoint = [&X, sd](const Vector& g) -> Matrix {
        const Matrix Xg = X.array().colwise() * g.array();
        Matrix out = X.transpose() * Xg;
        out.diagonal().array() -= g.sum();
        return out / sd;
    };
    return A;
}

SensingOperator goe_sensing(const Matrix& G, int d) {
    SensingOperator A;
    A.n = G.rows();
    A.d = d;
    A.forward = [&G](const Matrix& S) -> Vector { return G * Eigen::Map<const Vector>(S.data(), S.size()); };
    A.adjoint = [&G, d](const Vector& g) -> Matrix {
        const Vector flat = G.transpose() * g;
        return Eigen::Map<const Matrix>(flat.data(), d, d);
    };
    return A;
}

Matrix sample_goe_sensing(long n, int d, Engine& rng) {
    Matrix G(n, long(d) * d);
    for (long mu = 0; mu < n; ++mu) {
        const Matrix Z = sample_goe(d, rng);
        G.row(mu) = Eigen::Map<const Vector>(Z.data(), Z.size()).transpose();
    }
    return G;
}

AmpResult amp_matrix_sensing(const SensingOperator& A, const Vector& y, double noise, const GampConfig& cfg) {
    const int d = A.d;
    const double alpha = double(A.n) / (double(d) * d);
    AmpResult r;
    r.S = Matrix::Zero(d, d);
    // with S = 0 the labels have variance 2 ||S||^2/d + noise
    double V = std::max(y.squaredNorm() / y.size() - noise, 1e-6);
    Vector g_prev = Vector::Zero(A.n);
    double last_change = INFINITY;
    int increases = 0;
    for (int it = 1; it <= cfg.max_iter; ++it) {
        const Vector fwd = A.forward(r.S);
        const Vector omega = fwd - V * g_prev;
        const Vector g = (y - omega) / (noise + V);
        const double sigma2 = std::max((noise + V) / (4 * alpha), cfg.sigma_floor);
        const Matrix R = r.S + (2 * sigma2 / d) * A.adjoint(g);
        const RieResult den = rie_denoise(0.5 * (R + R.transpose()), sigma2);
        const Matrix S_new = (1 - cfg.damping) * den.estimate + cfg.damping * r.S;
        const double V_new = (1 - cfg.damping) * 2 * std::max(den.mmse, 0.0) + cfg.damping * V;

        GampIter rec;
        rec.iter = it;
        rec.sigma2 = sigma2;
        rec.V = V_new;
        rec.change = (S_new - r.S).norm() / std::max(S_new.norm(), 1e-300);
        rec.residual = (y - fwd).squaredNorm() / y.size();
        r.trace.push_back(rec);

        r.S = S_new;
        V = V_new;
        g_prev = g;
        r.iters = it;
        if (rec.change < cfg.tol) {
            r.converged = true;
            break;
        }
        increases = rec.change > last_change ? increases + 1 : 0;
        last_change = rec.change;
        if (increases >= cfg.max_increases) {
            r.diverged = true;
            break;
        }
    }
    r.V = V;
    return r;
}

GampState gamp_rie_fit(const Dataset& ds, const ActivationSpec& s, double delta, const GampConfig& cfg) {
    if (cfg.s1_method != "ols") throw ConfigError("gamp: s1_method must be 'ols'");
    const double dt = delta_tilde(s, delta);
    GampState st;
    st.mu1 = s.mu1();
    st.mu2 = s.mu2();
    st.y0_hat = estimate_mean(ds);
    st.S1_hat = estimate_s1(ds, st.y0_hat, s, &st.s1_skipped);
    const double sd = std::sqrt(double(ds.X.cols()));
    const Vector y1 = st.s1_skipped ? Vector::Zero(ds.y.size()) : Vector(st.mu1 * (ds.X * st.S1_hat) / sd);
    const Vector yt = (ds.y.array() - st.y0_hat - y1.array()) / (st.mu2 / 2);
    const AmpResult r = amp_matrix_sensing(quadratic_sensing(ds.X), yt, dt, cfg);
    st.S2_hat = r.S;
    st.V = r.V;
    st.trace = r.trace;
    st.iters = r.iters;
    st.converged = r.converged;
    st.diverged = r.diverged;
    st.fitted = true;
    return st;
}

double predict(const GampState& st, const Vector& x) {
    if (!st.fitted) throw DomainError("predict: state is not fitted");
    const double sd = std::sqrt(double(x.size()));
    double out = st.y0_hat;
    if (st.S1_hat.size()) out += st.mu1 * st.S1_hat.dot(x) / sd;
    if (st.S2_hat.size()) out += st.mu2 / 2 * (x.dot(st.S2_hat * x) - st.S2_hat.trace()) / sd;
    return out;
}

Vector predict(const GampState& st, const Matrix& X) {
    if (!st.fitted) throw DomainError("predict: state is not fitted");
    const double sd = std::sqrt(double(X.cols()));
    Vector out = Vector::Constant(X.rows(), st.y0_hat);
    if (st.S1_hat.size()) out += st.mu1 * (X * st.S1_hat) / sd;
    if (st.S2_hat.size()) {
        const Matrix XS = X * st.S2_hat;
        out.array() += st.mu2 / 2 * ((XS.cwiseProduct(X)).rowwise().sum().array() - st.S2_hat.trace()) / sd;
    }
    return out;
}

Matrix teacher_s2(const TeacherInstance& t) {
    const double k = double(t.W.rows()), d = double(t.W.cols());
    return t.W.transpose() * t.v.asDiagonal() * t.W / std::sqrt(k * d);
}

Vector teacher_s1(const TeacherInstance& t) { return t.W.transpose() * t.v / std::sqrt(double(t.W.rows())); }

}  // namespace shallowbayes
