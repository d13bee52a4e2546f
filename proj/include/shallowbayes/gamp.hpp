#pragma once

#include <functional>
#include <string>
#include <vector>

#include "shallowbayes/model.hpp"

namespace shallowbayes {

struct GampConfig {
    double damping = 0.3;       // weight kept from the previous iterate
    double sigma_floor = 1e-10;
    int max_iter = 200;
    double tol = 1e-4;          // relative Frobenius change of the S2 estimate
    int max_increases = 10;     // consecutive increases of the change before aborting
    std::string s1_method = "ols";
};

struct GampIter {
    int iter = 0;
    double sigma2 = 0;     // effective denoising noise variance
    double V = 0;          // variance of the linear estimate (twice the per-entry mmse)
    double change = 0;
    double residual = 0;   // mean squared residual of the effective labels
};

struct GampState {
    double y0_hat = 0;
    Vector S1_hat;
    bool s1_skipped = false;
    Matrix S2_hat;
    double mu1 = 0, mu2 = 0;
    double V = 0;
    std::vector<GampIter> trace;
    int iters = 0;
    bool converged = false;
    bool diverged = false;
    bool fitted = false;
};

double estimate_mean(const Dataset& ds);

// OLS of centred labels on x / sqrt(d), divided by mu1. Zero and skipped when mu1 = 0.
Vector estimate_s1(const Dataset& ds, double y0_hat, const ActivationSpec& s, bool* skipped = nullptr);

// Noise of the effective matrix-sensing problem, (Delta + g(1)) / (mu2^2 / 4).
double delta_tilde(const ActivationSpec& s, double delta);

// Linear map S -> (Tr[A_mu S])_mu and its adjoint g -> sum_mu g_mu A_mu.
// The operators reference the matrix they are built from, which must outlive them.
struct SensingOperator {
    std::function<Vector(const Matrix&)> forward;
    std::function<Matrix(const Vector&)> adjoint;
    long n = 0;
    int d = 0;
};
// A_mu = (x_mu x_mu^T - I) / sqrt(d) from the rows of X.
SensingOperator quadratic_sensing(const Matrix& X);
SensingOperator quadratic_sensing(Matrix&&) = delete;
// A_mu = G_mu, rows of G hold vec(G_mu); G_mu GOE with off-diagonal variance 1/d.
SensingOperator goe_sensing(const Matrix& G, int d);
SensingOperator goe_sensing(Matrix&&, int) = delete;
Matrix sample_goe_sensing(long n, int d, Engine& rng);

struct AmpResult {
    Matrix S;
    double V = 0;
    int iters = 0;
    bool converged = false;
    bool diverged = false;
    std::vector<GampIter> trace;
};
// AMP with RIE denoiser for y_mu = Tr[A_mu S] + sqrt(noise) z_mu.
AmpResult amp_matrix_sensing(const SensingOperator& A, const Vector& y, double noise, const GampConfig& cfg = {});

GampState gamp_rie_fit(const Dataset& ds, const ActivationSpec& s, double delta, const GampConfig& cfg = {});

// y0 + mu1 S1^T x / sqrt(d) + (mu2/2) (x^T S2 x - Tr S2) / sqrt(d)
double predict(const GampState& st, const Vector& x);
Vector predict(const GampState& st, const Matrix& X);

// S2 of a teacher, W^T diag(v) W / sqrt(kd), and S1 = W^T v / sqrt(k).
Matrix teacher_s2(const TeacherInstance& t);
Vector teacher_s1(const TeacherInstance& t);

}  // namespace shallowbayes
