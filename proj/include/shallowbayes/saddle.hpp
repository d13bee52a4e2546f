#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "shallowbayes/model.hpp"
#include "shallowbayes/spectral.hpp"

namespace shallowbayes {

// Output channel P_out(y | lambda).
struct Channel {
    enum class Kind { gaussian, generic };
    Kind kind = Kind::gaussian;
    std::string name = "gaussian";
    double delta = 0.1;                                     // noise variance (gaussian)
    std::function<double(double, double)> density;          // P_out(y | lambda)
    std::function<double(double)> mean;                     // E[y | lambda]
    std::function<double(double)> second_moment;            // E[y^2 | lambda]
    double scale = 1.0;                                     // spread of y around mean(lambda)

    static Channel gaussian(double delta);
    // y = lambda + Laplace noise with variance 2 b^2.
    static Channel laplace(double b);
    // Gaussian channel routed through the generic quadrature path.
    static Channel gaussian_generic(double delta);
    // Any density; mean and second moment are computed by quadrature when not supplied.
    static Channel custom(std::string name, std::function<double(double, double)> density, double scale,
                          std::function<double(double)> mean = {}, std::function<double(double)> second = {});
};

struct OverlapState {
    double q2 = 0, q_hat2 = 0, qW = 0, q_hatW = 0;
};

enum class Phase { universal, specialisation };
std::string to_string(Phase p);

struct PhaseSolution {
    Phase phase = Phase::universal;
    OverlapState state;
    double f = 0;        // free entropy per datum
    double mi = 0;       // mutual information per parameter, I/(kd)
    double eps_opt = 0;  // Bayes-optimal test error including Delta
    double q_K = 0, r_K = 0, r2 = 0;
    double residual = 0;
    int iters = 0;
    bool converged = false;
    bool branch_absent = false;  // specialisation iteration collapsed to qW = 0
    bool degenerate = false;     // |f_sp - f_uni| below the tie threshold

    // q2 minus the mean-matrix part gamma (E v)^2.
    double q2_centered(double gamma, VPrior v) const;
};

struct QuadConfig {
    int n_xi = 40;       // Gauss-Hermite nodes for the shared field
    int n_u = 40;        // Gauss-Hermite nodes for the replica field
    int y_nodes = 24;    // Gauss-Legendre nodes per y panel
    int y_panels = 8;    // panels per channel scale, doubled until the value settles
    double y_tol = 1e-9;
    double y_width = 12; // y-range half-width in units of the channel scale
};

struct SolverConfig {
    double theta = 0.5;
    double theta_min = 0.05;
    int max_iter = 20000;
    double tol = -1;  // < 0: 1e-8 for the Gaussian channel, 1e-6 otherwise
    double tie = 1e-8;
    double collapse = 1e-4;  // qW below this counts as the absent specialisation branch
    QuadConfig quad;
};

// mmse(q) and iota(q) of the matrix denoising problem sqrt(q) Sbar + Z.
struct DenoisingCurve {
    std::function<double(double)> mmse;
    std::function<double(double)> iota;

    static DenoisingCurve from_table(SpectralTable table);
};

// r2 = 1 + gamma (E v)^2
double r2_of(double gamma, VPrior v);
double r_K(const ActivationSpec& s, double r2);
double q_K(double q2, double qW, double qv, const ActivationSpec& s);

double psi_out_gaussian(double qK, double rK, double delta);
double psi_out_gaussian_dqK(double qK, double rK, double delta);
struct PsiDiagnostics {
    double mass_error = 0;  // max over xi of |int Z dy - 1|
    int refinements = 0;
    bool truncated = false;
};
double psi_out_generic(double qK, double rK, const Channel& c, const QuadConfig& q = {},
                       PsiDiagnostics* diag = nullptr);
double psi_out(double qK, double rK, const Channel& c, const QuadConfig& q = {});
double psi_out_dqK(double qK, double rK, const Channel& c, const QuadConfig& q = {});

// Prior free entropy psi_PW(q_hatW) and the update qW = m_w(q_hatW).
double psi_w(double q_hatW, WPrior p);
double m_w(double q_hatW, WPrior p);

struct TheoryParams {
    double alpha = 1.0;
    double gamma = 0.5;
    WPrior w_prior = WPrior::gaussian;
    VPrior v_prior = VPrior::constant_one;
    ActivationSpec activation;
    Channel channel = Channel::gaussian(0.1);

    double delta() const { return channel.delta; }
};

// Bracketed free-entropy functionals, before extremisation.
double f_universal(double q2, double q_hat2, const TheoryParams& p, const DenoisingCurve& dc);
double f_specialisation(const OverlapState& s, const TheoryParams& p);

PhaseSolution solve_universal(const TheoryParams& p, const DenoisingCurve& dc, const SolverConfig& cfg = {},
                              const OverlapState* warm = nullptr);
PhaseSolution solve_specialisation(const TheoryParams& p, const SolverConfig& cfg = {},
                                   const OverlapState* warm = nullptr);

// Residuals of the fixed-point maps at a given state (sup norm).
double residual_universal(const OverlapState& s, const TheoryParams& p, const DenoisingCurve& dc,
                          const QuadConfig& q = {});
double residual_specialisation(const OverlapState& s, const TheoryParams& p, const QuadConfig& q = {});

// I/(kd) from the free entropy at a fixed point.
double mutual_information(double f, const TheoryParams& p, const QuadConfig& q = {});

struct Equilibrium {
    PhaseSolution universal;
    std::optional<PhaseSolution> specialisation;
    PhaseSolution selected;
};
// Solve both branches and pick the one with larger f (universal on ties, flagged degenerate).
Equilibrium solve_equilibrium(const TheoryParams& p, const DenoisingCurve& dc, const SolverConfig& cfg = {},
                              const OverlapState* warm_uni = nullptr, const OverlapState* warm_sp = nullptr);

// Smallest alpha in [lo, hi] with f_sp >= f_uni, by bisection. nullopt when the specialisation branch is
// absent or still subdominant at hi. Throws DomainError when f_sp >= f_uni already at lo.
std::optional<double> find_alpha_sp(TheoryParams p, const DenoisingCurve& dc, double lo, double hi,
                                    double tol = 1e-4, const SolverConfig& cfg = {});

// q1 solving q1 = qh/(qh+1), qh = alpha1/(1 + Delta1 - q1) with Delta1 = (Delta + nu - mu0^2 - mu1^2)/mu1^2.
double delta1_of(const ActivationSpec& s, double delta);
double solve_linear_regime(double alpha1, const ActivationSpec& s, double delta);
double solve_linear_regime_delta1(double alpha1, double delta1);

// Sweep rows: [alpha, gamma, delta, phase, q2, qhat2, qW, qhatW, f, mi, eps_opt, converged, iters].
struct SweepRow {
    double alpha = 0, gamma = 0, delta = 0;
    std::string phase;
    double q2 = 0, qhat2 = 0, qW = 0, qhatW = 0, f = 0, mi = 0, eps_opt = 0;
    bool converged = false;
    int iters = 0;
};
SweepRow make_row(const PhaseSolution& s, const TheoryParams& p);
std::vector<std::string> sweep_columns();
std::vector<SweepRow> sweep_theory(TheoryParams p, const DenoisingCurve& dc, const std::vector<double>& alphas,
                                   const SolverConfig& cfg = {}, int workers = 1);

}  // namespace shallowbayes
