#pragma once

#include <array>
#include <string>
#include <vector>

#include "shallowbayes/saddle.hpp"

namespace shallowbayes {

struct ErrorReport {
    std::string phase;
    double eps_opt = 0;
    double eps_gibbs = 0;
    double eps_minus_delta = 0;
    double stderr_ = 0;      // over sample pairs; zero for theory reports
    double mu1_term = 0;
    double mu2_term = 0;     // (mu2^2/2)(r2 - q2) in theory
    double tail_term = 0;    // g(1) - g(qW) in theory
    int pairs = 0;
};

// eps - Delta = (mu2^2/2)(r2 - q2) + g(1) - g(qW), returned with Delta added.
double eps_opt_gaussian(double q2, double qW, const TheoryParams& p);
// E[E[y^2|l0]] - E[E[y|l0] E[y|l]] with (l0, l) jointly Gaussian, variances rK, covariance qK.
double eps_opt_generic(double qK, double rK, const Channel& c, const QuadConfig& q = {});

ErrorReport error_report(const PhaseSolution& s, const TheoryParams& p);

// eps_gibbs - Delta = 2 (eps_opt - Delta)
double eps_opt_from_gibbs(double eps_gibbs, double delta, bool* flagged = nullptr);
double eps_gibbs_from_opt(double eps_opt, double delta);

// Overlaps between two networks: qW = Tr(Omega)/k and Q_l = v_a^T Omega^{(l)} v_b / k for l = 0..5,
// where Omega = W_a W_b^T / d and Omega^{(l)} is the elementwise power.
struct TensorOverlaps {
    double qW = 0;
    double qv = 0;
    std::array<double, 6> Q{};
};
TensorOverlaps tensor_overlaps(const Matrix& Wa, const Vector& va, const Matrix& Wb, const Vector& vb,
                               int ell_max = 5);

struct NetworkSample {
    Matrix W;
    Vector v;
};

enum class SampleMode {
    no_nishimori,  // Q00 - 2 Q01 + Q12, needs two samples
    nishimori,     // Q00 - Q01
    exact5,        // no_nishimori with Q_l exact up to l = 5 and no tail
};

// eps - Delta from posterior samples; Q_1, Q_2 exact, l >= 3 through q_v g(Q_W).
ErrorReport eps_from_samples(const NetworkSample& teacher, const std::vector<NetworkSample>& samples,
                             const ActivationSpec& s, double delta, SampleMode mode);

}  // namespace shallowbayes
