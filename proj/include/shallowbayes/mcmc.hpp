#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "shallowbayes/generalization.hpp"
#include "shallowbayes/model.hpp"

namespace shallowbayes {

enum class InitKind { informative, uninformative };
std::string to_string(InitKind k);
InitKind parse_init(const std::string& s);

struct HmcConfig {
    int leapfrog_steps = 10;
    double step_size = 0.01;
    bool adapt = true;
    long adapt_iters = -1;        // < 0: adapt on every iteration
    double target_accept = 0.8;
    double divergence = 1e3;      // energy error that rejects the trajectory and halves the step
};

struct ChainConfig {
    InitKind init = InitKind::uninformative;
    long steps = 1000;            // sweeps (Metropolis) or trajectories (HMC)
    HmcConfig hmc;
    bool fixed_readouts = true;
    std::uint64_t seed = 0;
    std::uint64_t chain_index = 0;
    long check_every = 1000;      // Metropolis: sweeps between from-scratch energy checks (and once at the end)
    long max_trace_points = 10000;
    int ell_max = 5;
    // restart from a snapshot instead of init
    std::optional<Matrix> start_W;
    std::optional<Vector> start_v;
    // called after every sweep / trajectory
    std::function<void(long, const Matrix&, const Vector&)> on_step;

    void validate() const;
};

struct TracePoint {
    long step = 0;
    double qW = 0;
    std::array<double, 5> q{};    // q_1..q_5
    double energy = 0;
    double acc_rate = 0;          // running acceptance
};

// Measurements with stride doubling once max_points is reached.
struct OverlapTrace {
    std::vector<TracePoint> points;
    long stride = 1;
    long max_points = 10000;

    void record(const TracePoint& p);
    std::vector<double> column(int which) const;  // 0 qW, 1..5 q_l, 6 energy, 7 acc_rate
};
std::vector<std::string> trace_columns();
std::vector<double> trace_row(const TracePoint& p);

struct ChainResult {
    Matrix W;
    Vector v;
    OverlapTrace trace;
    double acceptance = 0;
    double max_incremental_error = 0;  // Metropolis: largest scratch-vs-incremental energy gap, relative
    int energy_checks = 0;
    double step_size = 0;              // HMC: final step
    double max_energy_error = 0;       // HMC: largest |H1 - H0| / |H0| over non-divergent trajectories
    int divergences = 0;
    long steps = 0;
};

// Potential energy sum (y - lambda)^2 / (2 Delta) plus ||W||^2/2 (and ||v||^2/2 for sampled Gaussian read-outs)
// when the prior is Gaussian.
double potential_energy(const Dataset& ds, const Matrix& W, const Vector& v, const ModelParams& p,
                        bool v_sampled = false);

ChainResult metropolis_binary(const Dataset& ds, const TeacherInstance& teacher, const ModelParams& p,
                              const ChainConfig& cfg);
ChainResult hmc_gaussian(const Dataset& ds, const TeacherInstance& teacher, const ModelParams& p,
                         const ChainConfig& cfg);

// Gradient of the potential with respect to W (and v when sampled). Exposed for tests.
struct PotentialGradient {
    double U = 0;
    Matrix dW;
    Vector dv;
};
PotentialGradient potential_gradient(const Dataset& ds, const Matrix& W, const Vector& v, const ModelParams& p,
                                     bool v_sampled);

// qW and q_1..q_ell_max of a sample against the teacher.
TracePoint overlap_trace(const Matrix& W, const Vector& v, const TeacherInstance& teacher, int ell_max = 5);

// Centred Q2 of a sample, (Q2 - g vbar v0bar) / (Q2^{00} - g v0bar^2) with g = k/d: the teacher's own
// finite-size self-overlap sets the scale, whose large-d value is 1.
double centred_q2_ratio(double Q2, double vbar, const TeacherInstance& teacher);

// Nishimori identity E<Q^{01}> = E<Q^{12}> for Q in {Q1, Q2, g(QW)}.
// Each dataset holds the teacher and samples from at least two independent chains.
struct NishimoriDataset {
    NetworkSample teacher;
    std::vector<NetworkSample> samples;
};
struct NishimoriReport {
    std::vector<std::string> names;
    std::vector<double> q01, q12, z;
    int datasets = 0;
    bool pass = false;  // all |z| < 3
};
NishimoriReport nishimori_check(const std::vector<NishimoriDataset>& data, const ActivationSpec& s,
                                int min_datasets = 8);

// Overlapping-window gate on a trace column: means over [25%, 75%) and [50%, 100%) of the trace
// must agree within one standard error (batch means). The plateau is the mean of the last half.
struct EquilibrationReport {
    double mean_a = 0, mean_b = 0, stderr_ = 0;
    double plateau = 0, plateau_stderr = 0;
    bool equilibrated = false;
    bool nishimori_ok = true;
};
EquilibrationReport equilibration_gate(const std::vector<double>& series, const NishimoriReport* nish = nullptr,
                                       int batches = 20);

// Mean and batch-means standard error of a series.
std::pair<double, double> batch_mean(const std::vector<double>& x, int batches = 20);

}  // namespace shallowbayes
