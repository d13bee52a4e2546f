#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "shallowbayes/activation.hpp"
#include "shallowbayes/rng.hpp"

namespace shallowbayes {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class WPrior { rademacher, gaussian };
enum class VPrior { constant_one, rademacher, gaussian, uniform_sym };

std::string to_string(WPrior p);
std::string to_string(VPrior p);
WPrior parse_w_prior(const std::string& s);
VPrior parse_v_prior(const std::string& s);

// E[v] and E[v^2] of the read-out prior.
double v_mean(VPrior p);
double v_second_moment(VPrior p);
double sample_v(VPrior p, Engine& rng);

struct ModelParams {
    int d = 100;
    double gamma = 0.5;
    double alpha = 1.0;
    double delta = 0.1;
    WPrior w_prior = WPrior::gaussian;
    VPrior v_prior = VPrior::constant_one;
    ActivationSpec activation;

    int k() const;
    long n() const;
    void validate() const;
};

struct TeacherInstance {
    Matrix W;  // k x d
    Vector v;  // k
};

struct Dataset {
    Matrix X;       // n x d
    Vector y;       // n
    Vector lambda;  // noiseless post-activations
    std::uint64_t seed = 0;
};

TeacherInstance sample_teacher(const ModelParams& p, std::uint64_t seed, std::uint64_t index = 0);

// lambda = v^T sigma(W x / sqrt(d)) / sqrt(k)
double post_activation(const Vector& v, const Matrix& W, const Vector& x, const ActivationSpec& s);
Vector post_activations(const Vector& v, const Matrix& W, const Matrix& X, const ActivationSpec& s);

// n = round(alpha d^2) samples, y = lambda + sqrt(delta) z. Training and test sets use disjoint streams.
Dataset generate_dataset(const TeacherInstance& t, const ModelParams& p, std::uint64_t seed,
                         std::uint64_t index = 0);
Dataset generate_test_set(const TeacherInstance& t, const ModelParams& p, long n_test, std::uint64_t seed,
                          std::uint64_t index = 0);

// Persist as <stem>.bin (X then y, little-endian doubles) and <stem>.json metadata.
void save_dataset(const Dataset& ds, const ModelParams& p, const std::string& stem);
Dataset load_dataset(const std::string& stem);

}  // namespace shallowbayes
