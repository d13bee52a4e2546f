#include "shallowbayes/model.hpp"

#include <cmath>
#include <fstream>
#include "json.hpp"

#include "shallowbayes/errors.hpp"

namespace shallowbayes {

std::string to_string(WPrior p) { return p == WPrior::rademacher ? "rademacher" : "gaussian"; }

std::string to_string(VPrior p) {
    switch (p) {
        case VPrior::constant_one: return "constant_one";
        case VPrior::rademacher: return "rademacher";
        case VPrior::gaussian: return "gaussian";
        case VPrior::uniform_sym: return "uniform_sym";
    }
    return "?";
}

WPrior parse_w_prior(const std::string& s) {
    if (s == "rademacher" || s == "binary") return WPrior::rademacher;
    if (s == "gaussian") return WPrior::gaussian;
    throw ConfigError("unknown w_prior: " + s);
}

VPrior parse_v_prior(const std::string& s) {
    if (s == "constant_one" || s == "one" || s == "constant") return VPrior::constant_one;
    if (s == "rademacher") return VPrior::rademacher;
    if (s == "gaussian") return VPrior::gaussian;
    if (s == "uniform_sym" || s == "uniform") return VPrior::uniform_sym;
    throw ConfigError("unknown v_prior: " + s);
}

double v_mean(VPrior p) { return p == VPrior::constant_one ? 1.0 : 0.0; }
double v_second_moment(VPrior) { return 1.0; }

double sample_v(VPrior p, Engine& rng) {
    switch (p) {
        case VPrior::constant_one: return 1.0;
        case VPrior::rademacher: return std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
        case VPrior::gaussian: return std::normal_distribution<double>()(rng);
        case VPrior::uniform_sym: return std::uniform_real_distribution<double>(-std::sqrt(3.0), std::sqrt(3.0))(rng);
    }
    return 0.0;
}

int ModelParams::k() const { return std::max(1, int(std::lround(gamma * d))); }
long ModelParams::n() const { return std::max(1L, std::lround(alpha * double(d) * double(d))); }

void ModelParams::validate() const {
    if (d < 1) throw ConfigError("d must be positive");
    if (!(gamma > 0)) throw ConfigError("gamma must be positive");
    if (!(alpha >= 0)) throw ConfigError("alpha must be nonnegative");
    if (!(delta >= 0)) throw ConfigError("delta must be nonnegative");
    if (activation.mu.empty()) throw ConfigError("activation not set");
}

TeacherInstance sample_teacher(const ModelParams& p, std::uint64_t seed, std::uint64_t index) {
    const int k = p.k(), d = p.d;
    TeacherInstance t;
    t.W.resize(k, d);
    Engine rw = make_stream(seed, Stream::teacher_w, index);
    std::normal_distribution<double> nd;
    std::bernoulli_distribution bd(0.5);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < d; ++j)
            t.W(i, j) = p.w_prior == WPrior::gaussian ? nd(rw) : (bd(rw) ? 1.0 : -1.0);
    Engine rv = make_stream(seed, Stream::teacher_v, index);
    t.v.resize(k);
    for (int i = 0; i < k; ++i) t.v[i] = sample_v(p.v_prior, rv);
    return t;
}

double post_activation(const Vector& v, const Matrix& W, const Vector& x, const ActivationSpec& s) {
    if (W.cols() != x.size() || W.rows() != v.size()) throw DomainError("post_activation: shape mismatch");
    const Vector h = W * x / std::sqrt(double(x.size()));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < h.size(); ++i) acc += v[i] * s.evaluate(h[i]);
    return acc / std::sqrt(double(v.size()));
}

Vector post_activations(const Vector& v, const Matrix& W, const Matrix& X, const ActivationSpec& s) {
    if (W.cols() != X.cols() || W.rows() != v.size()) throw DomainError("post_activations: shape mismatch");
    Matrix H = X * W.transpose() / std::sqrt(double(X.cols()));
    H = H.unaryExpr([&](double h) { return s.evaluate(h); });
    return H * v / std::sqrt(double(v.size()));
}

namespace {

Dataset make_set(const TeacherInstance& t, const ModelParams& p, long n, Engine rx, Engine rz, std::uint64_t seed) {
    if (!(p.delta >= 0)) throw DomainError("delta must be nonnegative");
    Dataset ds;
    ds.seed = seed;
    ds.X.resize(n, p.d);
    std::normal_distribution<double> nd;
    // row-by-row so that a prefix of the data does not depend on n
    for (long mu = 0; mu < n; ++mu)
        for (int j = 0; j < p.d; ++j) ds.X(mu, j) = nd(rx);
    ds.lambda = post_activations(t.v, t.W, ds.X, p.activation);
    ds.y = ds.lambda;
    if (p.delta > 0) {
        const double sd = std::sqrt(p.delta);
        for (long mu = 0; mu < n; ++mu) ds.y[mu] += sd * nd(rz);
    }
    return ds;
}

}  // namespace

Dataset generate_dataset(const TeacherInstance& t, const ModelParams& p, std::uint64_t seed, std::uint64_t index) {
    return make_set(t, p, p.n(), make_stream(seed, Stream::inputs, index), make_stream(seed, Stream::noise, index),
                    seed);
}

Dataset generate_test_set(const TeacherInstance& t, const ModelParams& p, long n_test, std::uint64_t seed,
                          std::uint64_t index) {
    return make_set(t, p, n_test, make_stream(seed, Stream::test_inputs, index),
                    make_stream(seed, Stream::test_noise, index), seed);
}

void save_dataset(const Dataset& ds, const ModelParams& p, const std::string& stem) {
    nlohmann::json meta = {{"d", p.d},
                           {"k", p.k()},
                           {"n", ds.X.rows()},
                           {"seed", ds.seed},
                           {"gamma", p.gamma},
                           {"alpha", p.alpha},
                           {"delta", p.delta},
                           {"w_prior", to_string(p.w_prior)},
                           {"v_prior", to_string(p.v_prior)},
                           {"activation", p.activation.name},
                           {"layout", "X row-major n*d, then y, then lambda; float64 little-endian"}};
    std::ofstream(stem + ".json") << meta.dump(2) << "\n";
    std::ofstream out(stem + ".bin", std::ios::binary);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> Xr = ds.X;
    out.write(reinterpret_cast<const char*>(Xr.data()), std::streamsize(Xr.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(ds.y.data()), std::streamsize(ds.y.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(ds.lambda.data()), std::streamsize(ds.lambda.size() * sizeof(double)));
    if (!out) throw std::runtime_error("failed to write " + stem + ".bin");
}

Dataset load_dataset(const std::string& stem) {
    std::ifstream mj(stem + ".json");
    if (!mj) throw ConfigError("missing " + stem + ".json");
    nlohmann::json meta = nlohmann::json::parse(mj);
    const long n = meta.at("n"), d = meta.at("d");
    Dataset ds;
    ds.seed = meta.at("seed");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> Xr(n, d);
    ds.y.resize(n);
    ds.lambda.resize(n);
    std::ifstream in(stem + ".bin", std::ios::binary);
    in.read(reinterpret_cast<char*>(Xr.data()), std::streamsize(Xr.size() * sizeof(double)));
    in.read(reinterpret_cast<char*>(ds.y.data()), std::streamsize(n * sizeof(double)));
    in.read(reinterpret_cast<char*>(ds.lambda.data()), std::streamsize(n * sizeof(double)));
    if (!in) throw ConfigError("truncated dataset file " + stem + ".bin");
    ds.X = Xr;
    return ds;
}

}  // namespace shallowbayes
