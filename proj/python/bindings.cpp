// Python module shallowbayes._core. Arrays cross the boundary as numpy arrays (copied).

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "shallowbayes/activation.hpp"
#include "shallowbayes/errors.hpp"
#include "shallowbayes/gamp.hpp"
#include "shallowbayes/generalization.hpp"
#include "shallowbayes/mcmc.hpp"
#include "shallowbayes/model.hpp"
#include "shallowbayes/saddle.hpp"
#include "shallowbayes/spectral.hpp"
#include "shallowbayes/version.hpp"

namespace py = pybind11;
using namespace shallowbayes;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bayes-optimal theory and samplers for extensive-width shallow networks";
    m.attr("__version__") = kVersion;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

    py::enum_<WPrior>(m, "WPrior").value("rademacher", WPrior::rademacher).value("gaussian", WPrior::gaussian);
    py::enum_<VPrior>(m, "VPrior")
        .value("constant_one", VPrior::constant_one)
        .value("rademacher", VPrior::rademacher)
        .value("gaussian", VPrior::gaussian)
        .value("uniform_sym", VPrior::uniform_sym);
    py::enum_<InitKind>(m, "InitKind")
        .value("informative", InitKind::informative)
        .value("uninformative", InitKind::uninformative);

    // activation
    py::class_<ActivationSpec>(m, "ActivationSpec")
        .def_readonly("name", &ActivationSpec::name)
        .def_readonly("mu", &ActivationSpec::mu)
        .def_readonly("nu", &ActivationSpec::nu)
        .def_readonly("tail_bound", &ActivationSpec::tail_bound)
        .def("__call__", [](const ActivationSpec& s, double x) { return s.evaluate(x); })
        .def("__repr__", [](const ActivationSpec& s) { return "<ActivationSpec " + s.name + ">"; });
    m.def("builtin", &builtin, py::arg("name"), py::arg("he_coeffs") = std::vector<double>{}, py::arg("L") = 50);
    m.def("builtin_names", &builtin_names);
    m.def("make_activation", &make_activation, py::arg("name"), py::arg("sigma"), py::arg("dsigma") = py::none(),
          py::arg("kinks") = std::vector<double>{}, py::arg("L") = 50);
    m.def("g_eval", &g_eval, py::arg("x"), py::arg("activation"));
    m.def("g_prime", &g_prime, py::arg("x"), py::arg("activation"));

    // spectral
    py::class_<SpectralConfig>(m, "SpectralConfig")
        .def(py::init<>())
        .def_readwrite("d_spec", &SpectralConfig::d_spec)
        .def_readwrite("n_seeds", &SpectralConfig::n_seeds)
        .def_readwrite("grid_nodes", &SpectralConfig::grid_nodes)
        .def_readwrite("grid_min", &SpectralConfig::grid_min)
        .def_readwrite("grid_max", &SpectralConfig::grid_max);
    py::class_<SpectralTable>(m, "SpectralTable")
        .def_readonly("gamma", &SpectralTable::gamma)
        .def_readonly("v_prior", &SpectralTable::v_prior)
        .def_readonly("grid", &SpectralTable::grid)
        .def_readonly("cube", &SpectralTable::cube)
        .def_readonly("iota", &SpectralTable::iota)
        .def_readonly("iota_se", &SpectralTable::iota_se);
    m.def("load_table", &load_table, py::arg("path"));
    m.def("cached_table", &cached_table, py::arg("gamma"), py::arg("v_prior"), py::arg("config"),
          py::arg("cache_dir"), py::arg("verbose") = false, py::call_guard<py::gil_scoped_release>());
    py::class_<DenoisingCurve>(m, "DenoisingCurve")
        .def_static("from_table", &DenoisingCurve::from_table)
        .def("mmse", [](const DenoisingCurve& c, double q) { return c.mmse(q); })
        .def("iota", [](const DenoisingCurve& c, double q) { return c.iota(q); });
    m.def("rie_shrink", &rie_shrink, py::arg("eigenvalues"), py::arg("noise_var"), py::arg("eta"));
    m.def("rie_default_eta", &rie_default_eta);

    // saddle point
    py::class_<Channel>(m, "Channel")
        .def_static("gaussian", &Channel::gaussian, py::arg("delta"))
        .def_static("gaussian_generic", &Channel::gaussian_generic, py::arg("delta"))
        .def_static("laplace", &Channel::laplace, py::arg("b"))
        .def_readonly("name", &Channel::name);
    py::class_<OverlapState>(m, "OverlapState")
        .def(py::init<>())
        .def_readwrite("q2", &OverlapState::q2)
        .def_readwrite("q_hat2", &OverlapState::q_hat2)
        .def_readwrite("qW", &OverlapState::qW)
        .def_readwrite("q_hatW", &OverlapState::q_hatW);
    py::class_<PhaseSolution>(m, "PhaseSolution")
        .def_property_readonly("phase", [](const PhaseSolution& s) { return to_string(s.phase); })
        .def_readonly("state", &PhaseSolution::state)
        .def_readonly("f", &PhaseSolution::f)
        .def_readonly("mi", &PhaseSolution::mi)
        .def_readonly("eps_opt", &PhaseSolution::eps_opt)
        .def_readonly("residual", &PhaseSolution::residual)
        .def_readonly("iters", &PhaseSolution::iters)
        .def_readonly("converged", &PhaseSolution::converged)
        .def_readonly("branch_absent", &PhaseSolution::branch_absent)
        .def_readonly("r2", &PhaseSolution::r2)
        .def("q2_centered", &PhaseSolution::q2_centered);
    py::class_<TheoryParams>(m, "TheoryParams")
        .def(py::init([](const ActivationSpec& act, double alpha, double gamma, const Channel& ch, WPrior w,
                         VPrior v) {
                 TheoryParams p;
                 p.activation = act;
                 p.alpha = alpha;
                 p.gamma = gamma;
                 p.channel = ch;
                 p.w_prior = w;
                 p.v_prior = v;
                 return p;
             }),
             py::arg("activation"), py::arg("alpha") = 1.0, py::arg("gamma") = 0.5,
             py::arg("channel") = Channel::gaussian(0.1), py::arg("w_prior") = WPrior::gaussian,
             py::arg("v_prior") = VPrior::constant_one)
        .def_readwrite("alpha", &TheoryParams::alpha)
        .def_readwrite("gamma", &TheoryParams::gamma)
        .def_readwrite("channel", &TheoryParams::channel)
        .def_readwrite("w_prior", &TheoryParams::w_prior)
        .def_readwrite("v_prior", &TheoryParams::v_prior);
    py::class_<Equilibrium>(m, "Equilibrium")
        .def_readonly("universal", &Equilibrium::universal)
        .def_readonly("specialisation", &Equilibrium::specialisation)
        .def_readonly("selected", &Equilibrium::selected);
    m.def("solve_universal", [](const TheoryParams& p, const DenoisingCurve& dc) { return solve_universal(p, dc); },
          py::call_guard<py::gil_scoped_release>());
    m.def("solve_specialisation", [](const TheoryParams& p) { return solve_specialisation(p); },
          py::call_guard<py::gil_scoped_release>());
    m.def("solve_equilibrium",
          [](const TheoryParams& p, const DenoisingCurve& dc) { return solve_equilibrium(p, dc); },
          py::call_guard<py::gil_scoped_release>());
    m.def("find_alpha_sp",
          [](const TheoryParams& p, const DenoisingCurve& dc, double lo, double hi, double tol) {
              return find_alpha_sp(p, dc, lo, hi, tol);
          },
          py::arg("params"), py::arg("curve"), py::arg("lo"), py::arg("hi"), py::arg("tol") = 1e-4,
          py::call_guard<py::gil_scoped_release>());

    // model and data
    py::class_<ModelParams>(m, "ModelParams")
        .def(py::init([](const ActivationSpec& act, int d, double gamma, double alpha, double delta, WPrior w,
                         VPrior v) {
                 ModelParams p;
                 p.activation = act;
                 p.d = d;
                 p.gamma = gamma;
                 p.alpha = alpha;
                 p.delta = delta;
                 p.w_prior = w;
                 p.v_prior = v;
                 return p;
             }),
             py::arg("activation"), py::arg("d") = 100, py::arg("gamma") = 0.5, py::arg("alpha") = 1.0,
             py::arg("delta") = 0.1, py::arg("w_prior") = WPrior::gaussian, py::arg("v_prior") = VPrior::constant_one)
        .def_readwrite("d", &ModelParams::d)
        .def_readwrite("alpha", &ModelParams::alpha)
        .def_readwrite("delta", &ModelParams::delta)
        .def_property_readonly("k", &ModelParams::k);
    py::class_<TeacherInstance>(m, "TeacherInstance")
        .def_readonly("W", &TeacherInstance::W)
        .def_readonly("v", &TeacherInstance::v);
    py::class_<Dataset>(m, "Dataset")
        .def_readonly("X", &Dataset::X)
        .def_readonly("y", &Dataset::y)
        .def_readonly("lam", &Dataset::lambda);
    m.def("sample_teacher", &sample_teacher, py::arg("params"), py::arg("seed"), py::arg("index") = 0);
    m.def("generate_dataset", &generate_dataset, py::arg("teacher"), py::arg("params"), py::arg("seed"),
          py::arg("index") = 0);
    m.def("generate_test_set", &generate_test_set, py::arg("teacher"), py::arg("params"), py::arg("n_test"),
          py::arg("seed"), py::arg("index") = 0);
    m.def("teacher_s2", &teacher_s2);

    // GAMP-RIE
    py::class_<GampState>(m, "GampState")
        .def_readonly("S2_hat", &GampState::S2_hat)
        .def_readonly("S1_hat", &GampState::S1_hat)
        .def_readonly("y0_hat", &GampState::y0_hat)
        .def_readonly("iters", &GampState::iters)
        .def_readonly("converged", &GampState::converged)
        .def("predict", [](const GampState& s, const Matrix& X) { return predict(s, X); });
    m.def("gamp_rie_fit",
          [](const Dataset& ds, const ActivationSpec& s, double delta, double damping, int max_iter, double tol) {
              GampConfig c;
              c.damping = damping;
              c.max_iter = max_iter;
              c.tol = tol;
              return gamp_rie_fit(ds, s, delta, c);
          },
          py::arg("dataset"), py::arg("activation"), py::arg("delta"), py::arg("damping") = 0.3,
          py::arg("max_iter") = 200, py::arg("tol") = 1e-4, py::call_guard<py::gil_scoped_release>());

    // sampling
    py::class_<ChainResult>(m, "ChainResult")
        .def_readonly("W", &ChainResult::W)
        .def_readonly("v", &ChainResult::v)
        .def_readonly("acceptance", &ChainResult::acceptance)
        .def_readonly("step_size", &ChainResult::step_size)
        .def_property_readonly("trace", [](const ChainResult& r) {
            py::dict out;
            const auto cols = trace_columns();
            for (size_t j = 0; j < cols.size(); ++j) {
                std::vector<double> col;
                for (const auto& p : r.trace.points) col.push_back(trace_row(p)[j]);
                out[py::str(cols[j])] = col;
            }
            return out;
        });
    auto chain_cfg = [](InitKind init, long steps, std::uint64_t seed) {
        ChainConfig c;
        c.init = init;
        c.steps = steps;
        c.seed = seed;
        return c;
    };
    m.def("metropolis_binary",
          [chain_cfg](const Dataset& ds, const TeacherInstance& t, const ModelParams& p, InitKind init, long steps,
                      std::uint64_t seed) { return metropolis_binary(ds, t, p, chain_cfg(init, steps, seed)); },
          py::arg("dataset"), py::arg("teacher"), py::arg("params"), py::arg("init") = InitKind::uninformative,
          py::arg("steps") = 100, py::arg("seed") = 1, py::call_guard<py::gil_scoped_release>());
    m.def("hmc_gaussian",
          [chain_cfg](const Dataset& ds, const TeacherInstance& t, const ModelParams& p, InitKind init, long steps,
                      std::uint64_t seed) { return hmc_gaussian(ds, t, p, chain_cfg(init, steps, seed)); },
          py::arg("dataset"), py::arg("teacher"), py::arg("params"), py::arg("init") = InitKind::uninformative,
          py::arg("steps") = 100, py::arg("seed") = 1, py::call_guard<py::gil_scoped_release>());
    m.def("tensor_overlaps",
          [](const Matrix& Wa, const Vector& va, const Matrix& Wb, const Vector& vb, int ell_max) {
              auto t = tensor_overlaps(Wa, va, Wb, vb, ell_max);
              py::dict out;
              out["qW"] = t.qW;
              out["qv"] = t.qv;
              out["Q"] = std::vector<double>(t.Q.begin(), t.Q.end());
              return out;
          },
          py::arg("Wa"), py::arg("va"), py::arg("Wb"), py::arg("vb"), py::arg("ell_max") = 5);
}
