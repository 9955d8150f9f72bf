// Python bindings: kernel and semi-norm primitives, the FD and spectral
// samplers, and the JSON-config entry point of the harness.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

#include "shelab/harness.hpp"
#include "shelab/heat_kernel.hpp"
#include "shelab/holder.hpp"
#include "shelab/parallel.hpp"
#include "shelab/solver.hpp"

namespace py = pybind11;
using namespace shelab;

namespace {

using Arr = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array2D to_array2d(const Arr& a) {
    if (a.ndim() != 2) throw DomainError("expected a 2-D array (rows are time, columns are space)");
    Array2D out(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), out.flat().begin());
    return out;
}

py::array_t<double> to_numpy(const Array2D& a) {
    py::array_t<double> out({a.rows(), a.cols()});
    std::copy(a.flat().begin(), a.flat().end(), out.mutable_data());
    return out;
}

std::vector<double> to_vector(const Arr& a) {
    if (a.ndim() != 1) throw DomainError("expected a 1-D array");
    return {a.data(), a.data() + a.size()};
}

SigmaSpec sigma_from(const std::string& name, const std::vector<double>& params) {
    SigmaSpec s = SigmaSpec::from_preset(name, params);
    return s;
}

py::dict seminorm_dict(const SeminormResult& r) {
    py::dict d;
    d["value"] = r.value;
    d["arg_pair"] = py::make_tuple(r.arg_pair[0], r.arg_pair[1], r.arg_pair[2], r.arg_pair[3]);
    d["theta"] = r.theta;
    d["metric"] = to_string(r.metric);
    d["stride"] = r.stride;
    return d;
}

}  // namespace

PYBIND11_MODULE(_shelab, m) {
    m.doc() = "Stochastic heat equation lab: kernels, samplers, semi-norms and the experiment harness";

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NumericalFailure>(m, "NumericalFailure", PyExc_RuntimeError);

    m.attr("SCHEMA_VERSION") = kSchemaVersion;

    m.def("lambda_theta", &lambda_theta, py::arg("theta"));
    m.def("lambda_integral", &lambda_integral, py::arg("theta"));
    m.def("torus_kernel", [](double t, double x) { return torus_kernel(t, x); }, py::arg("t"), py::arg("x"));
    m.def(
        "kernel_convolve", [](const Arr& u0, double t) { return kernel_convolve(to_vector(u0), t); }, py::arg("u0"),
        py::arg("t"));
    m.def(
        "time_window_variance",
        [](double s, double t) { return increment_variance_quadrature(IncrementKind::time_window, s, t); },
        py::arg("s"), py::arg("t"), "int_s^t int_T G(r, y)^2 dy dr");

    m.def(
        "solve_fd",
        [](std::size_t n_x, std::size_t n_t, double T, const std::string& sigma, const std::vector<double>& params,
           const std::optional<Arr>& u0, std::uint64_t stream, std::uint64_t seed) {
            const Grid g{n_x, n_t, T};
            const std::vector<double> init = u0 ? to_vector(*u0) : std::vector<double>(n_x, 0.0);
            const auto noise = sample_noise(g, stream, seed);
            FieldPath p;
            {
                py::gil_scoped_release release;
                p = solve_fd(g, sigma_from(sigma, params), init, nullptr, noise);
            }
            return to_numpy(p.values);
        },
        py::arg("n_x"), py::arg("n_t"), py::arg("T"), py::arg("sigma") = "const",
        py::arg("sigma_params") = std::vector<double>{1.0}, py::arg("u0") = py::none(), py::arg("stream") = 0,
        py::arg("seed") = 1, "Finite-difference path, shape (n_t + 1, n_x).");
    m.def(
        "solve_spectral",
        [](std::size_t n_x, std::size_t n_t, double T, double sigma0, const std::optional<Arr>& u0,
           std::uint64_t stream, std::uint64_t seed) {
            const Grid g{n_x, n_t, T};
            const std::vector<double> init = u0 ? to_vector(*u0) : std::vector<double>(n_x, 0.0);
            return to_numpy(solve_spectral_constant(g, sigma0, init, stream, seed).values);
        },
        py::arg("n_x"), py::arg("n_t"), py::arg("T"), py::arg("sigma0") = 1.0, py::arg("u0") = py::none(),
        py::arg("stream") = 0, py::arg("seed") = 1, "Exact-in-law Fourier path for constant sigma.");

    m.def(
        "spatial_seminorm",
        [](const Arr& row, double theta, const std::string& metric) {
            const auto v = to_vector(row);
            return seminorm_dict(spatial_seminorm(v, theta, metric_from_string(metric)));
        },
        py::arg("row"), py::arg("theta"), py::arg("metric") = "representative");
    m.def(
        "temporal_seminorm",
        [](const Arr& col, double theta, double T, std::size_t stride) {
            const auto v = to_vector(col);
            return seminorm_dict(temporal_seminorm(v, theta, T, stride));
        },
        py::arg("column"), py::arg("theta"), py::arg("T"), py::arg("stride") = 1);
    m.def(
        "sup_spatial",
        [](const Arr& values, double theta, const std::string& metric) {
            return seminorm_dict(sup_spatial(to_array2d(values), theta, metric_from_string(metric)));
        },
        py::arg("values"), py::arg("theta"), py::arg("metric") = "representative");
    m.def(
        "sup_temporal",
        [](const Arr& values, double theta, double T, std::size_t stride) {
            return seminorm_dict(sup_temporal(to_array2d(values), theta, T, stride));
        },
        py::arg("values"), py::arg("theta"), py::arg("T"), py::arg("stride") = 1);
    m.def(
        "combined_seminorm",
        [](const Arr& values, double theta, double T, std::size_t stride, const std::string& metric) {
            return seminorm_dict(
                combined_seminorm(to_array2d(values), theta, T, stride, metric_from_string(metric)));
        },
        py::arg("values"), py::arg("theta"), py::arg("T"), py::arg("stride") = 1,
        py::arg("metric") = "representative");

    m.def(
        "default_config", [](const std::string& subcommand) {
            ExperimentConfig c;
            c.subcommand = subcommand;
            return config_to_json(c);
        },
        py::arg("subcommand") = "verify-kernel", "Default config as JSON text.");
    m.def(
        "run_config",
        [](const std::string& config_json) {
            const ExperimentConfig c = config_from_json(config_json);
            ResultRecord rec;
            {
                py::gil_scoped_release release;
                rec = run(c);
            }
            std::ostringstream csv;
            write_csv(csv, rec.table);
            return py::make_tuple(record_to_json(rec), csv.str());
        },
        py::arg("config_json"), "Run one experiment; returns (record JSON, CSV text).");
    m.def("set_thread_count", &set_thread_count, py::arg("n"));
    m.def("thread_count", &thread_count);
}
