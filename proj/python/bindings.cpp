#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "streamreg/cli.hpp"
#include "streamreg/engine.hpp"
#include "streamreg/errors.hpp"
#include "streamreg/service.hpp"

namespace py = pybind11;
using streamreg::EngineConfig;
using streamreg::Regressor;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::span<const double> view(const Array& a) {
    if (a.ndim() != 1) throw std::invalid_argument("expected a one-dimensional array");
    return {a.data(), static_cast<std::size_t>(a.size())};
}

EngineConfig config_from(const std::string& json_text) {
    if (json_text.empty()) return EngineConfig{};
    return streamreg::engine_config_from_json(nlohmann::json::parse(json_text));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "One-pass streaming nonparametric regression";

    py::register_exception<streamreg::Error>(m, "StreamregError", PyExc_RuntimeError);

    py::class_<Regressor>(m, "Regressor")
        .def(py::init([](const std::string& config) { return Regressor(config_from(config)); }),
             py::arg("config") = "", "Engine from a JSON config string (empty = defaults).")
        .def(
            "ingest",
            [](Regressor& r, const Array& t, const Array& y) {
                const auto ts = view(t);
                const auto ys = view(y);
                py::gil_scoped_release release;
                r.ingest(ts, ys);
            },
            py::arg("t"), py::arg("y"))
        .def_property_readonly("n", &Regressor::n)
        .def_property_readonly("active_count", &Regressor::active_count)
        .def_property_readonly("memory_footprint", &Regressor::memory_footprint)
        .def_property_readonly("G", &Regressor::G)
        .def_property_readonly("start", &Regressor::start)
        .def("current_rho", &Regressor::current_rho)
        .def(
            "estimate",
            [](const Regressor& r, const Array& t, std::optional<double> rho) {
                const auto ts = view(t);
                const auto model = r.fit(rho ? *rho : r.current_rho());
                py::array_t<double> out(static_cast<py::ssize_t>(ts.size()));
                auto o = out.mutable_unchecked<1>();
                for (std::size_t i = 0; i < ts.size(); ++i) o(static_cast<py::ssize_t>(i)) = (*model)(ts[i]);
                return out;
            },
            py::arg("t"), py::arg("rho") = py::none())
        .def("checkpoint", [](const Regressor& r) { return r.to_checkpoint().dump(); })
        .def_static(
            "from_checkpoint",
            [](const std::string& text) { return Regressor::from_checkpoint(nlohmann::json::parse(text)); },
            py::arg("text"))
        .def("config", [](const Regressor& r) { return streamreg::to_json(r.config()).dump(); });

    py::class_<streamreg::Service>(m, "Service")
        .def(py::init([](const std::string& config) { return std::make_unique<streamreg::Service>(config_from(config)); }),
             py::arg("config") = "")
        .def("handle", &streamreg::Service::handle_line, py::arg("request"),
             "Handles one JSON request string and returns the JSON response string.");

    m.def(
        "cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out;
            std::ostringstream err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = streamreg::cli_run(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command line tool; returns (exit_code, stdout, stderr).");
}
