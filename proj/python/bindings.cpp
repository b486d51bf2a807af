#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "uolens/harness.hpp"
#include "uolens/numerics.hpp"
#include "uolens/pea_adaptive.hpp"
#include "uolens/pea_core.hpp"

namespace py = pybind11;
using namespace uolens;

namespace {

Eigen::ArrayXd solve_wrapper(const Eigen::ArrayXd& cost, const Eigen::ArrayXd& prior,
                             const Eigen::ArrayXd& rates, std::optional<std::vector<bool>> active) {
    Mask mask;
    if (active) {
        mask.assign(active->size(), 0);
        for (std::size_t i = 0; i < active->size(); ++i) mask[i] = (*active)[i] ? 1 : 0;
    } else {
        mask = full_mask(cost.size());
    }
    return entropic_omd_solve(cost, prior, WeightedEntropyGeometry(rates), mask);
}

std::string run_json(const std::string& config_text, std::optional<std::uint64_t> seed) {
    const auto cfg = ExperimentConfig::from_json(nlohmann::json::parse(config_text));
    const auto result =
        run_experiment(cfg, seed.value_or(cfg.seeds.front()), -1, /*write_files=*/false);
    return result.trace.summary.dump(2);
}

PeaStreamConfig stream_config_from_json(const std::string& text, std::uint64_t seed) {
    nlohmann::json block = nlohmann::json::parse(text);
    nlohmann::json cfg{{"algorithm", "pea_core"}, {"stream", block}};
    return ExperimentConfig::from_json(cfg).pea_stream(seed);
}

}  // namespace

PYBIND11_MODULE(_uolens, m) {
    m.doc() = "Optimistic mirror-descent expert algorithms and universal online learning";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<NumericalError>(m, "NumericalError");
    py::register_exception<DomainError>(m, "DomainError");
    py::register_exception<ProtocolError>(m, "ProtocolError");
    py::register_exception<RangeError>(m, "RangeLimitError");
    py::register_exception<CapabilityError>(m, "CapabilityError");

    m.def("kl_divergence", &kl_divergence, py::arg("w"), py::arg("w_ref"));
    m.def(
        "weighted_entropy_bregman",
        [](const Eigen::ArrayXd& w, const Eigen::ArrayXd& wp, const Eigen::ArrayXd& rates) {
            return weighted_entropy_bregman(w, wp, WeightedEntropyGeometry(rates));
        },
        py::arg("w"), py::arg("w_ref"), py::arg("rates"));
    m.def("entropic_omd_solve", &solve_wrapper, py::arg("cost"), py::arg("prior"),
          py::arg("rates"), py::arg("active") = std::nullopt,
          "Minimize <cost, w> + D_psi(w, prior) over the (masked) simplex.");

    py::class_<ConvexDomain>(m, "ConvexDomain")
        .def_static("ball", &ConvexDomain::ball, py::arg("center"), py::arg("radius"))
        .def_static("box", &ConvexDomain::box, py::arg("lower"), py::arg("upper"))
        .def_property_readonly("diameter", &ConvexDomain::diameter)
        .def("contains", &ConvexDomain::contains, py::arg("x"), py::arg("tol") = 1e-9)
        .def("project", &ConvexDomain::project, py::arg("x"));

    m.def("euclidean_omd_step", &euclidean_omd_step, py::arg("gradient"), py::arg("center"),
          py::arg("step"), py::arg("domain"));
    m.def("matrix_omd_step", &matrix_omd_step, py::arg("gradient"), py::arg("center"),
          py::arg("metric"), py::arg("domain"));

    py::class_<LearningRateGrid>(m, "LearningRateGrid")
        .def_static("build", &LearningRateGrid::build, py::arg("horizon"), py::arg("base_scale"))
        .def_readonly("rates", &LearningRateGrid::rates)
        .def_readonly("exponent_range", &LearningRateGrid::exponent_range)
        .def_property_readonly("size", &LearningRateGrid::size);

    py::class_<MsmwcSession>(m, "MsmwcSession")
        .def(py::init([](const Eigen::VectorXd& prior, long long horizon, double initial_range) {
                 return MsmwcSession(prior, horizon, initial_range);
             }),
             py::arg("prior"), py::arg("horizon"), py::arg("initial_range"))
        .def("predict", &MsmwcSession::predict, py::arg("optimism"), py::arg("range"))
        .def("update", &MsmwcSession::update, py::arg("loss"))
        .def_property_readonly("state", &MsmwcSession::state)
        .def_property_readonly("rounds", &MsmwcSession::rounds)
        .def_property_readonly("active_pairs", &MsmwcSession::active_pairs)
        .def_property_readonly("grid", &MsmwcSession::grid);

    py::class_<RestartWrapper>(m, "RestartWrapper")
        .def(py::init([](const Eigen::VectorXd& prior, long long horizon, double b0) {
                 return RestartWrapper(prior, horizon, b0);
             }),
             py::arg("prior"), py::arg("horizon"), py::arg("b0") = 1.0)
        .def("predict", &RestartWrapper::predict, py::arg("optimism"))
        .def("update", &RestartWrapper::update, py::arg("loss"))
        .def_property_readonly("range", [](const RestartWrapper& w) { return w.tracker().current; })
        .def_property_readonly("restart_count",
                               [](const RestartWrapper& w) { return w.tracker().restart_count; })
        .def_property_readonly("restart_rounds",
                               [](const RestartWrapper& w) { return w.tracker().restart_rounds; })
        .def_property_readonly("surrogate_drift", &RestartWrapper::surrogate_drift);

    py::class_<PeaStream>(m, "PeaStream")
        .def(py::init([](const std::string& json_block, std::uint64_t seed) {
                 return PeaStream(stream_config_from_json(json_block, seed));
             }),
             py::arg("config_json"), py::arg("seed") = 1)
        .def("round", &PeaStream::round, py::arg("t"), "Returns (optimism, loss) of round t >= 1.")
        .def("hash", &PeaStream::stream_hash, py::arg("horizon"))
        .def_property_readonly("experts", &PeaStream::experts);

    m.def("run_experiment_json", &run_json, py::arg("config_json"),
          py::arg("seed") = std::nullopt,
          "Run one replica of the configured experiment; returns the summary as a JSON string. "
          "No files are written.");
}
