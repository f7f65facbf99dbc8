#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tiersim/classify.hpp"
#include "tiersim/energy.hpp"
#include "tiersim/errors.hpp"
#include "tiersim/harness.hpp"
#include "tiersim/node.hpp"
#include "tiersim/station.hpp"
#include "tiersim/trace.hpp"

namespace py = pybind11;
using namespace tiersim;

PYBIND11_MODULE(_tiersim, m) {
    m.doc() = "Tiered body sensor node simulator.";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<SpecError>(m, "SpecError", error.ptr());
    py::register_exception<FormatError>(m, "FormatError", error.ptr());
    py::register_exception<ParseError>(m, "ParseError", error.ptr());
    py::register_exception<FrameError>(m, "FrameError", error.ptr());
    py::register_exception<CalibrationError>(m, "CalibrationError", error.ptr());
    py::register_exception<ComparisonError>(m, "ComparisonError", error.ptr());

    py::enum_<Activity>(m, "Activity")
        .value("REST", Activity::kRest)
        .value("WALK", Activity::kWalk)
        .value("FALL", Activity::kFall);

    py::enum_<Tier>(m, "Tier")
        .value("TIER1", Tier::kTier1)
        .value("TIER2", Tier::kTier2)
        .value("TIER3", Tier::kTier3)
        .value("NEURAL", Tier::kNeural);

    py::class_<AccelSample>(m, "AccelSample")
        .def(py::init([](std::uint64_t t_ms, double ax, double ay, double az, Activity label) {
                 return AccelSample{t_ms, ax, ay, az, label};
             }),
             py::arg("t_ms"), py::arg("ax"), py::arg("ay"), py::arg("az"), py::arg("label") = Activity::kRest)
        .def_readwrite("t_ms", &AccelSample::t_ms)
        .def_readwrite("ax", &AccelSample::ax)
        .def_readwrite("ay", &AccelSample::ay)
        .def_readwrite("az", &AccelSample::az)
        .def_readwrite("label", &AccelSample::label)
        .def(py::self == py::self);

    py::class_<Trace>(m, "Trace")
        .def(py::init<>())
        .def_readwrite("sample_interval_ms", &Trace::sample_interval_ms)
        .def_readwrite("samples", &Trace::samples)
        .def_readwrite("seed", &Trace::seed)
        .def("__len__", [](const Trace& t) { return t.samples.size(); });

    py::class_<TraceSpec>(m, "TraceSpec")
        .def(py::init<>())
        .def_readwrite("duration_min", &TraceSpec::duration_min)
        .def_readwrite("sample_interval_ms", &TraceSpec::sample_interval_ms)
        .def_readwrite("activity_fraction", &TraceSpec::activity_fraction)
        .def_readwrite("fall_count", &TraceSpec::fall_count)
        .def_readwrite("fall_duration_samples", &TraceSpec::fall_duration_samples)
        .def("sample_count", &TraceSpec::sample_count);

    m.def("reference_profile", &reference_profile);
    m.def("generate_trace", &generate_trace, py::arg("spec"), py::arg("seed"));
    m.def("format_trace", &format_trace);
    m.def("parse_trace", &parse_trace);
    m.def("magnitude_sq", &magnitude_sq);

    py::class_<NodeConfig>(m, "NodeConfig")
        .def(py::init<>())
        .def_readwrite("tier", &NodeConfig::tier)
        .def_readwrite("t_move", &NodeConfig::t_move)
        .def_readwrite("t_fall", &NodeConfig::t_fall)
        .def_readwrite("refractory_ms", &NodeConfig::refractory_ms)
        .def_readwrite("node_address", &NodeConfig::node_address);

    py::class_<NodeLog>(m, "NodeLog")
        .def(py::init<>())
        .def_readwrite("duration_ms", &NodeLog::duration_ms)
        .def_readwrite("n_samples", &NodeLog::n_samples)
        .def_readwrite("n_tx_data", &NodeLog::n_tx_data)
        .def_readwrite("n_tx_alarm", &NodeLog::n_tx_alarm)
        .def_property_readonly("n_tx", &NodeLog::n_tx);

    m.def("run_node", [](const Trace& t, const NodeConfig& c) { return run_node(t, c); });

    py::class_<EnergyParams>(m, "EnergyParams")
        .def(py::init<>())
        .def_readwrite("p_listen_mw", &EnergyParams::p_listen_mw)
        .def_readwrite("p_base_mw", &EnergyParams::p_base_mw)
        .def_readwrite("e_sample_mws", &EnergyParams::e_sample_mws)
        .def_readwrite("e_tx_mws", &EnergyParams::e_tx_mws);

    py::class_<EnergyReport>(m, "EnergyReport")
        .def(py::init<>())
        .def_readwrite("total_ws", &EnergyReport::total_ws)
        .def_readwrite("power_w", &EnergyReport::power_w)
        .def_readwrite("n_tx", &EnergyReport::n_tx)
        .def_readwrite("n_samples", &EnergyReport::n_samples)
        .def_readwrite("duration_ms", &EnergyReport::duration_ms)
        .def_readwrite("ws_per_sample", &EnergyReport::ws_per_sample)
        .def("tx_per_minute", &EnergyReport::tx_per_minute);

    py::class_<CalibrationTargets>(m, "CalibrationTargets")
        .def(py::init<>())
        .def_readwrite("p1_w", &CalibrationTargets::p1_w)
        .def_readwrite("p2_w", &CalibrationTargets::p2_w)
        .def_readwrite("n_tx1", &CalibrationTargets::n_tx1)
        .def_readwrite("n_tx2", &CalibrationTargets::n_tx2)
        .def_readwrite("comm_share", &CalibrationTargets::comm_share)
        .def_readwrite("cpu_split", &CalibrationTargets::cpu_split);

    py::class_<TierPairStats>(m, "TierPairStats")
        .def_readonly("from_tier", &TierPairStats::from)
        .def_readonly("to_tier", &TierPairStats::to)
        .def_readonly("power_reduction_pct", &TierPairStats::power_reduction_pct)
        .def_readonly("data_reduction_pct", &TierPairStats::data_reduction_pct)
        .def_readonly("ws_per_sample_reduction_pct", &TierPairStats::ws_per_sample_reduction_pct);

    m.def("paper_targets", &paper_targets);
    m.def("paper_calibrated", &paper_calibrated, py::return_value_policy::copy);
    m.def("calibrate", &calibrate);
    m.def("account", &account);
    m.def("compare", [](const std::map<Tier, EnergyReport>& r) { return compare(r).pairs; });

    m.def("encode_frame", [](std::uint64_t address, std::uint32_t seq, std::uint64_t t_ms, std::uint16_t code) {
              RadioFrame f{address, seq, t_ms, AlarmPayload{code}};
              const auto b = encode_frame(f);
              return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
          },
          "Encodes an ALARM frame.", py::arg("node_address"), py::arg("seq"), py::arg("t_ms"), py::arg("code"));
    m.def("encode_data_frame", [](std::uint64_t address, std::uint32_t seq, std::uint64_t t_ms, float x, float y, float z) {
        RadioFrame f{address, seq, t_ms, AccelPayload{{x, y, z}}};
        const auto b = encode_frame(f);
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
    });
    m.def("frame_to_record", [](py::bytes data) {
        const std::string s = data;
        const std::vector<std::uint8_t> b(s.begin(), s.end());
        return format_record(forward(parse_frame(b)));
    }, "Parses a radio frame and returns its line-protocol record.");

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def_property("trace_spec",
                      [](const ExperimentConfig& c) -> py::object {
                          if (const auto* s = std::get_if<TraceSpec>(&c.trace_source)) return py::cast(*s);
                          return py::none();
                      },
                      [](ExperimentConfig& c, const TraceSpec& s) { c.trace_source = s; })
        .def_property("trace_path",
                      [](const ExperimentConfig& c) -> py::object {
                          if (const auto* p = std::get_if<std::filesystem::path>(&c.trace_source)) return py::cast(*p);
                          return py::none();
                      },
                      [](ExperimentConfig& c, const std::filesystem::path& p) { c.trace_source = p; })
        .def_readwrite("tiers", &ExperimentConfig::tiers)
        .def_readwrite("runs", &ExperimentConfig::runs)
        .def_readwrite("base_seed", &ExperimentConfig::base_seed)
        .def_readwrite("params", &ExperimentConfig::params)
        .def_readwrite("node", &ExperimentConfig::node)
        .def_readwrite("parallel", &ExperimentConfig::parallel);

    py::class_<RunResult>(m, "RunResult")
        .def("to_json", &result_to_json)
        .def("report", [](const RunResult& r, const std::string& format) {
            return emit_report(r, format == "csv" ? ReportFormat::kCsv : ReportFormat::kTable);
        }, py::arg("format") = "table")
        .def("verify", [](const RunResult& r) {
            std::vector<std::tuple<std::string, double, std::string, bool>> out;
            for (const auto& c : verify_against_paper(r)) out.emplace_back(c.name, c.measured, c.target, c.passed);
            return out;
        });

    m.def("run_experiment", &run_experiment, py::call_guard<py::gil_scoped_release>());
    m.def("result_from_json", &result_from_json);
}
