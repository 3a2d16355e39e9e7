#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "spikesift/evaluator.hpp"
#include "spikesift/pipeline.hpp"
#include "spikesift/synthgen.hpp"

namespace py = pybind11;
using namespace spikesift;

namespace {

py::array_t<std::int64_t> to_array(const std::vector<std::int64_t>& v) {
  return py::array_t<std::int64_t>(static_cast<py::ssize_t>(v.size()), v.data());
}

Recording make_recording(py::array_t<std::int16_t, py::array::c_style | py::array::forcecast> data,
                         double sample_rate, ProbeGeometry geometry) {
  if (data.ndim() != 2) throw Error("samples must be a (channels, samples) array");
  const auto channels = static_cast<std::size_t>(data.shape(0));
  const auto samples = static_cast<std::size_t>(data.shape(1));
  if (channels != geometry.size()) throw Error("array rows do not match the probe channel count");
  std::vector<std::int16_t> flat(data.data(), data.data() + channels * samples);
  return Recording(std::move(flat), samples, sample_rate, std::move(geometry));
}

}  // namespace

PYBIND11_MODULE(_spikesift, m) {
  m.doc() = "Drift-aware template-sifting spike sorter";
  py::register_exception<Error>(m, "Error", PyExc_ValueError);

  py::class_<Config>(m, "Config")
      .def(py::init<>())
      .def_readwrite("kappa", &Config::kappa)
      .def_readwrite("lambda_", &Config::lambda)
      .def_readwrite("n_min", &Config::n_min)
      .def_readwrite("l_min_seconds", &Config::l_min_seconds)
      .def_readwrite("d_max_um", &Config::d_max_um)
      .def_readwrite("mu", &Config::mu)
      .def_readwrite("band_low_hz", &Config::band_low_hz)
      .def_readwrite("band_high_hz", &Config::band_high_hz)
      .def_readwrite("tol_ms", &Config::tol_ms)
      .def_readwrite("invert_polarity", &Config::invert_polarity)
      .def_readwrite("threads", &Config::threads)
      .def("validate", &Config::validate)
      .def("set", [](Config& c, const std::string& k, const std::string& v) { apply_setting(c, k, v); });
  m.def("load_config", [](const std::filesystem::path& p) { return load_config(p); });

  py::class_<Channel>(m, "Channel")
      .def_readonly("id", &Channel::id)
      .def_readonly("x_um", &Channel::x_um)
      .def_readonly("y_um", &Channel::y_um);

  py::class_<ProbeGeometry>(m, "ProbeGeometry")
      .def(py::init([](const std::vector<std::tuple<int, double, double>>& rows) {
             std::vector<Channel> ch;
             for (const auto& [id, x, y] : rows) ch.push_back({id, x, y});
             return ProbeGeometry(std::move(ch));
           }),
           py::arg("channels"))
      .def_static("two_column", &ProbeGeometry::two_column, py::arg("channels"),
                  py::arg("pitch_um") = 15.0, py::arg("column_spacing_um") = 32.0)
      .def("__len__", &ProbeGeometry::size)
      .def_property_readonly("channels", &ProbeGeometry::channels)
      .def("nearest_channels", &ProbeGeometry::nearest_channels);
  m.def("read_probe", &read_probe);
  m.def("write_probe", &write_probe);

  py::class_<Recording>(m, "Recording")
      .def(py::init(&make_recording), py::arg("samples"), py::arg("sample_rate"), py::arg("geometry"))
      .def_property_readonly("num_channels", &Recording::num_channels)
      .def_property_readonly("num_samples", &Recording::num_samples)
      .def_property_readonly("sample_rate", &Recording::sample_rate)
      .def_property_readonly("geometry", &Recording::geometry)
      .def_property_readonly("samples", [](const Recording& r) {
        return py::array_t<std::int16_t>(
            {static_cast<py::ssize_t>(r.num_channels()), static_cast<py::ssize_t>(r.num_samples())},
            r.samples().data());
      });
  m.def("load_recording",
        py::overload_cast<const std::filesystem::path&, const std::filesystem::path&, double>(
            &load_recording),
        py::arg("signal"), py::arg("probe"), py::arg("sample_rate"));
  m.def("write_signal", &write_signal);

  py::class_<GlobalUnit>(m, "Unit")
      .def_readonly("id", &GlobalUnit::id)
      .def_property_readonly("spike_times", [](const GlobalUnit& u) { return to_array(u.spike_times); })
      .def_readonly("segments", &GlobalUnit::segments);

  py::class_<SortResult>(m, "SortResult")
      .def_readonly("sample_rate", &SortResult::sample_rate)
      .def_readonly("num_samples", &SortResult::num_samples)
      .def_readonly("units", &SortResult::units)
      .def_readonly("segment_shifts", &SortResult::segment_shifts)
      .def_property_readonly("boundaries", &SortResult::boundaries)
      .def("__eq__", [](const SortResult& a, const SortResult& b) { return a == b; });

  m.def(
      "sort",
      [](const Recording& r, const Config& c) {
        py::gil_scoped_release release;
        return sort_recording(r, c);
      },
      py::arg("recording"), py::arg("config") = Config{});
  m.def("write_results", &write_results);
  m.def("read_results", &read_results);

  m.def(
      "dog_filter",
      [](const std::vector<double>& signal, double low, double high, double fs) {
        return dog_filter_series(signal, design_kernel(low, high, fs));
      },
      py::arg("signal"), py::arg("low_hz") = 300.0, py::arg("high_hz") = 3000.0,
      py::arg("sample_rate") = 20000.0);

  py::class_<TruthNeuron>(m, "TruthNeuron")
      .def_readonly("id", &TruthNeuron::id)
      .def_readonly("x_um", &TruthNeuron::x_um)
      .def_readonly("y_um", &TruthNeuron::y_um)
      .def_readonly("z_um", &TruthNeuron::z_um)
      .def_readonly("amplitude", &TruthNeuron::amplitude)
      .def_readonly("rate_hz", &TruthNeuron::rate_hz)
      .def_property_readonly("spike_times", [](const TruthNeuron& n) { return to_array(n.spike_times); });

  py::class_<GroundTruth>(m, "GroundTruth")
      .def_readonly("sample_rate", &GroundTruth::sample_rate)
      .def_readonly("num_samples", &GroundTruth::num_samples)
      .def_readonly("neurons", &GroundTruth::neurons)
      .def("drift_offset", &GroundTruth::drift_offset);
  m.def("read_truth", &read_truth);
  m.def("write_truth", &write_truth);

  m.def(
      "generate",
      [](std::size_t channels, std::size_t neurons, double seconds, double noise,
         const std::string& drift, std::uint64_t seed) {
        GeneratorSpec spec;
        spec.channels = channels;
        spec.neurons = neurons;
        spec.seconds = seconds;
        spec.noise_sigma = noise;
        spec.drift = parse_drift(drift);
        spec.seed = seed;
        auto s = generate(spec);
        return std::make_pair(std::move(s.recording), std::move(s.truth));
      },
      py::arg("channels") = 16, py::arg("neurons") = 10, py::arg("seconds") = 60.0,
      py::arg("noise") = 10.0, py::arg("drift") = "none", py::arg("seed") = 1);

  m.def(
      "evaluate",
      [](const SortResult& r, const GroundTruth& t) {
        const auto s = summarize(score_units(r, t));
        py::dict d;
        d["identified"] = s.identified;
        d["unclassified"] = s.unclassified;
        d["spurious"] = s.spurious;
        return d;
      },
      py::arg("result"), py::arg("truth"));
}
