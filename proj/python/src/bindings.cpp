// Python bindings for the main operations. Arrays cross the boundary as
// numpy copies; library errors surface as ultdoa.UltdoaError.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "ultdoa/config.hpp"
#include "ultdoa/dataset.hpp"
#include "ultdoa/error.hpp"
#include "ultdoa/fingerprint_io.hpp"
#include "ultdoa/metrics.hpp"
#include "ultdoa/pipeline.hpp"
#include "ultdoa/stream.hpp"

namespace py = pybind11;
using namespace ultdoa;

namespace {

using ComplexArray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;
using RealArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Complex> to_vector(const ComplexArray& a) {
  if (a.ndim() != 1) throw Error(Errc::ShapeMismatch, "expected a 1-d complex array");
  return {a.data(), a.data() + a.size()};
}

ComplexArray to_array(const std::vector<Complex>& v) {
  ComplexArray out(static_cast<py::ssize_t>(v.size()));
  std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(Complex));
  return out;
}

RealArray matrix_array(const CirMagnitudeMatrix& m) {
  RealArray out({static_cast<py::ssize_t>(m.rows), static_cast<py::ssize_t>(m.cols)});
  std::memcpy(out.mutable_data(), m.values.data(), m.values.size() * sizeof(double));
  return out;
}

py::list antenna_list(const std::vector<AntennaId>& ids) {
  py::list out;
  for (const auto& id : ids) out.append(py::make_tuple(id.ru, id.antenna));
  return out;
}

py::dict report_dict(const ErrorReport& r) {
  py::dict d;
  d["mae"] = r.mae;
  d["ce90"] = r.ce90;
  d["median"] = r.median;
  d["errors"] = r.errors;
  return d;
}

CirFrame frame_from(int ru, int antenna, const ComplexArray& samples, double sample_period) {
  CirFrame f;
  f.antenna = {ru, antenna};
  f.samples = to_vector(samples);
  f.sample_period = sample_period;
  return f;
}

ReferencePolicy parse_ref(const std::string& ref) {
  if (ref == "per-ru") return ReferencePolicy::per_ru();
  if (ref == "common") return ReferencePolicy::common({0, 0});
  throw Error(Errc::InvalidArgument, "ref must be 'per-ru' or 'common'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Uplink TDoA positioning core";

  // Instances carry the machine-readable code as `.code`.
  static py::handle error_type = py::exception<Error>(m, "UltdoaError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error_type(e.what());
      exc.attr("code") = py::str(std::string(to_string(e.code())));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  py::class_<ProjectConfig>(m, "Config")
      .def_property_readonly("deployment_id", [](const ProjectConfig& c) { return c.deployment_id; })
      .def_property_readonly("deployment_hash", [](const ProjectConfig& c) { return c.geometry().hash(); })
      .def_property_readonly("antenna_count", [](const ProjectConfig& c) { return c.geometry().antenna_count(); })
      .def_property_readonly("antennas", [](const ProjectConfig& c) { return antenna_list(c.geometry().antenna_ids()); })
      .def_property_readonly("seed", [](const ProjectConfig& c) { return c.scenario.seed; });

  m.def("parse_config", &parse_config, py::arg("yaml_text"), py::arg("source_name") = "<config>");
  m.def("load_config", [](const std::string& path) { return load_config(path); }, py::arg("path"));

  py::class_<Dataset>(m, "Dataset")
      .def("__len__", [](const Dataset& d) { return d.records.size(); })
      .def_property_readonly("n_fft", [](const Dataset& d) { return d.header.n_fft; })
      .def_property_readonly("sample_period", [](const Dataset& d) { return d.header.sample_period; })
      .def_property_readonly("deployment_hash", [](const Dataset& d) { return d.header.deployment_hash; })
      .def("timestamps",
           [](const Dataset& d) {
             std::vector<std::int64_t> t;
             for (const auto& r : d.records) t.push_back(r.timestamp_index);
             return py::array_t<std::int64_t>(static_cast<py::ssize_t>(t.size()), t.data());
           })
      .def("antennas",
           [](const Dataset& d) {
             std::vector<AntennaId> ids;
             for (const auto& r : d.records) ids.push_back(r.antenna);
             return antenna_list(ids);
           })
      .def("cir", [](const Dataset& d, std::size_t i) { return to_array(d.records.at(i).cir); }, py::arg("index"))
      .def("true_position",
           [](const Dataset& d, std::size_t i) -> py::object {
             const auto& p = d.records.at(i).true_position;
             if (!p) return py::none();
             return py::make_tuple(p->x, p->y, p->z);
           })
      .def("to_bytes", [](const Dataset& d) {
        const auto b = encode_dataset(d);
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
      });

  m.def(
      "simulate",
      [](const ProjectConfig& cfg, unsigned threads) {
        if (!cfg.trajectory) throw Error(Errc::ConfigError, "config has no trajectory");
        const Scenario scenario(cfg.scenario);
        py::gil_scoped_release release;
        const auto frames =
            simulate(scenario, make_trajectory(cfg.trajectory->waypoints, cfg.trajectory->step), threads);
        return dataset_from_simulation(frames, scenario);
      },
      py::arg("config"), py::arg("threads") = 1);
  m.def("read_dataset", [](const std::string& path) { return read_dataset(path); }, py::arg("path"));
  m.def("write_dataset", [](const std::string& path, const Dataset& d) { write_dataset(path, d); }, py::arg("path"),
        py::arg("dataset"));
  m.def("decode_dataset", [](py::bytes b) {
    const std::string s = b;
    return decode_dataset({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
  });

  m.def(
      "estimate_toa",
      [](const ComplexArray& samples, double sample_period) {
        const auto t = estimate_toa(frame_from(0, 0, samples, sample_period));
        return py::make_tuple(t.peak_index, t.toa_seconds);
      },
      py::arg("samples"), py::arg("sample_period"));

  m.def(
      "solve",
      [](const Dataset& ds, const ProjectConfig& cfg, bool toa_filter, bool tdoa_filter, const std::string& ref,
         std::size_t smooth, const std::string& toa_source) {
        PipelineOptions o;
        o.toa_filter = toa_filter;
        o.tdoa_filter = tdoa_filter;
        o.policy = parse_ref(ref);
        o.smooth_window = smooth;
        o.toa_source = toa_source == "truth" ? ToaSource::Truth : ToaSource::Peak;
        o.pso = cfg.pso;
        PipelineResult r;
        {
          py::gil_scoped_release release;
          r = run_tdoa_pipeline(ds, cfg.geometry(), o);
        }
        const auto n = static_cast<py::ssize_t>(r.timestamps.size());
        RealArray est({n, py::ssize_t{2}});
        auto e = est.mutable_unchecked<2>();
        py::list status;
        for (py::ssize_t i = 0; i < n; ++i) {
          const auto& t = r.timestamps[static_cast<std::size_t>(i)];
          e(i, 0) = t.smoothed ? t.smoothed->x : std::nan("");
          e(i, 1) = t.smoothed ? t.smoothed->y : std::nan("");
          status.append(t.status);
        }
        py::dict out;
        out["estimates"] = est;
        out["status"] = status;
        out["unsolvable"] = r.unsolvable;
        out["toa_rejected"] = r.toa_rejected;
        out["tdoa_rejected"] = r.tdoa_rejected;
        out["report"] = r.report ? py::object(report_dict(*r.report)) : py::object(py::none());
        return out;
      },
      py::arg("dataset"), py::arg("config"), py::arg("toa_filter") = false, py::arg("tdoa_filter") = false,
      py::arg("ref") = "per-ru", py::arg("smooth") = 1, py::arg("toa_source") = "peak");

  m.def(
      "preprocess",
      [](const py::list& frames, double alpha, std::size_t columns, double gamma) {
        // frames: [(ru, antenna, complex samples, sample_period), ...] of one timestamp.
        std::vector<CirFrame> fs;
        for (const auto& item : frames) {
          const auto t = item.cast<py::tuple>();
          fs.push_back(frame_from(t[0].cast<int>(), t[1].cast<int>(), t[2].cast<ComplexArray>(), t[3].cast<double>()));
        }
        const auto per_ru = align_timestamp(fs);
        const auto in = build_input(per_ru, NormalizationFactor{alpha, "caller"}, columns, gamma);
        py::array_t<std::uint8_t> mask(static_cast<py::ssize_t>(in.mask.mask.size()), in.mask.mask.data());
        return py::make_tuple(matrix_array(in.matrix), mask, antenna_list(in.matrix.row_ids));
      },
      py::arg("frames"), py::arg("alpha"), py::arg("columns") = 100, py::arg("gamma") = 0.4);

  m.def(
      "fingerprint",
      [](const Dataset& train, const Dataset& test, double gamma, std::size_t columns, std::size_t k) {
        FingerprintOptions o{columns, gamma, k};
        FingerprintRun run;
        {
          py::gil_scoped_release release;
          run = run_fingerprint(train, test, o);
        }
        RealArray pred({static_cast<py::ssize_t>(run.predictions.size()), py::ssize_t{2}});
        auto p = pred.mutable_unchecked<2>();
        for (std::size_t i = 0; i < run.predictions.size(); ++i) {
          p(static_cast<py::ssize_t>(i), 0) = run.predictions[i].x;
          p(static_cast<py::ssize_t>(i), 1) = run.predictions[i].y;
        }
        py::dict out;
        out["alpha"] = run.alpha.alpha_norm;
        out["predictions"] = pred;
        out["all_masked"] = run.all_masked;
        out["report"] = run.report ? py::object(report_dict(*run.report)) : py::object(py::none());
        return out;
      },
      py::arg("train"), py::arg("test"), py::arg("gamma") = 0.4, py::arg("columns") = 100, py::arg("k") = 5);

  m.def("mae", [](const std::vector<double>& e) { return mae(e); });
  m.def("ce90", [](const std::vector<double>& e) { return ce90(e); });
  m.def("percentile", [](const std::vector<double>& v, double q) { return percentile(v, q); });
  m.def("error_cdf", [](const std::vector<double>& e) {
    std::vector<std::pair<double, double>> out;
    for (const auto& p : error_cdf(e)) out.emplace_back(p.error, p.fraction);
    return out;
  });

  m.def(
      "encode_message",
      [](const std::string& deployment, std::int64_t t, int ru, int antenna, const ComplexArray& payload,
         double sample_period, std::uint64_t sequence, bool base64) {
        CirStreamMessage msg;
        msg.deployment_id = deployment;
        msg.timestamp_index = t;
        msg.antenna = {ru, antenna};
        msg.payload = to_vector(payload);
        msg.n_fft = static_cast<std::uint32_t>(msg.payload.size());
        msg.sample_period = sample_period;
        msg.sequence = sequence;
        msg.encoding = base64 ? PayloadEncoding::Base64 : PayloadEncoding::Raw;
        const auto b = encode_message(msg);
        return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
      },
      py::arg("deployment"), py::arg("timestamp"), py::arg("ru"), py::arg("antenna"), py::arg("payload"),
      py::arg("sample_period"), py::arg("sequence") = 0, py::arg("base64") = false);
  m.def("decode_message", [](py::bytes b) {
    const std::string s = b;
    const auto msg = decode_message({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
    py::dict d;
    d["deployment"] = msg.deployment_id;
    d["timestamp"] = msg.timestamp_index;
    d["ru"] = msg.antenna.ru;
    d["antenna"] = msg.antenna.antenna;
    d["sample_period"] = msg.sample_period;
    d["sequence"] = msg.sequence;
    d["base64"] = msg.encoding == PayloadEncoding::Base64;
    d["payload"] = to_array(msg.payload);
    return d;
  });
  m.def("cir_topic", &cir_topic, py::arg("deployment"), py::arg("gnb"));

  m.def("read_fingerprints", [](const std::string& path) {
    const auto b = read_fingerprints(path);
    const auto n = static_cast<py::ssize_t>(b.samples.size());
    const auto rows = static_cast<py::ssize_t>(b.rows), cols = static_cast<py::ssize_t>(b.cols);
    RealArray x({n, rows, cols}), y({n, py::ssize_t{2}});
    py::array_t<std::uint8_t> mask({n, rows});
    py::array_t<std::int64_t> t(n);
    for (py::ssize_t i = 0; i < n; ++i) {
      const auto& s = b.samples[static_cast<std::size_t>(i)];
      std::memcpy(x.mutable_data(i), s.input.values.data(), s.input.values.size() * sizeof(double));
      *y.mutable_data(i, 0) = s.label.x;
      *y.mutable_data(i, 1) = s.label.y;
      std::memcpy(mask.mutable_data(i), b.masks[static_cast<std::size_t>(i)].mask.data(), b.rows);
      *t.mutable_data(i) = s.timestamp_index;
    }
    py::dict d;
    d["inputs"] = x;
    d["labels"] = y;
    d["masks"] = mask;
    d["timestamps"] = t;
    d["row_order"] = antenna_list(b.row_order);
    return d;
  });
}
