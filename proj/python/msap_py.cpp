#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>
#include <pybind11/functional.h>

#include "msap/checkpoint.hpp"
#include "msap/config.hpp"
#include "msap/evaluation.hpp"
#include "msap/experiments.hpp"
#include "msap/invariants.hpp"
#include "msap/report.hpp"

namespace py = pybind11;
using namespace msap;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array frames_to_array(const std::vector<Tensor>& frames) {
    if (frames.empty()) return Array(std::vector<py::ssize_t>{0});
    const Shape& s = frames.front().shape();
    std::vector<py::ssize_t> dims{static_cast<py::ssize_t>(frames.size())};
    for (auto d : s) dims.push_back(static_cast<py::ssize_t>(d));
    Array out(dims);
    double* dst = out.mutable_data();
    for (const auto& f : frames) dst = std::copy(f.data().begin(), f.data().end(), dst);
    return out;
}

Array tensor_to_array(const Tensor& t) {
    std::vector<py::ssize_t> dims;
    for (auto d : t.shape()) dims.push_back(static_cast<py::ssize_t>(d));
    Array out(dims);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

// [T, C, H, W] array -> FullVideo.
FullVideo array_to_video(const Array& a, std::size_t label) {
    if (a.ndim() != 4) throw InputError("video array must have shape [T, C, H, W]");
    const Shape frame{static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(2)),
                      static_cast<std::size_t>(a.shape(3))};
    const std::size_t n = numel(frame);
    FullVideo v;
    v.label = label;
    v.id = "array";
    for (py::ssize_t t = 0; t < a.shape(0); ++t) {
        const double* p = a.data() + t * static_cast<py::ssize_t>(n);
        v.frames.emplace_back(frame, std::vector<double>(p, p + n));
    }
    return v;
}

SampledSegment array_to_sample(const Array& a) {
    if (a.ndim() != 4 || a.shape(0) != static_cast<py::ssize_t>(kSampledFrames))
        throw InputError("sample must have shape [5, C, H, W]");
    const FullVideo v = array_to_video(a, 0);
    SampledSegment s;
    for (std::size_t j = 0; j < kSampledFrames; ++j) s.frames[j] = v.frames[j];
    return s;
}

TrainConfig config_from(const py::dict& overrides) {
    KeyValueConfig kv;
    for (const auto& [k, v] : overrides) kv.set(py::str(k), py::str(v));
    return TrainConfig::from(kv);
}

py::dict table_to_dict(const AccuracyTable& t) {
    py::dict d;
    d["method"] = t.method;
    std::vector<double> ratios, acc;
    std::vector<std::size_t> counts;
    for (const auto& r : t.rows) {
        ratios.push_back(r.ratio());
        acc.push_back(r.accuracy());
        counts.push_back(r.count);
    }
    d["ratio"] = ratios;
    d["accuracy"] = acc;
    d["count"] = counts;
    d["average"] = t.average();
    return d;
}

}  // namespace

PYBIND11_MODULE(_msap, m) {
    m.doc() = "Segment-scale temporal differences fused with an LSTM over observed segments, for early action prediction.";

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);
    py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init([](const py::dict& d) { return config_from(d); }), py::arg("overrides") = py::dict())
        .def("set", &TrainConfig::apply, py::arg("key"), py::arg("value"))
        .def("validate", &TrainConfig::validate)
        .def("as_dict", [](const TrainConfig& c) { return c.to_key_values().entries(); })
        .def("render", [](const TrainConfig& c) { return c.to_key_values().render(); })
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("threads", &TrainConfig::threads)
        .def_property_readonly("segments", [](const TrainConfig& c) { return c.model.segments; })
        .def_property_readonly("class_names", [](const TrainConfig& c) {
            std::vector<std::string> names;
            for (const auto& cls : c.corpus.classes) names.push_back(cls.name);
            return names;
        });

    py::class_<Model>(m, "Model")
        .def(py::init([](const TrainConfig& c) { return Model::create(c.model, c.seed); }), py::arg("config"))
        .def_property_readonly("parameter_count", [](const Model& mod) { return mod.params().scalar_count(); })
        .def_property_readonly("parameter_names", [](const Model& mod) {
            std::vector<std::string> names;
            for (const auto& p : mod.params().all()) names.push_back(p.name);
            return names;
        })
        .def("parameter", [](const Model& mod, const std::string& name) {
            return tensor_to_array(mod.params()[mod.params().id_of(name)].value);
        })
        .def("save", [](const Model& mod, const std::filesystem::path& path, const TrainConfig& c) {
            save_checkpoint(path, mod.params(), {c.model_hash(), c.seed});
        })
        .def("load", [](Model& mod, const std::filesystem::path& path, const TrainConfig& c) {
            load_checkpoint(path, mod.params(), c.model_hash());
        })
        .def("predict_partial",
             [](const Model& mod, const Array& video, std::size_t k, std::size_t K) {
                 std::vector<std::vector<double>> out;
                 for (const auto& o : predict_partial(mod, array_to_video(video, 0), k, K))
                     out.emplace_back(o.logits.data().begin(), o.logits.data().end());
                 return out;
             },
             py::arg("video"), py::arg("k"), py::arg("K"),
             "Logits after each of the first k segments of a [T, C, H, W] clip split K ways.")
        .def("predict_all_ratios", [](const Model& mod, const Array& video) {
            std::vector<std::vector<double>> out;
            for (const auto& o : predict_all_ratios(mod, array_to_video(video, 0), mod.config().segments))
                out.emplace_back(o.logits.data().begin(), o.logits.data().end());
            return out;
        })
        .def("encode", [](const Model& mod, const Array& sample) {
            return tensor_to_array(mod.encoder().encode(BoundParameters(mod.params()), array_to_sample(sample)).vector);
        });

    py::class_<Corpus>(m, "Corpus")
        .def_property_readonly("train_size", [](const Corpus& c) { return c.train.size(); })
        .def_property_readonly("test_size", [](const Corpus& c) { return c.test.size(); })
        .def("train_clip", [](const Corpus& c, std::size_t i) { return py::make_tuple(frames_to_array(c.train.at(i).frames), c.train.at(i).label); })
        .def("test_clip", [](const Corpus& c, std::size_t i) { return py::make_tuple(frames_to_array(c.test.at(i).frames), c.test.at(i).label); });

    m.def("generate_corpus", [](const TrainConfig& c) { return generate_corpus(c.corpus, c.threads); }, py::arg("config"));
    m.def("generate_clip",
          [](const TrainConfig& c, std::size_t label, std::uint64_t seed) {
              return frames_to_array(generate_clip(c.corpus.classes.at(label), c.corpus, seed).frames);
          },
          py::arg("config"), py::arg("label"), py::arg("seed"), "One [T, C, H, W] clip of class `label`.");
    m.def("bayes_bound", [](const TrainConfig& c, double r) { return bayes_bound(c.corpus, r); }, py::arg("config"), py::arg("ratio"));

    m.def("observation_ratio", &observation_ratio, py::arg("k"), py::arg("K"));
    m.def("segment_bounds",
          [](std::size_t frames, std::size_t K) {
              std::vector<std::pair<std::size_t, std::size_t>> out;
              for (const auto& s : split_segments(frames, K)) out.emplace_back(s.begin, s.end);
              return out;
          },
          py::arg("frames"), py::arg("K"));
    m.def("temporal_difference", [](const Array& sample) { return tensor_to_array(temporal_difference(array_to_sample(sample))); },
          py::arg("sample"), "Difference stack [4C, H, W] of a [5, C, H, W] sample.");

    m.def("train",
          [](Model& mod, const Corpus& corpus, const TrainConfig& c, const std::function<void(py::dict)>& on_epoch) {
              std::vector<EpochRecord> history;
              {
                  py::gil_scoped_release release;
                  history = train_model(mod, corpus.train, c, [&](const EpochRecord& e) {
                      if (!on_epoch) return;
                      py::gil_scoped_acquire acquire;
                      py::dict d;
                      d["epoch"] = e.epoch;
                      d["loss"] = e.loss;
                      d["lr"] = e.lr;
                      d["train_acc"] = e.train_acc;
                      on_epoch(d);
                  });
              }
              return history_csv(history);
          },
          py::arg("model"), py::arg("corpus"), py::arg("config"), py::arg("on_epoch") = nullptr,
          "Trains in place; returns history.csv text.");
    m.def("evaluate",
          [](const Model& mod, const Corpus& corpus, const std::string& method, std::size_t threads) {
              AccuracyTable t;
              {
                  py::gil_scoped_release release;
                  t = evaluate(mod, corpus.test, method, threads);
              }
              return table_to_dict(t);
          },
          py::arg("model"), py::arg("corpus"), py::arg("method") = "full", py::arg("threads") = 1);
    m.def("confusion",
          [](const Model& mod, const Corpus& corpus, std::size_t k) {
              const auto cm = confusion(mod, corpus.test, k);
              std::vector<std::vector<std::size_t>> rows(cm.classes(), std::vector<std::size_t>(cm.classes()));
              for (std::size_t t = 0; t < cm.classes(); ++t)
                  for (std::size_t p = 0; p < cm.classes(); ++p) rows[t][p] = cm.at(t, p);
              return rows;
          },
          py::arg("model"), py::arg("corpus"), py::arg("k"));

    m.def("gradient_suite",
          [](std::uint64_t seed, double eps, double tol) {
              std::vector<py::tuple> out;
              for (const auto& r : gradient_suite(seed, eps, tol)) out.push_back(py::make_tuple(r.name, r.passed, r.measured));
              return out;
          },
          py::arg("seed") = 7, py::arg("eps") = 1e-4, py::arg("tol") = 1e-4,
          "(name, passed, max relative error) for every gradient check.");
    m.def("brightness_invariant",
          [](std::uint64_t seed, const std::vector<double>& offsets, std::size_t count) {
              return brightness_invariance_check(seed, offsets, count).passed;
          },
          py::arg("seed") = 7, py::arg("offsets") = std::vector<double>{0.05, 0.2}, py::arg("count") = 20);
}
