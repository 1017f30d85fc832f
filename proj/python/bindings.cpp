/* Copyright 2026 The LieGConv Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "liegconv/analysis.hpp"
#include "liegconv/config.hpp"
#include "liegconv/selfcheck.hpp"

namespace py = pybind11;
using namespace liegconv;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.storage().begin(), t.storage().end(), out.mutable_data());
  return out;
}

Dataset to_dataset(const Array& images, const std::vector<int>& labels) {
  Dataset d;
  d.images = to_tensor(images);
  d.labels = labels;
  if (d.images.shape().size() != 4 || d.images.shape()[0] != labels.size()) {
    throw std::invalid_argument("images must be [N, C, Y, X] with one label per image");
  }
  return d;
}

// Keyword settings -> configuration, through the same parser as config files.
ExperimentConfig from_settings(const py::dict& settings) {
  std::ostringstream text;
  for (const auto& [key, value] : settings) {
    text << py::str(key).cast<std::string>() << " = ";
    if (py::isinstance<py::bool_>(value)) {
      text << (value.cast<bool>() ? "true" : "false");
    } else if (py::isinstance<py::list>(value) || py::isinstance<py::tuple>(value)) {
      bool first = true;
      for (const auto& v : value) {
        text << (first ? "" : ",") << py::str(v).cast<std::string>();
        first = false;
      }
    } else {
      text << py::str(value).cast<std::string>();
    }
    text << '\n';
  }
  return parse_config(text.str());
}

py::dict settings_dict(const Settings& s) {
  py::dict d;
  for (const auto& [k, v] : s) d[py::str(k)] = v;
  return d;
}

py::dict check_dict(const CheckResult& r) {
  py::dict d;
  d["name"] = r.name;
  d["passed"] = r.passed;
  d["worst"] = r.worst;
  d["tolerance"] = r.tolerance;
  d["seconds"] = r.seconds;
  d["detail"] = r.detail;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Separable group convolutions on affine Lie groups";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("set_num_threads", &set_num_threads, py::arg("n"));

  // Groups.
  py::class_<GroupElement>(m, "GroupElement")
      .def(py::init([](const std::string& group, std::array<double, 2> x, double theta,
                       double scale) {
             return GroupElement(parse_group_tag(group), x, theta, scale);
           }),
           py::arg("group"), py::arg("x") = std::array<double, 2>{0.0, 0.0},
           py::arg("theta") = 0.0, py::arg("scale") = 1.0)
      .def_static("identity", [](const std::string& g) { return GroupElement::identity(parse_group_tag(g)); })
      .def_static("exp",
                  [](const std::string& g, const std::vector<double>& coords) {
                    return exp(AlgebraVector{parse_group_tag(g), coords});
                  },
                  py::arg("group"), py::arg("coords"))
      .def_property_readonly("group", [](const GroupElement& g) { return std::string(to_string(g.tag())); })
      .def_property_readonly("x", &GroupElement::x)
      .def_property_readonly("theta", &GroupElement::theta)
      .def_property_readonly("scale", &GroupElement::scale)
      .def("matrix",
           [](const GroupElement& g) {
             Array out({3, 3});
             const auto mat = g.matrix();
             std::copy(mat.begin(), mat.end(), out.mutable_data());
             return out;
           })
      .def("log", [](const GroupElement& g) { return log(g).coords; })
      .def("inverse", [](const GroupElement& g) { return inverse(g); })
      .def("determinant", [](const GroupElement& g) { return determinant(g); })
      .def("__mul__", [](const GroupElement& a, const GroupElement& b) { return product(a, b); })
      .def("__repr__", [](const GroupElement& g) {
        std::ostringstream s;
        s << "GroupElement(" << to_string(g.tag()) << ", x=(" << g.x()[0] << ", " << g.x()[1]
          << "), theta=" << g.theta() << ", scale=" << g.scale() << ")";
        return s.str();
      });

  py::class_<SubgroupGrid>(m, "SubgroupGrid")
      .def("__len__", &SubgroupGrid::size)
      .def("__getitem__", [](const SubgroupGrid& g, std::size_t i) {
        if (i >= g.size()) throw py::index_error();
        return g[i];
      })
      .def_property_readonly("elements", &SubgroupGrid::elements)
      .def_property_readonly("n_scales", &SubgroupGrid::n_scales)
      .def_property_readonly("n_rotations", &SubgroupGrid::n_rotations);
  m.def("uniform_grid",
        [](const std::string& g, std::size_t n_scales, std::size_t n_rotations,
           std::optional<double> truncation) {
          return uniform_grid(parse_group_tag(g), n_scales, n_rotations, truncation);
        },
        py::arg("group"), py::arg("n_scales"), py::arg("n_rotations"),
        py::arg("truncation") = py::none());
  m.def("random_perturb",
        [](const SubgroupGrid& grid, std::uint64_t seed, bool allow_noncompact) {
          std::mt19937_64 rng(seed);
          return random_perturb(grid, rng, PerturbOptions{allow_noncompact});
        },
        py::arg("grid"), py::arg("seed"), py::arg("allow_noncompact") = false);

  // Data.
  m.def("load_mnist",
        [](const std::string& images, const std::string& labels) {
          const Dataset d = load_mnist(images, labels);
          return py::make_tuple(to_array(d.images), d.labels);
        },
        py::arg("images_path"), py::arg("labels_path"));
  m.def("rotate_image",
        [](const Array& plane, double theta) {
          if (plane.ndim() != 2 || plane.shape(0) != plane.shape(1)) {
            throw std::invalid_argument("rotate_image expects a square 2-D array");
          }
          const auto n = static_cast<std::size_t>(plane.shape(0));
          return to_array(Tensor({n, n}, rotate_image({plane.data(), n * n}, n, theta)));
        },
        py::arg("plane"), py::arg("theta"));
  m.def("oriented_bars",
        [](std::size_t n, std::uint64_t seed, std::size_t size) {
          const Dataset d = synth_oriented_bars(n, seed, size);
          return py::make_tuple(to_array(d.images), d.labels);
        },
        py::arg("n"), py::arg("seed") = 0, py::arg("size") = 28);

  // Model.
  py::class_<Model>(m, "Model")
      .def(py::init([](const py::kwargs& settings) { return Model(from_settings(settings).model); }))
      .def("logits",
           [](Model& model, const Array& images) {
             NoGradGuard guard;
             return to_array(model.forward(to_tensor(images), false).value());
           },
           py::arg("images"))
      .def("parameter_count", &Model::parameter_count)
      .def("settings", [](const Model& model) { return settings_dict(model_settings(model.config())); })
      .def("save", [](Model& model, const std::string& path) { save_checkpoint(path, model); },
           py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  m.def("train",
        [](Model& model, const Array& images, const std::vector<int>& labels,
           std::optional<Array> eval_images, std::optional<std::vector<int>> eval_labels,
           const py::kwargs& settings) {
          const TrainConfig cfg = from_settings(settings).train;
          const Dataset train_set = to_dataset(images, labels);
          std::optional<Dataset> eval_set;
          if (eval_images && eval_labels) eval_set = to_dataset(*eval_images, *eval_labels);
          py::list history;
          for (const EpochMetrics& e : train(model, cfg, train_set, eval_set ? &*eval_set : nullptr)) {
            py::dict d;
            d["epoch"] = e.epoch;
            d["train_loss"] = e.train_loss;
            d["train_accuracy"] = e.train_accuracy;
            d["eval_accuracy"] = e.eval_accuracy;
            d["seconds"] = e.seconds;
            history.append(d);
          }
          return history;
        },
        py::arg("model"), py::arg("images"), py::arg("labels"),
        py::arg("eval_images") = py::none(), py::arg("eval_labels") = py::none());
  m.def("evaluate",
        [](Model& model, const Array& images, const std::vector<int>& labels) {
          return evaluate(model, to_dataset(images, labels));
        },
        py::arg("model"), py::arg("images"), py::arg("labels"));

  // Analysis.
  m.def("pca_redundancy",
        [](const Array& stack, bool center_across_h) {
          return pca_redundancy(to_tensor(stack),
                                center_across_h ? PcaCentering::kAcrossH : PcaCentering::kNone);
        },
        py::arg("stack"), py::arg("center_across_h") = false);
  m.def("layerwise_equivariance",
        [](Model& model, const Array& images, double theta) {
          py::dict out;
          for (const LayerError& e : layerwise_equivariance(model, to_tensor(images), theta)) {
            out[py::str(e.layer)] = e.error;
          }
          return out;
        },
        py::arg("model"), py::arg("images"), py::arg("theta"));
  m.def("flop_estimate",
        [](const std::string& factorization, std::size_t n_h, std::size_t k, std::size_t c_in,
           std::size_t c_out, std::size_t height, std::size_t width, std::size_t batch,
           std::size_t n_scales, bool lifting) {
          CostConfig c;
          c.factorization = parse_factorization(factorization);
          c.n_h = n_h;
          c.k = k;
          c.c_in = c_in;
          c.c_out = c_out;
          c.height = height;
          c.width = width;
          c.batch = batch;
          c.n_scales = n_scales;
          c.lifting = lifting;
          return flop_estimate(c).macs;
        },
        py::arg("factorization"), py::arg("n_h"), py::arg("k") = 5, py::arg("c_in") = 1,
        py::arg("c_out") = 1, py::arg("height") = 1, py::arg("width") = 1, py::arg("batch") = 1,
        py::arg("n_scales") = 1, py::arg("lifting") = false);

  m.def("selftest", [](std::uint64_t seed) {
    py::list out;
    out.append(check_dict(check_group_axioms(200, seed)));
    out.append(check_dict(check_factorization_equivalence(10, seed)));
    out.append(check_dict(check_c4_equivariance(3, seed)));
    out.append(check_dict(check_gradients(seed)));
    return out;
  }, py::arg("seed") = 0);
}
