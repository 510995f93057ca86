#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <stdexcept>
#include <string>

#include "pcreg/checkpoint.hpp"
#include "pcreg/cloud_ops.hpp"
#include "pcreg/config.hpp"
#include "pcreg/diagnostics.hpp"
#include "pcreg/encoder.hpp"
#include "pcreg/evaluation.hpp"
#include "pcreg/icp.hpp"
#include "pcreg/io.hpp"
#include "pcreg/losses.hpp"
#include "pcreg/registration.hpp"
#include "pcreg/se3.hpp"
#include "pcreg/synth.hpp"
#include "pcreg/training.hpp"

namespace py = pybind11;
using namespace pcreg;

namespace {

PointCloud to_cloud(const PointMatrix& p) {
  if (p.rows() == 0) throw std::invalid_argument("point array is empty");
  return PointCloud(p);
}

py::dict result_dict(const RegistrationResult& r) {
  py::list residuals;
  for (const auto& it : r.trace) residuals.append(it.residual);
  py::dict d;
  d["transform"] = r.transform.matrix();
  d["iterations"] = r.iterations_used;
  d["converged"] = r.converged;
  d["residuals"] = residuals;
  return d;
}

// Weights are loaded as float and widened to double for inference, the same
// default the command-line tool uses.
struct PyModel {
  Model<double> model;
  std::string path;
};

RegistrationResult run_learned(const PyModel& m, const PointMatrix& source, const PointMatrix& templ,
                               const std::string& method, int max_iterations, double epsilon) {
  RegistrationConfig cfg;
  cfg.max_iterations = max_iterations;
  cfg.epsilon = epsilon;
  if (method == "pcrnet") {
    cfg.head = HeadKind::fc_pcrnet;
    cfg.max_iterations = 1;
  } else if (method == "lk") {
    cfg.head = HeadKind::lk;
  } else if (method != "ipcrnet") {
    throw std::invalid_argument("method must be pcrnet, ipcrnet or lk");
  }
  if (cfg.head == HeadKind::lk) {
    LkAligner aligner(feature_function(m.model));
    return register_iterative(to_cloud(source), to_cloud(templ), aligner, cfg);
  }
  FcAligner<double> aligner(m.model);
  return register_iterative(to_cloud(source), to_cloud(templ), aligner, cfg);
}

}  // namespace

PYBIND11_MODULE(_pcreg, m) {
  m.doc() = "Correspondence-free point cloud registration: PointNet encoder, PCRNet / i-PCRNet, PointNetLK, ICP";

  // SE(3)
  m.def("se3_exp", [](const Twist& xi) { return se3_exp(xi).matrix(); }, py::arg("xi"),
        "Twist (omega, v) to a 4x4 transform.");
  m.def("se3_log", [](const Mat4& t) { return se3_log(Transform::from_matrix(t)); }, py::arg("transform"));
  m.def("compose", [](const Mat4& a, const Mat4& b) {
    return compose(Transform::from_matrix(a), Transform::from_matrix(b)).matrix();
  });
  m.def("inverse", [](const Mat4& t) { return inverse(Transform::from_matrix(t)).matrix(); });
  m.def("euler_to_transform", [](const Vec3& deg, const Vec3& t) { return euler_to_transform(deg, t).matrix(); },
        py::arg("angles_deg"), py::arg("translation"), "Intrinsic Z-Y-X angles in degrees.");
  m.def("apply", [](const Mat4& t, const PointMatrix& p) {
    return apply(Transform::from_matrix(t), to_cloud(p)).points();
  });
  m.def("rotation_error", [](const Mat4& pred, const Mat4& gt) {
    return rotation_error(Transform::from_matrix(pred), Transform::from_matrix(gt));
  }, "Degrees.");
  m.def("translation_error", [](const Mat4& pred, const Mat4& gt) {
    return translation_error(Transform::from_matrix(pred), Transform::from_matrix(gt));
  });

  // Clouds
  m.def("synth_shape", [](const std::string& shape, std::size_t n, std::uint64_t seed, bool normalize) {
    PointCloud c = synth_shape(parse_shape_kind(shape), {}, n, seed);
    return (normalize ? normalize_unit_box(c) : c).points();
  }, py::arg("shape"), py::arg("n") = 1024, py::arg("seed") = 1, py::arg("normalize") = true);
  m.def("load_cloud", [](const std::string& path) { return load_cloud(path).points(); });
  m.def("save_cloud", [](const std::string& path, const PointMatrix& p) { save_cloud(path, to_cloud(p)); });
  m.def("farthest_point_sample", [](const PointMatrix& p, std::size_t n, std::uint64_t seed) {
    return farthest_point_sample(to_cloud(p), n, seed).points();
  }, py::arg("points"), py::arg("n"), py::arg("seed") = 1);
  m.def("add_gaussian_noise", [](const PointMatrix& p, double sigma, std::uint64_t seed) {
    return add_gaussian_noise(to_cloud(p), sigma, seed).points();
  }, py::arg("points"), py::arg("sigma"), py::arg("seed") = 1);

  // Losses
  m.def("chamfer", [](const PointMatrix& x, const PointMatrix& y) { return chamfer(to_cloud(x), to_cloud(y)).value; });
  m.def("emd", [](const PointMatrix& x, const PointMatrix& y) { return emd(to_cloud(x), to_cloud(y)).value; });

  // Registration
  m.def("icp", [](const PointMatrix& source, const PointMatrix& templ, int max_iterations) {
    IcpConfig cfg;
    cfg.max_iterations = max_iterations;
    return result_dict(icp(to_cloud(source), to_cloud(templ), cfg));
  }, py::arg("source"), py::arg("template"), py::arg("max_iterations") = 100,
        "Returns dict(transform, iterations, converged, residuals); transform maps source onto template.");

  py::class_<PyModel>(m, "Model")
      .def_static("load", [](const std::string& path) {
        return PyModel{load_checkpoint<float>(path).cast<double>(), path};
      }, py::arg("path"))
      .def_property_readonly("head", [](const PyModel& pm) { return std::string(to_string(pm.model.config.head)); })
      .def("encode", [](const PyModel& pm, const PointMatrix& p) { return encode(pm.model, to_cloud(p)); },
           "Global feature vector.")
      .def("register", [](const PyModel& pm, const PointMatrix& source, const PointMatrix& templ,
                          const std::string& method, int max_iterations, double epsilon) {
        return result_dict(run_learned(pm, source, templ, method, max_iterations, epsilon));
      }, py::arg("source"), py::arg("template"), py::arg("method") = "ipcrnet", py::arg("max_iterations") = 20,
           py::arg("epsilon") = 1e-7);

  // Training and evaluation
  m.def("train", [](const std::string& config_text, const std::string& out_dir) {
    const RunConfig cfg = RunConfig::parse(config_text);
    DatasetSpec spec;
    cfg.apply(spec);
    spec.templates = cfg.load_templates();
    TrainConfig tc;
    cfg.apply(tc);
    Model<float> model;
    TrainOutputs outputs;
    outputs.directory = out_dir;
    TrainReport report;
    {
      py::gil_scoped_release release;
      report = train(spec, tc, model, outputs);
    }
    py::list losses;
    for (const auto& e : report.epochs) losses.append(e.loss);
    py::dict d;
    d["steps"] = report.steps;
    d["epoch_losses"] = losses;
    d["wall_time_s"] = report.wall_time_s;
    return d;
  }, py::arg("config"), py::arg("out_dir"),
        "Train from `key = value` config text; writes losses.csv and model.ckpt to out_dir.");
  m.def("auc", [](const std::vector<double>& rotation_errors) { return auc(success_curve(rotation_errors)); },
        "Area under the success-ratio curve over 0..180 degrees, normalized to [0, 1].");
  m.def("grad_check", [](const std::string& scope, double tolerance, std::uint64_t seed, int points) {
    const auto r = run_grad_check(parse_grad_check_scope(scope), tolerance, seed, points);
    return py::make_tuple(r.pass, r.max_rel_error);
  }, py::arg("scope") = "full", py::arg("tolerance") = 1e-3, py::arg("seed") = 1, py::arg("points") = 16);
}
