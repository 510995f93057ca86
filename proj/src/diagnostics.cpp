#include "pcreg/diagnostics.hpp"

#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>

#include "pcreg/encoder.hpp"
#include "pcreg/fc_head.hpp"
#include "pcreg/losses.hpp"
#include "pcreg/model.hpp"

namespace pcreg {

GradCheckScope parse_grad_check_scope(const std::string& s) {
  if (s == "linear") return GradCheckScope::linear;
  if (s == "encoder") return GradCheckScope::encoder;
  if (s == "full") return GradCheckScope::full;
  throw std::invalid_argument("unknown grad-check scope '" + s + "' (expected linear, encoder or full)");
}

namespace {

using Mat = ad::Tensor<double>;

Mat random_matrix(Eigen::Index r, Eigen::Index c, double scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

}  // namespace

ad::GradCheckReport run_grad_check(GradCheckScope scope, double tolerance, std::uint64_t seed, int points) {
  if (points < 1) throw std::invalid_argument("grad-check: points must be >= 1");
  std::mt19937_64 rng(seed);
  ad::GradCheckOptions opts;
  opts.tolerance = tolerance;
  opts.seed = seed;

  if (scope == GradCheckScope::linear) {
    ad::ParamStore<double> params;
    params.add("w", random_matrix(5, 4, 1.0, rng));
    params.add("b", random_matrix(1, 5, 1.0, rng));
    const Mat x = random_matrix(points, 4, 1.0, rng);
    return ad::grad_check(
        [&](ad::Tape<double>& t) {
          const ad::Var y = ad::linear(t, t.constant(x), t.parameter(params.at("w")), t.parameter(params.at("b")));
          return ad::sum(t, y);
        },
        params, opts);
  }

  ModelConfig cfg;
  cfg.head = HeadVariant::pcrnet;
  Model<double> model = make_model<double>(cfg, seed);
  // Small random output layer around the identity pose.
  auto& w_out = model.params.at("head.out.weight").value;
  w_out = random_matrix(w_out.rows(), w_out.cols(), 0.05, rng);
  model.params.at("head.out.bias").value += random_matrix(1, 7, 0.05, rng);

  const Mat source = random_matrix(points, 3, 0.5, rng);
  const Mat templ = random_matrix(points, 3, 0.5, rng);

  if (scope == GradCheckScope::encoder) {
    const Mat probe = random_matrix(1, cfg.feature_width(), 1.0, rng);
    return ad::grad_check(
        [&](ad::Tape<double>& t) {
          const ad::Var f = encode(t, model, t.constant(source));
          const ad::Var p = t.constant(probe.transpose());
          return ad::matmul(t, f, p);
        },
        model.params, opts);
  }

  return ad::grad_check(
      [&](ad::Tape<double>& t) {
        const ad::Var s = t.constant(source);
        const ad::Var tc = t.constant(templ);
        const ad::Var fs = encode(t, model, s);
        const ad::Var ft = encode(t, model, tc);
        const ad::Var pose = fc_head_forward(t, model, fs, ft, false);
        const ad::Var moved = ad::transform_points(t, pose, s);
        return ad::chamfer(t, moved, tc);
      },
      model.params, opts);
}

std::string format_grad_check(const ad::GradCheckReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(22) << "parameter" << std::right << std::setw(9) << "checked" << std::setw(10)
     << "excluded" << std::setw(14) << "max rel err" << "  result\n";
  for (const auto& p : report.params) {
    os << std::left << std::setw(22) << p.name << std::right << std::setw(9) << p.checked << std::setw(10)
       << p.excluded << std::setw(14) << std::scientific << std::setprecision(3) << p.max_rel_error
       << std::defaultfloat << "  " << (p.pass ? "pass" : "FAIL") << '\n';
  }
  os << "overall: " << (report.pass ? "PASS" : "FAIL") << " (max rel err " << std::scientific
     << std::setprecision(3) << report.max_rel_error << ", " << report.excluded << " entries excluded at kinks)\n";
  return os.str();
}

}  // namespace pcreg
