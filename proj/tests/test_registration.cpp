#include <doctest.h>

#include <functional>

#include "pcreg/cloud_ops.hpp"
#include "pcreg/icp.hpp"
#include "pcreg/lk_head.hpp"
#include "pcreg/model.hpp"
#include "pcreg/registration.hpp"
#include "pcreg/synth.hpp"
#include "test_util.hpp"

using namespace pcreg;
using namespace pcreg::testing;

namespace {

// Returns a scripted increment per call.
class ScriptedAligner final : public Aligner {
 public:
  explicit ScriptedAligner(std::function<Transform(int)> f) : f_(std::move(f)) {}
  void set_template(const PointCloud&) override { calls_ = 0; }
  AlignmentStep step(const PointCloud&) override { return {f_(calls_++), 0.0}; }

 private:
  std::function<Transform(int)> f_;
  int calls_ = 0;
};

// Feature map that is exactly linear in the twist relating a cloud to the
// template: phi(exp(-xi) P_T) = f0 + A xi. Points correspond by index.
FeatureFunction linear_stub(const PointCloud& templ, const Eigen::MatrixXd& a, const GlobalFeature& f0) {
  return [templ, a, f0](const PointCloud& c) -> GlobalFeature {
    const Transform t = best_fit_transform(templ.points(), c.points());
    return f0 - a * se3_log(t);
  };
}

// Smooth nonlinear features: centroid, second moments and mean cubes.
GlobalFeature moment_features(const PointCloud& c) {
  GlobalFeature f(12);
  const Vec3 mu = c.centroid();
  Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
  Vec3 cube = Vec3::Zero();
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Vec3 p = c.point(i);
    s += p * p.transpose();
    cube += p.cwiseProduct(p).cwiseProduct(p);
  }
  s /= static_cast<double>(c.size());
  cube /= static_cast<double>(c.size());
  f << mu, s(0, 0), s(1, 1), s(2, 2), s(0, 1), s(0, 2), s(1, 2), cube;
  return f;
}

PointCloud bracket(std::size_t n = 200) { return normalize_unit_box(synth_shape(ShapeKind::l_bracket, {}, n, 5)); }

}  // namespace

TEST_CASE("identity increments converge at iteration 2") {
  ScriptedAligner al([](int) { return Transform::identity(); });
  const PointCloud c = bracket();
  RegistrationConfig cfg;
  const RegistrationResult r = register_iterative(c, c, al, cfg);
  CHECK(r.converged);
  CHECK(r.iterations_used == 2);
  CHECK(r.transform.matrix() == Mat4::Identity());
}

TEST_CASE("composed transform matches replaying the increments") {
  std::mt19937_64 rng(61);
  std::vector<Transform> incs;
  for (int i = 0; i < 20; ++i) incs.push_back(random_transform(rng, 0.3, 0.2));
  ScriptedAligner al([&](int k) { return incs[static_cast<std::size_t>(k)]; });
  const PointCloud src = bracket();
  RegistrationConfig cfg;
  cfg.max_iterations = 12;
  const RegistrationResult r = register_iterative(src, src, al, cfg);
  CHECK(r.iterations_used == 12);
  CHECK_FALSE(r.converged);
  REQUIRE(r.trace.size() == 12);

  PointMatrix replay = src.points();
  Mat4 product = Mat4::Identity();
  for (int k = 0; k < 12; ++k) {
    replay = apply_matrix(incs[static_cast<std::size_t>(k)].matrix(), replay);
    product = incs[static_cast<std::size_t>(k)].matrix() * product;
    CHECK((r.trace[static_cast<std::size_t>(k)].cumulative.matrix() - product).cwiseAbs().maxCoeff() < 1e-9);
  }
  CHECK((apply(r.transform, src).points() - replay).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("convergence threshold and abort on non-finite increments") {
  // Geometrically shrinking increments stop once the deviation drops below epsilon.
  ScriptedAligner shrink([](int k) { return Transform::translation_only(Vec3(std::pow(0.1, k), 0, 0)); });
  const PointCloud c = bracket();
  RegistrationConfig cfg;
  cfg.epsilon = 1e-4;
  const RegistrationResult r = register_iterative(c, c, shrink, cfg);
  CHECK(r.converged);
  CHECK(r.iterations_used == 5);

  ScriptedAligner bad([](int k) {
    return k < 2 ? Transform::identity() : Transform::translation_only(Vec3(std::nan(""), 0, 0));
  });
  cfg.epsilon = 1e-300;
  cfg.max_iterations = 10;
  ScriptedAligner nudge([](int k) {
    return k < 2 ? Transform::translation_only(Vec3(0.1, 0, 0)) : Transform::translation_only(Vec3(std::nan(""), 0, 0));
  });
  try {
    register_iterative(c, c, nudge, cfg);
    FAIL("expected RegistrationAborted");
  } catch (const RegistrationAborted& e) {
    CHECK(e.partial().iterations_used == 2);
    CHECK(e.partial().trace.size() == 2);
  }
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(register_iterative(c, c, bad, cfg), std::invalid_argument);
}

TEST_CASE("fc aligner single pass on an untrained model is a valid transform") {
  ModelConfig mc;
  mc.encoder_widths = {16, 16, 16, 32, 64};
  mc.head = HeadVariant::pcrnet;
  Model<float> m = make_model<float>(mc, 3);
  std::mt19937_64 rng(62);
  std::normal_distribution<float> n(0.0f, 0.01f);
  auto& w = m.params.at("head.out.weight").value;
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n(rng);
  FcAligner<float> al(m);
  const PointCloud t = bracket();
  const Transform x = register_single_pass(apply(random_transform(rng, 0.5, 0.3), t), t, al);
  CHECK(x.matrix().allFinite());
  CHECK(std::abs(x.rotation().matrix().determinant() - 1.0) < 1e-6);

  // A source equal to the template gives a zero feature residual.
  al.set_template(t);
  CHECK(al.step(t).residual == 0.0);

  // Untouched output layer: identity in one pass, convergence at iteration 2.
  const Model<float> fresh = make_model<float>(mc, 4);
  FcAligner<float> id(fresh);
  CHECK(register_single_pass(t, t, id).matrix() == Mat4::Identity());
  const RegistrationResult r = register_iterative(t, t, id, RegistrationConfig{});
  CHECK(r.iterations_used == 2);
}

TEST_CASE("lk with an exactly linear feature map solves in one step") {
  std::mt19937_64 rng(63);
  std::uniform_real_distribution<double> u(-1, 1);
  const PointCloud templ = bracket(120);
  const Eigen::MatrixXd a = Eigen::MatrixXd::Random(32, 6);
  const GlobalFeature f0 = GlobalFeature::Random(32);
  for (int trial = 0; trial < 20; ++trial) {
    Twist xi;
    Vec3 w(u(rng), u(rng), u(rng));
    w *= 0.3 * std::abs(u(rng)) / w.norm();
    xi << w, 0.2 * u(rng), 0.2 * u(rng), 0.2 * u(rng);
    const PointCloud src = apply(se3_exp(-xi), templ);

    const FeatureFunction phi = linear_stub(templ, a, f0);
    const LkState st = lk_precompute(templ, phi);
    CHECK_FALSE(st.rank_deficient);
    CHECK(((st.pseudo_inverse * st.jacobian) - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((lk_solve(st, phi(src)) - xi).cwiseAbs().maxCoeff() < 1e-6);

    LkAligner al(phi);
    RegistrationConfig cfg;
    cfg.head = HeadKind::lk;
    const RegistrationResult r = register_iterative(src, templ, al, cfg);
    CHECK(r.iterations_used <= 2);
    CHECK(r.trace.front().residual > 0);
    CHECK(r.trace.back().residual < 1e-6);
    CHECK((r.transform.matrix() - se3_exp(xi).matrix()).cwiseAbs().maxCoeff() < 1e-6);
  }
  const LkState st = lk_precompute(templ, linear_stub(templ, a, f0));
  CHECK((lk_step(st, st.template_feature).matrix() - Mat4::Identity()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("lk jacobian: step halving, translation invariance, rank deficiency") {
  const PointCloud templ = bracket(150);
  const double h = 0.02;
  const Eigen::MatrixXd j1 = lk_precompute(templ, moment_features, h).jacobian;
  const Eigen::MatrixXd j2 = lk_precompute(templ, moment_features, h / 2).jacobian;
  const Eigen::MatrixXd j4 = lk_precompute(templ, moment_features, h / 4).jacobian;
  const double d12 = (j1 - j2).norm(), d24 = (j2 - j4).norm();
  // First-order truncation: differences halve with the step.
  CHECK(d12 > 0);
  CHECK(d12 / d24 == doctest::Approx(2.0).epsilon(0.1));
  CHECK(d12 < 10 * h * j1.norm());

  // A coordinate that ignores translation (the x variance) has zero
  // translation columns.
  auto spread = [](const PointCloud& c) {
    GlobalFeature f = moment_features(c);
    const Vec3 mu = c.centroid();
    double vx = 0;
    for (std::size_t i = 0; i < c.size(); ++i) vx += (c.point(i).x() - mu.x()) * (c.point(i).x() - mu.x());
    f(0) = vx / static_cast<double>(c.size());
    return f;
  };
  const LkState st = lk_precompute(templ, spread, h);
  CHECK(st.jacobian.row(0).tail<3>().cwiseAbs().maxCoeff() < 1e-10);
  CHECK(st.jacobian.row(0).head<3>().cwiseAbs().maxCoeff() > 1e-6);

  // Identical points at the origin: rotations leave them in place.
  const PointCloud flat(std::vector<Vec3>(10, Vec3::Zero()));
  const LkState deg = lk_precompute(flat, moment_features, h);
  CHECK(deg.rank_deficient);
  CHECK_FALSE(deg.warning.empty());
  CHECK(lk_solve(deg, moment_features(flat)).allFinite());
  CHECK_THROWS(lk_precompute(templ, moment_features, 0.0));
}
