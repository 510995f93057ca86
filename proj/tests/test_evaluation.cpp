#include <doctest.h>

#include <sstream>

#include "pcreg/cloud_ops.hpp"
#include "pcreg/evaluation.hpp"
#include "pcreg/synth.hpp"
#include "test_util.hpp"

using namespace pcreg;
using namespace pcreg::testing;

namespace {

Method fixed_method(const std::string& name, const Transform& offset, int iters = 1) {
  return {name, [offset, iters](const PointCloud&, const PointCloud&) {
            RegistrationResult r;
            r.transform = offset;
            r.iterations_used = iters;
            return r;
          }};
}

std::vector<BenchmarkPair> unrotated_pairs(std::size_t n) {
  const PointCloud t = normalize_unit_box(synth_shape(ShapeKind::l_bracket, {}, 64, 1));
  std::vector<BenchmarkPair> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({i, t, t, Transform::identity()});
  return out;
}

}  // namespace

TEST_CASE("success curve examples and counting oracle") {
  const auto th = default_thresholds();
  REQUIRE(th.size() == 361);
  CHECK(th.front() == 0.0);
  CHECK(th.back() == 180.0);
  CHECK(th[1] == 0.5);

  const SuccessCurve zero = success_curve(std::vector<double>(10, 0.0));
  for (double r : zero.ratios) CHECK(r == 1.0);
  CHECK(success_curve(std::vector<double>{10, 30}, {20}).ratios[0] == 0.5);
  CHECK(success_curve(std::vector<double>{10, 30}, {10}).ratios[0] == 0.5);
  CHECK_THROWS(success_curve(std::vector<double>{}));

  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(0, 180);
  std::vector<double> errs(500);
  for (double& e : errs) e = std::round(u(rng) * 2) / 2;  // land on grid points too
  const SuccessCurve c = success_curve(errs);
  for (std::size_t k = 0; k < th.size(); ++k) {
    std::size_t count = 0;
    for (double e : errs) count += e <= th[k];
    CHECK(c.ratios[k] == static_cast<double>(count) / 500.0);
    if (k) CHECK(c.ratios[k] >= c.ratios[k - 1]);
  }
  CHECK(c.ratios.back() == 1.0);
}

TEST_CASE("auc examples") {
  CHECK(auc(success_curve(std::vector<double>(5, 0.0))) == 1.0);
  CHECK(auc(success_curve(std::vector<double>(5, 180.0))) == doctest::Approx(0.5 / 180 / 2).epsilon(1e-12));
  // A curve that is zero everywhere.
  SuccessCurve none{default_thresholds(), std::vector<double>(361, 0.0)};
  CHECK(auc(none) == 0.0);
  // Step at 90 degrees: 0.5 up to the trapezoid over the step cell.
  const double a90 = auc(success_curve(std::vector<double>(7, 90.0)));
  CHECK(std::abs(a90 - 0.5) < 0.003);
  CHECK(a90 == doctest::Approx((90.0 + 0.25) / 180.0));
  // Uniform errors: about 0.5.
  std::vector<double> uni;
  for (int i = 0; i < 3600; ++i) uni.push_back((i + 0.5) * 180.0 / 3600);
  CHECK(std::abs(auc(success_curve(uni)) - 0.5) < 0.01);

  // Dominating curves have larger AUC; values stay in [0, 1].
  std::mt19937_64 rng(72);
  std::uniform_real_distribution<double> u(0, 180);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> e(50), better(50);
    for (std::size_t i = 0; i < 50; ++i) {
      e[i] = u(rng);
      better[i] = e[i] * 0.5;
    }
    const double a = auc(success_curve(e)), b = auc(success_curve(better));
    CHECK(b >= a);
    CHECK(a >= 0);
    CHECK(b <= 1);
  }
  CHECK_THROWS(auc(SuccessCurve{{0, 90}, {0, 1}}));
  CHECK_THROWS(auc(SuccessCurve{{10, 180}, {0, 1}}));
}

TEST_CASE("benchmark with stub methods") {
  const auto pairs = unrotated_pairs(12);
  const Transform five(Rotation::about_axis(Vec3(0, 0, 1), 5.0 * kPi / 180), Vec3::Zero());
  const auto recs = benchmark({fixed_method("id", Transform::identity()), fixed_method("five", five, 3)}, pairs);
  REQUIRE(recs.size() == 24);
  CHECK(recs[0].method == "id");
  CHECK(recs[12].method == "five");
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(recs[i].pair_id == i);
    CHECK(recs[12 + i].pair_id == i);
  }
  const auto sm = summarize(recs);
  REQUIRE(sm.size() == 2);
  CHECK(sm[0].rot_mean == 0.0);
  CHECK(sm[0].auc == 1.0);
  CHECK(std::abs(sm[1].rot_mean - 5.0) < 1e-6);
  CHECK(sm[1].rot_std < 1e-6);
  CHECK(sm[1].trans_mean == 0.0);
  CHECK(sm[1].median_iterations == 3.0);
  CHECK(sm[1].failures == 0);
}

TEST_CASE("benchmark charges failures") {
  const auto pairs = unrotated_pairs(4);
  Method boom{"boom", [](const PointCloud&, const PointCloud&) -> RegistrationResult {
                throw std::runtime_error("no");
              }};
  const auto recs = benchmark({boom}, pairs);
  for (const auto& r : recs) {
    CHECK(r.failed);
    CHECK(r.rotation_error == kFailureRotationError);
    CHECK(r.translation_error == kFailureTranslationError);
  }
  const auto sm = summarize(recs);
  CHECK(sm[0].failures == 4);
  CHECK(sm[0].auc < 0.01);
}

TEST_CASE("summary statistics are population statistics") {
  std::vector<EvalRecord> recs;
  const double rot[4] = {1, 2, 3, 10}, tr[4] = {0.1, 0.2, 0.3, 0.4};
  const int it[4] = {1, 5, 2, 9};
  for (int i = 0; i < 4; ++i) recs.push_back({"m", static_cast<std::size_t>(i), rot[i], tr[i], it[i], 0.001 * (i + 1), false});
  const auto s = summarize(recs)[0];
  CHECK(s.rot_mean == doctest::Approx(4.0));
  CHECK(s.rot_std == doctest::Approx(std::sqrt((9 + 4 + 1 + 36) / 4.0)));
  CHECK(s.trans_mean == doctest::Approx(0.25));
  CHECK(s.time_mean_ms == doctest::Approx(2.5));
  CHECK(s.median_iterations == 3.5);
}

TEST_CASE("csv output") {
  std::vector<EvalRecord> recs{{"icp", 0, 1.5, 0.25, 7, 0.002, false}, {"icp", 1, 180, kFailureTranslationError, 0, 0.001, true}};
  std::ostringstream os;
  write_records_csv(os, recs);
  const std::string text = os.str();
  CHECK(text.rfind("method,pair_id,rot_err_deg,trans_err,iters,time_ms\n", 0) == 0);
  CHECK(text.find("icp,0,1.5,0.25,7,2") != std::string::npos);

  std::ostringstream ss;
  write_summary_csv(ss, summarize(recs));
  CHECK(ss.str().find("icp") != std::string::npos);
  CHECK(format_summary_table(summarize(recs)).find("icp") != std::string::npos);
}

TEST_CASE("icp method through the harness") {
  const PointCloud t = normalize_unit_box(synth_shape(ShapeKind::l_bracket, {}, 200, 3));
  const Transform gt = euler_to_transform(Vec3(5, -5, 8), Vec3(0.05, 0.02, -0.03));
  const std::vector<BenchmarkPair> pairs{{0, apply(gt, t), t, inverse(gt)}};
  const auto recs = benchmark({make_method<float>("icp", nullptr)}, pairs);
  CHECK(recs[0].rotation_error < 0.1);
  CHECK(recs[0].iterations >= 1);
  CHECK(recs[0].wall_time_s > 0);
  CHECK_THROWS(make_method<float>("pcrnet", nullptr));
  CHECK_THROWS(make_method<float>("nope", nullptr));
}
