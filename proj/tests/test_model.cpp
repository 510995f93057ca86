#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "pcreg/checkpoint.hpp"
#include "pcreg/diagnostics.hpp"
#include "pcreg/encoder.hpp"
#include "pcreg/errors.hpp"
#include "pcreg/fc_head.hpp"
#include "pcreg/model.hpp"
#include "test_util.hpp"

using namespace pcreg;
using namespace pcreg::testing;

namespace {

ModelConfig small_config(HeadVariant head = HeadVariant::pcrnet) {
  ModelConfig c;
  c.encoder_widths = {8, 8, 8, 12, 16};
  c.head = head;
  return c;
}

PointCloud permuted(const PointCloud& c, std::mt19937_64& rng) {
  std::vector<Eigen::Index> idx(c.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  PointMatrix p(c.points().rows(), 3);
  for (std::size_t i = 0; i < idx.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = c.points().row(idx[i]);
  return PointCloud(p);
}

}  // namespace

TEST_CASE("default model layer shapes") {
  const Model<float> m = make_model<float>(ModelConfig{}, 1);
  const int enc[6] = {3, 64, 64, 64, 128, 1024};
  for (int l = 0; l < 5; ++l) {
    const auto& w = m.params.at("encoder.mlp" + std::to_string(l) + ".weight").value;
    CHECK(w.rows() == enc[l + 1]);
    CHECK(w.cols() == enc[l]);
    CHECK(m.params.at("encoder.mlp" + std::to_string(l) + ".bias").value.cols() == enc[l + 1]);
  }
  // i-PCRNet: 2048 -> 1024 -> 512 -> 256 -> 7
  const int head[5] = {2048, 1024, 512, 256, 7};
  for (int l = 0; l < 3; ++l) {
    const auto& w = m.params.at("head.fc" + std::to_string(l) + ".weight").value;
    CHECK(w.rows() == head[l + 1]);
    CHECK(w.cols() == head[l]);
  }
  CHECK(m.params.at("head.out.weight").value.rows() == 7);
  CHECK(m.params.at("head.out.weight").value.cols() == 256);
  CHECK_FALSE(m.params.contains("head.fc3.weight"));

  ModelConfig pc;
  pc.head = HeadVariant::pcrnet;
  const Model<float> p = make_model<float>(pc, 1);
  const int widths[6] = {2048, 1024, 1024, 512, 512, 256};
  for (int l = 0; l < 5; ++l) {
    const auto& w = p.params.at("head.fc" + std::to_string(l) + ".weight").value;
    CHECK(w.rows() == widths[l + 1]);
    CHECK(w.cols() == widths[l]);
  }
  // Glorot limits.
  const auto& w0 = m.params.at("encoder.mlp0.weight").value;
  CHECK(w0.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 67.0));
}

TEST_CASE("encoder permutation invariance is exact") {
  std::mt19937_64 rng(51);
  const Model<float> mf = make_model<float>(ModelConfig{}, 2);
  const Model<double> md = make_model<double>(small_config(), 3);
  for (int c = 0; c < 3; ++c) {
    const PointCloud cloud = random_cloud(rng, 150 + 37 * c);
    const GlobalFeature ff = encode<float>(mf, cloud);
    const GlobalFeature fd = encode<double>(md, cloud);
    for (int p = 0; p < 10; ++p) {
      const PointCloud q = permuted(cloud, rng);
      CHECK(encode<float>(mf, q) == ff);
      CHECK(encode<double>(md, q) == fd);
    }
  }
}

TEST_CASE("encoder examples") {
  std::mt19937_64 rng(52);
  const PointCloud cloud = random_cloud(rng, 40);
  Model<double> zero = make_model<double>(small_config(), 4);
  for (std::size_t i = 0; i < zero.params.size(); ++i) zero.params[i].value.setZero();
  CHECK(encode<double>(zero, cloud).cwiseAbs().maxCoeff() == 0.0);

  const Model<double> m = make_model<double>(small_config(), 5);
  const GlobalFeature f = encode<double>(m, cloud);
  CHECK(f.minCoeff() >= 0.0);
  CHECK(f.size() == 16);

  // Duplicating points leaves the feature unchanged.
  PointMatrix dup(cloud.size() + 4, 3);
  dup.topRows(40) = cloud.points();
  dup.bottomRows(4) = cloud.points().topRows(4);
  CHECK(encode<double>(m, PointCloud(dup)) == f);

  // Removing points never increases a coordinate.
  const GlobalFeature sub = encode<double>(m, PointCloud(PointMatrix(cloud.points().topRows(25))));
  CHECK((sub.array() <= f.array()).all());

  const auto [a, b] = encode_siamese<double>(m, cloud, cloud);
  CHECK(a == b);
  CHECK(a == f);

  // Taped encoder matches the inference path.
  Model<double> mm = m;
  ad::Tape<double> tape;
  const ad::Var v = encode(tape, mm, tape.constant(ad::Tensor<double>(cloud.points())));
  CHECK((tape.value(v).transpose() - f).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, f.maxCoeff()));
}

TEST_CASE("encode_batch equals per-cloud encoding") {
  std::mt19937_64 rng(53);
  Model<double> m = make_model<double>(small_config(), 6);
  const PointCloud a = random_cloud(rng, 70), b = random_cloud(rng, 5), c = random_cloud(rng, 130);
  ad::Tensor<double> stack(205, 3);
  stack << a.points(), b.points(), c.points();
  ad::Tape<double> tape;
  const ad::Var f = encode_batch(tape, m, tape.constant(stack), {0, 70, 75, 205});
  const auto& rows = tape.value(f);
  REQUIRE(rows.rows() == 3);
  CHECK((rows.row(0).transpose() - encode<double>(m, a)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((rows.row(1).transpose() - encode<double>(m, b)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((rows.row(2).transpose() - encode<double>(m, c)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("siamese gradient is the sum of per-branch gradients") {
  std::mt19937_64 rng(54);
  const PointCloud s = random_cloud(rng, 20), t = random_cloud(rng, 20);
  Model<double> m = make_model<double>(small_config(), 7);
  const ad::Tensor<double> probe = ad::Tensor<double>::Random(16, 1);

  auto grads = [&](int which) {
    m.params.zero_grad();
    ad::Tape<double> tape;
    const ad::Var fs = encode(tape, m, tape.constant(ad::Tensor<double>(s.points())));
    const ad::Var ft = encode(tape, m, tape.constant(ad::Tensor<double>(t.points())));
    const ad::Var ls = ad::matmul(tape, fs, tape.constant(probe));
    const ad::Var lt = ad::scale(tape, ad::matmul(tape, ft, tape.constant(probe)), -1.0);
    tape.backward(which == 0 ? ls : which == 1 ? lt : ad::add(tape, ls, lt));
    std::vector<ad::Tensor<double>> out;
    for (std::size_t i = 0; i < m.params.size(); ++i) out.push_back(m.params[i].grad);
    return out;
  };
  const auto gs = grads(0), gt = grads(1), both = grads(2);
  for (std::size_t i = 0; i < both.size(); ++i) CHECK((both[i] - gs[i] - gt[i]).cwiseAbs().maxCoeff() < 1e-12);

  // Finite-difference check of the feature-difference loss.
  const auto rep = run_grad_check(GradCheckScope::encoder, 1e-3, 8, 12);
  CHECK(rep.pass);
}

TEST_CASE("fc head examples") {
  std::mt19937_64 rng(55);
  Model<double> m = make_model<double>(small_config(HeadVariant::ipcrnet), 8);
  const FeatureRow<double> fs = FeatureRow<double>::Random(16).cwiseAbs(), ft = FeatureRow<double>::Random(16).cwiseAbs();

  // Freshly built heads output the identity pose.
  CHECK((pose_to_transform(fc_head_forward(m, fs, ft)).matrix() - Mat4::Identity()).cwiseAbs().maxCoeff() == 0.0);

  m.params.at("head.out.bias").value.setZero();
  const PoseVector zero = fc_head_forward(m, fs, ft);
  CHECK(zero.values.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(pose_to_transform(zero), DegeneratePose);

  // Taped and inference heads agree; eval mode is deterministic.
  m = make_model<double>(small_config(HeadVariant::ipcrnet), 9);
  m.params.at("head.out.weight").value.setRandom();
  const PoseVector p = fc_head_forward(m, fs, ft);
  CHECK(fc_head_forward(m, fs, ft).values == p.values);
  ad::Tape<double> tape;
  const ad::Var out = fc_head_forward(tape, m, tape.constant(ad::Tensor<double>(fs)), tape.constant(ad::Tensor<double>(ft)), false);
  CHECK((tape.value(out).row(0).transpose() - p.values).cwiseAbs().maxCoeff() < 1e-12);
  // Training mode differs through dropout (i-PCRNet only).
  const ad::Var drop = fc_head_forward(tape, m, tape.constant(ad::Tensor<double>(fs)), tape.constant(ad::Tensor<double>(ft)), true, 3);
  CHECK(tape.value(drop) != tape.value(out));
  Model<double> pc = make_model<double>(small_config(HeadVariant::pcrnet), 9);
  pc.params.at("head.out.weight").value.setRandom();
  ad::Tape<double> t2;
  const auto a = t2.value(fc_head_forward(t2, pc, t2.constant(ad::Tensor<double>(fs)), t2.constant(ad::Tensor<double>(ft)), true, 3));
  const auto b = t2.value(fc_head_forward(t2, pc, t2.constant(ad::Tensor<double>(fs)), t2.constant(ad::Tensor<double>(ft)), false));
  CHECK(a == b);
}

TEST_CASE("full pipeline gradient check") {
  const auto rep = run_grad_check(GradCheckScope::full, 1e-3, 11, 8);
  CHECK(rep.pass);
  CHECK(rep.max_rel_error < 1e-3);
  const auto lin = run_grad_check(GradCheckScope::linear, 1e-6, 11, 8);
  CHECK(lin.pass);
}

TEST_CASE("checkpoint round trip") {
  const Model<float> m = make_model<float>(small_config(HeadVariant::ipcrnet), 12);
  const std::string bytes = serialize_checkpoint(m);
  const Model<float> back = parse_checkpoint<float>(bytes);
  CHECK(serialize_checkpoint(back) == bytes);
  CHECK(back.config.head == HeadVariant::ipcrnet);
  CHECK(back.config.encoder_widths == m.config.encoder_widths);
  REQUIRE(back.params.size() == m.params.size());
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    CHECK(back.params[i].name == m.params[i].name);
    CHECK(back.params[i].value == m.params[i].value);
  }
  const Model<double> widened = parse_checkpoint<double>(bytes);
  CHECK(widened.params[0].value == m.params[0].value.cast<double>());

  CHECK_THROWS_AS(parse_checkpoint<float>("garbage\n"), ParseError);
  CHECK_THROWS_AS(parse_checkpoint<float>(bytes.substr(0, bytes.size() - 5)), ParseError);
  std::string wrong_version = bytes;
  wrong_version.replace(wrong_version.find(" 1\n"), 3, " 9\n");
  CHECK_THROWS_AS(parse_checkpoint<float>(wrong_version), ParseError);
}
