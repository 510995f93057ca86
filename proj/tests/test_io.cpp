#include <doctest.h>

#include <filesystem>

#include "pcreg/cloud_ops.hpp"
#include "pcreg/config.hpp"
#include "pcreg/errors.hpp"
#include "pcreg/io.hpp"
#include "pcreg/losses.hpp"
#include "pcreg/synth.hpp"
#include "test_util.hpp"

using namespace pcreg;
using namespace pcreg::testing;

namespace {

const char* kTetra =
    "OFF\n"
    "# tetrahedron\n"
    "4 4 6\n"
    "0 0 0\n1 0 0\n0 1 0\n0 0 1\n"
    "3 0 1 2\n3 0 1 3\n3 0 2 3\n3 1 2 3\n";

const char* kTetraFused =
    "OFF4 4 6\n"
    "0 0 0\n1 0 0\n0 1 0\n0 0 1\n"
    "3 0 1 2\n3 0 1 3\n3 0 2 3\n3 1 2 3\n";

// All 24 proper rotations mapping the coordinate axes onto themselves.
std::vector<Mat3> cube_group() {
  std::vector<Mat3> out;
  const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& p : perms) {
    for (int signs = 0; signs < 8; ++signs) {
      Mat3 m = Mat3::Zero();
      for (int r = 0; r < 3; ++r) m(r, p[r]) = (signs >> r) & 1 ? -1.0 : 1.0;
      if (m.determinant() > 0) out.push_back(m);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("parse_off") {
  const Mesh m = parse_off(kTetra);
  CHECK(m.vertices.rows() == 4);
  CHECK(m.faces.size() == 4);
  const Mesh f = parse_off(kTetraFused);
  CHECK(f.vertices == m.vertices);
  CHECK(f.faces == m.faces);

  // Quads are fan-triangulated; degenerate triangles dropped.
  const Mesh q = parse_off("OFF\n5 2 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n2 0 0\n4 0 1 2 3\n3 0 1 4\n");
  CHECK(q.faces.size() == 2);

  try {
    parse_off("OFF\n4 4 6\n0 0 0\n1 0 0\n0 1 0\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() > 0);
    CHECK(std::string(e.what()).find("line") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_off("OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 9\n"), ParseError);
  CHECK_THROWS_AS(parse_off("PLY\n"), ParseError);
  CHECK_THROWS_AS(parse_off(""), ParseError);
  CHECK_THROWS_AS(parse_off("OFF\n1 0 0\n0 0 x\n"), ParseError);
}

TEST_CASE("xyz round trip") {
  std::mt19937_64 rng(81);
  const PointCloud c = random_cloud(rng, 100, 1e3);
  CHECK(read_xyz(write_xyz(c)).points() == c.points());
  CHECK(read_xyz("# header\n1 2 3\n\n4 5 6\n").size() == 2);
  CHECK_THROWS_AS(read_xyz(""), ParseError);
  try {
    read_xyz("1 2 3\n4 5\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(read_xyz("1 2 nan\n"), ParseError);
}

TEST_CASE("ply") {
  std::mt19937_64 rng(82);
  const PointCloud c = random_cloud(rng, 50);
  CHECK(read_ply_ascii(write_ply_ascii(c)).points() == c.points());

  const std::string extra =
      "ply\nformat ascii 1.0\ncomment made by hand\n"
      "element vertex 2\nproperty float x\nproperty float nx\nproperty float y\nproperty float z\nproperty uchar red\n"
      "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
      "1 9 2 3 255\n4 9 5 6 0\n3 0 1 1\n";
  std::vector<std::string> warnings;
  const PointCloud p = read_ply_ascii(extra, &warnings);
  REQUIRE(p.size() == 2);
  CHECK(p.point(1) == Vec3(4, 5, 6));
  CHECK(warnings.size() >= 2);

  CHECK_THROWS_AS(read_ply_ascii(""), ParseError);
  CHECK_THROWS_AS(read_ply_ascii("ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\nend_header\n"),
                  ParseError);
  CHECK_THROWS_AS(read_ply_ascii("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
                                 "property float z\nend_header\n1 2 3\n"),
                  ParseError);
}

TEST_CASE("files, extensions and transforms") {
  const auto dir = std::filesystem::temp_directory_path() / "pcreg_io_test";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(83);
  const PointCloud c = random_cloud(rng, 20);
  for (const char* name : {"a.xyz", "a.txt", "a.ply"}) {
    const std::string path = (dir / name).string();
    save_cloud(path, c);
    CHECK(load_cloud(path).points() == c.points());
  }
  CHECK_THROWS(save_cloud((dir / "a.obj").string(), c));
  CHECK_THROWS(load_cloud((dir / "missing.xyz").string()));
  const Transform t = random_transform(rng);
  save_transform((dir / "t.txt").string(), t);
  CHECK((load_transform((dir / "t.txt").string()).matrix() - t.matrix()).cwiseAbs().maxCoeff() < 1e-15);
  std::filesystem::remove_all(dir);
}

TEST_CASE("synthetic shapes") {
  for (const char* name : {"box", "cylinder", "plane-with-handle", "l-bracket"}) {
    const ShapeKind k = parse_shape_kind(name);
    CHECK(std::string(to_string(k)) == name);
    const Mesh m = synth_mesh(k);
    CHECK_NOTHROW(m.validate());
    for (std::size_t f = 0; f < m.faces.size(); ++f) CHECK(m.face_area(f) > 0);
    const PointCloud a = synth_shape(k, {}, 300, 4), b = synth_shape(k, {}, 300, 4);
    CHECK(a.points() == b.points());
    CHECK(synth_shape(k, {}, 300, 5).points() != a.points());
  }
  CHECK_THROWS(parse_shape_kind("sphere"));
  CHECK_THROWS(synth_mesh(ShapeKind::box, {{"sx", 0.0}}));
  CHECK_THROWS(synth_mesh(ShapeKind::box, {{"radius", 1.0}}));
  CHECK_THROWS(synth_shape(ShapeKind::box, {}, 0, 1));
}

TEST_CASE("box samples lie on the box surface") {
  const PointCloud c = synth_shape(ShapeKind::box, {{"sx", 1.0}, {"sy", 0.6}, {"sz", 0.3}}, 1000, 7);
  const Vec3 h(0.5, 0.3, 0.15);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Vec3 p = c.point(i);
    CHECK(((p.cwiseAbs() - h).array() <= 1e-9).all());
    CHECK((p.cwiseAbs() - h).cwiseAbs().minCoeff() < 1e-9);
  }
}

TEST_CASE("l-bracket has no rotational self-coincidence") {
  const PointCloud x = normalize_unit_box(synth_shape(ShapeKind::l_bracket, {}, 1000, 8));
  const auto group = cube_group();
  REQUIRE(group.size() == 24);
  int identity = 0;
  double min_other = 1e9;
  for (const Mat3& r : group) {
    const PointCloud rx = apply(Transform(Rotation::from_matrix(r), Vec3::Zero()), x);
    const double d = chamfer(rx, x).value;
    if ((r - Mat3::Identity()).norm() == 0) {
      ++identity;
      CHECK(d < 1e-12);
    } else {
      min_other = std::min(min_other, d);
    }
  }
  CHECK(identity == 1);
  CHECK(min_other > 0.01);
}

TEST_CASE("run configuration") {
  const RunConfig cfg = RunConfig::parse(
      "# comment\n"
      "loss = emd\n"
      "  batch_size=16\n"
      "epochs = 3\n"
      "learning_rate = 5e-4\n"
      "noise_sigma_max = 0.02\n"
      "max_iterations = 7\n"
      "icp_max_iterations = 50\n"
      "icp_correspondence = brute\n"
      "methods = icp, ipcrnet\n"
      "resample_each_epoch = false\n");
  TrainConfig t;
  cfg.apply(t);
  CHECK(t.loss == LossKind::emd);
  CHECK(t.batch_size == 16);
  CHECK(t.epochs == 3);
  CHECK(t.learning_rate == 5e-4);
  CHECK_FALSE(t.resample_each_epoch);
  RegistrationConfig r;
  cfg.apply(r);
  CHECK(r.max_iterations == 7);
  IcpConfig i;
  cfg.apply(i);
  CHECK(i.max_iterations == 50);
  CHECK(i.correspondence == IcpConfig::Correspondence::brute);
  DatasetSpec d;
  cfg.apply(d);
  CHECK(d.noise_sigma_max == 0.02);
  CHECK(cfg.get_list("methods") == std::vector<std::string>{"icp", "ipcrnet"});

  try {
    RunConfig::parse("epochs = 3\nbogus_key = 1\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
  }
  CHECK_THROWS_AS(RunConfig::parse("epochs = 3\nepochs = 4\n"), ParseError);
  CHECK_THROWS_AS(RunConfig::parse("epochs 3\n"), ParseError);
  RunConfig bad = RunConfig::parse("epochs = three\n");
  TrainConfig t2;
  CHECK_THROWS(bad.apply(t2));
  RunConfig s;
  CHECK_THROWS(s.set("nope", "1"));

  RunConfig shape = RunConfig::parse("shape = box\npoints_per_cloud = 64\n");
  const auto templ = shape.load_templates();
  REQUIRE(templ.size() == 1);
  CHECK(templ[0].size() == 64);
  CHECK(templ[0].centroid().norm() < 1e-9);
}

TEST_CASE("shipped configuration files parse") {
  const RunConfig cfg = RunConfig::load(std::string(PCREG_SOURCE_DIR) + "/configs/desk_scale.cfg");
  DatasetSpec spec;
  cfg.apply(spec);
  spec.templates = cfg.load_templates();
  CHECK_NOTHROW(spec.validate());
  TrainConfig tc;
  cfg.apply(tc);
  CHECK_NOTHROW(tc.validate());
  CHECK(tc.loss == LossKind::frobenius);
  CHECK(spec.points_per_cloud == 512);
  CHECK(spec.templates.front().size() == 512);
}
