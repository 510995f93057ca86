#include <doctest.h>

#include "pcreg/kd_tree.hpp"
#include "test_util.hpp"

using namespace pcreg;
using namespace pcreg::testing;

TEST_CASE("kd-tree matches brute force exactly") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int n : {1, 2, 7, 64, 1000}) {
    const PointCloud c = random_cloud(rng, n);
    const KdTree tree(c.points());
    for (int q = 0; q < 300; ++q) {
      const Vec3 query(u(rng), u(rng), u(rng));
      const auto a = tree.nearest(query);
      const auto b = brute_force_nearest(c.points(), query);
      CHECK(a.index == b.index);
      CHECK(a.sq_distance == b.sq_distance);
    }
  }
}

TEST_CASE("kd-tree ties go to the lowest index") {
  // Duplicated points and a lattice with many equidistant neighbours.
  PointMatrix p(27 * 2, 3);
  int k = 0;
  for (int rep = 0; rep < 2; ++rep)
    for (int x = -1; x <= 1; ++x)
      for (int y = -1; y <= 1; ++y)
        for (int z = -1; z <= 1; ++z) p.row(k++) << x, y, z;
  const KdTree tree(p);
  for (const Vec3& q : {Vec3(0.5, 0.5, 0.5), Vec3(0, 0, 0), Vec3(-0.5, 0, 0.5), Vec3(1, 1, 1)}) {
    const auto a = tree.nearest(q);
    const auto b = brute_force_nearest(p, q);
    CHECK(a.index == b.index);
    CHECK(a.index < 27);
  }
}

TEST_CASE("kd-tree query on member points returns distance zero") {
  std::mt19937_64 rng(22);
  const PointCloud c = random_cloud(rng, 500);
  const KdTree tree(c.points());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto h = tree.nearest(c.point(i));
    CHECK(h.sq_distance == 0.0);
    CHECK(h.index == i);
  }
}
