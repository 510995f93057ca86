#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pcreg/point_cloud.hpp"

namespace pcreg {

/// Area-weighted face choice followed by uniform barycentric sampling.
/// Throws if the mesh has no face with positive area.
PointCloud sample_mesh(const Mesh& mesh, std::size_t m, std::uint64_t seed);

/// Greedy max-min subset of n points. The first point is drawn uniformly
/// with `seed`; ties in the max-min step go to the lowest index.
PointCloud farthest_point_sample(const PointCloud& cloud, std::size_t n, std::uint64_t seed);
/// Same, starting from an explicit point index. Returns selected indices.
std::vector<std::size_t> farthest_point_indices(const PointCloud& cloud, std::size_t n,
                                                std::size_t start);

/// Scale by 1 / (largest axis-aligned extent) and shift the centroid to the
/// origin. Throws if all points coincide.
PointCloud normalize_unit_box(const PointCloud& cloud);

/// Adds i.i.d. N(0, sigma^2) offsets per coordinate. sigma == 0 returns the
/// input unchanged.
PointCloud add_gaussian_noise(const PointCloud& cloud, double sigma, std::uint64_t seed);

/// Half-space crop: keeps the ceil(keep_fraction * N) points with the largest
/// projection onto a random unit direction (drawn from `seed`).
PointCloud make_partial(const PointCloud& cloud, double keep_fraction, std::uint64_t seed);
/// Same with an explicit crop direction.
PointCloud make_partial_along(const PointCloud& cloud, double keep_fraction, const Vec3& direction);

/// Uniform random subset of size n without replacement.
PointCloud sparsify(const PointCloud& cloud, std::size_t n, std::uint64_t seed);

}  // namespace pcreg
