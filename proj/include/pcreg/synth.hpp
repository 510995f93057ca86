#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pcreg/point_cloud.hpp"

namespace pcreg {

enum class ShapeKind { box, cylinder, plane_with_handle, l_bracket };

ShapeKind parse_shape_kind(const std::string& s);  // "box", "cylinder", "plane-with-handle", "l-bracket"
const char* to_string(ShapeKind k);

/// Named dimensions; missing ones take the defaults below, unknown names and
/// non-positive values are rejected.
///   box:               sx 1.0, sy 0.6, sz 0.3
///   cylinder:          radius 0.3, height 1.0, fin_length 0.3, fin_height 0.5, fin_thickness 0.05
///   plane-with-handle: length 1.0, width 0.7, thickness 0.05, handle_length 0.4,
///                      handle_height 0.2, handle_thickness 0.06, handle_offset 0.2
///   l-bracket:         a 1.0, b 0.6, t 0.15, d 0.4
using ShapeParams = std::map<std::string, double>;

/// Closed (or nearly closed) triangle mesh of the shape.
Mesh synth_mesh(ShapeKind kind, const ShapeParams& params = {});

/// Area-weighted surface samples of synth_mesh.
PointCloud synth_shape(ShapeKind kind, const ShapeParams& params, std::size_t n, std::uint64_t seed);

}  // namespace pcreg
