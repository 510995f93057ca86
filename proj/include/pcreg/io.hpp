#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "pcreg/point_cloud.hpp"
#include "pcreg/se3.hpp"

namespace pcreg {

/// OFF mesh. Accepts the ModelNet variant where the counts follow "OFF" on
/// the same line ("OFF4 4 0"). Polygons are fan-triangulated and zero-area
/// triangles dropped.
Mesh parse_off(std::string_view text);

/// One "x y z" line per point; blank lines and '#' comments are skipped.
PointCloud read_xyz(std::string_view text);
std::string write_xyz(const PointCloud& cloud);

/// ASCII PLY with x, y, z vertex properties. Other properties and elements
/// are ignored; a message per ignored item is appended to `warnings`.
PointCloud read_ply_ascii(std::string_view text, std::vector<std::string>* warnings = nullptr);
std::string write_ply_ascii(const PointCloud& cloud);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// Picks the reader by extension (.xyz, .txt, .ply). OFF meshes are not point
/// clouds; sample them with sample_mesh.
PointCloud load_cloud(const std::string& path, std::vector<std::string>* warnings = nullptr);
void save_cloud(const std::string& path, const PointCloud& cloud);

Transform load_transform(const std::string& path);
void save_transform(const std::string& path, const Transform& t);

}  // namespace pcreg
