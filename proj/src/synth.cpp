#include "pcreg/synth.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "pcreg/cloud_ops.hpp"

namespace pcreg {

namespace {

constexpr double kPi = 3.14159265358979323846;

class MeshBuilder {
 public:
  int vertex(const Vec3& p) {
    verts_.push_back(p);
    return static_cast<int>(verts_.size()) - 1;
  }
  void tri(int a, int b, int c) { faces_.push_back({a, b, c}); }
  void quad(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    const int i = vertex(a), j = vertex(b), k = vertex(c), l = vertex(d);
    tri(i, j, k);
    tri(i, k, l);
  }
  // Axis-aligned box; `skip` lists faces to leave out as "-x", "+x", ...
  void box(const Vec3& lo, const Vec3& hi, const std::set<std::string>& skip = {}) {
    const double x0 = lo.x(), y0 = lo.y(), z0 = lo.z(), x1 = hi.x(), y1 = hi.y(), z1 = hi.z();
    if (!skip.count("-z")) quad({x0, y0, z0}, {x0, y1, z0}, {x1, y1, z0}, {x1, y0, z0});
    if (!skip.count("+z")) quad({x0, y0, z1}, {x1, y0, z1}, {x1, y1, z1}, {x0, y1, z1});
    if (!skip.count("-y")) quad({x0, y0, z0}, {x1, y0, z0}, {x1, y0, z1}, {x0, y0, z1});
    if (!skip.count("+y")) quad({x0, y1, z0}, {x0, y1, z1}, {x1, y1, z1}, {x1, y1, z0});
    if (!skip.count("-x")) quad({x0, y0, z0}, {x0, y0, z1}, {x0, y1, z1}, {x0, y1, z0});
    if (!skip.count("+x")) quad({x1, y0, z0}, {x1, y1, z0}, {x1, y1, z1}, {x1, y0, z1});
  }
  Mesh build() {
    Mesh m;
    m.vertices.resize(static_cast<Eigen::Index>(verts_.size()), 3);
    for (std::size_t i = 0; i < verts_.size(); ++i) m.vertices.row(static_cast<Eigen::Index>(i)) = verts_[i].transpose();
    m.faces = faces_;
    return m;
  }

 private:
  std::vector<Vec3> verts_;
  std::vector<std::array<int, 3>> faces_;
};

ShapeParams resolve(const ShapeParams& given, const ShapeParams& defaults, const char* shape) {
  ShapeParams p = defaults;
  for (const auto& [k, v] : given) {
    if (!defaults.count(k)) throw std::invalid_argument(std::string(shape) + ": unknown parameter '" + k + "'");
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(shape) + ": parameter '" + k + "' must be positive");
    }
    p[k] = v;
  }
  return p;
}

Mesh box_mesh(const ShapeParams& in) {
  const auto p = resolve(in, {{"sx", 1.0}, {"sy", 0.6}, {"sz", 0.3}}, "box");
  MeshBuilder b;
  const Vec3 h(p.at("sx") / 2, p.at("sy") / 2, p.at("sz") / 2);
  b.box(-h, h);
  return b.build();
}

Mesh cylinder_mesh(const ShapeParams& in) {
  const auto p = resolve(in,
                         {{"radius", 0.3}, {"height", 1.0}, {"fin_length", 0.3}, {"fin_height", 0.5},
                          {"fin_thickness", 0.05}},
                         "cylinder");
  const double r = p.at("radius"), h = p.at("height");
  if (p.at("fin_thickness") >= 2 * r) throw std::invalid_argument("cylinder: fin thicker than the cylinder");
  constexpr int kSegments = 64;
  MeshBuilder b;
  const int top = b.vertex({0, 0, h / 2});
  const int bottom = b.vertex({0, 0, -h / 2});
  std::vector<int> ring_top, ring_bottom;
  for (int i = 0; i < kSegments; ++i) {
    const double a = 2 * kPi * i / kSegments;
    ring_top.push_back(b.vertex({r * std::cos(a), r * std::sin(a), h / 2}));
    ring_bottom.push_back(b.vertex({r * std::cos(a), r * std::sin(a), -h / 2}));
  }
  for (int i = 0; i < kSegments; ++i) {
    const int j = (i + 1) % kSegments;
    b.tri(ring_bottom[i], ring_bottom[j], ring_top[j]);
    b.tri(ring_bottom[i], ring_top[j], ring_top[i]);
    b.tri(top, ring_top[i], ring_top[j]);
    b.tri(bottom, ring_bottom[j], ring_bottom[i]);
  }
  // Fin on +x, in the upper part of the side wall: breaks the axial symmetry
  // and the up/down flip.
  const double ft = p.at("fin_thickness") / 2;
  const double fh = std::min(p.at("fin_height"), h);
  const double x0 = std::sqrt(r * r - ft * ft);
  b.box({x0, -ft, h / 2 - fh}, {r + p.at("fin_length"), ft, h / 2}, {"-x"});
  return b.build();
}

Mesh plane_with_handle_mesh(const ShapeParams& in) {
  const auto p = resolve(in,
                         {{"length", 1.0}, {"width", 0.7}, {"thickness", 0.05}, {"handle_length", 0.4},
                          {"handle_height", 0.2}, {"handle_thickness", 0.06}, {"handle_offset", 0.2}},
                         "plane-with-handle");
  const double L = p.at("length"), W = p.at("width"), T = p.at("thickness");
  const double hl = p.at("handle_length"), hh = p.at("handle_height"), ht = p.at("handle_thickness");
  const double off = p.at("handle_offset");
  if (hl + 2 * ht > L || off + hl / 2 + ht > L / 2 || ht > W / 2) {
    throw std::invalid_argument("plane-with-handle: handle does not fit on the plate");
  }
  MeshBuilder b;
  b.box({-L / 2, -W / 2, 0}, {L / 2, W / 2, T});
  // Arch: two posts and a bar, centred at x = off and shifted towards +y.
  const double y0 = W / 4 - ht / 2, y1 = W / 4 + ht / 2;
  const double xa = off - hl / 2 - ht, xb = off + hl / 2;
  b.box({xa, y0, T}, {xa + ht, y1, T + hh}, {"-z", "+z"});
  b.box({xb, y0, T}, {xb + ht, y1, T + hh}, {"-z", "+z"});
  b.box({xa, y0, T + hh}, {xb + ht, y1, T + hh + ht});
  return b.build();
}

Mesh l_bracket_mesh(const ShapeParams& in) {
  const auto p = resolve(in, {{"a", 1.0}, {"b", 0.6}, {"t", 0.15}, {"d", 0.4}}, "l-bracket");
  const double a = p.at("a"), bb = p.at("b"), t = p.at("t"), d = p.at("d");
  if (t >= a || t >= bb) throw std::invalid_argument("l-bracket: thickness must be below both leg lengths");
  // L polygon in the xy-plane, counter-clockwise, extruded along z.
  const std::vector<Eigen::Vector2d> poly = {{0, 0}, {a, 0}, {a, t}, {t, t}, {t, bb}, {0, bb}};
  MeshBuilder b;
  for (double z : {0.0, d}) {
    const bool up = z > 0;
    auto rect = [&](double x0, double y0, double x1, double y1) {
      if (up) {
        b.quad({x0, y0, z}, {x1, y0, z}, {x1, y1, z}, {x0, y1, z});
      } else {
        b.quad({x0, y0, z}, {x0, y1, z}, {x1, y1, z}, {x1, y0, z});
      }
    };
    rect(0, 0, a, t);
    rect(0, t, t, bb);
  }
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& p0 = poly[i];
    const auto& p1 = poly[(i + 1) % poly.size()];
    b.quad({p0.x(), p0.y(), 0}, {p1.x(), p1.y(), 0}, {p1.x(), p1.y(), d}, {p0.x(), p0.y(), d});
  }
  return b.build();
}

}  // namespace

ShapeKind parse_shape_kind(const std::string& s) {
  if (s == "box") return ShapeKind::box;
  if (s == "cylinder") return ShapeKind::cylinder;
  if (s == "plane-with-handle" || s == "plane_with_handle") return ShapeKind::plane_with_handle;
  if (s == "l-bracket" || s == "l_bracket") return ShapeKind::l_bracket;
  throw std::invalid_argument("unknown shape '" + s + "' (expected box, cylinder, plane-with-handle or l-bracket)");
}

const char* to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::box: return "box";
    case ShapeKind::cylinder: return "cylinder";
    case ShapeKind::plane_with_handle: return "plane-with-handle";
    case ShapeKind::l_bracket: return "l-bracket";
  }
  return "?";
}

Mesh synth_mesh(ShapeKind kind, const ShapeParams& params) {
  switch (kind) {
    case ShapeKind::box: return box_mesh(params);
    case ShapeKind::cylinder: return cylinder_mesh(params);
    case ShapeKind::plane_with_handle: return plane_with_handle_mesh(params);
    case ShapeKind::l_bracket: return l_bracket_mesh(params);
  }
  throw std::invalid_argument("unknown shape kind");
}

PointCloud synth_shape(ShapeKind kind, const ShapeParams& params, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("synth_shape: n must be >= 1");
  return sample_mesh(synth_mesh(kind, params), n, seed);
}

}  // namespace pcreg
