#include "pcreg/io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "pcreg/errors.hpp"

namespace pcreg {

namespace {

struct Line {
  std::size_t number;
  std::vector<std::string_view> tokens;
};

std::vector<std::string_view> split(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// Non-empty lines with '#' comments removed.
std::vector<Line> content_lines(std::string_view text) {
  std::vector<Line> lines;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view raw = text.substr(pos, end - pos);
    ++number;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    auto tokens = split(raw);
    if (!tokens.empty()) lines.push_back({number, std::move(tokens)});
    if (end == text.size()) break;
    pos = end + 1;
  }
  return lines;
}

double to_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const char* first = tok.data();
  if (!tok.empty() && tok[0] == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError("expected a number, got '" + std::string(tok) + "'", line);
  }
  return v;
}

long to_long(std::string_view tok, std::size_t line) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError("expected an integer, got '" + std::string(tok) + "'", line);
  }
  return v;
}

std::size_t line_after(const std::vector<Line>& lines) { return lines.empty() ? 1 : lines.back().number + 1; }

std::string format_point(const Vec3& p) {
  char buf[128];
  const int n = std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
  return std::string(buf, static_cast<std::size_t>(n));
}

}  // namespace

Mesh parse_off(std::string_view text) {
  const auto lines = content_lines(text);
  if (lines.empty()) throw ParseError("empty OFF file", 0);
  std::size_t li = 0;
  const Line& head = lines[0];
  std::string_view first = head.tokens[0];
  if (first.substr(0, 3) != "OFF") throw ParseError("missing OFF header", head.number);
  std::vector<std::string_view> counts;
  std::size_t count_line = head.number;
  if (first.size() > 3) counts.push_back(first.substr(3));
  counts.insert(counts.end(), head.tokens.begin() + 1, head.tokens.end());
  ++li;
  if (counts.empty()) {
    if (li >= lines.size()) throw ParseError("missing vertex/face counts", line_after(lines));
    counts = lines[li].tokens;
    count_line = lines[li].number;
    ++li;
  }
  if (counts.size() < 2) throw ParseError("expected vertex and face counts", count_line);
  const long nv = to_long(counts[0], count_line);
  const long nf = to_long(counts[1], count_line);
  if (nv <= 0 || nf < 0) throw ParseError("invalid counts", count_line);

  Mesh mesh;
  mesh.vertices.resize(nv, 3);
  for (long v = 0; v < nv; ++v, ++li) {
    if (li >= lines.size()) {
      throw ParseError("unexpected end of file: " + std::to_string(v) + " of " + std::to_string(nv) + " vertices read",
                       line_after(lines));
    }
    const Line& l = lines[li];
    if (l.tokens.size() < 3) throw ParseError("vertex needs 3 coordinates", l.number);
    for (int c = 0; c < 3; ++c) mesh.vertices(v, c) = to_double(l.tokens[static_cast<std::size_t>(c)], l.number);
  }
  for (long f = 0; f < nf; ++f, ++li) {
    if (li >= lines.size()) {
      throw ParseError("unexpected end of file: " + std::to_string(f) + " of " + std::to_string(nf) + " faces read",
                       line_after(lines));
    }
    const Line& l = lines[li];
    const long k = to_long(l.tokens[0], l.number);
    if (k < 3 || static_cast<long>(l.tokens.size()) < k + 1) throw ParseError("malformed face", l.number);
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (long j = 0; j < k; ++j) {
      const long v = to_long(l.tokens[static_cast<std::size_t>(j + 1)], l.number);
      if (v < 0 || v >= nv) throw ParseError("vertex index " + std::to_string(v) + " out of range", l.number);
      idx[static_cast<std::size_t>(j)] = static_cast<int>(v);
    }
    for (long j = 1; j + 1 < k; ++j) {
      mesh.faces.push_back({idx[0], idx[static_cast<std::size_t>(j)], idx[static_cast<std::size_t>(j + 1)]});
    }
  }
  if (li < lines.size()) throw ParseError("trailing data after faces", lines[li].number);
  mesh.remove_degenerate_faces();
  return mesh;
}

PointCloud read_xyz(std::string_view text) {
  const auto lines = content_lines(text);
  if (lines.empty()) throw ParseError("empty point file", 0);
  PointMatrix pts(static_cast<Eigen::Index>(lines.size()), 3);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const Line& l = lines[i];
    if (l.tokens.size() != 3) {
      throw ParseError("expected 3 coordinates, got " + std::to_string(l.tokens.size()), l.number);
    }
    for (int c = 0; c < 3; ++c) {
      const double v = to_double(l.tokens[static_cast<std::size_t>(c)], l.number);
      if (!std::isfinite(v)) throw ParseError("non-finite coordinate", l.number);
      pts(static_cast<Eigen::Index>(i), c) = v;
    }
  }
  return PointCloud(std::move(pts));
}

std::string write_xyz(const PointCloud& cloud) {
  std::string out;
  for (std::size_t i = 0; i < cloud.size(); ++i) out += format_point(cloud.point(i));
  return out;
}

PointCloud read_ply_ascii(std::string_view text, std::vector<std::string>* warnings) {
  auto warn = [&](const std::string& w) {
    if (warnings) warnings->push_back(w);
  };
  const auto lines = content_lines(text);  // PLY has no '#' comments, but they are harmless here
  if (lines.empty()) throw ParseError("empty PLY file", 0);
  if (lines[0].tokens[0] != "ply") throw ParseError("missing 'ply' magic", lines[0].number);

  struct Element {
    std::string name;
    long count = 0;
    std::vector<std::string> props;
    std::size_t line = 0;
  };
  std::vector<Element> elements;
  std::size_t li = 1;
  bool ascii = false;
  for (; li < lines.size(); ++li) {
    const Line& l = lines[li];
    const std::string_view key = l.tokens[0];
    if (key == "end_header") {
      ++li;
      break;
    }
    if (key == "format") {
      if (l.tokens.size() < 2 || l.tokens[1] != "ascii") {
        throw ParseError("only ASCII PLY is supported", l.number);
      }
      ascii = true;
    } else if (key == "comment" || key == "obj_info") {
      continue;
    } else if (key == "element") {
      if (l.tokens.size() != 3) throw ParseError("malformed element line", l.number);
      elements.push_back({std::string(l.tokens[1]), to_long(l.tokens[2], l.number), {}, l.number});
      if (elements.back().count < 0) throw ParseError("negative element count", l.number);
    } else if (key == "property") {
      if (elements.empty()) throw ParseError("property before any element", l.number);
      if (l.tokens.size() >= 2 && l.tokens[1] == "list") {
        if (elements.back().name == "vertex") throw ParseError("list property on vertex element", l.number);
        elements.back().props.emplace_back("list");
        continue;
      }
      if (l.tokens.size() != 3) throw ParseError("malformed property line", l.number);
      elements.back().props.emplace_back(l.tokens[2]);
    } else {
      throw ParseError("unknown header keyword '" + std::string(key) + "'", l.number);
    }
    if (li + 1 == lines.size()) throw ParseError("missing end_header", line_after(lines));
  }
  if (!ascii) throw ParseError("missing format line", lines[0].number);

  std::optional<PointMatrix> pts;
  for (const Element& e : elements) {
    if (e.name != "vertex") {
      warn("ignoring element '" + e.name + "' (" + std::to_string(e.count) + " rows)");
      li += static_cast<std::size_t>(e.count);
      continue;
    }
    int ix = -1, iy = -1, iz = -1;
    for (std::size_t p = 0; p < e.props.size(); ++p) {
      const std::string& n = e.props[p];
      if (n == "x") ix = static_cast<int>(p);
      else if (n == "y") iy = static_cast<int>(p);
      else if (n == "z") iz = static_cast<int>(p);
      else warn("ignoring vertex property '" + n + "'");
    }
    if (ix < 0 || iy < 0 || iz < 0) throw ParseError("vertex element lacks x, y or z", e.line);
    if (e.count == 0) throw ParseError("PLY has no vertices", e.line);
    PointMatrix m(e.count, 3);
    for (long r = 0; r < e.count; ++r, ++li) {
      if (li >= lines.size()) throw ParseError("unexpected end of vertex data", line_after(lines));
      const Line& l = lines[li];
      if (l.tokens.size() != e.props.size()) {
        throw ParseError("expected " + std::to_string(e.props.size()) + " values", l.number);
      }
      const int cols[3] = {ix, iy, iz};
      for (int c = 0; c < 3; ++c) {
        const double v = to_double(l.tokens[static_cast<std::size_t>(cols[c])], l.number);
        if (!std::isfinite(v)) throw ParseError("non-finite coordinate", l.number);
        m(r, c) = v;
      }
    }
    pts = std::move(m);
  }
  if (!pts) throw ParseError("PLY has no vertex element", 0);
  return PointCloud(std::move(*pts));
}

std::string write_ply_ascii(const PointCloud& cloud) {
  std::string out = "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.size()) +
                    "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  return out + write_xyz(cloud);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {
std::string extension(const std::string& path) {
  std::string e = std::filesystem::path(path).extension().string();
  for (char& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e;
}
}  // namespace

PointCloud load_cloud(const std::string& path, std::vector<std::string>* warnings) {
  const std::string ext = extension(path);
  if (ext == ".ply") return read_ply_ascii(read_file(path), warnings);
  if (ext == ".xyz" || ext == ".txt") return read_xyz(read_file(path));
  throw std::invalid_argument("unsupported point cloud extension '" + ext + "' (" + path + ")");
}

void save_cloud(const std::string& path, const PointCloud& cloud) {
  const std::string ext = extension(path);
  if (ext == ".ply") return write_file(path, write_ply_ascii(cloud));
  if (ext == ".xyz" || ext == ".txt") return write_file(path, write_xyz(cloud));
  throw std::invalid_argument("unsupported point cloud extension '" + ext + "' (" + path + ")");
}

Transform load_transform(const std::string& path) { return parse_matrix(read_file(path)); }

void save_transform(const std::string& path, const Transform& t) { write_file(path, format_matrix(t)); }

}  // namespace pcreg
