#include "pcreg/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "pcreg/errors.hpp"

namespace pcreg {

namespace {

constexpr const char* kMagic = "PCREG-CHECKPOINT";
constexpr int kVersion = 1;

template <typename T>
constexpr const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

template <typename U>
void append_le(std::string& out, const U* data, std::size_t n) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  const std::size_t start = out.size();
  out.resize(start + n * sizeof(U));
  std::memcpy(out.data() + start, data, n * sizeof(U));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < n; ++i) {
      char* p = out.data() + start + i * sizeof(U);
      std::reverse(p, p + sizeof(U));
    }
  }
}

template <typename U>
U read_le(const char* p) {
  char buf[sizeof(U)];
  std::memcpy(buf, p, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(U));
  U v;
  std::memcpy(&v, buf, sizeof(U));
  return v;
}

struct Entry {
  std::string name;
  DType dtype;
  Eigen::Index rows, cols;
};

}  // namespace

template <typename T>
std::string serialize_checkpoint(const Model<T>& model) {
  std::ostringstream head;
  head << kMagic << ' ' << kVersion << '\n';
  head << "meta encoder_widths ";
  for (std::size_t i = 0; i < model.config.encoder_widths.size(); ++i) {
    head << (i ? "," : "") << model.config.encoder_widths[i];
  }
  head << '\n';
  head << "meta relu_before_pool " << (model.config.relu_before_pool ? 1 : 0) << '\n';
  head << "meta head " << to_string(model.config.head) << '\n';
  head << "meta dropout_rate " << std::setprecision(17) << model.config.dropout_rate << '\n';
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const auto& p = model.params[i];
    head << "tensor " << p.name << ' ' << dtype_name<T>() << ' ' << p.value.rows() << ' ' << p.value.cols() << '\n';
  }
  head << "data\n";
  std::string out = head.str();
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const auto& v = model.params[i].value;
    append_le(out, v.data(), static_cast<std::size_t>(v.size()));
  }
  return out;
}

template <typename T>
Model<T> parse_checkpoint(std::string_view bytes) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) throw ParseError("checkpoint header is truncated", line_no + 1);
    std::string line(bytes.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    return line;
  };

  {
    std::istringstream is(next_line());
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != kMagic) throw ParseError("not a checkpoint file", line_no);
    if (version != kVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version), line_no);
  }

  Model<T> model;
  std::vector<Entry> entries;
  for (;;) {
    const std::string line = next_line();
    if (line == "data") break;
    std::istringstream is(line);
    std::string kind;
    is >> kind;
    if (kind == "meta") {
      std::string key, value;
      if (!(is >> key >> value)) throw ParseError("malformed meta line", line_no);
      if (key == "encoder_widths") {
        std::istringstream ws(value);
        std::string item;
        std::size_t i = 0;
        while (std::getline(ws, item, ',')) {
          if (i >= model.config.encoder_widths.size()) throw ParseError("too many encoder widths", line_no);
          model.config.encoder_widths[i++] = std::stoi(item);
        }
        if (i != model.config.encoder_widths.size()) throw ParseError("too few encoder widths", line_no);
      } else if (key == "relu_before_pool") {
        model.config.relu_before_pool = value == "1";
      } else if (key == "head") {
        model.config.head = parse_head_variant(value);
      } else if (key == "dropout_rate") {
        model.config.dropout_rate = std::stod(value);
      } else {
        throw ParseError("unknown meta key '" + key + "'", line_no);
      }
    } else if (kind == "tensor") {
      Entry e;
      std::string dt;
      if (!(is >> e.name >> dt >> e.rows >> e.cols) || e.rows < 0 || e.cols < 0) {
        throw ParseError("malformed tensor line", line_no);
      }
      if (dt == "f32") {
        e.dtype = DType::f32;
      } else if (dt == "f64") {
        e.dtype = DType::f64;
      } else {
        throw ParseError("unknown dtype '" + dt + "'", line_no);
      }
      entries.push_back(std::move(e));
    } else {
      throw ParseError("unexpected header line '" + line + "'", line_no);
    }
  }

  for (const Entry& e : entries) {
    const std::size_t width = e.dtype == DType::f32 ? 4 : 8;
    const std::size_t count = static_cast<std::size_t>(e.rows * e.cols);
    if (pos + count * width > bytes.size()) throw ParseError("tensor data for '" + e.name + "' is truncated", 0);
    ad::Tensor<T> v(e.rows, e.cols);
    for (std::size_t i = 0; i < count; ++i) {
      const char* p = bytes.data() + pos + i * width;
      v.data()[i] = e.dtype == DType::f32 ? static_cast<T>(read_le<float>(p)) : static_cast<T>(read_le<double>(p));
    }
    pos += count * width;
    model.params.add(e.name, std::move(v));
  }
  if (pos != bytes.size()) throw ParseError("trailing bytes after tensor data", 0);
  return model;
}

template <typename T>
void save_checkpoint(const std::string& path, const Model<T>& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  const std::string bytes = serialize_checkpoint(model);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

template <typename T>
Model<T> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_checkpoint<T>(ss.str());
}

template std::string serialize_checkpoint<float>(const Model<float>&);
template std::string serialize_checkpoint<double>(const Model<double>&);
template Model<float> parse_checkpoint<float>(std::string_view);
template Model<double> parse_checkpoint<double>(std::string_view);
template void save_checkpoint<float>(const std::string&, const Model<float>&);
template void save_checkpoint<double>(const std::string&, const Model<double>&);
template Model<float> load_checkpoint<float>(const std::string&);
template Model<double> load_checkpoint<double>(const std::string&);

}  // namespace pcreg
