#include "pcreg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "pcreg/errors.hpp"

namespace pcreg::ad {

namespace {

std::string shape_of(Eigen::Index r, Eigen::Index c) {
  std::ostringstream os;
  os << r << "x" << c;
  return os.str();
}

template <typename M>
std::string shape_of(const M& m) {
  return shape_of(m.rows(), m.cols());
}

[[noreturn]] void shape_fail(const std::string& prim, const std::string& detail) {
  throw ShapeError(prim + ": shape mismatch (" + detail + ")");
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}

}  // namespace

// ---- ParamStore -------------------------------------------------------------

template <typename T>
ParamStore<T>::ParamStore(const ParamStore& other) {
  for (const auto& p : other.params_) {
    params_.push_back(std::make_unique<Parameter<T>>(*p));
    index_[p->name] = params_.size() - 1;
  }
}

template <typename T>
ParamStore<T>& ParamStore<T>::operator=(const ParamStore& other) {
  if (this != &other) {
    ParamStore tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

template <typename T>
Parameter<T>& ParamStore<T>::add(const std::string& name, Tensor<T> init) {
  if (contains(name)) throw std::invalid_argument("parameter '" + name + "' already exists");
  auto p = std::make_unique<Parameter<T>>();
  p->name = name;
  p->grad = Tensor<T>::Zero(init.rows(), init.cols());
  p->adam_m = Tensor<T>::Zero(init.rows(), init.cols());
  p->adam_v = Tensor<T>::Zero(init.rows(), init.cols());
  p->value = std::move(init);
  params_.push_back(std::move(p));
  index_[name] = params_.size() - 1;
  return *params_.back();
}

template <typename T>
Parameter<T>& ParamStore<T>::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return *params_[it->second];
}

template <typename T>
const Parameter<T>& ParamStore<T>::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return *params_[it->second];
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& p : params_) p->grad.setZero();
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

// ---- Tape -------------------------------------------------------------------

template <typename T>
typename Tape<T>::Node& Tape<T>::node(Var v) {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) throw std::out_of_range("invalid tape variable");
  return nodes_[static_cast<std::size_t>(v.id)];
}

template <typename T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) throw std::out_of_range("invalid tape variable");
  return nodes_[static_cast<std::size_t>(v.id)];
}

template <typename T>
Var Tape<T>::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
Var Tape<T>::leaf(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
Var Tape<T>::parameter(Parameter<T>& p) {
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
Var Tape<T>::record(Matrix value, std::vector<Var> inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (Var in : inputs) {
    if (node(in).requires_grad) n.requires_grad = true;
  }
  if (n.requires_grad) {
    n.inputs = std::move(inputs);
    n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
const typename Tape<T>::Matrix& Tape<T>::value(Var v) const {
  const Node& n = node(v);
  return n.external ? *n.external : n.value;
}

template <typename T>
const typename Tape<T>::Matrix& Tape<T>::grad(Var v) const {
  const Node& n = node(v);
  if (n.param) return n.param->grad;
  return n.grad;
}

template <typename T>
bool Tape<T>::requires_grad(Var v) const {
  return node(v).requires_grad;
}

template <typename T>
typename Tape<T>::Matrix& Tape<T>::grad_slot(Var v) {
  Node& n = node(v);
  if (n.param) return n.param->grad;
  if (!n.has_grad) {
    const Matrix& val = n.external ? *n.external : n.value;
    n.grad = Matrix::Zero(val.rows(), val.cols());
    n.has_grad = true;
  }
  return n.grad;
}

template <typename T>
void Tape<T>::accumulate(Var v, const Matrix& g) {
  if (!node(v).requires_grad) return;
  Matrix& slot = grad_slot(v);
  if (slot.rows() != g.rows() || slot.cols() != g.cols()) {
    shape_fail("accumulate", "gradient " + shape_of(g) + " vs value " + shape_of(slot));
  }
  slot += g;
}

template <typename T>
void Tape<T>::backward(Var loss) {
  const Matrix& v = value(loss);
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + shape_of(v));
  }
  backward(loss, Matrix::Ones(1, 1));
}

template <typename T>
void Tape<T>::backward(Var out, const Matrix& seed) {
  for (Node& n : nodes_) {
    if (!n.param) {
      n.grad.resize(0, 0);
      n.has_grad = false;
    }
  }
  Node& o = node(out);
  if (!o.requires_grad) return;
  const Matrix& ov = value(out);
  if (seed.rows() != ov.rows() || seed.cols() != ov.cols()) {
    shape_fail("backward", "seed " + shape_of(seed) + " vs output " + shape_of(ov));
  }
  if (o.param) {
    o.param->grad += seed;
    return;
  }
  o.grad = seed;
  o.has_grad = true;
  for (int id = out.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
    if (id != out.id && n.inputs.size() > 0) {
      // Intermediate gradients are no longer needed.
      n.grad.resize(0, 0);
    }
  }
}

template <typename T>
void Tape<T>::note_branch(std::uint64_t h) {
  signature_ = mix(signature_, h);
}

// ---- primitives ---------------------------------------------------------------

template <typename T>
Var linear(Tape<T>& tape, Var x, Var w, Var b) {
  using M = Tensor<T>;
  const M& X = tape.value(x);
  const M& W = tape.value(w);
  const M& B = tape.value(b);
  if (X.cols() != W.cols() || B.rows() != 1 || B.cols() != W.rows()) {
    shape_fail("linear", "x " + shape_of(X) + ", W " + shape_of(W) + ", b " + shape_of(B));
  }
  M y(X.rows(), W.rows());
  y.noalias() = X * W.transpose();
  y.rowwise() += B.row(0);
  return tape.record(std::move(y), {x, w, b}, [x, w, b](Tape<T>& t, const M& g) {
    const M& Xv = t.value(x);
    const M& Wv = t.value(w);
    const bool need_x = t.requires_grad(x), need_w = t.requires_grad(w), need_b = t.requires_grad(b);
    const Eigen::Index nnz = (g.array() != T(0)).count();
    if (nnz * 8 < g.size()) {
      // Upstream gradient from max pooling is mostly zero: touch only the
      // nonzero entries.
      M* dx = need_x ? &t.grad_slot(x) : nullptr;
      M* dw = need_w ? &t.grad_slot(w) : nullptr;
      M* db = need_b ? &t.grad_slot(b) : nullptr;
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        for (Eigen::Index c = 0; c < g.cols(); ++c) {
          const T gv = g(i, c);
          if (gv == T(0)) continue;
          if (dw) dw->row(c) += gv * Xv.row(i);
          if (dx) dx->row(i) += gv * Wv.row(c);
          if (db) (*db)(0, c) += gv;
        }
      }
      return;
    }
    if (need_w) t.grad_slot(w).noalias() += g.transpose() * Xv;
    if (need_x) t.grad_slot(x).noalias() += g * Wv;
    if (need_b) t.grad_slot(b) += g.colwise().sum();
  });
}

template <typename T>
Var relu(Tape<T>& tape, Var x) {
  using M = Tensor<T>;
  const M& X = tape.value(x);
  M y = X.cwiseMax(T(0));
  if (tape.tracking_branches()) {
    std::uint64_t h = 0;
    for (Eigen::Index i = 0; i < X.size(); ++i) {
      const T v = X.data()[i];
      h = mix(h, static_cast<std::uint64_t>(v > T(0) ? 2 : (v < T(0) ? 0 : 1)));
    }
    tape.note_branch(h);
  }
  const Var out{static_cast<int>(tape.size())};
  return tape.record(std::move(y), {x}, [x, out](Tape<T>& t, const M& g) {
    const M& Y = t.value(out);
    t.grad_slot(x).array() += g.array() * (Y.array() > T(0)).template cast<T>();
  });
}

template <typename T>
Var max_pool_points(Tape<T>& tape, Var x) {
  using M = Tensor<T>;
  const M& X = tape.value(x);
  if (X.rows() < 1) shape_fail("max_pool_points", "empty input " + shape_of(X));
  M y = X.row(0);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(X.cols()), 0);
  for (Eigen::Index i = 1; i < X.rows(); ++i) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) {
      if (X(i, c) > y(0, c)) {
        y(0, c) = X(i, c);
        arg[static_cast<std::size_t>(c)] = i;
      }
    }
  }
  if (tape.tracking_branches()) {
    std::uint64_t h = 0;
    for (Eigen::Index a : arg) h = mix(h, static_cast<std::uint64_t>(a));
    tape.note_branch(h);
  }
  return tape.record(std::move(y), {x}, [x, arg = std::move(arg)](Tape<T>& t, const M& g) {
    M& dx = t.grad_slot(x);
    for (std::size_t c = 0; c < arg.size(); ++c) {
      dx(arg[c], static_cast<Eigen::Index>(c)) += g(0, static_cast<Eigen::Index>(c));
    }
  });
}

template <typename T>
Var concat(Tape<T>& tape, Var a, Var b) {
  using M = Tensor<T>;
  const M& A = tape.value(a);
  const M& B = tape.value(b);
  if (A.rows() != B.rows()) shape_fail("concat", "a " + shape_of(A) + ", b " + shape_of(B));
  M y(A.rows(), A.cols() + B.cols());
  y << A, B;
  const Eigen::Index na = A.cols(), nb = B.cols();
  return tape.record(std::move(y), {a, b}, [a, b, na, nb](Tape<T>& t, const M& g) {
    if (t.requires_grad(a)) t.grad_slot(a) += g.leftCols(na);
    if (t.requires_grad(b)) t.grad_slot(b) += g.rightCols(nb);
  });
}

template <typename T>
Var dropout(Tape<T>& tape, Var x, double rate, std::uint64_t seed, bool train) {
  using M = Tensor<T>;
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout: rate must lie in [0, 1)");
  if (!train || rate == 0.0) return x;
  const M& X = tape.value(x);
  const double keep = 1.0 - rate;
  M mask(X.rows(), X.cols());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = u(rng) < keep ? static_cast<T>(1.0 / keep) : T(0);
  M y = X.cwiseProduct(mask);
  return tape.record(std::move(y), {x}, [x, mask = std::move(mask)](Tape<T>& t, const M& g) {
    t.grad_slot(x) += g.cwiseProduct(mask);
  });
}

template <typename T>
Eigen::Matrix<T, 3, 3> quat_to_matrix(const T* q) {
  const T w = q[0], x = q[1], y = q[2], z = q[3];
  Eigen::Matrix<T, 3, 3> r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),  //
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),   //
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

template <typename T>
void quat_matrix_partials(const T* q, Eigen::Matrix<T, 3, 3> (&d)[4]) {
  const T w = q[0], x = q[1], y = q[2], z = q[3];
  d[0] << 0, -z, y, z, 0, -x, -y, x, 0;
  d[1] << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
  d[2] << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
  d[3] << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
  for (auto& m : d) m *= T(2);
}

template <typename T>
Eigen::Matrix<T, 1, 4> normalize_backward(const T* q_raw, const Eigen::Matrix<T, 1, 4>& g_unit) {
  const Eigen::Map<const Eigen::Matrix<T, 1, 4>> q(q_raw);
  const T n = q.norm();
  const Eigen::Matrix<T, 1, 4> u = q / n;
  return (g_unit - g_unit.dot(u) * u) / n;
}

namespace {

template <typename T>
Eigen::Matrix<T, 1, 4> unit_quaternion(const Tensor<T>& pose, const char* prim) {
  const Eigen::Matrix<T, 1, 4> q = pose.row(0).template head<4>();
  const T n = q.norm();
  if (!std::isfinite(static_cast<double>(n)) || !(static_cast<double>(n) > 1e-12)) {
    throw DegeneratePose(std::string(prim) + ": quaternion norm " + std::to_string(static_cast<double>(n)) +
                         " is degenerate");
  }
  return q / n;
}

// dL/dq_raw given dL/dR (3x3) at raw quaternion `q_raw`.
template <typename T>
Eigen::Matrix<T, 1, 4> rotation_grad_to_quat(const Eigen::Matrix<T, 1, 4>& q_raw, const Eigen::Matrix<T, 3, 3>& g_r) {
  const Eigen::Matrix<T, 1, 4> u = q_raw / q_raw.norm();
  Eigen::Matrix<T, 3, 3> d[4];
  quat_matrix_partials<T>(u.data(), d);
  Eigen::Matrix<T, 1, 4> g_unit;
  for (int k = 0; k < 4; ++k) g_unit(k) = g_r.cwiseProduct(d[k]).sum();
  return normalize_backward<T>(q_raw.data(), g_unit);
}

}  // namespace

template <typename T>
Var quat_normalize(Tape<T>& tape, Var q) {
  using M = Tensor<T>;
  const M& Q = tape.value(q);
  if (Q.rows() != 1 || Q.cols() != 4) shape_fail("quat_normalize", "q " + shape_of(Q));
  M y = unit_quaternion<T>(Q, "quat_normalize");
  return tape.record(std::move(y), {q}, [q](Tape<T>& t, const M& g) {
    const Eigen::Matrix<T, 1, 4> qr = t.value(q).row(0);
    const Eigen::Matrix<T, 1, 4> gu = g.row(0);
    t.grad_slot(q) += normalize_backward<T>(qr.data(), gu);
  });
}

template <typename T>
Var transform_points(Tape<T>& tape, Var pose, Var cloud) {
  using M = Tensor<T>;
  const M& P = tape.value(pose);
  const M& X = tape.value(cloud);
  if (P.rows() != 1 || P.cols() != 7 || X.cols() != 3) {
    shape_fail("transform_points", "pose " + shape_of(P) + ", cloud " + shape_of(X));
  }
  const Eigen::Matrix<T, 1, 4> u = unit_quaternion<T>(P, "transform_points");
  const Eigen::Matrix<T, 3, 3> r = quat_to_matrix<T>(u.data());
  M y(X.rows(), 3);
  y.noalias() = X * r.transpose();
  y.rowwise() += P.row(0).template tail<3>();
  return tape.record(std::move(y), {pose, cloud}, [pose, cloud, r](Tape<T>& t, const M& g) {
    const M& Xv = t.value(cloud);
    if (t.requires_grad(pose)) {
      const Eigen::Matrix<T, 3, 3> g_r = g.transpose() * Xv;
      const Eigen::Matrix<T, 1, 4> qr = t.value(pose).row(0).template head<4>();
      M& dp = t.grad_slot(pose);
      dp.row(0).template head<4>() += rotation_grad_to_quat<T>(qr, g_r);
      dp.row(0).template tail<3>() += g.colwise().sum();
    }
    if (t.requires_grad(cloud)) t.grad_slot(cloud).noalias() += g * r;
  });
}

template <typename T>
Var pose_matrix(Tape<T>& tape, Var pose) {
  using M = Tensor<T>;
  const M& P = tape.value(pose);
  if (P.rows() != 1 || P.cols() != 7) shape_fail("pose_matrix", "pose " + shape_of(P));
  const Eigen::Matrix<T, 1, 4> u = unit_quaternion<T>(P, "pose_matrix");
  M m = M::Identity(4, 4);
  m.topLeftCorner(3, 3) = quat_to_matrix<T>(u.data());
  m.topRightCorner(3, 1) = P.row(0).template tail<3>().transpose();
  return tape.record(std::move(m), {pose}, [pose](Tape<T>& t, const M& g) {
    const Eigen::Matrix<T, 1, 4> qr = t.value(pose).row(0).template head<4>();
    const Eigen::Matrix<T, 3, 3> g_r = g.topLeftCorner(3, 3);
    M& dp = t.grad_slot(pose);
    dp.row(0).template head<4>() += rotation_grad_to_quat<T>(qr, g_r);
    dp.row(0).template tail<3>() += g.topRightCorner(3, 1).transpose();
  });
}

template <typename T>
Var matmul(Tape<T>& tape, Var a, Var b) {
  using M = Tensor<T>;
  const M& A = tape.value(a);
  const M& B = tape.value(b);
  if (A.cols() != B.rows()) shape_fail("matmul", "a " + shape_of(A) + ", b " + shape_of(B));
  M y = A * B;
  return tape.record(std::move(y), {a, b}, [a, b](Tape<T>& t, const M& g) {
    if (t.requires_grad(a)) t.grad_slot(a).noalias() += g * t.value(b).transpose();
    if (t.requires_grad(b)) t.grad_slot(b).noalias() += t.value(a).transpose() * g;
  });
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  using M = Tensor<T>;
  const M& A = tape.value(a);
  const M& B = tape.value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) shape_fail("add", "a " + shape_of(A) + ", b " + shape_of(B));
  M y = A + B;
  return tape.record(std::move(y), {a, b}, [a, b](Tape<T>& t, const M& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

template <typename T>
Var scale(Tape<T>& tape, Var a, double s) {
  using M = Tensor<T>;
  M y = tape.value(a) * static_cast<T>(s);
  return tape.record(std::move(y), {a}, [a, s](Tape<T>& t, const M& g) { t.grad_slot(a) += g * static_cast<T>(s); });
}

template <typename T>
Var sum(Tape<T>& tape, Var a) {
  using M = Tensor<T>;
  const M& A = tape.value(a);
  M y(1, 1);
  y(0, 0) = A.sum();
  return tape.record(std::move(y), {a}, [a](Tape<T>& t, const M& g) { t.grad_slot(a).array() += g(0, 0); });
}

template <typename T>
Var slice_rows(Tape<T>& tape, Var x, Eigen::Index begin, Eigen::Index count) {
  using M = Tensor<T>;
  const M& X = tape.value(x);
  if (begin < 0 || count < 1 || begin + count > X.rows()) {
    shape_fail("slice_rows", "rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) + ") of " +
                                 shape_of(X));
  }
  M y = X.middleRows(begin, count);
  return tape.record(std::move(y), {x}, [x, begin, count](Tape<T>& t, const M& g) {
    t.grad_slot(x).middleRows(begin, count) += g;
  });
}

template <typename T>
Var stack_rows(Tape<T>& tape, const std::vector<Var>& parts) {
  using M = Tensor<T>;
  if (parts.empty()) shape_fail("stack_rows", "no inputs");
  Eigen::Index rows = 0;
  const Eigen::Index cols = tape.value(parts[0]).cols();
  for (const Var& v : parts) {
    const M& P = tape.value(v);
    if (P.cols() != cols) shape_fail("stack_rows", shape_of(P) + " vs " + std::to_string(cols) + " columns");
    rows += P.rows();
  }
  M y(rows, cols);
  std::vector<Eigen::Index> starts;
  Eigen::Index r = 0;
  for (const Var& v : parts) {
    const M& P = tape.value(v);
    starts.push_back(r);
    y.middleRows(r, P.rows()) = P;
    r += P.rows();
  }
  return tape.record(std::move(y), parts, [parts, starts](Tape<T>& t, const M& g) {
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (!t.requires_grad(parts[i])) continue;
      const Eigen::Index n = t.value(parts[i]).rows();
      t.grad_slot(parts[i]) += g.middleRows(starts[i], n);
    }
  });
}

template <typename T>
Var linear_max_pool(Tape<T>& tape, Var x, Var w, Var b, const std::vector<Eigen::Index>& offsets, bool apply_relu) {
  using M = Tensor<T>;
  const M& X = tape.value(x);
  const M& W = tape.value(w);
  const M& B = tape.value(b);
  if (X.cols() != W.cols() || B.rows() != 1 || B.cols() != W.rows()) {
    shape_fail("linear_max_pool", "x " + shape_of(X) + ", W " + shape_of(W) + ", b " + shape_of(B));
  }
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != X.rows()) {
    shape_fail("linear_max_pool", "segment offsets do not cover " + shape_of(X));
  }
  const auto segs = static_cast<Eigen::Index>(offsets.size() - 1);
  const Eigen::Index dout = W.rows();
  M y(segs, dout);
  // arg(s, c): winning row; -1 when relu clamps the maximum to zero.
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> arg(segs, dout);
  constexpr Eigen::Index kChunk = 64;
  M z;
  for (Eigen::Index s = 0; s < segs; ++s) {
    const Eigen::Index r0 = offsets[static_cast<std::size_t>(s)], r1 = offsets[static_cast<std::size_t>(s) + 1];
    if (r1 <= r0) shape_fail("linear_max_pool", "empty segment " + std::to_string(s));
    auto ys = y.row(s);
    auto as = arg.row(s);
    for (Eigen::Index c0 = r0; c0 < r1; c0 += kChunk) {
      const Eigen::Index n = std::min(kChunk, r1 - c0);
      z.resize(n, dout);
      z.noalias() = X.middleRows(c0, n) * W.transpose();
      z.rowwise() += B.row(0);
      for (Eigen::Index i = 0; i < n; ++i) {
        const T* zi = z.data() + i * dout;
        if (c0 == r0 && i == 0) {
          for (Eigen::Index c = 0; c < dout; ++c) {
            ys(c) = zi[c];
            as(c) = r0;
          }
          continue;
        }
        for (Eigen::Index c = 0; c < dout; ++c) {
          if (zi[c] > ys(c)) {
            ys(c) = zi[c];
            as(c) = c0 + i;
          }
        }
      }
    }
    if (apply_relu) {
      for (Eigen::Index c = 0; c < dout; ++c) {
        if (!(ys(c) > T(0))) {
          ys(c) = T(0);
          as(c) = -1;
        }
      }
    }
  }
  if (tape.tracking_branches()) {
    std::uint64_t h = 0;
    for (Eigen::Index i = 0; i < arg.size(); ++i) h = mix(h, static_cast<std::uint64_t>(arg.data()[i] + 1));
    tape.note_branch(h);
  }
  return tape.record(std::move(y), {x, w, b}, [x, w, b, arg = std::move(arg)](Tape<T>& t, const M& g) {
    const M& Xv = t.value(x);
    const M& Wv = t.value(w);
    M* dx = t.requires_grad(x) ? &t.grad_slot(x) : nullptr;
    M* dw = t.requires_grad(w) ? &t.grad_slot(w) : nullptr;
    M* db = t.requires_grad(b) ? &t.grad_slot(b) : nullptr;
    for (Eigen::Index s = 0; s < arg.rows(); ++s) {
      for (Eigen::Index c = 0; c < arg.cols(); ++c) {
        const Eigen::Index i = arg(s, c);
        const T gv = g(s, c);
        if (i < 0 || gv == T(0)) continue;
        if (dw) dw->row(c) += gv * Xv.row(i);
        if (dx) dx->row(i) += gv * Wv.row(c);
        if (db) (*db)(0, c) += gv;
      }
    }
  });
}

// ---- grad_check ----------------------------------------------------------------

GradCheckReport grad_check(const std::function<Var(Tape<double>&)>& build, ParamStore<double>& params,
                           const GradCheckOptions& opts) {
  auto evaluate = [&](std::uint64_t* sig) {
    Tape<double> t;
    t.set_track_branches(true);
    const Var loss = build(t);
    if (sig) *sig = t.branch_signature();
    return t.value(loss)(0, 0);
  };

  params.zero_grad();
  std::uint64_t base_sig = 0;
  {
    Tape<double> t;
    t.set_track_branches(true);
    const Var loss = build(t);
    base_sig = t.branch_signature();
    t.backward(loss);
  }

  GradCheckReport report;
  std::mt19937_64 rng(opts.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter<double>& p = params[pi];
    const Tensor<double> analytic = p.grad;
    ParamCheck pc;
    pc.name = p.name;
    const auto n = static_cast<std::size_t>(p.value.size());
    std::vector<std::size_t> entries;
    if (n <= opts.max_entries_per_tensor) {
      for (std::size_t i = 0; i < n; ++i) entries.push_back(i);
    } else {
      // Half the budget goes to the largest analytic entries (where errors
      // matter most), the rest is uniform.
      std::vector<std::size_t> order(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      const std::size_t top = opts.max_entries_per_tensor / 2;
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                        [&](std::size_t a, std::size_t b) {
                          const double va = std::abs(analytic.data()[a]), vb = std::abs(analytic.data()[b]);
                          return va > vb || (va == vb && a < b);
                        });
      entries.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top));
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      while (entries.size() < opts.max_entries_per_tensor) entries.push_back(pick(rng));
    }
    for (std::size_t e : entries) {
      double& slot = p.value.data()[e];
      const double orig = slot;
      std::uint64_t sp = 0, sm = 0;
      slot = orig + opts.step;
      const double lp = evaluate(&sp);
      slot = orig - opts.step;
      const double lm = evaluate(&sm);
      slot = orig;
      if (sp != base_sig || sm != base_sig) {
        ++pc.excluded;
        continue;
      }
      const double numeric = (lp - lm) / (2.0 * opts.step);
      const double a = analytic.data()[e];
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      pc.max_rel_error = std::max(pc.max_rel_error, rel);
      ++pc.checked;
    }
    pc.pass = pc.max_rel_error < opts.tolerance;
    report.pass = report.pass && pc.pass;
    report.max_rel_error = std::max(report.max_rel_error, pc.max_rel_error);
    report.excluded += pc.excluded;
    report.params.push_back(std::move(pc));
  }
  params.zero_grad();
  return report;
}

// ---- instantiations --------------------------------------------------------------

#define PCREG_AD_INSTANTIATE(T)                                                                   \
  template class ParamStore<T>;                                                                   \
  template class Tape<T>;                                                                         \
  template Var linear<T>(Tape<T>&, Var, Var, Var);                                                \
  template Var relu<T>(Tape<T>&, Var);                                                            \
  template Var max_pool_points<T>(Tape<T>&, Var);                                                 \
  template Var concat<T>(Tape<T>&, Var, Var);                                                     \
  template Var dropout<T>(Tape<T>&, Var, double, std::uint64_t, bool);                            \
  template Var quat_normalize<T>(Tape<T>&, Var);                                                  \
  template Var transform_points<T>(Tape<T>&, Var, Var);                                           \
  template Var pose_matrix<T>(Tape<T>&, Var);                                                     \
  template Var matmul<T>(Tape<T>&, Var, Var);                                                     \
  template Var add<T>(Tape<T>&, Var, Var);                                                        \
  template Var scale<T>(Tape<T>&, Var, double);                                                   \
  template Var sum<T>(Tape<T>&, Var);                                                             \
  template Var slice_rows<T>(Tape<T>&, Var, Eigen::Index, Eigen::Index);                          \
  template Var stack_rows<T>(Tape<T>&, const std::vector<Var>&);                                  \
  template Var linear_max_pool<T>(Tape<T>&, Var, Var, Var, const std::vector<Eigen::Index>&, bool); \
  template Eigen::Matrix<T, 3, 3> quat_to_matrix<T>(const T*);                                    \
  template void quat_matrix_partials<T>(const T*, Eigen::Matrix<T, 3, 3>(&)[4]);                  \
  template Eigen::Matrix<T, 1, 4> normalize_backward<T>(const T*, const Eigen::Matrix<T, 1, 4>&);

PCREG_AD_INSTANTIATE(float)
PCREG_AD_INSTANTIATE(double)

}  // namespace pcreg::ad
