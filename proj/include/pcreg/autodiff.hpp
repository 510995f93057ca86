#pragma once

// Minimal reverse-mode differentiation over a fixed primitive set. All
// tensors are 2-D row-major matrices: point sets are N x D, feature vectors
// and poses are 1 x D.

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace pcreg::ad {

template <typename T>
using Tensor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;    // same shape as value
  Tensor<T> adam_m;  // optimizer state, same shape as value
  Tensor<T> adam_v;
};

/// Named trainable tensors in insertion order. Shapes are fixed once added.
template <typename T>
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore& other);
  ParamStore& operator=(const ParamStore& other);
  ParamStore(ParamStore&&) noexcept = default;
  ParamStore& operator=(ParamStore&&) noexcept = default;

  Parameter<T>& add(const std::string& name, Tensor<T> init);
  Parameter<T>& at(const std::string& name);
  const Parameter<T>& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

  void zero_grad();
  std::size_t scalar_count() const;

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& p : params_) out.add(p->name, p->value.template cast<U>());
    return out;
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Records primitive applications in evaluation order (which is a
/// topological order) and replays their adjoints in reverse.
template <typename T>
class Tape {
 public:
  using Matrix = Tensor<T>;
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  Var constant(Matrix value);
  /// A leaf whose gradient is collected on the tape (read with grad()).
  Var leaf(Matrix value);
  /// A leaf bound to a parameter; backward() accumulates into p.grad.
  Var parameter(Parameter<T>& p);
  /// Records a custom primitive. `fn` runs only when some input needs a
  /// gradient; it must route `out_grad` into the inputs via accumulate() or
  /// grad_slot().
  Var record(Matrix value, std::vector<Var> inputs, BackwardFn fn);

  const Matrix& value(Var v) const;
  /// Gradient after backward(); an empty matrix if nothing reached `v`.
  const Matrix& grad(Var v) const;
  bool requires_grad(Var v) const;

  void accumulate(Var v, const Matrix& g);
  /// Zero-initialized on first use within a backward pass.
  Matrix& grad_slot(Var v);

  /// `loss` must be 1 x 1. Parameter gradients are accumulated (not reset).
  void backward(Var loss);
  void backward(Var out, const Matrix& seed);

  /// When enabled, primitives with non-smooth branches (relu signs, max-pool
  /// winners, nearest-neighbour choices) fold their decisions into
  /// branch_signature(). Used by grad_check to spot kinks.
  void set_track_branches(bool on) { track_branches_ = on; }
  bool tracking_branches() const { return track_branches_; }
  void note_branch(std::uint64_t h);
  std::uint64_t branch_signature() const { return signature_; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Parameter<T>* param = nullptr;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<Var> inputs;
    BackwardFn backward;
  };

  Node& node(Var v);
  const Node& node(Var v) const;

  std::deque<Node> nodes_;
  bool track_branches_ = false;
  std::uint64_t signature_ = 1469598103934665603ull;
};

// ---- primitives -----------------------------------------------------------

/// y = x W^T + b for x: N x Din, W: Dout x Din, b: 1 x Dout.
template <typename T>
Var linear(Tape<T>& tape, Var x, Var w, Var b);
template <typename T>
Var relu(Tape<T>& tape, Var x);
/// N x D -> 1 x D coordinatewise max; ties go to the lowest point index.
template <typename T>
Var max_pool_points(Tape<T>& tape, Var x);
/// Concatenates along the feature dimension; row counts must match.
template <typename T>
Var concat(Tape<T>& tape, Var a, Var b);
/// Inverted dropout. With train == false (or rate == 0) returns `x` itself.
template <typename T>
Var dropout(Tape<T>& tape, Var x, double rate, std::uint64_t seed, bool train);
/// 1 x 4 quaternion -> unit quaternion. Throws DegeneratePose on norm <= 1e-12.
template <typename T>
Var quat_normalize(Tape<T>& tape, Var q);
/// pose: 1 x 7 raw (qw, qx, qy, qz, tx, ty, tz); cloud: N x 3.
/// Returns R(q / |q|) p + t per row. The cloud receives a gradient only when
/// it is itself differentiable.
template <typename T>
Var transform_points(Tape<T>& tape, Var pose, Var cloud);
/// 1 x 7 raw pose -> 4 x 4 homogeneous matrix (quaternion normalized).
template <typename T>
Var pose_matrix(Tape<T>& tape, Var pose);
template <typename T>
Var matmul(Tape<T>& tape, Var a, Var b);
template <typename T>
Var add(Tape<T>& tape, Var a, Var b);
template <typename T>
Var scale(Tape<T>& tape, Var a, double s);
/// Sum of all entries -> 1 x 1.
template <typename T>
Var sum(Tape<T>& tape, Var a);

/// Rows [begin, begin + count) of x.
template <typename T>
Var slice_rows(Tape<T>& tape, Var x, Eigen::Index begin, Eigen::Index count);
/// Vertical concatenation; column counts must match. A part may repeat.
template <typename T>
Var stack_rows(Tape<T>& tape, const std::vector<Var>& parts);
/// Fused linear (+ optional relu) + max pool over row segments: output row s
/// is the coordinatewise max over rows offsets[s] .. offsets[s+1]-1 of
/// relu(x W^T + b). Same values and adjoints as the unfused chain, without
/// keeping the N x Dout activation.
template <typename T>
Var linear_max_pool(Tape<T>& tape, Var x, Var w, Var b, const std::vector<Eigen::Index>& offsets, bool apply_relu);

/// Rotation matrix of a unit quaternion (w, x, y, z) and its partials.
template <typename T>
Eigen::Matrix<T, 3, 3> quat_to_matrix(const T* q);
template <typename T>
void quat_matrix_partials(const T* q, Eigen::Matrix<T, 3, 3> (&d)[4]);
/// Maps dL/dq_unit to dL/dq_raw through q_unit = q_raw / |q_raw|.
template <typename T>
Eigen::Matrix<T, 1, 4> normalize_backward(const T* q_raw, const Eigen::Matrix<T, 1, 4>& g_unit);

// ---- gradient checking -----------------------------------------------------

struct GradCheckOptions {
  double step = 1e-6;
  double tolerance = 1e-3;
  /// Relative error is |a - n| / max(|a|, |n|, abs_floor).
  double abs_floor = 1e-8;
  /// Per-tensor cap on checked entries; larger tensors are sampled.
  std::size_t max_entries_per_tensor = 24;
  std::uint64_t seed = 7;
};

struct ParamCheck {
  std::string name;
  std::size_t checked = 0;
  std::size_t excluded = 0;  // perturbation crossed a kink
  double max_rel_error = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  bool pass = true;
  double max_rel_error = 0.0;
  std::size_t excluded = 0;
};

/// `build` must record a scalar loss on the given tape, reading parameters
/// from `params` through Tape::parameter, and be deterministic.
GradCheckReport grad_check(const std::function<Var(Tape<double>&)>& build, ParamStore<double>& params,
                           const GradCheckOptions& opts = {});

}  // namespace pcreg::ad
