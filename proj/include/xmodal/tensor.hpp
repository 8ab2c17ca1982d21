#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace xmodal {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tape;

namespace detail {
struct TensorData {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  std::vector<double> grad;  // empty == absent
  Tape* tape = nullptr;      // producing tape, non-owning
  int64_t node = -1;         // index on that tape
};
}  // namespace detail

// Dense double tensor participating in reverse-mode differentiation.
// Copies are handles to the same storage; clone() deep-copies.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double v);  // rank-0

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const;
  int rank() const;
  int64_t dim(int i) const;
  int64_t numel() const;

  const std::vector<double>& values() const;
  std::vector<double>& mutable_values();  // leaves only (optimizer, loaders)
  double item() const;                    // numel()==1

  bool requires_grad() const;
  void set_requires_grad(bool b);
  bool has_grad() const;
  const std::vector<double>& grad() const;
  void zero_grad();  // drop the buffer
  void accumulate_grad(const std::vector<double>& g);

  Tensor detach() const;  // value copy, off-tape, requires_grad=false
  Tensor clone() const;   // deep copy incl. requires_grad

  // True if a backward pass would propagate into or through this tensor.
  bool needs_grad() const;

  // Stable identity for optimizer bookkeeping.
  const void* id() const { return d_.get(); }

  std::shared_ptr<detail::TensorData> data_handle() const { return d_; }

 private:
  friend class Tape;
  explicit Tensor(std::shared_ptr<detail::TensorData> d) : d_(std::move(d)) {}
  std::shared_ptr<detail::TensorData> d_;
};

// Records operations in execution order (which is topological by
// construction). One tape per training iteration; thread-local activation.
class Tape {
 public:
  Tape() = default;
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  int64_t record(const char* name, std::function<void()> backward,
                 std::shared_ptr<detail::TensorData> out);
  size_t size() const { return nodes_.size(); }
  void clear();

  // Reverse sweep from the node that produced `root`.
  void backward_from(int64_t node_index);
  const char* node_name(int64_t i) const { return nodes_[size_t(i)].name; }

 private:
  struct Node {
    const char* name;
    std::function<void()> backward;
    std::shared_ptr<detail::TensorData> out;
  };
  std::vector<Node> nodes_;
};

// Activates a tape on this thread for its lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

// Suppresses recording while alive (evaluation, frozen-teacher forwards).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_recording_enabled();

// ---- primitive operations ------------------------------------------------
// Every op validates shapes, computes the forward value, and registers its
// backward rule when a tape is active and some input needs grad.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div_elem(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k]x[k,n]
Tensor transpose2d(const Tensor& a);
Tensor add_rows(const Tensor& x, const Tensor& bias);  // [B,D] + [D]
Tensor scale_rows(const Tensor& m, const Tensor& s);   // [K,D] rows * s[k]

// 2-D convolution, stride 1, zero padding preserving spatial size.
// x [B,Cin,H,W], w [Cout,Cin,k,k] with odd k in {1,3}, b [Cout].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp_elem(const Tensor& x);
Tensor log_elem(const Tensor& x);  // errors on non-positive input
// log(max(x, eps)); the clamp enters the log only, so 0*log_clamped(0)
// contributes exactly zero in entropy-style expressions.
Tensor log_clamped(const Tensor& x, double eps);
Tensor sqrt_elem(const Tensor& x);  // errors on negative input

Tensor softmax_rows(const Tensor& x);  // [B,K], numerically stable

Tensor sum_all(const Tensor& x);   // -> rank-0
Tensor mean_all(const Tensor& x);  // -> rank-0
Tensor sum_axis(const Tensor& x, int axis);   // 2-D only
Tensor mean_axis(const Tensor& x, int axis);  // 2-D only
Tensor squared_norm(const Tensor& x);  // sum of squares, rank-0

Tensor global_avg_pool(const Tensor& x);  // [B,C,H,W] -> [B,C]

// Batch standardization over axis 0 of [B,D]. Training mode uses the batch
// statistics and stores them in `stats`; eval mode reuses the stored ones.
struct BnStats {
  std::vector<double> mean;
  std::vector<double> var;
  bool valid = false;
};
Tensor batch_standardize(const Tensor& x, const Tensor& gamma,
                         const Tensor& beta, double eps, bool training,
                         BnStats& stats);

Tensor concat_rows(const std::vector<Tensor>& parts);  // along axis 0
Tensor reshape(const Tensor& x, Shape new_shape);

// ---- non-differentiable batch assembly ------------------------------------
// These produce leaves; they reject inputs that need grad.

Tensor gather_rows(const Tensor& data, const std::vector<int64_t>& indices);
Tensor repeat_channel(const Tensor& x, int64_t channels);  // [B,1,H,W]->[B,c,H,W]
Tensor one_hot(const std::vector<int>& labels, int64_t num_classes);

// ---- backward -------------------------------------------------------------

// Accumulates gradients of `root` (a scalar on the active tape) into every
// requires_grad ancestor. Each tape node is visited at most once.
void backward(const Tensor& root);

}  // namespace xmodal
