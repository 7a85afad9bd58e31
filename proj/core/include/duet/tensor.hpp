#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace duet {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// operand/shape mismatches, bad axes, bad ids
struct ShapeError : TensorError {
  using TensorError::TensorError;
};
// NaN/Inf detected by the check barrier
struct NumericError : TensorError {
  using TensorError::TensorError;
};

// When enabled, every primitive scans its output for NaN/Inf and throws
// NumericError instead of letting the value propagate. Process-wide.
void set_nan_barrier(bool on);
bool nan_barrier_enabled();

namespace detail {
struct Node;
}

// Value-semantics handle to a node of the autodiff graph. Primitives build
// the graph eagerly: the forward value is computed once at construction and
// repeated reads return the same buffer. Gradients accumulate into leaf
// tensors across backward() calls until zero_grad().
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const;
  int64_t dim(int axis) const;
  int64_t numel() const;

  const std::vector<double>& data() const;
  // leaf tensors only (parameters, inputs); graph nodes are immutable
  std::vector<double>& mutable_data();

  double value() const;  // numel() == 1

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);  // leaf only

  bool has_grad() const;
  const std::vector<double>& grad() const;
  std::vector<double>& mutable_grad();
  void ensure_grad();  // allocate zeroed grad buffer if absent
  void zero_grad();    // reset accumulated gradient to zeros
  void drop_grad();    // deallocate the buffer entirely

  bool is_leaf() const;
  const void* node_id() const;

 private:
  friend struct detail::Node;
  friend Tensor make_op(const char* name, Shape shape, std::vector<double> value,
                        std::vector<Tensor> inputs,
                        std::function<void(detail::Node&)> backward);
  friend void backward(const Tensor& loss);

  std::shared_ptr<detail::Node> node_;
};

// ---- primitive catalog ----

// batched matrix product: [..., m, k] x [..., k, n]; leading dims must match
// exactly, or either operand may be rank-2 and is broadcast over the batch
Tensor matmul(const Tensor& a, const Tensor& b);
// elementwise with numpy-style right-aligned broadcasting
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor transpose(const Tensor& a, int axis0, int axis1);
Tensor reshape(const Tensor& a, Shape new_shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, int64_t start, int64_t len);
Tensor softmax(const Tensor& a, int axis);
// normalizes over the last axis with biased variance
Tensor layer_norm(const Tensor& a, double eps);
Tensor gelu(const Tensor& a);  // exact erf form
// table [V, d], ids laid out per id_shape -> [id_shape..., d]
Tensor embedding_lookup(const Tensor& table, const std::vector<int64_t>& ids, Shape id_shape);
// logits [N, C], integer targets with -1 = ignore; mean over scored rows,
// exactly 0 when nothing is scored
Tensor cross_entropy(const Tensor& logits, const std::vector<int64_t>& targets);
Tensor mean(const Tensor& a);
Tensor sum(const Tensor& a);
// keep broadcasts to a's shape; out = keep != 0 ? a : fill
Tensor mask_fill(const Tensor& a, const Tensor& keep, double fill);
// value copy with no graph linkage (stop-gradient)
Tensor detach(const Tensor& a);

inline Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

// loss must be scalar; populates grads of every reachable requires_grad tensor
void backward(const Tensor& loss);

// number of scored (target >= 0) rows, shared by the loss heads
int64_t count_scored(const std::vector<int64_t>& targets);

}  // namespace duet
