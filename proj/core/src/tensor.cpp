#include "duet/tensor.hpp"

#include <cblas.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <unordered_set>

namespace duet {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

namespace {

std::atomic<bool> g_nan_barrier{true};

void pin_blas_threads() {
  // OpenBLAS reads this lazily before its first kernel; one core anyway,
  // and a fixed thread count keeps reduction order fixed.
  static std::once_flag flag;
  std::call_once(flag, [] { ::setenv("OPENBLAS_NUM_THREADS", "1", 0); });
}

[[noreturn]] void shape_fail(const std::string& msg) { throw ShapeError(msg); }

}  // namespace

void set_nan_barrier(bool on) { g_nan_barrier.store(on, std::memory_order_relaxed); }
bool nan_barrier_enabled() { return g_nan_barrier.load(std::memory_order_relaxed); }

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on demand
  bool requires_grad = false;
  bool leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  int64_t numel() const { return static_cast<int64_t>(value.size()); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

using detail::Node;

// ---- Tensor handle ----

static std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
  int64_t n = shape_numel(shape);
  if (static_cast<int64_t>(data.size()) != n)
    shape_fail("tensor: data length " + std::to_string(data.size()) + " does not match shape " +
               shape_str(shape));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  node->leaf = true;
  return node;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> d(static_cast<size_t>(shape_numel(shape)), 0.0);
  Tensor t;
  t.node_ = make_leaf(std::move(shape), std::move(d), requires_grad);
  return t;
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> d(static_cast<size_t>(shape_numel(shape)), value);
  Tensor t;
  t.node_ = make_leaf(std::move(shape), std::move(d), requires_grad);
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  Tensor t;
  t.node_ = make_leaf(std::move(shape), std::move(data), requires_grad);
  return t;
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

static const std::shared_ptr<Node>& checked(const std::shared_ptr<Node>& n) {
  if (!n) throw TensorError("tensor: use of undefined tensor");
  return n;
}

const Shape& Tensor::shape() const { return checked(node_)->shape; }
int Tensor::rank() const { return static_cast<int>(shape().size()); }

int64_t Tensor::dim(int axis) const {
  const Shape& s = shape();
  if (axis < 0) axis += static_cast<int>(s.size());
  if (axis < 0 || axis >= static_cast<int>(s.size()))
    shape_fail("dim: axis out of range for " + shape_str(s));
  return s[static_cast<size_t>(axis)];
}

int64_t Tensor::numel() const { return checked(node_)->numel(); }

const std::vector<double>& Tensor::data() const { return checked(node_)->value; }

std::vector<double>& Tensor::mutable_data() {
  auto& n = checked(node_);
  if (!n->leaf) throw TensorError("tensor: mutable_data on a non-leaf graph node");
  return n->value;
}

double Tensor::value() const {
  if (numel() != 1)
    throw TensorError("tensor: value() requires a scalar, got shape " + shape_str(shape()));
  return data()[0];
}

bool Tensor::requires_grad() const { return checked(node_)->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  auto& n = checked(node_);
  if (!n->leaf) throw TensorError("tensor: set_requires_grad on a non-leaf graph node");
  n->requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return !checked(node_)->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  auto& n = checked(node_);
  if (n->grad.empty())
    throw TensorError("tensor: gradient requested but never populated (op " +
                      std::string(n->op) + ")");
  return n->grad;
}

std::vector<double>& Tensor::mutable_grad() {
  checked(node_)->ensure_grad();
  return node_->grad;
}

void Tensor::ensure_grad() { checked(node_)->ensure_grad(); }

void Tensor::zero_grad() {
  auto& n = checked(node_);
  if (!n->grad.empty()) std::fill(n->grad.begin(), n->grad.end(), 0.0);
}

void Tensor::drop_grad() { checked(node_)->grad.clear(); }

bool Tensor::is_leaf() const { return checked(node_)->leaf; }
const void* Tensor::node_id() const { return node_.get(); }

// ---- op construction ----

Tensor make_op(const char* name, Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
               std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->leaf = false;
  node->op = name;
  bool rg = false;
  node->inputs.reserve(inputs.size());
  for (const Tensor& t : inputs) {
    rg = rg || t.requires_grad();
    node->inputs.push_back(t.node_);
  }
  node->requires_grad = rg;
  if (rg) node->backward_fn = std::move(backward);
  if (nan_barrier_enabled()) {
    for (double v : node->value) {
      if (!std::isfinite(v))
        throw NumericError(std::string("numeric check: op '") + name +
                           "' produced a non-finite value");
    }
  }
  Tensor t;
  t.node_ = node;
  return t;
}

// ---- broadcasting helpers ----

namespace {

// right-aligned broadcast of `small` against `big`; every dim of small must
// equal the corresponding dim of big or be 1
bool broadcastable_to(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  size_t off = big.size() - small.size();
  for (size_t i = 0; i < small.size(); ++i)
    if (small[i] != big[off + i] && small[i] != 1) return false;
  return true;
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (size_t i = 0; i < r; ++i) {
    int64_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    int64_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1)
      shape_fail(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

std::vector<int64_t> strides_for(const Shape& s) {
  std::vector<int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i)
    st[static_cast<size_t>(i)] = st[static_cast<size_t>(i) + 1] * s[static_cast<size_t>(i) + 1];
  return st;
}

// strides of `src` viewed through broadcast shape `out` (0 on broadcast dims)
std::vector<int64_t> broadcast_strides(const Shape& src, const Shape& out) {
  std::vector<int64_t> st(out.size(), 0);
  auto src_st = strides_for(src);
  size_t off = out.size() - src.size();
  for (size_t i = 0; i < src.size(); ++i)
    if (src[i] != 1) st[off + i] = src_st[i];
  return st;
}

// apply fn(out_index, a_index, b_index) over every element of `out`
template <class F>
void for_broadcast(const Shape& out, const Shape& a, const Shape& b, F&& fn) {
  int64_t n = shape_numel(out);
  auto sa = broadcast_strides(a, out);
  auto sb = broadcast_strides(b, out);
  size_t r = out.size();
  std::vector<int64_t> idx(r, 0);
  int64_t ia = 0, ib = 0;
  for (int64_t io = 0; io < n; ++io) {
    fn(io, ia, ib);
    for (int d = static_cast<int>(r) - 1; d >= 0; --d) {
      size_t ud = static_cast<size_t>(d);
      idx[ud]++;
      ia += sa[ud];
      ib += sb[ud];
      if (idx[ud] < out[ud]) break;
      ia -= sa[ud] * out[ud];
      ib -= sb[ud] * out[ud];
      idx[ud] = 0;
    }
  }
}

// reduce `src` (laid out as shape `from`) into shape `to` by summing over
// broadcast dims; `to` must be broadcastable to `from`
void reduce_into(const std::vector<double>& src, const Shape& from, std::vector<double>& dst,
                 const Shape& to) {
  if (from == to) {
    for (size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
    return;
  }
  auto st = broadcast_strides(to, from);
  size_t r = from.size();
  std::vector<int64_t> idx(r, 0);
  int64_t it = 0;
  int64_t n = shape_numel(from);
  for (int64_t i = 0; i < n; ++i) {
    dst[static_cast<size_t>(it)] += src[static_cast<size_t>(i)];
    for (int d = static_cast<int>(r) - 1; d >= 0; --d) {
      size_t ud = static_cast<size_t>(d);
      idx[ud]++;
      it += st[ud];
      if (idx[ud] < from[ud]) break;
      it -= st[ud] * from[ud];
      idx[ud] = 0;
    }
  }
}

}  // namespace

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  Shape out = broadcast_shape(sa, sb, "add");
  std::vector<double> v(static_cast<size_t>(shape_numel(out)));
  const auto& da = a.data();
  const auto& db = b.data();
  if (sa == sb) {
    for (size_t i = 0; i < v.size(); ++i) v[i] = da[i] + db[i];
  } else if (broadcastable_to(sb, sa) && shape_numel(sb) > 0 &&
             sb == Shape(sa.end() - sb.size(), sa.end())) {
    // exact suffix (bias-add fast path)
    size_t m = db.size();
    for (size_t i = 0; i < v.size(); ++i) v[i] = da[i] + db[i % m];
  } else {
    for_broadcast(out, sa, sb, [&](int64_t io, int64_t ia, int64_t ib) {
      v[static_cast<size_t>(io)] = da[static_cast<size_t>(ia)] + db[static_cast<size_t>(ib)];
    });
  }
  return make_op("add", out, std::move(v), {a, b}, [sa, sb](Node& n) {
    if (n.inputs[0]->requires_grad) {
      n.inputs[0]->ensure_grad();
      reduce_into(n.grad, n.shape, n.inputs[0]->grad, sa);
    }
    if (n.inputs[1]->requires_grad) {
      n.inputs[1]->ensure_grad();
      reduce_into(n.grad, n.shape, n.inputs[1]->grad, sb);
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  Shape out = broadcast_shape(sa, sb, "mul");
  std::vector<double> v(static_cast<size_t>(shape_numel(out)));
  const auto& da = a.data();
  const auto& db = b.data();
  if (sa == sb) {
    for (size_t i = 0; i < v.size(); ++i) v[i] = da[i] * db[i];
  } else {
    for_broadcast(out, sa, sb, [&](int64_t io, int64_t ia, int64_t ib) {
      v[static_cast<size_t>(io)] = da[static_cast<size_t>(ia)] * db[static_cast<size_t>(ib)];
    });
  }
  return make_op("mul", out, std::move(v), {a, b}, [sa, sb](Node& n) {
    const auto& da = n.inputs[0]->value;
    const auto& db = n.inputs[1]->value;
    std::vector<double> tmp(n.grad.size());
    if (n.inputs[0]->requires_grad) {
      for_broadcast(n.shape, sa, sb, [&](int64_t io, int64_t, int64_t ib) {
        tmp[static_cast<size_t>(io)] =
            n.grad[static_cast<size_t>(io)] * db[static_cast<size_t>(ib)];
      });
      n.inputs[0]->ensure_grad();
      reduce_into(tmp, n.shape, n.inputs[0]->grad, sa);
    }
    if (n.inputs[1]->requires_grad) {
      for_broadcast(n.shape, sa, sb, [&](int64_t io, int64_t ia, int64_t) {
        tmp[static_cast<size_t>(io)] =
            n.grad[static_cast<size_t>(io)] * da[static_cast<size_t>(ia)];
      });
      n.inputs[1]->ensure_grad();
      reduce_into(tmp, n.shape, n.inputs[1]->grad, sb);
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> v(a.data());
  for (double& x : v) x *= s;
  return make_op("scale", a.shape(), std::move(v), {a}, [s](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    auto& g = n.inputs[0]->grad;
    for (size_t i = 0; i < g.size(); ++i) g[i] += s * n.grad[i];
  });
}

// ---- matmul ----

namespace {

struct MatmulPlan {
  int64_t batch, m, k, n;
  bool a_batched, b_batched;
  Shape out;
};

MatmulPlan plan_matmul(const Shape& sa, const Shape& sb) {
  if (sa.size() < 2 || sb.size() < 2)
    shape_fail("matmul: operands must have rank >= 2, got " + shape_str(sa) + " and " +
               shape_str(sb));
  int64_t m = sa[sa.size() - 2], k = sa[sa.size() - 1];
  int64_t kb = sb[sb.size() - 2], n = sb[sb.size() - 1];
  if (k != kb)
    shape_fail("matmul: inner dims disagree, lhs " + shape_str(sa) + " rhs " + shape_str(sb));
  Shape batch_a(sa.begin(), sa.end() - 2);
  Shape batch_b(sb.begin(), sb.end() - 2);
  MatmulPlan p;
  if (batch_a == batch_b) {
    p.out = batch_a;
  } else if (batch_b.empty()) {
    p.out = batch_a;
  } else if (batch_a.empty()) {
    p.out = batch_b;
  } else {
    shape_fail("matmul: batch dims disagree, lhs " + shape_str(sa) + " rhs " + shape_str(sb));
  }
  p.batch = shape_numel(p.out);
  p.a_batched = !batch_a.empty();
  p.b_batched = !batch_b.empty();
  p.m = m;
  p.k = k;
  p.n = n;
  p.out.push_back(m);
  p.out.push_back(n);
  return p;
}

// C[m,n] (+)= A[m,k] x B[k,n], optionally transposing stored operands
void gemm(bool ta, bool tb, int64_t m, int64_t n, int64_t k, const double* a, const double* b,
          double* c, double beta) {
  pin_blas_threads();
  // lda/ldb reflect the stored (untransposed) row-major layout
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
              static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0, a,
              ta ? static_cast<int>(m) : static_cast<int>(k), b,
              tb ? static_cast<int>(k) : static_cast<int>(n), beta, c, static_cast<int>(n));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  MatmulPlan p = plan_matmul(a.shape(), b.shape());
  std::vector<double> v(static_cast<size_t>(shape_numel(p.out)));
  const double* da = a.data().data();
  const double* db = b.data().data();
  for (int64_t i = 0; i < p.batch; ++i) {
    gemm(false, false, p.m, p.n, p.k, da + (p.a_batched ? i * p.m * p.k : 0),
         db + (p.b_batched ? i * p.k * p.n : 0), v.data() + i * p.m * p.n, 0.0);
  }
  return make_op("matmul", p.out, std::move(v), {a, b}, [p](Node& nd) {
    const double* da = nd.inputs[0]->value.data();
    const double* db = nd.inputs[1]->value.data();
    const double* dc = nd.grad.data();
    if (nd.inputs[0]->requires_grad) {
      nd.inputs[0]->ensure_grad();
      double* ga = nd.inputs[0]->grad.data();
      for (int64_t i = 0; i < p.batch; ++i) {
        // dA = dC x B^T; accumulate over batch when A is broadcast
        gemm(false, true, p.m, p.k, p.n, dc + i * p.m * p.n,
             db + (p.b_batched ? i * p.k * p.n : 0), ga + (p.a_batched ? i * p.m * p.k : 0), 1.0);
      }
    }
    if (nd.inputs[1]->requires_grad) {
      nd.inputs[1]->ensure_grad();
      double* gb = nd.inputs[1]->grad.data();
      for (int64_t i = 0; i < p.batch; ++i) {
        // dB = A^T x dC
        gemm(true, false, p.k, p.n, p.m, da + (p.a_batched ? i * p.m * p.k : 0),
             dc + i * p.m * p.n, gb + (p.b_batched ? i * p.k * p.n : 0), 1.0);
      }
    }
  });
}

// ---- layout ops ----

Tensor transpose(const Tensor& a, int axis0, int axis1) {
  Shape s = a.shape();
  int r = static_cast<int>(s.size());
  if (axis0 < 0) axis0 += r;
  if (axis1 < 0) axis1 += r;
  if (axis0 < 0 || axis0 >= r || axis1 < 0 || axis1 >= r)
    shape_fail("transpose: axes out of range for " + shape_str(s));
  Shape out = s;
  std::swap(out[static_cast<size_t>(axis0)], out[static_cast<size_t>(axis1)]);
  auto permute = [axis0, axis1](const std::vector<double>& src, const Shape& from,
                                const Shape& to) {
    auto from_st = strides_for(from);
    std::swap(from_st[static_cast<size_t>(axis0)], from_st[static_cast<size_t>(axis1)]);
    std::vector<double> dst(src.size());
    size_t rr = to.size();
    std::vector<int64_t> idx(rr, 0);
    int64_t is = 0;
    for (size_t io = 0; io < dst.size(); ++io) {
      dst[io] = src[static_cast<size_t>(is)];
      for (int d = static_cast<int>(rr) - 1; d >= 0; --d) {
        size_t ud = static_cast<size_t>(d);
        idx[ud]++;
        is += from_st[ud];
        if (idx[ud] < to[ud]) break;
        is -= from_st[ud] * to[ud];
        idx[ud] = 0;
      }
    }
    return dst;
  };
  std::vector<double> v = permute(a.data(), s, out);
  return make_op("transpose", out, std::move(v), {a},
                 [permute, s, out](Node& n) {
                   if (!n.inputs[0]->requires_grad) return;
                   std::vector<double> gt = permute(n.grad, out, s);
                   n.inputs[0]->ensure_grad();
                   auto& g = n.inputs[0]->grad;
                   for (size_t i = 0; i < g.size(); ++i) g[i] += gt[i];
                 });
}

Tensor reshape(const Tensor& a, Shape new_shape) {
  if (shape_numel(new_shape) != a.numel())
    shape_fail("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(new_shape));
  std::vector<double> v = a.data();
  return make_op("reshape", std::move(new_shape), std::move(v), {a}, [](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    auto& g = n.inputs[0]->grad;
    for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
  });
}

namespace {
// decompose shape around `axis` into [outer, axis_len, inner]
void axis_split(const Shape& s, int axis, int64_t& outer, int64_t& len, int64_t& inner) {
  outer = 1;
  inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
  len = s[static_cast<size_t>(axis)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) inner *= s[i];
}

int norm_axis(int axis, size_t rank, const char* op) {
  int r = static_cast<int>(rank);
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) shape_fail(std::string(op) + ": axis out of range");
  return axis;
}
}  // namespace

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) shape_fail("concat: no inputs");
  Shape base = parts[0].shape();
  axis = norm_axis(axis, base.size(), "concat");
  int64_t total = 0;
  for (const Tensor& t : parts) {
    const Shape& s = t.shape();
    if (s.size() != base.size()) shape_fail("concat: rank mismatch between parts");
    for (size_t i = 0; i < s.size(); ++i)
      if (static_cast<int>(i) != axis && s[i] != base[i])
        shape_fail("concat: part shape " + shape_str(s) + " incompatible with " + shape_str(base));
    total += s[static_cast<size_t>(axis)];
  }
  Shape out = base;
  out[static_cast<size_t>(axis)] = total;
  int64_t outer, len_out, inner;
  axis_split(out, axis, outer, len_out, inner);
  std::vector<double> v(static_cast<size_t>(shape_numel(out)));
  std::vector<int64_t> lens;
  int64_t off = 0;
  for (const Tensor& t : parts) {
    int64_t len = t.shape()[static_cast<size_t>(axis)];
    lens.push_back(len);
    const auto& src = t.data();
    for (int64_t o = 0; o < outer; ++o)
      std::copy_n(src.data() + o * len * inner, len * inner,
                  v.data() + (o * len_out + off) * inner);
    off += len;
  }
  return make_op("concat", out, std::move(v), parts, [outer, len_out, inner, lens](Node& n) {
    int64_t off = 0;
    for (size_t pi = 0; pi < n.inputs.size(); ++pi) {
      int64_t len = lens[pi];
      if (n.inputs[pi]->requires_grad) {
        n.inputs[pi]->ensure_grad();
        double* g = n.inputs[pi]->grad.data();
        for (int64_t o = 0; o < outer; ++o) {
          const double* src = n.grad.data() + (o * len_out + off) * inner;
          double* dst = g + o * len * inner;
          for (int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
        }
      }
      off += len;
    }
  });
}

Tensor slice(const Tensor& a, int axis, int64_t start, int64_t len) {
  Shape s = a.shape();
  axis = norm_axis(axis, s.size(), "slice");
  int64_t dim = s[static_cast<size_t>(axis)];
  if (start < 0 || len < 0 || start + len > dim)
    shape_fail("slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
               ") out of bounds for axis of size " + std::to_string(dim));
  Shape out = s;
  out[static_cast<size_t>(axis)] = len;
  int64_t outer, full, inner;
  axis_split(s, axis, outer, full, inner);
  std::vector<double> v(static_cast<size_t>(shape_numel(out)));
  const auto& src = a.data();
  for (int64_t o = 0; o < outer; ++o)
    std::copy_n(src.data() + (o * full + start) * inner, len * inner, v.data() + o * len * inner);
  return make_op("slice", out, std::move(v), {a}, [outer, full, inner, start, len](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    double* g = n.inputs[0]->grad.data();
    for (int64_t o = 0; o < outer; ++o) {
      const double* src = n.grad.data() + o * len * inner;
      double* dst = g + (o * full + start) * inner;
      for (int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
    }
  });
}

// ---- nonlinear ----

Tensor softmax(const Tensor& a, int axis) {
  Shape s = a.shape();
  axis = norm_axis(axis, s.size(), "softmax");
  int64_t outer, len, inner;
  axis_split(s, axis, outer, len, inner);
  std::vector<double> v(a.data());
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      double* base = v.data() + o * len * inner + in;
      double mx = -INFINITY;
      for (int64_t i = 0; i < len; ++i) mx = std::max(mx, base[i * inner]);
      double z = 0.0;
      for (int64_t i = 0; i < len; ++i) {
        double e = std::exp(base[i * inner] - mx);
        base[i * inner] = e;
        z += e;
      }
      for (int64_t i = 0; i < len; ++i) base[i * inner] /= z;
    }
  }
  return make_op("softmax", s, std::move(v), {a}, [outer, len, inner](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    const double* y = n.value.data();
    const double* dy = n.grad.data();
    double* dx = n.inputs[0]->grad.data();
    for (int64_t o = 0; o < outer; ++o) {
      for (int64_t in = 0; in < inner; ++in) {
        int64_t base = o * len * inner + in;
        double dot = 0.0;
        for (int64_t i = 0; i < len; ++i) dot += dy[base + i * inner] * y[base + i * inner];
        for (int64_t i = 0; i < len; ++i)
          dx[base + i * inner] += y[base + i * inner] * (dy[base + i * inner] - dot);
      }
    }
  });
}

Tensor layer_norm(const Tensor& a, double eps) {
  const Shape& s = a.shape();
  if (s.empty()) shape_fail("layer_norm: rank-0 input");
  int64_t d = s.back();
  int64_t rows = a.numel() / d;
  std::vector<double> v(static_cast<size_t>(a.numel()));
  std::vector<double> inv_std(static_cast<size_t>(rows));
  const auto& x = a.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = x.data() + r * d;
    double mu = 0.0;
    for (int64_t i = 0; i < d; ++i) mu += row[i];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t i = 0; i < d; ++i) {
      double c = row[i] - mu;
      var += c * c;
    }
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<size_t>(r)] = inv;
    double* out = v.data() + r * d;
    for (int64_t i = 0; i < d; ++i) out[i] = (row[i] - mu) * inv;
  }
  return make_op("layer_norm", s, std::move(v), {a}, [rows, d, inv_std](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    const double* y = n.value.data();
    const double* dy = n.grad.data();
    double* dx = n.inputs[0]->grad.data();
    for (int64_t r = 0; r < rows; ++r) {
      const double* yr = y + r * d;
      const double* gr = dy + r * d;
      double mg = 0.0, mgy = 0.0;
      for (int64_t i = 0; i < d; ++i) {
        mg += gr[i];
        mgy += gr[i] * yr[i];
      }
      mg /= static_cast<double>(d);
      mgy /= static_cast<double>(d);
      double inv = inv_std[static_cast<size_t>(r)];
      double* dr = dx + r * d;
      for (int64_t i = 0; i < d; ++i) dr[i] += inv * (gr[i] - mg - yr[i] * mgy);
    }
  });
}

Tensor gelu(const Tensor& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  std::vector<double> v(a.data());
  for (double& x : v) x = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  return make_op("gelu", a.shape(), std::move(v), {a}, [](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    const auto& x = n.inputs[0]->value;
    auto& g = n.inputs[0]->grad;
    for (size_t i = 0; i < g.size(); ++i) {
      double xi = x[i];
      double phi = 0.5 * (1.0 + std::erf(xi * kInvSqrt2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * xi * xi);
      g[i] += n.grad[i] * (phi + xi * pdf);
    }
  });
}

// ---- indexed ops ----

Tensor embedding_lookup(const Tensor& table, const std::vector<int64_t>& ids, Shape id_shape) {
  const Shape& ts = table.shape();
  if (ts.size() != 2) shape_fail("embedding_lookup: table must be [V, d], got " + shape_str(ts));
  int64_t v_count = ts[0], d = ts[1];
  if (shape_numel(id_shape) != static_cast<int64_t>(ids.size()))
    shape_fail("embedding_lookup: id count does not match id_shape " + shape_str(id_shape));
  for (int64_t id : ids)
    if (id < 0 || id >= v_count)
      throw TensorError("embedding_lookup: id " + std::to_string(id) +
                        " out of range for table with " + std::to_string(v_count) + " rows");
  Shape out = id_shape;
  out.push_back(d);
  std::vector<double> v(static_cast<size_t>(ids.size()) * static_cast<size_t>(d));
  const auto& tab = table.data();
  for (size_t i = 0; i < ids.size(); ++i)
    std::copy_n(tab.data() + ids[i] * d, d, v.data() + static_cast<int64_t>(i) * d);
  return make_op("embedding_lookup", out, std::move(v), {table}, [ids, d](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    double* g = n.inputs[0]->grad.data();
    const double* dy = n.grad.data();
    for (size_t i = 0; i < ids.size(); ++i) {
      double* row = g + ids[i] * d;
      const double* src = dy + static_cast<int64_t>(i) * d;
      for (int64_t j = 0; j < d; ++j) row[j] += src[j];
    }
  });
}

int64_t count_scored(const std::vector<int64_t>& targets) {
  int64_t c = 0;
  for (int64_t t : targets)
    if (t >= 0) ++c;
  return c;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int64_t>& targets) {
  const Shape& s = logits.shape();
  if (s.size() != 2) shape_fail("cross_entropy: logits must be [N, C], got " + shape_str(s));
  int64_t n_rows = s[0], classes = s[1];
  if (static_cast<int64_t>(targets.size()) != n_rows)
    shape_fail("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
               std::to_string(n_rows) + " rows");
  for (int64_t t : targets)
    if (t >= classes)
      throw TensorError("cross_entropy: target " + std::to_string(t) + " out of range for " +
                        std::to_string(classes) + " classes");
  int64_t scored = count_scored(targets);
  double loss = 0.0;
  const auto& x = logits.data();
  for (int64_t r = 0; r < n_rows; ++r) {
    if (targets[static_cast<size_t>(r)] < 0) continue;
    const double* row = x.data() + r * classes;
    double mx = -INFINITY;
    for (int64_t c = 0; c < classes; ++c) mx = std::max(mx, row[c]);
    double z = 0.0;
    for (int64_t c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
    loss += mx + std::log(z) - row[targets[static_cast<size_t>(r)]];
  }
  if (scored > 0) loss /= static_cast<double>(scored);
  return make_op("cross_entropy", {1}, {loss}, {logits},
                 [targets, n_rows, classes, scored](Node& n) {
                   if (!n.inputs[0]->requires_grad || scored == 0) return;
                   n.inputs[0]->ensure_grad();
                   const auto& x = n.inputs[0]->value;
                   double* g = n.inputs[0]->grad.data();
                   double coeff = n.grad[0] / static_cast<double>(scored);
                   for (int64_t r = 0; r < n_rows; ++r) {
                     int64_t t = targets[static_cast<size_t>(r)];
                     if (t < 0) continue;
                     const double* row = x.data() + r * classes;
                     double* grow = g + r * classes;
                     double mx = -INFINITY;
                     for (int64_t c = 0; c < classes; ++c) mx = std::max(mx, row[c]);
                     double z = 0.0;
                     for (int64_t c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
                     for (int64_t c = 0; c < classes; ++c)
                       grow[c] += coeff * (std::exp(row[c] - mx) / z - (c == t ? 1.0 : 0.0));
                   }
                 });
}

// ---- reductions ----

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.data()) acc += x;
  return make_op("sum", {1}, {acc}, {a}, [](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    for (double& g : n.inputs[0]->grad) g += n.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) shape_fail("mean: empty tensor");
  double acc = 0.0;
  for (double x : a.data()) acc += x;
  acc /= static_cast<double>(a.numel());
  double inv = 1.0 / static_cast<double>(a.numel());
  return make_op("mean", {1}, {acc}, {a}, [inv](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    for (double& g : n.inputs[0]->grad) g += inv * n.grad[0];
  });
}

// ---- masking / detach ----

Tensor mask_fill(const Tensor& a, const Tensor& keep, double fill) {
  const Shape& sa = a.shape();
  const Shape& sk = keep.shape();
  if (!broadcastable_to(sk, sa))
    shape_fail("mask_fill: mask " + shape_str(sk) + " not broadcastable to " + shape_str(sa));
  std::vector<double> v(a.data());
  const auto& k = keep.data();
  for_broadcast(sa, sa, sk, [&](int64_t io, int64_t, int64_t ik) {
    if (k[static_cast<size_t>(ik)] == 0.0) v[static_cast<size_t>(io)] = fill;
  });
  return make_op("mask_fill", sa, std::move(v), {a, keep}, [sa, sk](Node& n) {
    if (!n.inputs[0]->requires_grad) return;
    n.inputs[0]->ensure_grad();
    const auto& k = n.inputs[1]->value;
    auto& g = n.inputs[0]->grad;
    for_broadcast(sa, sa, sk, [&](int64_t io, int64_t, int64_t ik) {
      if (k[static_cast<size_t>(ik)] != 0.0)
        g[static_cast<size_t>(io)] += n.grad[static_cast<size_t>(io)];
    });
  });
}

Tensor detach(const Tensor& a) { return Tensor::from_data(a.shape(), a.data()); }

// ---- backward ----

void backward(const Tensor& loss) {
  if (!loss.defined()) throw TensorError("backward: undefined loss tensor");
  if (loss.numel() != 1)
    throw TensorError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  Node* root = loss.node_.get();
  if (!root->requires_grad) return;

  // iterative post-order DFS; input order fixes the topological order
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->leaf && node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

}  // namespace duet
