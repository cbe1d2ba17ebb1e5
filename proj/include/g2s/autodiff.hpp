#pragma once

// Dense row-major matrices with a reverse-mode tape. Every tensor is viewed as
// rows x cols; vectors are 1 x n. Parameters live outside the tape and receive
// accumulated gradients, so several backward passes can be summed before an
// optimizer step.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "g2s/error.hpp"

namespace g2s::ad {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const { return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]"; }
};

template <class T>
struct Parameter {
  std::string name;
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
};

/// Named parameters in registration order. Addresses are stable.
template <class T>
class ParamStore {
 public:
  Parameter<T>& add(const std::string& name, Shape shape) {
    if (index_.count(name)) throw Error("duplicate parameter '" + name + "'");
    index_.emplace(name, params_.size());
    params_.push_back({name, shape, std::vector<T>(shape.size(), T(0)),
                       std::vector<T>(shape.size(), T(0))});
    return params_.back();
  }

  Parameter<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("unknown parameter '" + name + "'");
    return params_[it->second];
  }
  const Parameter<T>& at(const std::string& name) const {
    return const_cast<ParamStore*>(this)->at(name);
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  void zero_grad() {
    for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), T(0));
  }

  std::size_t size() const { return params_.size(); }
  std::size_t num_values() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Parameter<T>> params_;
  std::map<std::string, std::size_t> index_;
};

template <class T>
class Tape;

/// Handle to a tape node.
template <class T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Shape& shape() const { return tape_->shape(id_); }
  std::size_t rows() const { return shape().rows; }
  std::size_t cols() const { return shape().cols; }
  std::span<const T> value() const { return tape_->value(id_); }
  std::span<const T> grad() const { return tape_->grad(id_); }
  T item() const {
    if (shape().size() != 1) throw ShapeError("item() on non-scalar " + shape().str());
    return value()[0];
  }
  T at(std::size_t r, std::size_t c) const { return value()[r * cols() + c]; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// SplitMix64 finalizer; keyed dropout masks are a pure function of (seed, op, index).
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline double uniform01(std::uint64_t seed, std::uint64_t op, std::uint64_t index) {
  const std::uint64_t h = mix64(mix64(seed ^ mix64(op)) + index);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

struct TapeOptions {
  bool train = false;               // enables dropout
  std::uint64_t dropout_seed = 0;
  // Multiplies the tanh backward rule. Anything other than 1 is a deliberately
  // wrong derivative, used as a negative control for gradient checking.
  double tanh_grad_fault = 1.0;
};

template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  explicit Tape(TapeOptions opts = {}) : opts_(opts) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  const TapeOptions& options() const { return opts_; }
  bool training() const { return opts_.train; }

  Var<T> constant(Shape shape, std::vector<T> data) {
    if (data.size() != shape.size()) {
      throw ShapeError("constant data length " + std::to_string(data.size()) +
                       " does not match shape " + shape.str());
    }
    return push(shape, std::move(data), {});
  }

  Var<T> scalar(T v) { return constant({1, 1}, {v}); }

  Var<T> zeros(Shape shape) { return constant(shape, std::vector<T>(shape.size(), T(0))); }

  /// Leaf that reads and accumulates directly into parameter storage.
  Var<T> param(Parameter<T>& p) {
    Node n;
    n.shape = p.shape;
    n.param = &p;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  Var<T> push(Shape shape, std::vector<T> value, BackwardFn backward) {
    Node n;
    n.shape = shape;
    n.value = std::move(value);
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  const Shape& shape(std::size_t id) const { return nodes_[id].shape; }

  std::span<const T> value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.param ? std::span<const T>(n.param->value) : std::span<const T>(n.value);
  }

  std::span<T> grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.param) return n.param->grad;
    if (n.grad.size() != n.shape.size()) n.grad.assign(n.shape.size(), T(0));
    return n.grad;
  }
  std::span<const T> grad(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.param ? std::span<const T>(n.param->grad) : std::span<const T>(n.grad);
  }

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded rule once, newest first.
  /// Parameter gradients accumulate; intermediate gradients are reset.
  void backward(Var<T> loss) {
    if (loss.shape().size() != 1) {
      throw ShapeError("backward() needs a scalar loss, got " + loss.shape().str());
    }
    for (auto& n : nodes_) {
      if (!n.param) n.grad.assign(n.shape.size(), T(0));
    }
    grad(loss.id())[0] += T(1);
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      if (nodes_[id].backward) nodes_[id].backward(*this, id);
    }
  }

  std::uint64_t next_op_counter() { return op_counter_++; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    Parameter<T>* param = nullptr;
    BackwardFn backward;
  };

  TapeOptions opts_;
  std::vector<Node> nodes_;
  std::uint64_t op_counter_ = 0;
};

namespace detail {

inline void require(bool ok, const std::string& op, const Shape& a, const Shape& b) {
  if (!ok) throw ShapeError(op + ": incompatible shapes " + a.str() + " and " + b.str());
}

template <class T>
Tape<T>& same_tape(const Var<T>& a, const Var<T>& b) {
  if (&a.tape() != &b.tape()) throw Error("operands recorded on different tapes");
  return a.tape();
}

// C (m x n) += A (m x k) * B (k x n)
template <class T>
void gemm_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C (m x k) += A (m x n) * B^T, B is (k x n)
template <class T>
void gemm_nt_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T* brow = b + p * n;
      T acc = T(0);
      for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      c[i * k + p] += acc;
    }
  }
}

// C (k x n) += A^T * B, A is (m x k), B is (m x n)
template <class T>
void gemm_tn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      T* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class T, class F, class D>
Var<T> unary(const Var<T>& x, F f, D dfdx_from_y) {
  Tape<T>& t = x.tape();
  auto xv = x.value();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  const std::size_t xid = x.id();
  return t.push(x.shape(), std::move(out), [xid, dfdx_from_y](Tape<T>& tp, std::size_t self) {
    auto y = tp.value(self);
    auto xv2 = tp.value(xid);
    auto gy = tp.grad(self);
    auto gx = tp.grad(xid);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * dfdx_from_y(xv2[i], y[i]);
  });
}

}  // namespace detail

/// (m x k) * (k x n)
template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  Tape<T>& t = detail::same_tape(a, b);
  const Shape sa = a.shape(), sb = b.shape();
  detail::require(sa.cols == sb.rows, "matmul", sa, sb);
  std::vector<T> out(sa.rows * sb.cols, T(0));
  detail::gemm_acc(a.value().data(), b.value().data(), out.data(), sa.rows, sa.cols, sb.cols);
  const std::size_t ai = a.id(), bi = b.id();
  return t.push({sa.rows, sb.cols}, std::move(out), [ai, bi, sa, sb](Tape<T>& tp, std::size_t self) {
    auto g = tp.grad(self);
    detail::gemm_nt_acc(g.data(), tp.value(bi).data(), tp.grad(ai).data(), sa.rows, sb.cols, sa.cols);
    detail::gemm_tn_acc(tp.value(ai).data(), g.data(), tp.grad(bi).data(), sa.rows, sa.cols, sb.cols);
  });
}

template <class T>
Var<T> transpose(const Var<T>& x) {
  const Shape s = x.shape();
  auto xv = x.value();
  std::vector<T> out(s.size());
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) out[j * s.rows + i] = xv[i * s.cols + j];
  const std::size_t xi = x.id();
  return x.tape().push({s.cols, s.rows}, std::move(out), [xi, s](Tape<T>& tp, std::size_t self) {
    auto g = tp.grad(self);
    auto gx = tp.grad(xi);
    for (std::size_t i = 0; i < s.rows; ++i)
      for (std::size_t j = 0; j < s.cols; ++j) gx[i * s.cols + j] += g[j * s.rows + i];
  });
}

/// Elementwise sum. A 1 x n right operand broadcasts over the rows of the left.
template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  Tape<T>& t = detail::same_tape(a, b);
  const Shape sa = a.shape(), sb = b.shape();
  const bool bcast = sb.rows == 1 && sa.rows > 1 && sa.cols == sb.cols;
  detail::require(sa == sb || bcast, "add", sa, sb);
  auto av = a.value();
  auto bv = b.value();
  std::vector<T> out(av.begin(), av.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[bcast ? i % sb.cols : i];
  const std::size_t ai = a.id(), bi = b.id();
  return t.push(sa, std::move(out), [ai, bi, bcast, sb](Tape<T>& tp, std::size_t self) {
    auto g = tp.grad(self);
    auto ga = tp.grad(ai);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    auto gb = tp.grad(bi);
    for (std::size_t i = 0; i < g.size(); ++i) gb[bcast ? i % sb.cols : i] += g[i];
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  Tape<T>& t = detail::same_tape(a, b);
  detail::require(a.shape() == b.shape(), "sub", a.shape(), b.shape());
  auto av = a.value();
  auto bv = b.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return t.push(a.shape(), std::move(out), [ai, bi](Tape<T>& tp, std::size_t self) {
    auto g = tp.grad(self);
    auto ga = tp.grad(ai);
    auto gb = tp.grad(bi);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  });
}

/// Elementwise (Hadamard) product.
template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  Tape<T>& t = detail::same_tape(a, b);
  detail::require(a.shape() == b.shape(), "mul", a.shape(), b.shape());
  auto av = a.value();
  auto bv = b.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return t.push(a.shape(), std::move(out), [ai, bi](Tape<T>& tp, std::size_t self) {
    auto g = tp.grad(self);
    auto av2 = tp.value(ai);
    auto bv2 = tp.value(bi);
    auto ga = tp.grad(ai);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv2[i];
    auto gb = tp.grad(bi);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av2[i];
  });
}

/// s * x where s is a 1 x 1 node.
template <class T>
Var<T> scale_by(const Var<T>& x, const Var<T>& s) {
  Tape<T>& t = detail::same_tape(x, s);
  detail::require(s.shape().size() == 1, "scale_by", x.shape(), s.shape());
  const T sv = s.value()[0];
  auto xv = x.value();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sv * xv[i];
  const std::size_t xi = x.id(), si = s.id();
  return t.push(x.shape(), std::move(out), [xi, si](Tape<T>& tp, std::size_t self) {
    auto g = tp.grad(self);
    auto xv2 = tp.value(xi);
    const T sv2 = tp.value(si)[0];
    auto gx = tp.grad(xi);
    T acc = T(0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      gx[i] += g[i] * sv2;
      acc += g[i] * xv2[i];
    }
    tp.grad(si)[0] += acc;
  });
}

/// c * x + shift, constants.
template <class T>
Var<T> affine(const Var<T>& x, T c, T shift = T(0)) {
  auto xv = x.value();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * xv[i] + shift;
  const std::size_t xi = x.id();
  return x.tape().push(x.shape(), std::move(out), [xi, c](Tape<T>& tp, std::size_t self) {
    auto g = tp.grad(self);
    auto gx = tp.grad(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += c * g[i];
  });
}

template <class T>
Var<T> scale(const Var<T>& x, T c) {
  return affine(x, c, T(0));
}

template <class T>
Var<T> tanh(const Var<T>& x) {
  const T fault = static_cast<T>(x.tape().options().tanh_grad_fault);
  return detail::unary(
      x, [](T v) { return std::tanh(v); }, [fault](T, T y) { return fault * (T(1) - y * y); });
}

template <class T>
Var<T> sigmoid(const Var<T>& x) {
  return detail::unary(
      x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Var<T> relu(const Var<T>& x) {
  return detail::unary(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

/// log(max(x, floor)); gradient is zero where the floor is active.
template <class T>
Var<T> log_floor(const Var<T>& x, T floor) {
  return detail::unary(
      x, [floor](T v) { return std::log(std::max(v, floor)); },
      [floor](T v, T) { return v > floor ? T(1) / v : T(0); });
}

/// Inverted dropout. Identity when the tape is not in training mode or rate == 0.
template <class T>
Var<T> dropout(const Var<T>& x, double rate) {
  Tape<T>& t = x.tape();
  if (!t.training() || rate <= 0.0) return x;
  if (rate >= 1.0) throw Error("dropout rate must be < 1");
  const std::uint64_t op = t.next_op_counter();
  const std::uint64_t seed = t.options().dropout_seed;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  auto xv = x.value();
  std::vector<T> mask(xv.size());
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    mask[i] = uniform01(seed, op, i) < rate ? T(0) : keep_scale;
    out[i] = xv[i] * mask[i];
  }
  const std::size_t xi = x.id();
  return t.push(x.shape(), std::move(out), [xi, mask = std::move(mask)](Tape<T>& tp, std::size_t self) {
    auto g = tp.grad(self);
    auto gx = tp.grad(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
  });
}

/// Row-wise softmax (last axis).
template <class T>
Var<T> softmax(const Var<T>& x) {
  const Shape s = x.shape();
  auto xv = x.value();
  std::vector<T> out(s.size());
  for (std::size_t r = 0; r < s.rows; ++r) {
    const T* in = xv.data() + r * s.cols;
    T* o = out.data() + r * s.cols;
    const T mx = *std::max_element(in, in + s.cols);
    T z = T(0);
    for (std::size_t j = 0; j < s.cols; ++j) {
      o[j] = std::exp(in[j] - mx);
      z += o[j];
    }
    for (std::size_t j = 0; j < s.cols; ++j) o[j] /= z;
  }
  const std::size_t xi = x.id();
  return x.tape().push(s, std::move(out), [xi, s](Tape<T>& tp, std::size_t self) {
    auto y = tp.value(self);
    auto g = tp.grad(self);
    auto gx = tp.grad(xi);
    for (std::size_t r = 0; r < s.rows; ++r) {
      const std::size_t off = r * s.cols;
      T dot = T(0);
      for (std::size_t j = 0; j < s.cols; ++j) dot += g[off + j] * y[off + j];
      for (std::size_t j = 0; j < s.cols; ++j) gx[off + j] += y[off + j] * (g[off + j] - dot);
    }
  });
}

template <class T>
Var<T> sum(const Var<T>& x) {
  T acc = T(0);
  for (T v : x.value()) acc += v;
  const std::size_t xi = x.id();
  return x.tape().push({1, 1}, {acc}, [xi](Tape<T>& tp, std::size_t self) {
    const T g = tp.grad(self)[0];
    for (auto& v : tp.grad(xi)) v += g;
  });
}

template <class T>
Var<T> mean(const Var<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.shape().size()));
}

/// Column sums: (n x d) -> (1 x d).
template <class T>
Var<T> sum_rows(const Var<T>& x) {
  const Shape s = x.shape();
  auto xv = x.value();
  std::vector<T> out(s.cols, T(0));
  for (std::size_t r = 0; r < s.rows; ++r)
    for (std::size_t j = 0; j < s.cols; ++j) out[j] += xv[r * s.cols + j];
  const std::size_t xi = x.id();
  return x.tape().push({1, s.cols}, std::move(out), [xi, s](Tape<T>& tp, std::size_t self) {
    auto g = tp.grad(self);
    auto gx = tp.grad(xi);
    for (std::size_t r = 0; r < s.rows; ++r)
      for (std::size_t j = 0; j < s.cols; ++j) gx[r * s.cols + j] += g[j];
  });
}

template <class T>
Var<T> mean_rows(const Var<T>& x) {
  return scale(sum_rows(x), T(1) / static_cast<T>(x.rows()));
}

/// Column maxima: (n x d) -> (1 x d); gradient routes to the first maximal row.
template <class T>
Var<T> max_rows(const Var<T>& x) {
  const Shape s = x.shape();
  if (s.rows == 0) throw ShapeError("max_rows on empty input " + s.str());
  auto xv = x.value();
  std::vector<T> out(xv.begin(), xv.begin() + s.cols);
  std::vector<std::size_t> arg(s.cols, 0);
  for (std::size_t r = 1; r < s.rows; ++r)
    for (std::size_t j = 0; j < s.cols; ++j)
      if (xv[r * s.cols + j] > out[j]) {
        out[j] = xv[r * s.cols + j];
        arg[j] = r;
      }
  const std::size_t xi = x.id();
  return x.tape().push({1, s.cols}, std::move(out),
                       [xi, s, arg = std::move(arg)](Tape<T>& tp, std::size_t self) {
                         auto g = tp.grad(self);
                         auto gx = tp.grad(xi);
                         for (std::size_t j = 0; j < s.cols; ++j) gx[arg[j] * s.cols + j] += g[j];
                       });
}

template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    detail::require(p.rows() == rows, "concat_cols", parts[0].shape(), p.shape());
    cols += p.cols();
  }
  std::vector<T> out(rows * cols);
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // (id, cols)
  std::size_t off = 0;
  for (const auto& p : parts) {
    auto v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.data() + r * p.cols(), p.cols(), out.data() + r * cols + off);
    spans.emplace_back(p.id(), p.cols());
    off += p.cols();
  }
  return parts[0].tape().push({rows, cols}, std::move(out),
                              [spans = std::move(spans), rows, cols](Tape<T>& tp, std::size_t self) {
                                auto g = tp.grad(self);
                                std::size_t o = 0;
                                for (const auto& [id, c] : spans) {
                                  auto gp = tp.grad(id);
                                  for (std::size_t r = 0; r < rows; ++r)
                                    for (std::size_t j = 0; j < c; ++j) gp[r * c + j] += g[r * cols + o + j];
                                  o += c;
                                }
                              });
}

template <class T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows of nothing");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    detail::require(p.cols() == cols, "concat_rows", parts[0].shape(), p.shape());
    rows += p.rows();
  }
  std::vector<T> out;
  out.reserve(rows * cols);
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    auto v = p.value();
    out.insert(out.end(), v.begin(), v.end());
    ids.push_back(p.id());
  }
  return parts[0].tape().push({rows, cols}, std::move(out), [ids = std::move(ids)](Tape<T>& tp, std::size_t self) {
    auto g = tp.grad(self);
    std::size_t o = 0;
    for (std::size_t id : ids) {
      auto gp = tp.grad(id);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[o + i];
      o += gp.size();
    }
  });
}

template <class T>
Var<T> slice_rows(const Var<T>& x, std::size_t begin, std::size_t count) {
  const Shape s = x.shape();
  if (begin + count > s.rows) throw ShapeError("slice_rows out of range for " + s.str());
  auto xv = x.value();
  std::vector<T> out(xv.begin() + begin * s.cols, xv.begin() + (begin + count) * s.cols);
  const std::size_t xi = x.id();
  return x.tape().push({count, s.cols}, std::move(out), [xi, s, begin](Tape<T>& tp, std::size_t self) {
    auto g = tp.grad(self);
    auto gx = tp.grad(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[begin * s.cols + i] += g[i];
  });
}

template <class T>
Var<T> slice_cols(const Var<T>& x, std::size_t begin, std::size_t count) {
  const Shape s = x.shape();
  if (begin + count > s.cols) throw ShapeError("slice_cols out of range for " + s.str());
  auto xv = x.value();
  std::vector<T> out(s.rows * count);
  for (std::size_t r = 0; r < s.rows; ++r)
    std::copy_n(xv.data() + r * s.cols + begin, count, out.data() + r * count);
  const std::size_t xi = x.id();
  return x.tape().push({s.rows, count}, std::move(out), [xi, s, begin, count](Tape<T>& tp, std::size_t self) {
    auto g = tp.grad(self);
    auto gx = tp.grad(xi);
    for (std::size_t r = 0; r < s.rows; ++r)
      for (std::size_t j = 0; j < count; ++j) gx[r * s.cols + begin + j] += g[r * count + j];
  });
}

/// Selects columns of every row: out[r][k] = x[r][index[k]].
template <class T>
Var<T> gather_cols(const Var<T>& x, const std::vector<std::size_t>& index) {
  const Shape s = x.shape();
  for (std::size_t i : index)
    if (i >= s.cols) throw ShapeError("gather_cols index " + std::to_string(i) + " out of range for " + s.str());
  auto xv = x.value();
  const std::size_t k = index.size();
  std::vector<T> out(s.rows * k);
  for (std::size_t r = 0; r < s.rows; ++r)
    for (std::size_t j = 0; j < k; ++j) out[r * k + j] = xv[r * s.cols + index[j]];
  const std::size_t xi = x.id();
  return x.tape().push({s.rows, k}, std::move(out), [xi, s, index](Tape<T>& tp, std::size_t self) {
    auto g = tp.grad(self);
    auto gx = tp.grad(xi);
    const std::size_t k2 = index.size();
    for (std::size_t r = 0; r < s.rows; ++r)
      for (std::size_t j = 0; j < k2; ++j) gx[r * s.cols + index[j]] += g[r * k2 + j];
  });
}

/// (1 x n) -> (1 x width): out[target[j]] += x[j]. Used to map per-vertex mass
/// onto vocabulary ids.
template <class T>
Var<T> scatter_cols(const Var<T>& x, const std::vector<std::size_t>& target, std::size_t width) {
  const Shape s = x.shape();
  if (s.rows != 1 || target.size() != s.cols) {
    throw ShapeError("scatter_cols expects a 1 x " + std::to_string(target.size()) + " row, got " + s.str());
  }
  for (std::size_t t : target)
    if (t >= width) throw ShapeError("scatter_cols target " + std::to_string(t) + " >= width " + std::to_string(width));
  auto xv = x.value();
  std::vector<T> out(width, T(0));
  for (std::size_t j = 0; j < target.size(); ++j) out[target[j]] += xv[j];
  const std::size_t xi = x.id();
  return x.tape().push({1, width}, std::move(out), [xi, target](Tape<T>& tp, std::size_t self) {
    auto g = tp.grad(self);
    auto gx = tp.grad(xi);
    for (std::size_t j = 0; j < target.size(); ++j) gx[j] += g[target[j]];
  });
}

/// Right-pads every row with zeros up to `width` columns.
template <class T>
Var<T> pad_cols(const Var<T>& x, std::size_t width) {
  const Shape s = x.shape();
  if (width < s.cols) throw ShapeError("pad_cols width smaller than " + s.str());
  if (width == s.cols) return x;
  std::vector<std::size_t> idx(s.cols);
  for (std::size_t j = 0; j < s.cols; ++j) idx[j] = j;
  if (s.rows != 1) throw ShapeError("pad_cols expects a row vector, got " + s.str());
  return scatter_cols(x, idx, width);
}

/// Embedding lookup: rows of a parameter table. Backward scatters into the
/// table's gradient without materializing the full table on the tape.
template <class T>
Var<T> gather_rows(Tape<T>& t, Parameter<T>& table, const std::vector<std::size_t>& ids) {
  const Shape s = table.shape;
  std::vector<T> out(ids.size() * s.cols);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= s.rows) {
      throw ShapeError("gather_rows id " + std::to_string(ids[r]) + " out of range for '" + table.name +
                       "' " + s.str());
    }
    std::copy_n(table.value.data() + ids[r] * s.cols, s.cols, out.data() + r * s.cols);
  }
  Parameter<T>* tab = &table;
  return t.push({ids.size(), s.cols}, std::move(out), [tab, ids](Tape<T>& tp, std::size_t self) {
    auto g = tp.grad(self);
    const std::size_t d = tab->shape.cols;
    for (std::size_t r = 0; r < ids.size(); ++r)
      for (std::size_t j = 0; j < d; ++j) tab->grad[ids[r] * d + j] += g[r * d + j];
  });
}

/// Single element as a 1 x 1 node.
template <class T>
Var<T> element(const Var<T>& x, std::size_t r, std::size_t c) {
  return slice_cols(slice_rows(x, r, 1), c, 1);
}

}  // namespace g2s::ad
