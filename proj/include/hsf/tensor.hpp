#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace hsf {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

inline Shape strides_of(const Shape& s) {
  Shape st(s.size());
  int64_t acc = 1;
  for (size_t i = s.size(); i-- > 0;) {
    st[i] = acc;
    acc *= s[i];
  }
  return st;
}

// Thread-local switch: ops built while disabled record no tape.
inline bool& grad_enabled() {
  thread_local bool on = true;
  return on;
}

struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_enabled()) { grad_enabled() = false; }
  ~NoGradGuard() { grad_enabled() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // sized on first accumulation
  bool requires_grad = false;
  bool tape_consumed = false;
  // Parents are the grad-requiring inputs; edges drive the topological sweep.
  std::vector<std::shared_ptr<Node<T>>> parents;
  // Pulls this node's grad into the parents' grads. Captures input nodes by
  // shared_ptr and this node by raw pointer (owning itself would leak).
  std::function<void()> backward;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
  }
};

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return Tensor(std::move(shape), requires_grad, T(0));
  }
  static Tensor full(Shape shape, T fill, bool requires_grad = false) {
    return Tensor(std::move(shape), requires_grad, fill);
  }
  static Tensor from(Shape shape, std::vector<T> data, bool requires_grad = false) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
      throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                  " does not match shape " + shape_str(shape));
    Tensor t;
    t.n_ = std::make_shared<Node<T>>();
    t.n_->shape = std::move(shape);
    t.n_->value = std::move(data);
    t.n_->requires_grad = requires_grad;
    return t;
  }
  static Tensor scalar(T v, bool requires_grad = false) {
    return from({1}, {v}, requires_grad);
  }

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  int64_t rank() const { return static_cast<int64_t>(n_->shape.size()); }
  int64_t size() const { return static_cast<int64_t>(n_->value.size()); }
  std::vector<T>& data() { return n_->value; }
  const std::vector<T>& data() const { return n_->value; }
  bool requires_grad() const { return n_->requires_grad; }

  T item() const {
    if (size() != 1) throw std::invalid_argument("item() on non-scalar tensor " + shape_str(shape()));
    return n_->value[0];
  }

  std::vector<T>& grad() {
    if (!n_->requires_grad) throw std::logic_error("grad() on tensor that does not require grad");
    n_->ensure_grad();
    return n_->grad;
  }

  void zero_grad() {
    if (n_->requires_grad) n_->grad.assign(n_->value.size(), T(0));
  }

  // Reverse-mode sweep from a scalar root. Frees the tape afterwards; a
  // second call on the same graph reports the tape as consumed.
  void backward() {
    Node<T>* root = n_.get();
    if (size() != 1) throw std::invalid_argument("backward() requires a scalar, got " + shape_str(shape()));
    if (root->tape_consumed) throw std::logic_error("backward(): tape already consumed");
    if (!root->requires_grad) throw std::logic_error("backward(): root does not require grad");

    // Postorder over parent edges: every consumer precedes its inputs in the
    // reversed order, so each node's grad is complete before it propagates.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, size_t>> stack;
    stack.push_back({root, 0});
    seen.insert(root);
    while (!stack.empty()) {
      auto& [node, idx] = stack.back();
      if (idx < node->parents.size()) {
        Node<T>* p = node->parents[idx++].get();
        if (seen.insert(p).second) stack.push_back({p, 0});
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }

    root->grad.assign(1, T(1));
    for (size_t i = order.size(); i-- > 0;) {
      Node<T>* node = order[i];
      if (node->backward) node->backward();
    }
    for (Node<T>* node : order) {
      node->backward = nullptr;
      node->parents.clear();
      node->tape_consumed = true;
    }
  }

  std::shared_ptr<Node<T>> node() const { return n_; }

  static Tensor wrap(std::shared_ptr<Node<T>> n) {
    Tensor t;
    t.n_ = std::move(n);
    return t;
  }

 private:
  Tensor(Shape shape, bool requires_grad, T fill) {
    n_ = std::make_shared<Node<T>>();
    int64_t n = shape_numel(shape);
    n_->shape = std::move(shape);
    n_->value.assign(static_cast<size_t>(n), fill);
    n_->requires_grad = requires_grad;
  }

  std::shared_ptr<Node<T>> n_;
};

namespace detail {

// Builds the result node for an op. Parents are the inputs that require grad;
// the backward closure is attached only when the tape is live.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> value,
                      std::initializer_list<Tensor<T>> inputs) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (grad_enabled()) {
    for (const Tensor<T>& in : inputs)
      if (in.requires_grad()) {
        node->requires_grad = true;
        node->parents.push_back(in.node());
      }
  }
  return Tensor<T>::wrap(std::move(node));
}

template <typename T>
void attach(Tensor<T>& out, std::function<void()> fn) {
  if (out.requires_grad()) out.node()->backward = std::move(fn);
}

inline void check_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b)
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

}  // namespace detail

// ---- elementwise ----

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) {
    std::vector<T> v(a.size());
    const auto& av = a.data();
    const auto& bv = b.data();
    for (int64_t i = 0; i < a.size(); ++i) v[i] = av[i] + bv[i];
    Tensor<T> out = detail::make_result<T>(sa, std::move(v), {a, b});
    auto an = a.node(), bn = b.node();
    auto* self = out.node().get();
    detail::attach(out, [an, bn, self] {
      const auto& g = self->grad;
      if (an->requires_grad) {
        an->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) bn->grad[i] += g[i];
      }
    });
    return out;
  }
  // Suffix broadcast: b's shape must equal the trailing axes of a's.
  if (sb.size() < sa.size() &&
      std::equal(sb.begin(), sb.end(), sa.end() - static_cast<int64_t>(sb.size()))) {
    int64_t inner = shape_numel(sb);
    int64_t outer = a.size() / inner;
    std::vector<T> v(a.size());
    const auto& av = a.data();
    const auto& bv = b.data();
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t i = 0; i < inner; ++i) v[o * inner + i] = av[o * inner + i] + bv[i];
    Tensor<T> out = detail::make_result<T>(sa, std::move(v), {a, b});
    auto an = a.node(), bn = b.node();
    auto* self = out.node().get();
    detail::attach(out, [an, bn, self, outer, inner] {
      const auto& g = self->grad;
      if (an->requires_grad) {
        an->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int64_t o = 0; o < outer; ++o)
          for (int64_t i = 0; i < inner; ++i) bn->grad[i] += g[o * inner + i];
      }
    });
    return out;
  }
  throw std::invalid_argument("add: shape mismatch " + shape_str(sa) + " vs " + shape_str(sb) +
                              " (equal shapes or suffix broadcast only)");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a.shape(), b.shape(), "mul");
  std::vector<T> v(a.size());
  const auto& av = a.data();
  const auto& bv = b.data();
  for (int64_t i = 0; i < a.size(); ++i) v[i] = av[i] * bv[i];
  Tensor<T> out = detail::make_result<T>(a.shape(), std::move(v), {a, b});
  auto an = a.node(), bn = b.node();
  auto* self = out.node().get();
  detail::attach(out, [an, bn, self] {
    const auto& g = self->grad;
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < g.size(); ++i) bn->grad[i] += g[i] * an->value[i];
    }
  });
  return out;
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T c) {
  std::vector<T> v(a.size());
  const auto& av = a.data();
  for (int64_t i = 0; i < a.size(); ++i) v[i] = av[i] * c;
  Tensor<T> out = detail::make_result<T>(a.shape(), std::move(v), {a});
  auto an = a.node();
  auto* self = out.node().get();
  detail::attach(out, [an, self, c] {
    an->ensure_grad();
    const auto& g = self->grad;
    for (size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i] * c;
  });
  return out;
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return mul_scalar(a, T(-1));
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a.shape(), b.shape(), "sub");
  return add(a, neg(b));
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> v(a.size());
  const auto& av = a.data();
  for (int64_t i = 0; i < a.size(); ++i) v[i] = av[i] > T(0) ? av[i] : T(0);
  Tensor<T> out = detail::make_result<T>(a.shape(), std::move(v), {a});
  auto an = a.node();
  auto* self = out.node().get();
  detail::attach(out, [an, self] {
    an->ensure_grad();
    const auto& g = self->grad;
    for (size_t i = 0; i < g.size(); ++i)
      if (an->value[i] > T(0)) an->grad[i] += g[i];
  });
  return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  std::vector<T> v(a.size());
  const auto& av = a.data();
  for (int64_t i = 0; i < a.size(); ++i) {
    double x = static_cast<double>(av[i]);
    double y = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    v[i] = static_cast<T>(y);
  }
  Tensor<T> out = detail::make_result<T>(a.shape(), std::move(v), {a});
  auto an = a.node();
  auto* self = out.node().get();
  detail::attach(out, [an, self] {
    an->ensure_grad();
    const auto& g = self->grad;
    const auto& y = self->value;
    for (size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i] * y[i] * (T(1) - y[i]);
  });
  return out;
}

// Exact erf form: 0.5·x·(1 + erf(x/√2)).
template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
  std::vector<T> v(a.size());
  const auto& av = a.data();
  for (int64_t i = 0; i < a.size(); ++i) {
    double x = static_cast<double>(av[i]);
    v[i] = static_cast<T>(0.5 * x * (1.0 + std::erf(x * 0.7071067811865475244)));
  }
  Tensor<T> out = detail::make_result<T>(a.shape(), std::move(v), {a});
  auto an = a.node();
  auto* self = out.node().get();
  detail::attach(out, [an, self] {
    an->ensure_grad();
    const auto& g = self->grad;
    for (size_t i = 0; i < g.size(); ++i) {
      double x = static_cast<double>(an->value[i]);
      double phi = 0.5 * (1.0 + std::erf(x * 0.7071067811865475244));
      double pdf = std::exp(-0.5 * x * x) * 0.3989422804014326779;
      an->grad[i] += g[i] * static_cast<T>(phi + x * pdf);
    }
  });
  return out;
}

// ---- reductions ----

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  T acc = T(0);
  for (T x : a.data()) acc += x;
  Tensor<T> out = detail::make_result<T>({1}, {acc}, {a});
  auto an = a.node();
  auto* self = out.node().get();
  detail::attach(out, [an, self] {
    an->ensure_grad();
    T g = self->grad[0];
    for (auto& gi : an->grad) gi += g;
  });
  return out;
}

template <typename T>
Tensor<T> mean_axis(const Tensor<T>& a, int64_t axis) {
  const Shape& s = a.shape();
  if (axis < 0 || axis >= a.rank()) throw std::invalid_argument("mean_axis: invalid axis");
  int64_t ext = s[static_cast<size_t>(axis)];
  int64_t inner = 1;
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) inner *= s[i];
  int64_t outer = a.size() / (ext * inner);
  Shape os;
  for (size_t i = 0; i < s.size(); ++i)
    if (static_cast<int64_t>(i) != axis) os.push_back(s[i]);
  if (os.empty()) os.push_back(1);
  std::vector<T> v(static_cast<size_t>(outer * inner), T(0));
  const auto& av = a.data();
  for (int64_t o = 0; o < outer; ++o)
    for (int64_t e = 0; e < ext; ++e)
      for (int64_t i = 0; i < inner; ++i) v[o * inner + i] += av[(o * ext + e) * inner + i];
  T scale = T(1) / static_cast<T>(ext);
  for (auto& x : v) x *= scale;
  Tensor<T> out = detail::make_result<T>(std::move(os), std::move(v), {a});
  auto an = a.node();
  auto* self = out.node().get();
  detail::attach(out, [an, self, outer, ext, inner, scale] {
    an->ensure_grad();
    const auto& g = self->grad;
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t e = 0; e < ext; ++e)
        for (int64_t i = 0; i < inner; ++i)
          an->grad[(o * ext + e) * inner + i] += g[o * inner + i] * scale;
  });
  return out;
}

// ---- rearrangement: bit-preserving forward, exact inverse backward ----

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.size())
    throw std::invalid_argument("reshape: element count mismatch " + shape_str(a.shape()) +
                                " -> " + shape_str(shape));
  Tensor<T> out = detail::make_result<T>(std::move(shape), a.data(), {a});
  auto an = a.node();
  auto* self = out.node().get();
  detail::attach(out, [an, self] {
    an->ensure_grad();
    const auto& g = self->grad;
    for (size_t i = 0; i < g.size(); ++i) an->grad[i] += g[i];
  });
  return out;
}

namespace detail {

// dst[perm-ordered index] = src[original index]; add-variant used by backward.
template <typename T, bool Add>
void permute_copy(const T* src, const Shape& in_shape, const std::vector<int64_t>& perm, T* dst) {
  size_t r = in_shape.size();
  Shape out_shape(r);
  for (size_t i = 0; i < r; ++i) out_shape[i] = in_shape[static_cast<size_t>(perm[i])];
  Shape in_strides = strides_of(in_shape);
  Shape out_strides = strides_of(out_shape);
  // out stride seen from the input axis order
  Shape gather(r);
  for (size_t i = 0; i < r; ++i) gather[static_cast<size_t>(perm[i])] = out_strides[i];
  int64_t n = shape_numel(in_shape);
  std::vector<int64_t> idx(r, 0);
  int64_t out_off = 0;
  for (int64_t lin = 0; lin < n; ++lin) {
    if constexpr (Add)
      dst[out_off] += src[lin];
    else
      dst[out_off] = src[lin];
    for (size_t i = r; i-- > 0;) {
      if (++idx[i] < in_shape[i]) {
        out_off += gather[i];
        break;
      }
      idx[i] = 0;
      out_off -= gather[i] * (in_shape[i] - 1);
    }
  }
}

}  // namespace detail

template <typename T>
Tensor<T> permute(const Tensor<T>& a, std::vector<int64_t> perm) {
  size_t r = a.shape().size();
  if (perm.size() != r) throw std::invalid_argument("permute: axis list length mismatch");
  std::vector<bool> used(r, false);
  for (int64_t p : perm) {
    if (p < 0 || p >= static_cast<int64_t>(r) || used[static_cast<size_t>(p)])
      throw std::invalid_argument("permute: invalid axis permutation");
    used[static_cast<size_t>(p)] = true;
  }
  Shape os(r);
  for (size_t i = 0; i < r; ++i) os[i] = a.shape()[static_cast<size_t>(perm[i])];
  std::vector<T> v(a.size());
  detail::permute_copy<T, false>(a.data().data(), a.shape(), perm, v.data());
  Tensor<T> out = detail::make_result<T>(std::move(os), std::move(v), {a});
  auto an = a.node();
  auto* self = out.node().get();
  Shape in_shape = a.shape();
  detail::attach(out, [an, self, in_shape, perm] {
    an->ensure_grad();
    // inverse rearrangement: scatter-add out-grad back through the same map
    size_t r = in_shape.size();
    std::vector<int64_t> inv(r);
    for (size_t i = 0; i < r; ++i) inv[static_cast<size_t>(perm[i])] = static_cast<int64_t>(i);
    Shape out_shape(r);
    for (size_t i = 0; i < r; ++i) out_shape[i] = in_shape[static_cast<size_t>(perm[i])];
    std::vector<T> tmp(self->grad.size());
    detail::permute_copy<T, false>(self->grad.data(), out_shape, inv, tmp.data());
    for (size_t i = 0; i < tmp.size(); ++i) an->grad[i] += tmp[i];
  });
  return out;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int64_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  size_t r = s0.size();
  if (axis < 0 || axis >= static_cast<int64_t>(r)) throw std::invalid_argument("concat: invalid axis");
  int64_t total_axis = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != r) throw std::invalid_argument("concat: rank mismatch");
    for (size_t i = 0; i < r; ++i)
      if (static_cast<int64_t>(i) != axis && s[i] != s0[i])
        throw std::invalid_argument("concat: off-axis mismatch " + shape_str(s0) + " vs " + shape_str(s));
    total_axis += s[static_cast<size_t>(axis)];
  }
  Shape os = s0;
  os[static_cast<size_t>(axis)] = total_axis;
  int64_t inner = 1;
  for (size_t i = static_cast<size_t>(axis) + 1; i < r; ++i) inner *= s0[i];
  int64_t outer = 1;
  for (size_t i = 0; i < static_cast<size_t>(axis); ++i) outer *= s0[i];
  std::vector<T> v(static_cast<size_t>(shape_numel(os)));
  int64_t off = 0;
  for (const auto& p : parts) {
    int64_t ext = p.shape()[static_cast<size_t>(axis)];
    const auto& pv = p.data();
    for (int64_t o = 0; o < outer; ++o)
      std::copy(pv.begin() + o * ext * inner, pv.begin() + (o + 1) * ext * inner,
                v.begin() + (o * total_axis + off) * inner);
    off += ext;
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(os);
  node->value = std::move(v);
  std::vector<std::shared_ptr<Node<T>>> in_nodes;
  for (const auto& p : parts) in_nodes.push_back(p.node());
  if (grad_enabled()) {
    for (const auto& p : parts)
      if (p.requires_grad()) {
        node->requires_grad = true;
        node->parents.push_back(p.node());
      }
  }
  Tensor<T> out = Tensor<T>::wrap(node);
  auto* self = node.get();
  std::vector<int64_t> exts;
  for (const auto& p : parts) exts.push_back(p.shape()[static_cast<size_t>(axis)]);
  detail::attach(out, [in_nodes, self, exts, outer, inner, total_axis] {
    const auto& g = self->grad;
    int64_t off = 0;
    for (size_t pi = 0; pi < in_nodes.size(); ++pi) {
      auto& pn = in_nodes[pi];
      int64_t ext = exts[pi];
      if (pn->requires_grad) {
        pn->ensure_grad();
        for (int64_t o = 0; o < outer; ++o)
          for (int64_t i = 0; i < ext * inner; ++i)
            pn->grad[o * ext * inner + i] += g[(o * total_axis + off) * inner + i];
      }
      off += ext;
    }
  });
  return out;
}

// Circular roll: out[i] = in[(i - shift) mod ext] per axis.
template <typename T>
Tensor<T> roll(const Tensor<T>& a, const std::vector<int64_t>& shifts) {
  const Shape& s = a.shape();
  if (shifts.size() != s.size()) throw std::invalid_argument("roll: shift list length mismatch");
  size_t r = s.size();
  std::vector<int64_t> norm(r);
  bool any = false;
  for (size_t i = 0; i < r; ++i) {
    norm[i] = ((shifts[i] % s[i]) + s[i]) % s[i];
    any |= norm[i] != 0;
  }
  if (!any) return reshape(a, s);  // identity, still recorded on the tape
  Shape st = strides_of(s);
  int64_t n = a.size();
  std::vector<T> v(static_cast<size_t>(n));
  const auto& av = a.data();
  std::vector<int64_t> idx(r, 0);
  for (int64_t lin = 0; lin < n; ++lin) {
    int64_t src = 0;
    for (size_t i = 0; i < r; ++i) {
      int64_t j = idx[i] - norm[i];
      if (j < 0) j += s[i];
      src += j * st[i];
    }
    v[static_cast<size_t>(lin)] = av[static_cast<size_t>(src)];
    for (size_t i = r; i-- > 0;) {
      if (++idx[i] < s[i]) break;
      idx[i] = 0;
    }
  }
  Tensor<T> out = detail::make_result<T>(s, std::move(v), {a});
  auto an = a.node();
  auto* self = out.node().get();
  Shape shp = s;
  detail::attach(out, [an, self, shp, st, norm, r, n] {
    an->ensure_grad();
    const auto& g = self->grad;
    std::vector<int64_t> idx(r, 0);
    for (int64_t lin = 0; lin < n; ++lin) {
      int64_t src = 0;
      for (size_t i = 0; i < r; ++i) {
        int64_t j = idx[i] - norm[i];
        if (j < 0) j += shp[i];
        src += j * st[i];
      }
      an->grad[static_cast<size_t>(src)] += g[static_cast<size_t>(lin)];
      for (size_t i = r; i-- > 0;) {
        if (++idx[i] < shp[i]) break;
        idx[i] = 0;
      }
    }
  });
  return out;
}

// Zero padding appended at the high end of each axis.
template <typename T>
Tensor<T> pad_end(const Tensor<T>& a, const std::vector<int64_t>& pads) {
  const Shape& s = a.shape();
  if (pads.size() != s.size()) throw std::invalid_argument("pad_end: pad list length mismatch");
  Shape os(s.size());
  bool any = false;
  for (size_t i = 0; i < s.size(); ++i) {
    if (pads[i] < 0) throw std::invalid_argument("pad_end: negative pad");
    os[i] = s[i] + pads[i];
    any |= pads[i] != 0;
  }
  if (!any) return reshape(a, s);
  size_t r = s.size();
  Shape ost = strides_of(os);
  std::vector<T> v(static_cast<size_t>(shape_numel(os)), T(0));
  const auto& av = a.data();
  std::vector<int64_t> idx(r, 0);
  int64_t n = a.size();
  for (int64_t lin = 0; lin < n; ++lin) {
    int64_t dst = 0;
    for (size_t i = 0; i < r; ++i) dst += idx[i] * ost[i];
    v[static_cast<size_t>(dst)] = av[static_cast<size_t>(lin)];
    for (size_t i = r; i-- > 0;) {
      if (++idx[i] < s[i]) break;
      idx[i] = 0;
    }
  }
  Tensor<T> out = detail::make_result<T>(os, std::move(v), {a});
  auto an = a.node();
  auto* self = out.node().get();
  Shape shp = s;
  detail::attach(out, [an, self, shp, ost, r, n] {
    an->ensure_grad();
    const auto& g = self->grad;
    std::vector<int64_t> idx(r, 0);
    for (int64_t lin = 0; lin < n; ++lin) {
      int64_t src = 0;
      for (size_t i = 0; i < r; ++i) src += idx[i] * ost[i];
      an->grad[static_cast<size_t>(lin)] += g[static_cast<size_t>(src)];
      for (size_t i = r; i-- > 0;) {
        if (++idx[i] < shp[i]) break;
        idx[i] = 0;
      }
    }
  });
  return out;
}

// Keeps the low corner [0, extents) of each axis; exact inverse of pad_end.
template <typename T>
Tensor<T> crop_end(const Tensor<T>& a, const Shape& extents) {
  const Shape& s = a.shape();
  if (extents.size() != s.size()) throw std::invalid_argument("crop_end: extents length mismatch");
  bool any = false;
  for (size_t i = 0; i < s.size(); ++i) {
    if (extents[i] < 1 || extents[i] > s[i]) throw std::invalid_argument("crop_end: extents out of range");
    any |= extents[i] != s[i];
  }
  if (!any) return reshape(a, s);
  size_t r = s.size();
  Shape ist = strides_of(s);
  std::vector<T> v(static_cast<size_t>(shape_numel(extents)));
  const auto& av = a.data();
  std::vector<int64_t> idx(r, 0);
  int64_t n = shape_numel(extents);
  for (int64_t lin = 0; lin < n; ++lin) {
    int64_t src = 0;
    for (size_t i = 0; i < r; ++i) src += idx[i] * ist[i];
    v[static_cast<size_t>(lin)] = av[static_cast<size_t>(src)];
    for (size_t i = r; i-- > 0;) {
      if (++idx[i] < extents[i]) break;
      idx[i] = 0;
    }
  }
  Tensor<T> out = detail::make_result<T>(extents, std::move(v), {a});
  auto an = a.node();
  auto* self = out.node().get();
  Shape ext = extents;
  detail::attach(out, [an, self, ext, ist, r, n] {
    an->ensure_grad();
    const auto& g = self->grad;
    std::vector<int64_t> idx(r, 0);
    for (int64_t lin = 0; lin < n; ++lin) {
      int64_t dst = 0;
      for (size_t i = 0; i < r; ++i) dst += idx[i] * ist[i];
      an->grad[static_cast<size_t>(dst)] += g[static_cast<size_t>(lin)];
      for (size_t i = r; i-- > 0;) {
        if (++idx[i] < ext[i]) break;
        idx[i] = 0;
      }
    }
  });
  return out;
}

// Row gather on axis 1 of a (B, T, C) tensor; backward scatter-adds.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<int64_t>& indices) {
  if (a.rank() != 3) throw std::invalid_argument("gather_rows: expected rank-3 input, got " + shape_str(a.shape()));
  int64_t B = a.shape()[0], Tn = a.shape()[1], C = a.shape()[2];
  for (int64_t i : indices)
    if (i < 0 || i >= Tn) throw std::invalid_argument("gather_rows: index out of range");
  int64_t To = static_cast<int64_t>(indices.size());
  std::vector<T> v(static_cast<size_t>(B * To * C));
  const auto& av = a.data();
  for (int64_t b = 0; b < B; ++b)
    for (int64_t t = 0; t < To; ++t)
      std::copy(av.begin() + (b * Tn + indices[static_cast<size_t>(t)]) * C,
                av.begin() + (b * Tn + indices[static_cast<size_t>(t)]) * C + C,
                v.begin() + (b * To + t) * C);
  Tensor<T> out = detail::make_result<T>({B, To, C}, std::move(v), {a});
  auto an = a.node();
  auto* self = out.node().get();
  auto idx = indices;
  detail::attach(out, [an, self, idx, B, Tn, To, C] {
    an->ensure_grad();
    const auto& g = self->grad;
    for (int64_t b = 0; b < B; ++b)
      for (int64_t t = 0; t < To; ++t)
        for (int64_t c = 0; c < C; ++c)
          an->grad[(b * Tn + idx[static_cast<size_t>(t)]) * C + c] += g[(b * To + t) * C + c];
  });
  return out;
}

}  // namespace hsf
