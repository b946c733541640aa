#pragma once
// Minimal dense-tensor library with tape-based reverse-mode autodiff.
// Scalar type is a template parameter: float for training/inference,
// double for gradient verification. Design constraints honored throughout:
//  - row-major contiguous storage, shapes as vector<int>;
//  - every reduction accumulates in ascending index order (single thread),
//    so repeated runs are bit-identical;
//  - backward releases the graph; reusing released intermediates throws.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "aiscast/rng.hpp"

namespace aiscast {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d <= 0) throw std::invalid_argument("shape dimensions must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// While a NoGrad guard is alive, newly created ops record no tape entries.
// Used for finite differencing and forecast rollouts.
class NoGrad {
 public:
  NoGrad() { ++depth(); }
  ~NoGrad() { --depth(); }
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;
  static bool active() { return depth() > 0; }

 private:
  static int& depth() {
    static thread_local int d = 0;
    return d;
  }
};

template <typename S>
class Tensor {
 public:
  struct Node {
    Shape shape;
    std::vector<S> data;
    std::vector<S> grad;  // allocated lazily, same length as data
    bool requires_grad = false;
    bool released = false;  // interior node whose tape entry was consumed
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;
  };

  Tensor() = default;

  static Tensor zeros(Shape shape) {
    return from_data(shape, std::vector<S>(shape_numel(shape), S{0}));
  }

  static Tensor full(Shape shape, S v) {
    return from_data(shape, std::vector<S>(shape_numel(shape), v));
  }

  static Tensor scalar(S v) { return from_data({1}, {v}); }

  static Tensor from_data(Shape shape, std::vector<S> data) {
    if (shape_numel(shape) != data.size())
      throw std::invalid_argument("from_data: shape " + shape_str(shape) +
                                  " does not match data length " + std::to_string(data.size()));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    return Tensor(std::move(n));
  }

  static Tensor randn(Shape shape, Rng& rng, double stddev) {
    std::vector<S> d(shape_numel(shape));
    for (auto& v : d) v = static_cast<S>(rng.normal(0.0, stddev));
    return from_data(std::move(shape), std::move(d));
  }

  bool defined() const { return static_cast<bool>(n_); }
  const Shape& shape() const { return node().shape; }
  int rank() const { return static_cast<int>(node().shape.size()); }
  std::size_t numel() const { return node().data.size(); }
  const std::vector<S>& data() const { return node().data; }
  // Mutable access to raw values; valid for leaves (parameters, inputs).
  std::vector<S>& values() { return node().data; }

  S value() const {
    if (numel() != 1) throw std::logic_error("value(): tensor is not scalar");
    return node().data[0];
  }

  bool requires_grad() const { return node().requires_grad; }
  Tensor& set_requires_grad(bool b) {
    if (b && node().backprop)
      throw std::logic_error("set_requires_grad: only leaf tensors may be marked");
    node().requires_grad = b;
    return *this;
  }

  bool has_grad() const { return !node().grad.empty(); }
  const std::vector<S>& grad() const {
    if (node().grad.empty()) throw std::logic_error("grad(): no gradient accumulated");
    return node().grad;
  }
  void zero_grad() {
    auto& g = node().grad;
    std::fill(g.begin(), g.end(), S{0});
  }

  Node& node() const {
    if (!n_) throw std::logic_error("operation on default-constructed tensor");
    return *n_;
  }
  const std::shared_ptr<Node>& handle() const { return n_; }

  explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

 private:
  std::shared_ptr<Node> n_;
};

namespace detail {

template <typename S>
void ensure_grad(typename Tensor<S>::Node& n) {
  if (n.grad.empty()) n.grad.assign(n.data.size(), S{0});
}

template <typename S>
void check_usable(const Tensor<S>& t, const char* op) {
  if (t.node().released)
    throw std::logic_error(std::string(op) +
                           ": input graph was released by backward(); rebuild the forward pass");
}

// Creates the output node of an op. `backprop` may be empty for pure leaves.
template <typename S>
Tensor<S> make_result(Shape shape, std::vector<S> data, std::vector<Tensor<S>> parents,
                      std::function<void(typename Tensor<S>::Node&)> backprop) {
  auto out = std::make_shared<typename Tensor<S>::Node>();
  out->shape = std::move(shape);
  out->data = std::move(data);
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.node().requires_grad;
  if (needs && !NoGrad::active()) {
    out->requires_grad = true;
    out->parents.reserve(parents.size());
    for (auto& p : parents) out->parents.push_back(p.handle());
    out->backprop = std::move(backprop);
  }
  return Tensor<S>(std::move(out));
}

}  // namespace detail

// Public extension hook: a custom op with caller-provided backward.
// `back(out_grad, parent_grads)` must add each parent's contribution into
// parent_grads[i]; entries are nullptr for parents not requiring grad.
template <typename S>
Tensor<S> make_node(Shape shape, std::vector<S> data, std::vector<Tensor<S>> parents,
                    std::function<void(const std::vector<S>&, const std::vector<std::vector<S>*>&)> back) {
  for (const auto& p : parents) detail::check_usable(p, "make_node");
  std::vector<std::shared_ptr<typename Tensor<S>::Node>> handles;
  for (const auto& p : parents) handles.push_back(p.handle());
  auto fn = [handles, back](typename Tensor<S>::Node& self) {
    std::vector<std::vector<S>*> grads(handles.size(), nullptr);
    for (std::size_t i = 0; i < handles.size(); ++i) {
      if (handles[i]->requires_grad) {
        detail::ensure_grad<S>(*handles[i]);
        grads[i] = &handles[i]->grad;
      }
    }
    back(self.grad, grads);
  };
  return detail::make_result<S>(std::move(shape), std::move(data), std::move(parents),
                                std::move(fn));
}

// ---------------------------------------------------------------------------
// Elementwise ops. Broadcasting: the lower-rank operand's shape must equal
// the trailing shape of the higher-rank operand (leading-batch broadcast);
// equal ranks require equal shapes.

namespace detail {

inline bool suffix_of(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

template <typename S, typename FwdFn, typename BwdA, typename BwdB>
Tensor<S> binary_elementwise(const Tensor<S>& a, const Tensor<S>& b, const char* name,
                             FwdFn fwd, BwdA bwd_a, BwdB bwd_b) {
  check_usable(a, name);
  check_usable(b, name);
  const bool a_big = a.numel() >= b.numel();
  const Shape& big = a_big ? a.shape() : b.shape();
  const Shape& small = a_big ? b.shape() : a.shape();
  if (!suffix_of(small, big))
    throw std::invalid_argument(std::string(name) + ": shapes " + shape_str(a.shape()) +
                                " and " + shape_str(b.shape()) +
                                " (only leading-batch broadcast is supported)");
  const std::size_t n = shape_numel(big);
  const std::size_t rep = shape_numel(small);
  const auto& ad = a.data();
  const auto& bd = b.data();
  std::vector<S> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const S av = a_big ? ad[i] : ad[i % rep];
    const S bv = a_big ? bd[i % rep] : bd[i];
    out[i] = fwd(av, bv);
  }
  auto an = a.handle();
  auto bn = b.handle();
  auto back = [an, bn, a_big, rep, fwd, bwd_a, bwd_b](typename Tensor<S>::Node& self) {
    const std::size_t n = self.data.size();
    const auto& ad = an->data;
    const auto& bd = bn->data;
    if (an->requires_grad) {
      ensure_grad<S>(*an);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ia = a_big ? i : i % rep;
        an->grad[ia] += self.grad[i] * bwd_a(ad[ia], bd[a_big ? i % rep : i]);
      }
    }
    if (bn->requires_grad) {
      ensure_grad<S>(*bn);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ib = a_big ? i % rep : i;
        bn->grad[ib] += self.grad[i] * bwd_b(ad[a_big ? i : i % rep], bd[ib]);
      }
    }
  };
  return make_result<S>(big, std::move(out), {a, b}, std::move(back));
}

}  // namespace detail

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  return detail::binary_elementwise(
      a, b, "add", [](S x, S y) { return x + y; }, [](S, S) { return S{1}; },
      [](S, S) { return S{1}; });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  return detail::binary_elementwise(
      a, b, "sub", [](S x, S y) { return x - y; }, [](S, S) { return S{1}; },
      [](S, S) { return S{-1}; });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  return detail::binary_elementwise(
      a, b, "mul", [](S x, S y) { return x * y; }, [](S, S y) { return y; },
      [](S x, S) { return x; });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& a, double c) {
  detail::check_usable(a, "scale");
  const S cs = static_cast<S>(c);
  std::vector<S> out(a.numel());
  const auto& ad = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * cs;
  auto an = a.handle();
  auto back = [an, cs](typename Tensor<S>::Node& self) {
    if (!an->requires_grad) return;
    detail::ensure_grad<S>(*an);
    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * cs;
  };
  return detail::make_result<S>(a.shape(), std::move(out), {a}, std::move(back));
}

// ---------------------------------------------------------------------------
// Matrix multiplication over the last two dims. Leading (batch) dims must be
// equal, or absent on one operand (that operand is shared across the batch).

namespace detail {

// C[m,n] += A[m,k] * B[k,n]
template <typename S>
void gemm_acc(const S* A, const S* B, S* C, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const S* arow = A + static_cast<std::size_t>(i) * k;
    S* crow = C + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const S a = arow[p];
      const S* brow = B + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += a * brow[j];
    }
  }
}

// dA[m,k] += dY[m,n] * B[k,n]^T  (dot of contiguous rows)
template <typename S>
void gemm_acc_dA(const S* dY, const S* B, S* dA, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const S* dyrow = dY + static_cast<std::size_t>(i) * n;
    S* darow = dA + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const S* brow = B + static_cast<std::size_t>(p) * n;
      S acc{0};
      for (int j = 0; j < n; ++j) acc += dyrow[j] * brow[j];
      darow[p] += acc;
    }
  }
}

// dB[k,n] += A[m,k]^T * dY[m,n]
template <typename S>
void gemm_acc_dB(const S* A, const S* dY, S* dB, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const S* arow = A + static_cast<std::size_t>(i) * k;
    const S* dyrow = dY + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const S a = arow[p];
      S* dbrow = dB + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) dbrow[j] += a * dyrow[j];
    }
  }
}

}  // namespace detail

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  detail::check_usable(a, "matmul");
  detail::check_usable(b, "matmul");
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() < 2 || bs.size() < 2)
    throw std::invalid_argument("matmul: operands must have rank >= 2");
  const int m = as[as.size() - 2], k = as[as.size() - 1];
  const int k2 = bs[bs.size() - 2], n = bs[bs.size() - 1];
  if (k != k2)
    throw std::invalid_argument("matmul: inner dims differ, " + shape_str(as) + " vs " +
                                shape_str(bs));
  const Shape abatch(as.begin(), as.end() - 2);
  const Shape bbatch(bs.begin(), bs.end() - 2);
  if (!abatch.empty() && !bbatch.empty() && abatch != bbatch)
    throw std::invalid_argument("matmul: batch dims must match or be absent on one side: " +
                                shape_str(as) + " vs " + shape_str(bs));
  const Shape& batch = abatch.empty() ? bbatch : abatch;
  const std::size_t nb = shape_numel(batch.empty() ? Shape{1} : batch);
  Shape oshape = batch;
  oshape.push_back(m);
  oshape.push_back(n);

  const std::size_t a_stride = abatch.empty() ? 0 : static_cast<std::size_t>(m) * k;
  const std::size_t b_stride = bbatch.empty() ? 0 : static_cast<std::size_t>(k) * n;
  const std::size_t o_stride = static_cast<std::size_t>(m) * n;

  std::vector<S> out(nb * o_stride, S{0});
  for (std::size_t i = 0; i < nb; ++i)
    detail::gemm_acc(a.data().data() + i * a_stride, b.data().data() + i * b_stride,
                     out.data() + i * o_stride, m, k, n);

  auto an = a.handle();
  auto bn = b.handle();
  auto back = [an, bn, nb, a_stride, b_stride, o_stride, m, k, n](typename Tensor<S>::Node& self) {
    if (an->requires_grad) {
      detail::ensure_grad<S>(*an);
      for (std::size_t i = 0; i < nb; ++i)
        detail::gemm_acc_dA(self.grad.data() + i * o_stride, bn->data.data() + i * b_stride,
                            an->grad.data() + i * a_stride, m, k, n);
    }
    if (bn->requires_grad) {
      detail::ensure_grad<S>(*bn);
      for (std::size_t i = 0; i < nb; ++i)
        detail::gemm_acc_dB(an->data.data() + i * a_stride, self.grad.data() + i * o_stride,
                            bn->grad.data() + i * b_stride, m, k, n);
    }
  };
  return detail::make_result<S>(std::move(oshape), std::move(out), {a, b}, std::move(back));
}

template <typename S>
Tensor<S> transpose_last2(const Tensor<S>& a) {
  detail::check_usable(a, "transpose_last2");
  const Shape& s = a.shape();
  if (s.size() < 2) throw std::invalid_argument("transpose_last2: rank must be >= 2");
  const int m = s[s.size() - 2], n = s[s.size() - 1];
  Shape oshape = s;
  oshape[s.size() - 2] = n;
  oshape[s.size() - 1] = m;
  const std::size_t mats = a.numel() / (static_cast<std::size_t>(m) * n);
  std::vector<S> out(a.numel());
  const auto& ad = a.data();
  for (std::size_t b = 0; b < mats; ++b) {
    const S* src = ad.data() + b * m * n;
    S* dst = out.data() + b * m * n;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) dst[static_cast<std::size_t>(j) * m + i] = src[static_cast<std::size_t>(i) * n + j];
  }
  auto an = a.handle();
  auto back = [an, mats, m, n](typename Tensor<S>::Node& self) {
    if (!an->requires_grad) return;
    detail::ensure_grad<S>(*an);
    for (std::size_t b = 0; b < mats; ++b) {
      const S* g = self.grad.data() + b * m * n;  // g is [n,m]
      S* da = an->grad.data() + b * m * n;
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) da[static_cast<std::size_t>(i) * n + j] += g[static_cast<std::size_t>(j) * m + i];
    }
  };
  return detail::make_result<S>(std::move(oshape), std::move(out), {a}, std::move(back));
}

// Copying reshape (same element count, new shape).
template <typename S>
Tensor<S> reshape(const Tensor<S>& a, Shape shape) {
  detail::check_usable(a, "reshape");
  if (shape_numel(shape) != a.numel())
    throw std::invalid_argument("reshape: element count mismatch, " + shape_str(a.shape()) +
                                " -> " + shape_str(shape));
  std::vector<S> out = a.data();
  auto an = a.handle();
  auto back = [an](typename Tensor<S>::Node& self) {
    if (!an->requires_grad) return;
    detail::ensure_grad<S>(*an);
    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
  };
  return detail::make_result<S>(std::move(shape), std::move(out), {a}, std::move(back));
}

// ---------------------------------------------------------------------------
// Softmax family.

template <typename S>
Tensor<S> softmax_lastdim(const Tensor<S>& a) {
  detail::check_usable(a, "softmax_lastdim");
  if (a.rank() < 1) throw std::invalid_argument("softmax_lastdim: rank must be >= 1");
  const int D = a.shape().back();
  const std::size_t rows = a.numel() / D;
  std::vector<S> out(a.numel());
  const auto& ad = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const S* x = ad.data() + r * D;
    S* y = out.data() + r * D;
    S mx = x[0];
    for (int j = 1; j < D; ++j) mx = std::max(mx, x[j]);
    S sum{0};
    for (int j = 0; j < D; ++j) {
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    const S inv = S{1} / sum;
    for (int j = 0; j < D; ++j) y[j] *= inv;
  }
  auto an = a.handle();
  auto back = [an, rows, D](typename Tensor<S>::Node& self) {
    if (!an->requires_grad) return;
    detail::ensure_grad<S>(*an);
    for (std::size_t r = 0; r < rows; ++r) {
      const S* y = self.data.data() + r * D;
      const S* dy = self.grad.data() + r * D;
      S* dx = an->grad.data() + r * D;
      S dot{0};
      for (int j = 0; j < D; ++j) dot += dy[j] * y[j];
      for (int j = 0; j < D; ++j) dx[j] += y[j] * (dy[j] - dot);
    }
  };
  return detail::make_result<S>(a.shape(), std::move(out), {a}, std::move(back));
}

// Softmax over the last dim of square [..., K, K] score matrices where row i
// attends only to columns j <= i. Masked entries are exactly zero in the
// output, so later positions cannot influence earlier ones even at the bit
// level.
template <typename S>
Tensor<S> causal_masked_softmax(const Tensor<S>& a) {
  detail::check_usable(a, "causal_masked_softmax");
  const Shape& s = a.shape();
  if (s.size() < 2 || s[s.size() - 1] != s[s.size() - 2])
    throw std::invalid_argument("causal_masked_softmax: needs [..., K, K], got " + shape_str(s));
  const int K = s.back();
  const std::size_t mats = a.numel() / (static_cast<std::size_t>(K) * K);
  std::vector<S> out(a.numel(), S{0});
  const auto& ad = a.data();
  for (std::size_t b = 0; b < mats; ++b) {
    for (int i = 0; i < K; ++i) {
      const S* x = ad.data() + (b * K + i) * K;
      S* y = out.data() + (b * K + i) * K;
      S mx = x[0];
      for (int j = 1; j <= i; ++j) mx = std::max(mx, x[j]);
      S sum{0};
      for (int j = 0; j <= i; ++j) {
        y[j] = std::exp(x[j] - mx);
        sum += y[j];
      }
      const S inv = S{1} / sum;
      for (int j = 0; j <= i; ++j) y[j] *= inv;
    }
  }
  auto an = a.handle();
  auto back = [an, mats, K](typename Tensor<S>::Node& self) {
    if (!an->requires_grad) return;
    detail::ensure_grad<S>(*an);
    for (std::size_t b = 0; b < mats; ++b) {
      for (int i = 0; i < K; ++i) {
        const S* y = self.data.data() + (b * K + i) * K;
        const S* dy = self.grad.data() + (b * K + i) * K;
        S* dx = an->grad.data() + (b * K + i) * K;
        S dot{0};
        for (int j = 0; j <= i; ++j) dot += dy[j] * y[j];
        for (int j = 0; j <= i; ++j) dx[j] += y[j] * (dy[j] - dot);
      }
    }
  };
  return detail::make_result<S>(a.shape(), std::move(out), {a}, std::move(back));
}

// ---------------------------------------------------------------------------
// Layer norm over the last dim with learnable gain and bias (biased variance).

template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias,
                     double eps = 1e-5) {
  detail::check_usable(x, "layer_norm");
  detail::check_usable(gain, "layer_norm");
  detail::check_usable(bias, "layer_norm");
  if (x.rank() < 1) throw std::invalid_argument("layer_norm: rank must be >= 1");
  const int D = x.shape().back();
  if (gain.shape() != Shape{D} || bias.shape() != Shape{D})
    throw std::invalid_argument("layer_norm: gain/bias must have shape [D]");
  const std::size_t rows = x.numel() / D;
  std::vector<S> out(x.numel());
  auto xhat = std::make_shared<std::vector<S>>(x.numel());
  auto inv = std::make_shared<std::vector<S>>(rows);
  const auto& xd = x.data();
  const auto& gd = gain.data();
  const auto& bd = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const S* xr = xd.data() + r * D;
    S mean{0};
    for (int j = 0; j < D; ++j) mean += xr[j];
    mean /= static_cast<S>(D);
    S var{0};
    for (int j = 0; j < D; ++j) {
      const S c = xr[j] - mean;
      var += c * c;
    }
    var /= static_cast<S>(D);
    const S iv = S{1} / std::sqrt(var + static_cast<S>(eps));
    (*inv)[r] = iv;
    S* xh = xhat->data() + r * D;
    S* yr = out.data() + r * D;
    for (int j = 0; j < D; ++j) {
      xh[j] = (xr[j] - mean) * iv;
      yr[j] = gd[j] * xh[j] + bd[j];
    }
  }
  auto xn = x.handle();
  auto gn = gain.handle();
  auto bn = bias.handle();
  auto back = [xn, gn, bn, xhat, inv, rows, D](typename Tensor<S>::Node& self) {
    const auto& gd = gn->data;
    if (gn->requires_grad) detail::ensure_grad<S>(*gn);
    if (bn->requires_grad) detail::ensure_grad<S>(*bn);
    if (xn->requires_grad) detail::ensure_grad<S>(*xn);
    for (std::size_t r = 0; r < rows; ++r) {
      const S* dy = self.grad.data() + r * D;
      const S* xh = xhat->data() + r * D;
      if (gn->requires_grad)
        for (int j = 0; j < D; ++j) gn->grad[j] += dy[j] * xh[j];
      if (bn->requires_grad)
        for (int j = 0; j < D; ++j) bn->grad[j] += dy[j];
      if (xn->requires_grad) {
        S m1{0}, m2{0};  // mean(dxhat), mean(dxhat * xhat)
        for (int j = 0; j < D; ++j) {
          const S dxh = dy[j] * gd[j];
          m1 += dxh;
          m2 += dxh * xh[j];
        }
        m1 /= static_cast<S>(D);
        m2 /= static_cast<S>(D);
        S* dx = xn->grad.data() + r * D;
        const S iv = (*inv)[r];
        for (int j = 0; j < D; ++j) {
          const S dxh = dy[j] * gd[j];
          dx[j] += iv * (dxh - m1 - xh[j] * m2);
        }
      }
    }
  };
  return detail::make_result<S>(x.shape(), std::move(out), {x, gain, bias}, std::move(back));
}

// ---------------------------------------------------------------------------
// GELU, tanh approximation.

template <typename S>
Tensor<S> gelu(const Tensor<S>& x) {
  detail::check_usable(x, "gelu");
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double a3 = 0.044715;
  std::vector<S> out(x.numel());
  const auto& xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = static_cast<double>(xd[i]);
    const double u = c * (v + a3 * v * v * v);
    out[i] = static_cast<S>(0.5 * v * (1.0 + std::tanh(u)));
  }
  auto xn = x.handle();
  auto back = [xn](typename Tensor<S>::Node& self) {
    if (!xn->requires_grad) return;
    detail::ensure_grad<S>(*xn);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double v = static_cast<double>(xn->data[i]);
      const double u = c * (v + a3 * v * v * v);
      const double t = std::tanh(u);
      const double d = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * c * (1.0 + 3.0 * a3 * v * v);
      xn->grad[i] += self.grad[i] * static_cast<S>(d);
    }
  };
  return detail::make_result<S>(x.shape(), std::move(out), {x}, std::move(back));
}

// ---------------------------------------------------------------------------
// Embedding row gather; backward scatter-adds in ascending row order.

template <typename S>
Tensor<S> embedding_gather(const Tensor<S>& table, const std::vector<int>& indices) {
  detail::check_usable(table, "embedding_gather");
  if (table.rank() != 2) throw std::invalid_argument("embedding_gather: table must be [V, d]");
  if (indices.empty()) throw std::invalid_argument("embedding_gather: no indices");
  const int V = table.shape()[0], d = table.shape()[1];
  for (int ix : indices)
    if (ix < 0 || ix >= V)
      throw std::out_of_range("embedding_gather: index " + std::to_string(ix) +
                              " outside table of " + std::to_string(V) + " rows");
  const std::size_t n = indices.size();
  std::vector<S> out(n * d);
  const auto& td = table.data();
  for (std::size_t r = 0; r < n; ++r)
    std::copy_n(td.data() + static_cast<std::size_t>(indices[r]) * d, d, out.data() + r * d);
  auto tn = table.handle();
  auto idx = indices;
  auto back = [tn, idx, d](typename Tensor<S>::Node& self) {
    if (!tn->requires_grad) return;
    detail::ensure_grad<S>(*tn);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const S* g = self.grad.data() + r * d;
      S* dst = tn->grad.data() + static_cast<std::size_t>(idx[r]) * d;
      for (int j = 0; j < d; ++j) dst[j] += g[j];
    }
  };
  return detail::make_result<S>({static_cast<int>(n), d}, std::move(out), {table},
                                std::move(back));
}

// ---------------------------------------------------------------------------
// Last-dim slice / concat (used to split attention heads and hidden blocks).

template <typename S>
Tensor<S> slice_lastdim(const Tensor<S>& a, int start, int len) {
  detail::check_usable(a, "slice_lastdim");
  if (a.rank() < 1) throw std::invalid_argument("slice_lastdim: rank must be >= 1");
  const int D = a.shape().back();
  if (start < 0 || len <= 0 || start + len > D)
    throw std::invalid_argument("slice_lastdim: range [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") outside dim " + std::to_string(D));
  const std::size_t rows = a.numel() / D;
  Shape oshape = a.shape();
  oshape.back() = len;
  std::vector<S> out(rows * len);
  const auto& ad = a.data();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(ad.data() + r * D + start, len, out.data() + r * len);
  auto an = a.handle();
  auto back = [an, rows, D, start, len](typename Tensor<S>::Node& self) {
    if (!an->requires_grad) return;
    detail::ensure_grad<S>(*an);
    for (std::size_t r = 0; r < rows; ++r) {
      const S* g = self.grad.data() + r * len;
      S* dst = an->grad.data() + r * D + start;
      for (int j = 0; j < len; ++j) dst[j] += g[j];
    }
  };
  return detail::make_result<S>(std::move(oshape), std::move(out), {a}, std::move(back));
}

template <typename S>
Tensor<S> concat_lastdim(const std::vector<Tensor<S>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_lastdim: no inputs");
  for (const auto& p : parts) detail::check_usable(p, "concat_lastdim");
  const Shape lead(parts[0].shape().begin(), parts[0].shape().end() - 1);
  int D = 0;
  for (const auto& p : parts) {
    if (p.rank() < 1 || Shape(p.shape().begin(), p.shape().end() - 1) != lead)
      throw std::invalid_argument("concat_lastdim: leading dims differ");
    D += p.shape().back();
  }
  const std::size_t rows = shape_numel(lead.empty() ? Shape{1} : lead);
  Shape oshape = lead;
  oshape.push_back(D);
  std::vector<S> out(rows * D);
  int off = 0;
  for (const auto& p : parts) {
    const int d = p.shape().back();
    const auto& pd = p.data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(pd.data() + r * d, d, out.data() + r * D + off);
    off += d;
  }
  std::vector<std::shared_ptr<typename Tensor<S>::Node>> handles;
  std::vector<int> widths;
  for (const auto& p : parts) {
    handles.push_back(p.handle());
    widths.push_back(p.shape().back());
  }
  auto back = [handles, widths, rows, D](typename Tensor<S>::Node& self) {
    int off = 0;
    for (std::size_t k = 0; k < handles.size(); ++k) {
      const int d = widths[k];
      if (handles[k]->requires_grad) {
        detail::ensure_grad<S>(*handles[k]);
        for (std::size_t r = 0; r < rows; ++r) {
          const S* g = self.grad.data() + r * D + off;
          S* dst = handles[k]->grad.data() + r * d;
          for (int j = 0; j < d; ++j) dst[j] += g[j];
        }
      }
      off += d;
    }
  };
  return detail::make_result<S>(std::move(oshape), std::move(out), parts, std::move(back));
}

// ---------------------------------------------------------------------------
// Reductions and simple unary math.

template <typename S>
Tensor<S> sum_all(const Tensor<S>& a) {
  detail::check_usable(a, "sum_all");
  S acc{0};
  for (S v : a.data()) acc += v;
  auto an = a.handle();
  auto back = [an](typename Tensor<S>::Node& self) {
    if (!an->requires_grad) return;
    detail::ensure_grad<S>(*an);
    const S g = self.grad[0];
    for (auto& d : an->grad) d += g;
  };
  return detail::make_result<S>({1}, {acc}, {a}, std::move(back));
}

template <typename S>
Tensor<S> mean_all(const Tensor<S>& a) {
  return scale(sum_all(a), 1.0 / static_cast<double>(a.numel()));
}

// Sums over the last dim, dropping it ([..., D] -> [...]; rank-1 -> scalar).
template <typename S>
Tensor<S> sum_lastdim(const Tensor<S>& a) {
  detail::check_usable(a, "sum_lastdim");
  if (a.rank() < 1) throw std::invalid_argument("sum_lastdim: rank must be >= 1");
  const int D = a.shape().back();
  const std::size_t rows = a.numel() / D;
  Shape oshape(a.shape().begin(), a.shape().end() - 1);
  if (oshape.empty()) oshape = {1};
  std::vector<S> out(rows, S{0});
  const auto& ad = a.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (int j = 0; j < D; ++j) out[r] += ad[r * D + j];
  auto an = a.handle();
  auto back = [an, rows, D](typename Tensor<S>::Node& self) {
    if (!an->requires_grad) return;
    detail::ensure_grad<S>(*an);
    for (std::size_t r = 0; r < rows; ++r) {
      const S g = self.grad[r];
      S* dst = an->grad.data() + r * D;
      for (int j = 0; j < D; ++j) dst[j] += g;
    }
  };
  return detail::make_result<S>(std::move(oshape), std::move(out), {a}, std::move(back));
}

// Elementwise square root; inputs must be non-negative. The derivative at
// exactly zero is taken as zero (subgradient), keeping training finite.
template <typename S>
Tensor<S> sqrt_elem(const Tensor<S>& a) {
  detail::check_usable(a, "sqrt_elem");
  std::vector<S> out(a.numel());
  const auto& ad = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(ad[i] >= S{0})) throw std::domain_error("sqrt_elem: negative or NaN input");
    out[i] = std::sqrt(ad[i]);
  }
  auto an = a.handle();
  auto back = [an](typename Tensor<S>::Node& self) {
    if (!an->requires_grad) return;
    detail::ensure_grad<S>(*an);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const S y = self.data[i];
      if (y > S{0}) an->grad[i] += self.grad[i] * (S{0.5} / y);
    }
  };
  return detail::make_result<S>(a.shape(), std::move(out), {a}, std::move(back));
}

// ---------------------------------------------------------------------------
// Fused cross-entropy losses over logits (mean over rows). Log-sum-exp is
// computed with max subtraction; no probability is materialized in the graph.

template <typename S>
Tensor<S> cross_entropy_from_logits(const Tensor<S>& logits, const std::vector<int>& targets) {
  detail::check_usable(logits, "cross_entropy_from_logits");
  if (logits.rank() < 2)
    throw std::invalid_argument("cross_entropy_from_logits: logits must be [..., V]");
  const int V = logits.shape().back();
  const std::size_t rows = logits.numel() / V;
  if (targets.size() != rows)
    throw std::invalid_argument("cross_entropy_from_logits: " + std::to_string(targets.size()) +
                                " targets for " + std::to_string(rows) + " rows");
  for (int t : targets)
    if (t < 0 || t >= V) throw std::out_of_range("cross_entropy_from_logits: target out of range");
  const auto& ld = logits.data();
  auto probs = std::make_shared<std::vector<S>>(logits.numel());
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const S* x = ld.data() + r * V;
    S* p = probs->data() + r * V;
    S mx = x[0];
    for (int j = 1; j < V; ++j) mx = std::max(mx, x[j]);
    S sum{0};
    for (int j = 0; j < V; ++j) {
      p[j] = std::exp(x[j] - mx);
      sum += p[j];
    }
    const S inv = S{1} / sum;
    for (int j = 0; j < V; ++j) p[j] *= inv;
    const S lse = mx + std::log(sum);
    total += static_cast<double>(lse - x[targets[r]]);
  }
  const S loss = static_cast<S>(total / static_cast<double>(rows));
  auto ln = logits.handle();
  auto tgt = targets;
  auto back = [ln, tgt, probs, rows, V](typename Tensor<S>::Node& self) {
    if (!ln->requires_grad) return;
    detail::ensure_grad<S>(*ln);
    const S g = self.grad[0] / static_cast<S>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const S* p = probs->data() + r * V;
      S* dx = ln->grad.data() + r * V;
      for (int j = 0; j < V; ++j) dx[j] += g * p[j];
      dx[tgt[r]] -= g;
    }
  };
  return detail::make_result<S>({1}, {loss}, {logits}, std::move(back));
}

// Cross-entropy of the coarse distribution implied by grouping `factor`
// consecutive fine bins, computed directly from fine logits:
//   -log p_coarse[g] = LSE(all logits) - LSE(logits in group g),
// which avoids materializing (and differentiating through) small summed
// probabilities.
template <typename S>
Tensor<S> coarse_cross_entropy_from_logits(const Tensor<S>& logits,
                                           const std::vector<int>& coarse_targets, int factor) {
  detail::check_usable(logits, "coarse_cross_entropy_from_logits");
  if (logits.rank() < 2)
    throw std::invalid_argument("coarse_cross_entropy_from_logits: logits must be [..., V]");
  if (factor < 1) throw std::invalid_argument("coarse_cross_entropy_from_logits: factor >= 1");
  const int V = logits.shape().back();
  const int G = (V + factor - 1) / factor;
  const std::size_t rows = logits.numel() / V;
  if (coarse_targets.size() != rows)
    throw std::invalid_argument("coarse_cross_entropy_from_logits: target count mismatch");
  for (int t : coarse_targets)
    if (t < 0 || t >= G)
      throw std::out_of_range("coarse_cross_entropy_from_logits: coarse target out of range");
  const auto& ld = logits.data();
  auto probs = std::make_shared<std::vector<S>>(logits.numel());   // softmax over all bins
  auto gprobs = std::make_shared<std::vector<S>>(logits.numel(), S{0});  // softmax within group
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const S* x = ld.data() + r * V;
    S* p = probs->data() + r * V;
    S mx = x[0];
    for (int j = 1; j < V; ++j) mx = std::max(mx, x[j]);
    S sum{0};
    for (int j = 0; j < V; ++j) {
      p[j] = std::exp(x[j] - mx);
      sum += p[j];
    }
    const S inv = S{1} / sum;
    for (int j = 0; j < V; ++j) p[j] *= inv;
    const S lse_full = mx + std::log(sum);

    const int lo = coarse_targets[r] * factor;
    const int hi = std::min(lo + factor, V);
    S gm = x[lo];
    for (int j = lo + 1; j < hi; ++j) gm = std::max(gm, x[j]);
    S gsum{0};
    S* q = gprobs->data() + r * V;
    for (int j = lo; j < hi; ++j) {
      q[j] = std::exp(x[j] - gm);
      gsum += q[j];
    }
    const S ginv = S{1} / gsum;
    for (int j = lo; j < hi; ++j) q[j] *= ginv;
    const S lse_group = gm + std::log(gsum);
    total += static_cast<double>(lse_full - lse_group);
  }
  const S loss = static_cast<S>(total / static_cast<double>(rows));
  auto ln = logits.handle();
  auto back = [ln, probs, gprobs, rows, V](typename Tensor<S>::Node& self) {
    if (!ln->requires_grad) return;
    detail::ensure_grad<S>(*ln);
    const S g = self.grad[0] / static_cast<S>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const S* p = probs->data() + r * V;
      const S* q = gprobs->data() + r * V;
      S* dx = ln->grad.data() + r * V;
      for (int j = 0; j < V; ++j) dx[j] += g * (p[j] - q[j]);
    }
  };
  return detail::make_result<S>({1}, {loss}, {logits}, std::move(back));
}

// ---------------------------------------------------------------------------
// Inverted dropout. p == 0 returns the input unchanged; mask order is the
// element order, so a fixed rng state gives a fixed mask.

template <typename S>
Tensor<S> dropout(const Tensor<S>& x, double p, Rng& rng) {
  detail::check_usable(x, "dropout");
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0, 1)");
  if (p == 0.0) return x;
  const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
  auto mask = std::make_shared<std::vector<unsigned char>>(x.numel());
  std::vector<S> out(x.numel());
  const auto& xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool keep = rng.uniform() >= p;
    (*mask)[i] = keep;
    out[i] = keep ? xd[i] * keep_scale : S{0};
  }
  auto xn = x.handle();
  auto back = [xn, mask, keep_scale](typename Tensor<S>::Node& self) {
    if (!xn->requires_grad) return;
    detail::ensure_grad<S>(*xn);
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if ((*mask)[i]) xn->grad[i] += self.grad[i] * keep_scale;
  };
  return detail::make_result<S>(x.shape(), std::move(out), {x}, std::move(back));
}

// ---------------------------------------------------------------------------
// Reverse pass. Topological order by iterative DFS; after the sweep every
// interior node's tape entry is dropped, so a second backward — or building
// new ops on released intermediates — throws instead of silently computing
// garbage. Leaf tensors keep their accumulated grads.

template <typename S>
void backward(const Tensor<S>& loss) {
  using Node = typename Tensor<S>::Node;
  if (loss.numel() != 1) throw std::logic_error("backward: loss must be scalar");
  if (loss.node().released)
    throw std::logic_error("backward: graph already released; rebuild the forward pass");
  if (!loss.node().requires_grad)
    throw std::logic_error("backward: loss does not depend on any differentiable leaf");

  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(&loss.node(), 0);
  seen.insert(&loss.node());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i].get();
      ++i;
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  // order is post-order: parents precede children; traverse children first.
  detail::ensure_grad<S>(loss.node());
  loss.node().grad[0] = S{1};
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop(**it);
  for (Node* n : order) {
    if (n->backprop) {
      n->backprop = nullptr;
      n->parents.clear();
      n->grad.clear();
      n->grad.shrink_to_fit();
      n->released = true;
    }
  }
}

// ---------------------------------------------------------------------------
// Gradient verification by central differences, double precision only.

struct GradCheckOptions {
  double eps = 1e-3;
  double tol = 1e-4;
  // Relative error uses max(|analytic|, |numeric|, denom_floor) as the
  // denominator so near-zero gradients are compared absolutely; around the
  // default floor, central-difference truncation error would otherwise
  // dominate the comparison.
  double denom_floor = 0.1;
  int min_coords = 200;
  std::uint64_t seed = 0x9dc4c5;
};

struct GradCheckResult {
  bool pass = false;
  double max_rel_err = 0.0;
  int coords_checked = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// `build_loss` must construct a fresh scalar forward pass from the given
// parameter tensors each time it is called.
template <typename F>
GradCheckResult grad_check(F&& build_loss,
                           std::vector<std::pair<std::string, Tensor<double>>> params,
                           GradCheckOptions opt = {}) {
  for (auto& [name, p] : params) {
    p.set_requires_grad(true);
    if (p.has_grad()) p.zero_grad();
  }
  {
    Tensor<double> loss = build_loss();
    backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& [name, p] : params)
    analytic.push_back(p.has_grad() ? p.grad() : std::vector<double>(p.numel(), 0.0));

  // Spread sampled coordinates across parameters proportionally to size,
  // at least one per parameter, topping up until the minimum is reached.
  std::size_t total = 0;
  for (auto& [name, p] : params) total += p.numel();
  const std::size_t want = std::min<std::size_t>(total, static_cast<std::size_t>(opt.min_coords));
  std::vector<std::size_t> quota(params.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t n = params[i].second.numel();
    quota[i] = std::max<std::size_t>(1, want * n / total);
    quota[i] = std::min(quota[i], n);
    assigned += quota[i];
  }
  for (std::size_t i = 0; assigned < want; i = (i + 1) % params.size()) {
    if (quota[i] < params[i].second.numel()) {
      ++quota[i];
      ++assigned;
    }
    bool capacity = false;
    for (std::size_t j = 0; j < params.size(); ++j)
      capacity = capacity || quota[j] < params[j].second.numel();
    if (!capacity) break;
  }

  Rng rng(opt.seed);
  GradCheckResult res;
  NoGrad guard;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& [name, p] = params[pi];
    std::unordered_set<std::size_t> chosen;
    while (chosen.size() < quota[pi]) chosen.insert(rng.next_below(p.numel()));
    std::vector<std::size_t> coords(chosen.begin(), chosen.end());
    std::sort(coords.begin(), coords.end());
    for (std::size_t c : coords) {
      const double saved = p.values()[c];
      p.values()[c] = saved + opt.eps;
      const double fp = build_loss().value();
      p.values()[c] = saved - opt.eps;
      const double fm = build_loss().value();
      p.values()[c] = saved;
      const double numeric = (fp - fm) / (2.0 * opt.eps);
      const double a = analytic[pi][c];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opt.denom_floor});
      ++res.coords_checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = name;
        res.worst_index = c;
        res.worst_analytic = a;
        res.worst_numeric = numeric;
      }
    }
  }
  res.pass = res.max_rel_err <= opt.tol;
  return res;
}

}  // namespace aiscast
