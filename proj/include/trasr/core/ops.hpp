// Copyright 2026 The trasr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "trasr/core/error.hpp"
#include "trasr/core/gemm.hpp"
#include "trasr/core/rng.hpp"
#include "trasr/core/tensor.hpp"

namespace trasr {

namespace detail {

inline std::int64_t normalize_axis(std::int64_t axis, std::int64_t rank) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(rank));
  }
  return axis;
}

inline Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::int64_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::int64_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da == db || db == 1) {
      out[i] = da;
    } else if (da == 1) {
      out[i] = db;
    } else {
      throw DimensionError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
  }
  return out;
}

// offsets[k] is the flat index into a tensor of shape `in` that feeds flat
// output index k of a broadcast to `out`.
inline std::vector<std::int64_t> broadcast_offsets(const Shape& in, const Shape& out) {
  if (in.size() > out.size()) {
    throw DimensionError("cannot broadcast " + shape_str(in) + " to " + shape_str(out));
  }
  const std::size_t r = out.size();
  const std::size_t lead = r - in.size();
  std::vector<std::int64_t> stride(r, 0);
  std::int64_t s = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    if (in[i] != 1 && in[i] != out[lead + i]) {
      throw DimensionError("cannot broadcast " + shape_str(in) + " to " + shape_str(out));
    }
    stride[lead + i] = in[i] == 1 ? 0 : s;
    s *= in[i];
  }
  const std::int64_t n = shape_numel(out);
  std::vector<std::int64_t> offsets(static_cast<std::size_t>(n));
  std::vector<std::int64_t> idx(r, 0);
  std::int64_t off = 0;
  for (std::int64_t k = 0; k < n; ++k) {
    offsets[static_cast<std::size_t>(k)] = off;
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      off += stride[d];
      if (idx[d] < out[d]) break;
      off -= stride[d] * out[d];
      idx[d] = 0;
    }
  }
  return offsets;
}

enum class BinaryKind { kAdd, kSub, kMul };

template <typename S>
BasicTensor<S> binary(const BasicTensor<S>& a, const BasicTensor<S>& b, BinaryKind kind) {
  Shape out = broadcast_shapes(a.shape(), b.shape());
  const std::int64_t n = shape_numel(out);
  const bool same_a = a.shape() == out;
  const bool same_b = b.shape() == out;
  std::vector<std::int64_t> oa = same_a ? std::vector<std::int64_t>{} : broadcast_offsets(a.shape(), out);
  std::vector<std::int64_t> ob = same_b ? std::vector<std::int64_t>{} : broadcast_offsets(b.shape(), out);
  const S* av = a.data().data();
  const S* bv = b.data().data();
  std::vector<S> value(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const S x = av[same_a ? i : oa[i]];
    const S y = bv[same_b ? i : ob[i]];
    value[i] = kind == BinaryKind::kAdd ? x + y : kind == BinaryKind::kSub ? x - y : x * y;
  }
  return make_result<S>(
      std::move(out), std::move(value), {a.node_ptr(), b.node_ptr()},
      [kind, n, oa = std::move(oa), ob = std::move(ob)](TensorNode<S>& self) {
        const auto& g = self.grad;
        auto& A = *self.inputs[0];
        auto& B = *self.inputs[1];
        const bool same_a = oa.empty();
        const bool same_b = ob.empty();
        if (A.requires_grad) {
          auto& ga = grad_buffer(A);
          for (std::int64_t i = 0; i < n; ++i) {
            const S d = kind == BinaryKind::kMul ? g[i] * B.value[same_b ? i : ob[i]] : g[i];
            ga[same_a ? i : oa[i]] += d;
          }
        }
        if (B.requires_grad) {
          auto& gb = grad_buffer(B);
          for (std::int64_t i = 0; i < n; ++i) {
            const S d = kind == BinaryKind::kMul   ? g[i] * A.value[same_a ? i : oa[i]]
                        : kind == BinaryKind::kSub ? -g[i]
                                                   : g[i];
            gb[same_b ? i : ob[i]] += d;
          }
        }
      });
}

}  // namespace detail

template <typename S>
BasicTensor<S> add(const BasicTensor<S>& a, const BasicTensor<S>& b) {
  return detail::binary(a, b, detail::BinaryKind::kAdd);
}
template <typename S>
BasicTensor<S> sub(const BasicTensor<S>& a, const BasicTensor<S>& b) {
  return detail::binary(a, b, detail::BinaryKind::kSub);
}
template <typename S>
BasicTensor<S> mul(const BasicTensor<S>& a, const BasicTensor<S>& b) {
  return detail::binary(a, b, detail::BinaryKind::kMul);
}

template <typename S>
BasicTensor<S> scale(const BasicTensor<S>& x, S factor) {
  std::vector<S> v(x.data().begin(), x.data().end());
  for (auto& e : v) e *= factor;
  return make_result<S>(x.shape(), std::move(v), {x.node_ptr()}, [factor](TensorNode<S>& self) {
    auto& in = *self.inputs[0];
    auto& g = grad_buffer(in);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
  });
}

template <typename S>
BasicTensor<S> operator+(const BasicTensor<S>& a, const BasicTensor<S>& b) { return add(a, b); }
template <typename S>
BasicTensor<S> operator-(const BasicTensor<S>& a, const BasicTensor<S>& b) { return sub(a, b); }
template <typename S>
BasicTensor<S> operator*(const BasicTensor<S>& a, const BasicTensor<S>& b) { return mul(a, b); }
template <typename S>
BasicTensor<S> operator*(S k, const BasicTensor<S>& x) { return scale(x, k); }

/// ReLU with subgradient 0 at 0.
template <typename S>
BasicTensor<S> relu(const BasicTensor<S>& x) {
  std::vector<S> v(x.data().begin(), x.data().end());
  for (auto& e : v) e = e > S{0} ? e : S{0};
  return make_result<S>(x.shape(), std::move(v), {x.node_ptr()}, [](TensorNode<S>& self) {
    auto& in = *self.inputs[0];
    auto& g = grad_buffer(in);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (in.value[i] > S{0}) g[i] += self.grad[i];
    }
  });
}

template <typename S>
BasicTensor<S> sum(const BasicTensor<S>& x) {
  S total{0};
  for (auto e : x.data()) total += e;
  return make_result<S>({}, {total}, {x.node_ptr()}, [](TensorNode<S>& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    const S up = self.grad[0];
    for (auto& e : g) e += up;
  });
}

template <typename S>
BasicTensor<S> mean(const BasicTensor<S>& x) {
  return scale(sum(x), S{1} / static_cast<S>(std::max<std::int64_t>(1, x.numel())));
}

/// Batched matrix product over the last two axes; leading axes broadcast.
template <typename S>
BasicTensor<S> matmul(const BasicTensor<S>& a, const BasicTensor<S>& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw DimensionError("matmul needs rank >= 2, got " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  const std::int64_t m = a.dim(-2), k = a.dim(-1), k2 = b.dim(-2), n = b.dim(-1);
  if (k != k2) {
    throw DimensionError("matmul inner dimensions differ: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  const Shape batch_a(a.shape().begin(), a.shape().end() - 2);
  const Shape batch_b(b.shape().begin(), b.shape().end() - 2);
  const Shape batch = detail::broadcast_shapes(batch_a, batch_b);
  Shape out = batch;
  out.push_back(m);
  out.push_back(n);
  const std::int64_t nb = shape_numel(batch);
  std::vector<S> value(static_cast<std::size_t>(nb * m * n), S{0});

  // A batch of rows against a shared right operand is one tall product.
  const bool shared_rhs = b.rank() == 2 && batch_a == batch;
  std::vector<std::int64_t> oa, ob;
  if (!shared_rhs) {
    oa = detail::broadcast_offsets(batch_a, batch);
    ob = detail::broadcast_offsets(batch_b, batch);
  }
  const S* A = a.data().data();
  const S* B = b.data().data();
  if (shared_rhs) {
    gemm::nn(nb * m, n, k, A, B, value.data());
  } else {
    for (std::int64_t i = 0; i < nb; ++i) {
      gemm::nn(m, n, k, A + oa[i] * m * k, B + ob[i] * k * n, value.data() + i * m * n);
    }
  }
  return make_result<S>(
      std::move(out), std::move(value), {a.node_ptr(), b.node_ptr()},
      [=, oa = std::move(oa), ob = std::move(ob)](TensorNode<S>& self) {
        auto& An = *self.inputs[0];
        auto& Bn = *self.inputs[1];
        const S* G = self.grad.data();
        if (shared_rhs) {
          if (An.requires_grad) gemm::nt(nb * m, k, n, G, Bn.value.data(), grad_buffer(An).data());
          if (Bn.requires_grad) gemm::tn(k, n, nb * m, An.value.data(), G, grad_buffer(Bn).data());
          return;
        }
        for (std::int64_t i = 0; i < nb; ++i) {
          const S* g = G + i * m * n;
          if (An.requires_grad) {
            gemm::nt(m, k, n, g, Bn.value.data() + ob[i] * k * n,
                     grad_buffer(An).data() + oa[i] * m * k);
          }
          if (Bn.requires_grad) {
            gemm::tn(k, n, m, An.value.data() + oa[i] * m * k, g,
                     grad_buffer(Bn).data() + ob[i] * k * n);
          }
        }
      });
}

namespace detail {

struct AxisLayout {
  std::int64_t outer, len, inner;
};

inline AxisLayout axis_layout(const Shape& shape, std::int64_t axis) {
  AxisLayout l{1, shape[static_cast<std::size_t>(axis)], 1};
  for (std::int64_t i = 0; i < axis; ++i) l.outer *= shape[i];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) l.inner *= shape[i];
  return l;
}

}  // namespace detail

/// Softmax along `axis` restricted to positions where `mask` keeps; masked
/// outputs are exactly zero. Pass nullptr for an unmasked softmax.
template <typename S>
BasicTensor<S> masked_softmax(const BasicTensor<S>& x, const Mask* mask, std::int64_t axis = -1) {
  axis = detail::normalize_axis(axis, x.rank());
  const auto lay = detail::axis_layout(x.shape(), axis);
  std::vector<std::int64_t> mo;
  if (mask) {
    if (shape_numel(mask->shape) != static_cast<std::int64_t>(mask->keep.size())) {
      throw InvalidMaskError("mask data does not match its shape " + shape_str(mask->shape));
    }
    if (detail::broadcast_shapes(mask->shape, x.shape()) != x.shape()) {
      throw DimensionError("mask " + shape_str(mask->shape) + " does not broadcast to " +
                           shape_str(x.shape()));
    }
    mo = detail::broadcast_offsets(mask->shape, x.shape());
  }
  const S* xv = x.data().data();
  std::vector<S> y(static_cast<std::size_t>(x.numel()), S{0});
  for (std::int64_t o = 0; o < lay.outer; ++o) {
    for (std::int64_t in = 0; in < lay.inner; ++in) {
      const std::int64_t base = o * lay.len * lay.inner + in;
      auto kept = [&](std::int64_t j) {
        return !mask || mask->keep[mo[base + j * lay.inner]] != 0;
      };
      S mx = -std::numeric_limits<S>::infinity();
      bool any = false;
      for (std::int64_t j = 0; j < lay.len; ++j) {
        if (!kept(j)) continue;
        any = true;
        mx = std::max(mx, xv[base + j * lay.inner]);
      }
      if (!any) {
        throw InvalidMaskError("softmax slice " + std::to_string(o * lay.inner + in) +
                               " is fully masked");
      }
      S z{0};
      for (std::int64_t j = 0; j < lay.len; ++j) {
        if (!kept(j)) continue;
        const S e = std::exp(xv[base + j * lay.inner] - mx);
        y[base + j * lay.inner] = e;
        z += e;
      }
      for (std::int64_t j = 0; j < lay.len; ++j) y[base + j * lay.inner] /= z;
    }
  }
  return make_result<S>(x.shape(), std::move(y), {x.node_ptr()}, [lay](TensorNode<S>& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    const auto& yv = self.value;
    const auto& up = self.grad;
    for (std::int64_t o = 0; o < lay.outer; ++o) {
      for (std::int64_t in = 0; in < lay.inner; ++in) {
        const std::int64_t base = o * lay.len * lay.inner + in;
        S dot{0};
        for (std::int64_t j = 0; j < lay.len; ++j) {
          const auto idx = base + j * lay.inner;
          dot += up[idx] * yv[idx];
        }
        for (std::int64_t j = 0; j < lay.len; ++j) {
          const auto idx = base + j * lay.inner;
          g[idx] += yv[idx] * (up[idx] - dot);
        }
      }
    }
  });
}

template <typename S>
BasicTensor<S> softmax(const BasicTensor<S>& x, std::int64_t axis = -1) {
  return masked_softmax<S>(x, nullptr, axis);
}

template <typename S>
BasicTensor<S> log_softmax(const BasicTensor<S>& x, std::int64_t axis = -1) {
  axis = detail::normalize_axis(axis, x.rank());
  const auto lay = detail::axis_layout(x.shape(), axis);
  const S* xv = x.data().data();
  std::vector<S> y(static_cast<std::size_t>(x.numel()));
  for (std::int64_t o = 0; o < lay.outer; ++o) {
    for (std::int64_t in = 0; in < lay.inner; ++in) {
      const std::int64_t base = o * lay.len * lay.inner + in;
      S mx = -std::numeric_limits<S>::infinity();
      for (std::int64_t j = 0; j < lay.len; ++j) mx = std::max(mx, xv[base + j * lay.inner]);
      S z{0};
      for (std::int64_t j = 0; j < lay.len; ++j) z += std::exp(xv[base + j * lay.inner] - mx);
      const S lz = mx + std::log(z);
      for (std::int64_t j = 0; j < lay.len; ++j) y[base + j * lay.inner] = xv[base + j * lay.inner] - lz;
    }
  }
  return make_result<S>(x.shape(), std::move(y), {x.node_ptr()}, [lay](TensorNode<S>& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    const auto& yv = self.value;
    const auto& up = self.grad;
    for (std::int64_t o = 0; o < lay.outer; ++o) {
      for (std::int64_t in = 0; in < lay.inner; ++in) {
        const std::int64_t base = o * lay.len * lay.inner + in;
        S total{0};
        for (std::int64_t j = 0; j < lay.len; ++j) total += up[base + j * lay.inner];
        for (std::int64_t j = 0; j < lay.len; ++j) {
          const auto idx = base + j * lay.inner;
          g[idx] += up[idx] - std::exp(yv[idx]) * total;
        }
      }
    }
  });
}

/// Normalizes each slice along `axis` to zero mean and unit (biased)
/// variance, then applies per-position gain and bias of length dim(axis).
template <typename S>
BasicTensor<S> layer_norm(const BasicTensor<S>& x, const BasicTensor<S>& gain,
                          const BasicTensor<S>& bias, std::int64_t axis = -1,
                          double variance_epsilon = 1e-12) {
  axis = detail::normalize_axis(axis, x.rank());
  const auto lay = detail::axis_layout(x.shape(), axis);
  if (gain.numel() != lay.len || bias.numel() != lay.len) {
    throw DimensionError("layer_norm gain/bias sizes " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " do not match axis size " +
                         std::to_string(lay.len));
  }
  const S* xv = x.data().data();
  const S* gv = gain.data().data();
  const S* bv = bias.data().data();
  const std::int64_t slices = lay.outer * lay.inner;
  std::vector<S> xhat(static_cast<std::size_t>(x.numel()));
  std::vector<S> rstd(static_cast<std::size_t>(slices));
  std::vector<S> y(static_cast<std::size_t>(x.numel()));
  for (std::int64_t o = 0; o < lay.outer; ++o) {
    for (std::int64_t in = 0; in < lay.inner; ++in) {
      const std::int64_t base = o * lay.len * lay.inner + in;
      S mu{0};
      for (std::int64_t j = 0; j < lay.len; ++j) mu += xv[base + j * lay.inner];
      mu /= static_cast<S>(lay.len);
      S var{0};
      for (std::int64_t j = 0; j < lay.len; ++j) {
        const S d = xv[base + j * lay.inner] - mu;
        var += d * d;
      }
      var /= static_cast<S>(lay.len);
      const S r = S{1} / std::sqrt(var + static_cast<S>(variance_epsilon));
      rstd[o * lay.inner + in] = r;
      for (std::int64_t j = 0; j < lay.len; ++j) {
        const auto idx = base + j * lay.inner;
        xhat[idx] = (xv[idx] - mu) * r;
        y[idx] = xhat[idx] * gv[j] + bv[j];
      }
    }
  }
  return make_result<S>(
      x.shape(), std::move(y), {x.node_ptr(), gain.node_ptr(), bias.node_ptr()},
      [lay, xhat = std::move(xhat), rstd = std::move(rstd)](TensorNode<S>& self) {
        auto& X = *self.inputs[0];
        auto& G = *self.inputs[1];
        auto& B = *self.inputs[2];
        const auto& up = self.grad;
        const S inv_len = S{1} / static_cast<S>(lay.len);
        for (std::int64_t o = 0; o < lay.outer; ++o) {
          for (std::int64_t in = 0; in < lay.inner; ++in) {
            const std::int64_t base = o * lay.len * lay.inner + in;
            if (G.requires_grad || B.requires_grad) {
              for (std::int64_t j = 0; j < lay.len; ++j) {
                const auto idx = base + j * lay.inner;
                if (G.requires_grad) grad_buffer(G)[j] += up[idx] * xhat[idx];
                if (B.requires_grad) grad_buffer(B)[j] += up[idx];
              }
            }
            if (!X.requires_grad) continue;
            S mean_g{0}, mean_gx{0};
            for (std::int64_t j = 0; j < lay.len; ++j) {
              const auto idx = base + j * lay.inner;
              const S gh = up[idx] * G.value[j];
              mean_g += gh;
              mean_gx += gh * xhat[idx];
            }
            mean_g *= inv_len;
            mean_gx *= inv_len;
            const S r = rstd[o * lay.inner + in];
            auto& gx = grad_buffer(X);
            for (std::int64_t j = 0; j < lay.len; ++j) {
              const auto idx = base + j * lay.inner;
              const S gh = up[idx] * G.value[j];
              gx[idx] += r * (gh - mean_g - xhat[idx] * mean_gx);
            }
          }
        }
      });
}

struct Conv2dOptions {
  std::int64_t stride_h = 1, stride_w = 1;
  std::int64_t pad_h = 0, pad_w = 0;
};

inline std::int64_t conv_output_size(std::int64_t len, std::int64_t kernel, std::int64_t stride,
                                     std::int64_t pad) {
  const std::int64_t span = len + 2 * pad - kernel;
  return span < 0 ? 0 : span / stride + 1;
}

namespace detail {

template <typename S>
void im2col(const S* x, std::int64_t C, std::int64_t H, std::int64_t W, std::int64_t KH,
            std::int64_t KW, const Conv2dOptions& o, std::int64_t Ho, std::int64_t Wo, S* cols) {
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t kh = 0; kh < KH; ++kh) {
      for (std::int64_t kw = 0; kw < KW; ++kw) {
        S* row = cols + ((c * KH + kh) * KW + kw) * Ho * Wo;
        for (std::int64_t oh = 0; oh < Ho; ++oh) {
          const std::int64_t ih = oh * o.stride_h - o.pad_h + kh;
          for (std::int64_t ow = 0; ow < Wo; ++ow) {
            const std::int64_t iw = ow * o.stride_w - o.pad_w + kw;
            row[oh * Wo + ow] =
                (ih >= 0 && ih < H && iw >= 0 && iw < W) ? x[(c * H + ih) * W + iw] : S{0};
          }
        }
      }
    }
  }
}

template <typename S>
void col2im(const S* cols, std::int64_t C, std::int64_t H, std::int64_t W, std::int64_t KH,
            std::int64_t KW, const Conv2dOptions& o, std::int64_t Ho, std::int64_t Wo, S* x) {
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t kh = 0; kh < KH; ++kh) {
      for (std::int64_t kw = 0; kw < KW; ++kw) {
        const S* row = cols + ((c * KH + kh) * KW + kw) * Ho * Wo;
        for (std::int64_t oh = 0; oh < Ho; ++oh) {
          const std::int64_t ih = oh * o.stride_h - o.pad_h + kh;
          if (ih < 0 || ih >= H) continue;
          for (std::int64_t ow = 0; ow < Wo; ++ow) {
            const std::int64_t iw = ow * o.stride_w - o.pad_w + kw;
            if (iw >= 0 && iw < W) x[(c * H + ih) * W + iw] += row[oh * Wo + ow];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// 2-D cross-correlation. x: [B, C, H, W], weight: [O, C, KH, KW],
/// bias: [O] or undefined.
template <typename S>
BasicTensor<S> conv2d(const BasicTensor<S>& x, const BasicTensor<S>& weight,
                      const BasicTensor<S>& bias, Conv2dOptions opt = {}) {
  if (x.rank() != 4 || weight.rank() != 4) {
    throw DimensionError("conv2d expects [B,C,H,W] input and [O,C,KH,KW] kernels, got " +
                         shape_str(x.shape()) + " and " + shape_str(weight.shape()));
  }
  const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::int64_t O = weight.dim(0), KH = weight.dim(2), KW = weight.dim(3);
  if (weight.dim(1) != C) {
    throw DimensionError("conv2d channel mismatch: input " + shape_str(x.shape()) + ", kernels " +
                         shape_str(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != O) throw DimensionError("conv2d bias must have O entries");
  const std::int64_t Ho = conv_output_size(H, KH, opt.stride_h, opt.pad_h);
  const std::int64_t Wo = conv_output_size(W, KW, opt.stride_w, opt.pad_w);
  if (Ho < 1 || Wo < 1) {
    throw SequenceTooShortError("conv2d: input " + shape_str(x.shape()) + " too short for " +
                                std::to_string(KH) + "x" + std::to_string(KW) + " kernel");
  }
  const std::int64_t ckk = C * KH * KW, P = Ho * Wo;
  std::vector<S> cols(static_cast<std::size_t>(ckk * P));
  std::vector<S> y(static_cast<std::size_t>(B * O * P), S{0});
  for (std::int64_t b = 0; b < B; ++b) {
    detail::im2col(x.data().data() + b * C * H * W, C, H, W, KH, KW, opt, Ho, Wo, cols.data());
    S* yb = y.data() + b * O * P;
    if (has_bias) {
      for (std::int64_t o = 0; o < O; ++o) std::fill(yb + o * P, yb + (o + 1) * P, bias.data()[o]);
    }
    gemm::nn(O, P, ckk, weight.data().data(), cols.data(), yb);
  }
  std::vector<std::shared_ptr<TensorNode<S>>> inputs{x.node_ptr(), weight.node_ptr()};
  if (has_bias) inputs.push_back(bias.node_ptr());
  return make_result<S>(
      {B, O, Ho, Wo}, std::move(y), std::move(inputs), [=](TensorNode<S>& self) {
        auto& X = *self.inputs[0];
        auto& Wt = *self.inputs[1];
        std::vector<S> cols(static_cast<std::size_t>(ckk * P));
        std::vector<S> dcols(static_cast<std::size_t>(ckk * P));
        for (std::int64_t b = 0; b < B; ++b) {
          const S* g = self.grad.data() + b * O * P;
          if (has_bias && self.inputs[2]->requires_grad) {
            auto& gb = grad_buffer(*self.inputs[2]);
            for (std::int64_t o = 0; o < O; ++o) {
              S acc{0};
              for (std::int64_t p = 0; p < P; ++p) acc += g[o * P + p];
              gb[o] += acc;
            }
          }
          if (Wt.requires_grad) {
            detail::im2col(X.value.data() + b * C * H * W, C, H, W, KH, KW, opt, Ho, Wo,
                           cols.data());
            gemm::nt(O, ckk, P, g, cols.data(), grad_buffer(Wt).data());
          }
          if (X.requires_grad) {
            std::fill(dcols.begin(), dcols.end(), S{0});
            gemm::tn(ckk, P, O, Wt.value.data(), g, dcols.data());
            detail::col2im(dcols.data(), C, H, W, KH, KW, opt, Ho, Wo,
                           grad_buffer(X).data() + b * C * H * W);
          }
        }
      });
}

/// Max pooling over the two trailing axes with floor output size.
template <typename S>
BasicTensor<S> max_pool2d(const BasicTensor<S>& x, std::int64_t kernel, std::int64_t stride) {
  if (x.rank() != 4) throw DimensionError("max_pool2d expects [B,C,H,W], got " + shape_str(x.shape()));
  const std::int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::int64_t Ho = conv_output_size(H, kernel, stride, 0);
  const std::int64_t Wo = conv_output_size(W, kernel, stride, 0);
  if (Ho < 1 || Wo < 1) {
    throw SequenceTooShortError("max_pool2d: input " + shape_str(x.shape()) + " smaller than kernel");
  }
  std::vector<S> y(static_cast<std::size_t>(B * C * Ho * Wo));
  std::vector<std::int64_t> arg(y.size());
  const S* xv = x.data().data();
  for (std::int64_t bc = 0; bc < B * C; ++bc) {
    for (std::int64_t oh = 0; oh < Ho; ++oh) {
      for (std::int64_t ow = 0; ow < Wo; ++ow) {
        std::int64_t best = -1;
        S bv = -std::numeric_limits<S>::infinity();
        for (std::int64_t kh = 0; kh < kernel; ++kh) {
          for (std::int64_t kw = 0; kw < kernel; ++kw) {
            const std::int64_t idx = (bc * H + oh * stride + kh) * W + ow * stride + kw;
            if (best < 0 || xv[idx] > bv) {
              bv = xv[idx];
              best = idx;
            }
          }
        }
        const std::int64_t o = (bc * Ho + oh) * Wo + ow;
        y[o] = bv;
        arg[o] = best;
      }
    }
  }
  return make_result<S>({B, C, Ho, Wo}, std::move(y), {x.node_ptr()},
                        [arg = std::move(arg)](TensorNode<S>& self) {
                          auto& g = grad_buffer(*self.inputs[0]);
                          for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i]] += self.grad[i];
                        });
}

/// Gathers rows of `weight` [V, D]; output shape is ids_shape + [D].
template <typename S>
BasicTensor<S> embedding_lookup(const BasicTensor<S>& weight, const std::vector<std::int64_t>& ids,
                                Shape ids_shape) {
  if (weight.rank() != 2) throw DimensionError("embedding table must be [V, D]");
  if (shape_numel(ids_shape) != static_cast<std::int64_t>(ids.size())) {
    throw DimensionError("embedding ids do not match shape " + shape_str(ids_shape));
  }
  const std::int64_t V = weight.dim(0), D = weight.dim(1);
  std::vector<S> y(ids.size() * static_cast<std::size_t>(D));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= V) {
      throw DimensionError("embedding id " + std::to_string(ids[i]) + " outside vocabulary of " +
                           std::to_string(V));
    }
    std::copy_n(weight.data().data() + ids[i] * D, D, y.data() + i * D);
  }
  ids_shape.push_back(D);
  return make_result<S>(std::move(ids_shape), std::move(y), {weight.node_ptr()},
                        [ids, D](TensorNode<S>& self) {
                          auto& g = grad_buffer(*self.inputs[0]);
                          for (std::size_t i = 0; i < ids.size(); ++i) {
                            for (std::int64_t d = 0; d < D; ++d) g[ids[i] * D + d] += self.grad[i * D + d];
                          }
                        });
}

template <typename S>
BasicTensor<S> concat_last_axis(const std::vector<BasicTensor<S>>& parts) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  Shape lead(parts[0].shape().begin(), parts[0].shape().end() - 1);
  std::vector<std::int64_t> widths;
  std::int64_t total = 0;
  for (const auto& p : parts) {
    if (Shape(p.shape().begin(), p.shape().end() - 1) != lead) {
      throw DimensionError("concat leading shapes differ: " + shape_str(parts[0].shape()) +
                           " vs " + shape_str(p.shape()));
    }
    widths.push_back(p.dim(-1));
    total += p.dim(-1);
  }
  const std::int64_t rows = shape_numel(lead);
  std::vector<S> y(static_cast<std::size_t>(rows * total));
  std::int64_t off = 0;
  std::vector<std::shared_ptr<TensorNode<S>>> inputs;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const S* src = parts[k].data().data();
    for (std::int64_t r = 0; r < rows; ++r) {
      std::copy_n(src + r * widths[k], widths[k], y.data() + r * total + off);
    }
    off += widths[k];
    inputs.push_back(parts[k].node_ptr());
  }
  Shape out = lead;
  out.push_back(total);
  return make_result<S>(std::move(out), std::move(y), std::move(inputs),
                        [rows, total, widths](TensorNode<S>& self) {
                          std::int64_t off = 0;
                          for (std::size_t k = 0; k < widths.size(); ++k) {
                            auto& in = *self.inputs[k];
                            if (in.requires_grad) {
                              auto& g = grad_buffer(in);
                              for (std::int64_t r = 0; r < rows; ++r) {
                                for (std::int64_t j = 0; j < widths[k]; ++j) {
                                  g[r * widths[k] + j] += self.grad[r * total + off + j];
                                }
                              }
                            }
                            off += widths[k];
                          }
                        });
}

template <typename S>
BasicTensor<S> permute(const BasicTensor<S>& x, const std::vector<std::int64_t>& perm) {
  const std::size_t r = x.shape().size();
  if (perm.size() != r) throw DimensionError("permute order has wrong rank");
  std::vector<bool> seen(r, false);
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (perm[i] < 0 || perm[i] >= static_cast<std::int64_t>(r) || seen[perm[i]]) {
      throw DimensionError("invalid permutation");
    }
    seen[perm[i]] = true;
    out[i] = x.shape()[perm[i]];
  }
  std::vector<std::int64_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * x.shape()[i];
  // src[k] = input flat index feeding output flat index k
  const std::int64_t n = x.numel();
  std::vector<std::int64_t> src(static_cast<std::size_t>(n));
  std::vector<std::int64_t> idx(r, 0);
  std::int64_t off = 0;
  for (std::int64_t k = 0; k < n; ++k) {
    src[k] = off;
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      off += in_stride[perm[d]];
      if (idx[d] < out[d]) break;
      off -= in_stride[perm[d]] * out[d];
      idx[d] = 0;
    }
  }
  std::vector<S> y(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) y[k] = x.data()[src[k]];
  return make_result<S>(std::move(out), std::move(y), {x.node_ptr()},
                        [src = std::move(src)](TensorNode<S>& self) {
                          auto& g = grad_buffer(*self.inputs[0]);
                          for (std::size_t k = 0; k < src.size(); ++k) g[src[k]] += self.grad[k];
                        });
}

template <typename S>
BasicTensor<S> transpose(const BasicTensor<S>& x, std::int64_t a, std::int64_t b) {
  a = detail::normalize_axis(a, x.rank());
  b = detail::normalize_axis(b, x.rank());
  std::vector<std::int64_t> perm(static_cast<std::size_t>(x.rank()));
  std::iota(perm.begin(), perm.end(), 0);
  std::swap(perm[a], perm[b]);
  return permute(x, perm);
}

/// Same values, new shape; one dimension may be -1.
template <typename S>
BasicTensor<S> reshape(const BasicTensor<S>& x, Shape shape) {
  std::int64_t known = 1;
  int infer = -1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == -1) {
      if (infer >= 0) throw DimensionError("reshape allows a single -1");
      infer = static_cast<int>(i);
    } else {
      known *= shape[i];
    }
  }
  if (infer >= 0) {
    if (known == 0 || x.numel() % known != 0) {
      throw DimensionError("cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
    }
    shape[infer] = x.numel() / known;
  }
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  return make_result<S>(std::move(shape), x.values(), {x.node_ptr()}, [](TensorNode<S>& self) {
    auto& g = grad_buffer(*self.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

/// Elements [begin, end) along `axis`.
template <typename S>
BasicTensor<S> slice(const BasicTensor<S>& x, std::int64_t axis, std::int64_t begin, std::int64_t end) {
  axis = detail::normalize_axis(axis, x.rank());
  const auto lay = detail::axis_layout(x.shape(), axis);
  if (begin < 0 || end > lay.len || begin > end) {
    throw DimensionError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for " + shape_str(x.shape()));
  }
  const std::int64_t w = end - begin;
  Shape out = x.shape();
  out[axis] = w;
  std::vector<S> y(static_cast<std::size_t>(lay.outer * w * lay.inner));
  for (std::int64_t o = 0; o < lay.outer; ++o) {
    std::copy_n(x.data().data() + (o * lay.len + begin) * lay.inner, w * lay.inner,
                y.data() + o * w * lay.inner);
  }
  return make_result<S>(std::move(out), std::move(y), {x.node_ptr()},
                        [lay, begin, w](TensorNode<S>& self) {
                          auto& g = grad_buffer(*self.inputs[0]);
                          for (std::int64_t o = 0; o < lay.outer; ++o) {
                            for (std::int64_t i = 0; i < w * lay.inner; ++i) {
                              g[(o * lay.len + begin) * lay.inner + i] += self.grad[o * w * lay.inner + i];
                            }
                          }
                        });
}

/// Inverted dropout: kept values are divided by (1 - p). Identity when not
/// training or p == 0.
template <typename S>
BasicTensor<S> dropout(const BasicTensor<S>& x, double p, bool train, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw Error("dropout rate must be in [0, 1), got " + std::to_string(p));
  if (!train || p == 0.0) return x;
  const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
  std::vector<S> m(static_cast<std::size_t>(x.numel()));
  for (auto& e : m) e = rng.uniform() < p ? S{0} : keep_scale;
  std::vector<S> y(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) y[i] = x.data()[i] * m[i];
  return make_result<S>(x.shape(), std::move(y), {x.node_ptr()},
                        [m = std::move(m)](TensorNode<S>& self) {
                          auto& g = grad_buffer(*self.inputs[0]);
                          for (std::size_t i = 0; i < m.size(); ++i) g[i] += self.grad[i] * m[i];
                        });
}

/// -sum_rows weight[row] * sum_v target[row, v] * log_probs[row, v] over the
/// trailing axis. `target` and `row_weight` are constants.
template <typename S>
BasicTensor<S> soft_target_nll(const BasicTensor<S>& log_probs, const std::vector<S>& target,
                               const std::vector<S>& row_weight) {
  const std::int64_t V = log_probs.dim(-1);
  const std::int64_t rows = log_probs.numel() / std::max<std::int64_t>(V, 1);
  if (static_cast<std::int64_t>(target.size()) != log_probs.numel() ||
      static_cast<std::int64_t>(row_weight.size()) != rows) {
    throw DimensionError("soft_target_nll target/weights do not match " +
                         shape_str(log_probs.shape()));
  }
  const S* lp = log_probs.data().data();
  S total{0};
  for (std::int64_t r = 0; r < rows; ++r) {
    if (row_weight[r] == S{0}) continue;
    S acc{0};
    for (std::int64_t v = 0; v < V; ++v) {
      const S q = target[r * V + v];
      if (q != S{0}) acc += q * lp[r * V + v];
    }
    total -= row_weight[r] * acc;
  }
  return make_result<S>({}, {total}, {log_probs.node_ptr()},
                        [V, rows, target, row_weight](TensorNode<S>& self) {
                          auto& g = grad_buffer(*self.inputs[0]);
                          const S up = self.grad[0];
                          for (std::int64_t r = 0; r < rows; ++r) {
                            const S w = row_weight[r] * up;
                            if (w == S{0}) continue;
                            for (std::int64_t v = 0; v < V; ++v) g[r * V + v] -= w * target[r * V + v];
                          }
                        });
}

}  // namespace trasr
