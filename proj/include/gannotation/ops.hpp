#pragma once

// Differentiable free functions over Var<T>. Convolutions lower to im2col +
// Eigen GEMM, one sample at a time; columns are recomputed in the backward
// pass so memory stays bounded at 128x128.

#include "gannotation/autograd.hpp"

#include <algorithm>
#include <span>
#include <string>
#include <vector>

namespace gannotation {

struct Conv2dGeometry {
  Index kernel = 3;
  Index stride = 1;
  Index pad = 1;

  Index output_extent(Index in) const { return (in + 2 * pad - kernel) / stride + 1; }
  Index transposed_extent(Index in) const { return (in - 1) * stride - 2 * pad + kernel; }
};

namespace detail {

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
  }
}

// Unfolds a (c, h, w) image into a (c*k*k, oh*ow) row-major column matrix.
template <typename T>
void im2col(const T* image, Index channels, Index h, Index w, const Conv2dGeometry& g, Index oh, Index ow,
            T* cols) {
  const Index k = g.kernel;
  const Index opix = oh * ow;
  for (Index c = 0; c < channels; ++c) {
    const T* plane = image + c * h * w;
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        T* row = cols + ((c * k + ky) * k + kx) * opix;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * g.stride - g.pad + ky;
          T* out = row + oy * ow;
          if (iy < 0 || iy >= h) {
            std::fill(out, out + ow, T(0));
            continue;
          }
          const T* src = plane + iy * w;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * g.stride - g.pad + kx;
            out[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters columns back, accumulating into image.
template <typename T>
void col2im(const T* cols, Index channels, Index h, Index w, const Conv2dGeometry& g, Index oh, Index ow,
            T* image) {
  const Index k = g.kernel;
  const Index opix = oh * ow;
  for (Index c = 0; c < channels; ++c) {
    T* plane = image + c * h * w;
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const T* row = cols + ((c * k + ky) * k + kx) * opix;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= h) continue;
          T* dst = plane + iy * w;
          const T* in = row + oy * ow;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += in[ox];
          }
        }
      }
    }
  }
}

template <typename T, typename Fwd, typename Bwd>
Var<T> unary(const Var<T>& x, Fwd fwd, Bwd bwd) {
  Tensor<T> out(x.shape());
  out.array() = fwd(x.value().array());
  return make_result<T>(std::move(out), {x}, [bwd](Node<T>& self) {
    if (auto* gx = grad_of(self, 0)) gx->array() += bwd(self.inputs[0]->value.array(), self.value.array(), self.grad.array());
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape(), (a.value().array() + b.value().array()).eval());
  return detail::make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) g->array() += self.grad.array();
    if (auto* g = detail::grad_of(self, 1)) g->array() += self.grad.array();
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out(a.shape(), (a.value().array() - b.value().array()).eval());
  return detail::make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) g->array() += self.grad.array();
    if (auto* g = detail::grad_of(self, 1)) g->array() -= self.grad.array();
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out(a.shape(), (a.value().array() * b.value().array()).eval());
  return detail::make_result<T>(std::move(out), {a, b}, [](Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) g->array() += self.grad.array() * self.inputs[1]->value.array();
    if (auto* g = detail::grad_of(self, 1)) g->array() += self.grad.array() * self.inputs[0]->value.array();
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, T s) {
  return detail::unary(
      x, [s](const auto& v) { return (v * s).eval(); },
      [s](const auto&, const auto&, const auto& g) { return (g * s).eval(); });
}

template <typename T>
Var<T> add_scalar(const Var<T>& x, T s) {
  return detail::unary(
      x, [s](const auto& v) { return (v + s).eval(); }, [](const auto&, const auto&, const auto& g) { return g; });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return detail::unary(
      x, [](const auto& v) { return v.max(T(0)).eval(); },
      [](const auto& in, const auto&, const auto& g) { return (in > T(0)).select(g, T(0)).eval(); });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  return detail::unary(
      x, [slope](const auto& v) { return (v > T(0)).select(v, v * slope).eval(); },
      [slope](const auto& in, const auto&, const auto& g) { return (in > T(0)).select(g, g * slope).eval(); });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  return detail::unary(
      x, [](const auto& v) { return v.tanh().eval(); },
      [](const auto&, const auto& out, const auto& g) { return (g * (T(1) - out.square())).eval(); });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return detail::unary(
      x, [](const auto& v) { return (T(1) / (T(1) + (-v).exp())).eval(); },
      [](const auto&, const auto& out, const auto& g) { return (g * out * (T(1) - out)).eval(); });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Var<T> sum(const Var<T>& x) {
  Tensor<T> out = Tensor<T>::scalar(x.value().array().sum());
  return detail::make_result<T>(std::move(out), {x}, [](Node<T>& self) {
    if (auto* g = detail::grad_of(self, 0)) g->array() += self.grad[0];
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  if (x.value().size() == 0) throw std::invalid_argument("mean of an empty tensor");
  return scale(sum(x), T(1) / static_cast<T>(x.value().size()));
}

/// Mean squared difference over all elements.
template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "mse");
  const T inv = T(1) / static_cast<T>(a.value().size());
  Tensor<T> out = Tensor<T>::scalar((a.value().array() - b.value().array()).square().sum() * inv);
  return detail::make_result<T>(std::move(out), {a, b}, [inv](Node<T>& self) {
    const auto diff = (self.inputs[0]->value.array() - self.inputs[1]->value.array()).eval();
    const T k = T(2) * inv * self.grad[0];
    if (auto* g = detail::grad_of(self, 0)) g->array() += k * diff;
    if (auto* g = detail::grad_of(self, 1)) g->array() -= k * diff;
  });
}

/// Mean absolute difference over all elements; subgradient 0 at ties.
template <typename T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "mean_abs_diff");
  const T inv = T(1) / static_cast<T>(a.value().size());
  Tensor<T> out = Tensor<T>::scalar((a.value().array() - b.value().array()).abs().sum() * inv);
  return detail::make_result<T>(std::move(out), {a, b}, [inv](Node<T>& self) {
    const auto sign = (self.inputs[0]->value.array() - self.inputs[1]->value.array()).sign().eval();
    const T k = inv * self.grad[0];
    if (auto* g = detail::grad_of(self, 0)) g->array() += k * sign;
    if (auto* g = detail::grad_of(self, 1)) g->array() -= k * sign;
  });
}

/// Mean over the batch of per-sample Frobenius norms; subgradient 0 at the origin.
template <typename T>
Var<T> mean_sample_norm(const Var<T>& x) {
  const Shape s = x.shape();
  const Index per = s.sample();
  Eigen::Array<T, Eigen::Dynamic, 1> norms(s.n);
  for (Index n = 0; n < s.n; ++n) norms[n] = x.value().array().segment(n * per, per).matrix().norm();
  Tensor<T> out = Tensor<T>::scalar(norms.mean());
  return detail::make_result<T>(std::move(out), {x}, [norms, per](Node<T>& self) {
    auto* g = detail::grad_of(self, 0);
    if (!g) return;
    const auto& v = self.inputs[0]->value.array();
    const T k = self.grad[0] / static_cast<T>(norms.size());
    for (Index n = 0; n < norms.size(); ++n) {
      if (norms[n] > T(0)) g->array().segment(n * per, per) += (k / norms[n]) * v.segment(n * per, per);
    }
  });
}

/// Sum of squared horizontal and vertical neighbour differences over element count.
template <typename T>
Var<T> total_variation(const Var<T>& x) {
  const Shape s = x.shape();
  if (s.h < 2 || s.w < 2) throw std::invalid_argument("total_variation needs spatial dims >= 2");
  const T inv = T(1) / static_cast<T>(s.size());
  const Tensor<T>& v = x.value();
  T acc = 0;
  for (Index p = 0; p < s.n * s.c; ++p) {
    const T* plane = v.data() + p * s.plane();
    for (Index y = 0; y < s.h; ++y) {
      for (Index xx = 0; xx < s.w; ++xx) {
        const T c = plane[y * s.w + xx];
        if (xx + 1 < s.w) acc += (plane[y * s.w + xx + 1] - c) * (plane[y * s.w + xx + 1] - c);
        if (y + 1 < s.h) acc += (plane[(y + 1) * s.w + xx] - c) * (plane[(y + 1) * s.w + xx] - c);
      }
    }
  }
  return detail::make_result<T>(Tensor<T>::scalar(acc * inv), {x}, [inv](Node<T>& self) {
    auto* g = detail::grad_of(self, 0);
    if (!g) return;
    const Tensor<T>& v = self.inputs[0]->value;
    const Shape s = v.shape();
    const T k = T(2) * inv * self.grad[0];
    for (Index p = 0; p < s.n * s.c; ++p) {
      const T* plane = v.data() + p * s.plane();
      T* gp = g->data() + p * s.plane();
      for (Index y = 0; y < s.h; ++y) {
        for (Index xx = 0; xx < s.w; ++xx) {
          const Index i = y * s.w + xx;
          if (xx + 1 < s.w) {
            const T d = k * (plane[i + 1] - plane[i]);
            gp[i + 1] += d;
            gp[i] -= d;
          }
          if (y + 1 < s.h) {
            const T d = k * (plane[i + s.w] - plane[i]);
            gp[i + s.w] += d;
            gp[i] -= d;
          }
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Channel manipulation

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels of nothing");
  Shape s = parts.front().shape();
  s.c = 0;
  for (const auto& p : parts) {
    const Shape& ps = p.shape();
    if (ps.n != s.n || ps.h != s.h || ps.w != s.w) {
      throw std::invalid_argument("concat_channels: spatial/batch mismatch " + to_string(ps) + " vs " +
                                  to_string(parts.front().shape()));
    }
    s.c += ps.c;
  }
  Tensor<T> out(s);
  Index offset = 0;
  for (const auto& p : parts) {
    const Index chunk = p.shape().sample();
    for (Index n = 0; n < s.n; ++n) {
      out.array().segment(n * s.sample() + offset, chunk) = p.value().array().segment(n * chunk, chunk);
    }
    offset += chunk;
  }
  return detail::make_result<T>(std::move(out), parts, [](Node<T>& self) {
    const Shape s = self.value.shape();
    Index offset = 0;
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      const Index chunk = self.inputs[i]->value.shape().sample();
      if (auto* g = detail::grad_of(self, i)) {
        for (Index n = 0; n < s.n; ++n) {
          g->array().segment(n * chunk, chunk) += self.grad.array().segment(n * s.sample() + offset, chunk);
        }
      }
      offset += chunk;
    }
  });
}

template <typename T>
Var<T> slice_channels(const Var<T>& x, Index begin, Index count) {
  const Shape in = x.shape();
  if (begin < 0 || count <= 0 || begin + count > in.c) throw std::invalid_argument("slice_channels out of range");
  Shape s = in;
  s.c = count;
  Tensor<T> out(s);
  for (Index n = 0; n < in.n; ++n) {
    out.array().segment(n * s.sample(), s.sample()) =
        x.value().array().segment(n * in.sample() + begin * in.plane(), s.sample());
  }
  return detail::make_result<T>(std::move(out), {x}, [begin](Node<T>& self) {
    auto* g = detail::grad_of(self, 0);
    if (!g) return;
    const Shape in = self.inputs[0]->value.shape();
    const Shape s = self.value.shape();
    for (Index n = 0; n < in.n; ++n) {
      g->array().segment(n * in.sample() + begin * in.plane(), s.sample()) +=
          self.grad.array().segment(n * s.sample(), s.sample());
    }
  });
}

/// Mask compositing: (1 - mask) * colour + mask * image, with the single mask
/// channel broadcast over colour channels.
template <typename T>
Var<T> composite(const Var<T>& colour, const Var<T>& mask, const Var<T>& image) {
  detail::require_same_shape(colour.shape(), image.shape(), "composite");
  const Shape s = colour.shape();
  if (mask.shape().n != s.n || mask.shape().c != 1 || mask.shape().h != s.h || mask.shape().w != s.w) {
    throw std::invalid_argument("composite: mask must be (n,1,h,w), got " + to_string(mask.shape()));
  }
  Tensor<T> out(s);
  for (Index n = 0; n < s.n; ++n) {
    const auto m = mask.value().array().segment(n * s.plane(), s.plane());
    for (Index c = 0; c < s.c; ++c) {
      const Index off = n * s.sample() + c * s.plane();
      out.array().segment(off, s.plane()) = (T(1) - m) * colour.value().array().segment(off, s.plane()) +
                                            m * image.value().array().segment(off, s.plane());
    }
  }
  return detail::make_result<T>(std::move(out), {colour, mask, image}, [](Node<T>& self) {
    const Shape s = self.value.shape();
    const auto& cv = self.inputs[0]->value.array();
    const auto& mv = self.inputs[1]->value.array();
    const auto& iv = self.inputs[2]->value.array();
    auto* gc = detail::grad_of(self, 0);
    auto* gm = detail::grad_of(self, 1);
    auto* gi = detail::grad_of(self, 2);
    for (Index n = 0; n < s.n; ++n) {
      const auto m = mv.segment(n * s.plane(), s.plane());
      for (Index c = 0; c < s.c; ++c) {
        const Index off = n * s.sample() + c * s.plane();
        const auto g = self.grad.array().segment(off, s.plane());
        if (gc) gc->array().segment(off, s.plane()) += g * (T(1) - m);
        if (gi) gi->array().segment(off, s.plane()) += g * m;
        if (gm) {
          gm->array().segment(n * s.plane(), s.plane()) +=
              g * (iv.segment(off, s.plane()) - cv.segment(off, s.plane()));
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Convolution

/// weight: (out, in, k, k); bias: (1, out, 1, 1).
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, const Conv2dGeometry& g) {
  const Shape in = x.shape();
  const Shape ws = weight.shape();
  if (ws.c != in.c || ws.h != g.kernel || ws.w != g.kernel) {
    throw std::invalid_argument("conv2d: weight " + to_string(ws) + " incompatible with input " + to_string(in));
  }
  const Index oh = g.output_extent(in.h);
  const Index ow = g.output_extent(in.w);
  if (oh <= 0 || ow <= 0) throw std::invalid_argument("conv2d: input too small " + to_string(in));
  const Index k_rows = in.c * g.kernel * g.kernel;
  Tensor<T> out(Shape{in.n, ws.n, oh, ow});
  RowMatrix<T> cols(k_rows, oh * ow);
  typename Tensor<T>::ConstMatrixMap w_mat(weight.value().data(), ws.n, k_rows);
  const auto b = bias.value().array();
  for (Index n = 0; n < in.n; ++n) {
    detail::im2col(x.value().data() + n * in.sample(), in.c, in.h, in.w, g, oh, ow, cols.data());
    auto o = out.sample_matrix(n);
    o.noalias() = w_mat * cols;
    o.colwise() += b.matrix();
  }
  return detail::make_result<T>(std::move(out), {x, weight, bias}, [g, oh, ow, k_rows](Node<T>& self) {
    const Tensor<T>& xv = self.inputs[0]->value;
    const Tensor<T>& wv = self.inputs[1]->value;
    const Shape in = xv.shape();
    const Shape ws = wv.shape();
    auto* gx = detail::grad_of(self, 0);
    auto* gw = detail::grad_of(self, 1);
    auto* gb = detail::grad_of(self, 2);
    typename Tensor<T>::ConstMatrixMap w_mat(wv.data(), ws.n, k_rows);
    RowMatrix<T> cols(k_rows, oh * ow);
    for (Index n = 0; n < in.n; ++n) {
      auto go = self.grad.sample_matrix(n);
      if (gw) {
        detail::im2col(xv.data() + n * in.sample(), in.c, in.h, in.w, g, oh, ow, cols.data());
        typename Tensor<T>::MatrixMap gw_mat(gw->data(), ws.n, k_rows);
        gw_mat.noalias() += go * cols.transpose();
      }
      if (gb) gb->array() += go.rowwise().sum().array();
      if (gx) {
        cols.noalias() = w_mat.transpose() * go;
        detail::col2im(cols.data(), in.c, in.h, in.w, g, oh, ow, gx->data() + n * in.sample());
      }
    }
  });
}

/// Adjoint of conv2d. weight: (in, out, k, k); bias: (1, out, 1, 1).
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, const Conv2dGeometry& g) {
  const Shape in = x.shape();
  const Shape ws = weight.shape();
  if (ws.n != in.c || ws.h != g.kernel || ws.w != g.kernel) {
    throw std::invalid_argument("conv_transpose2d: weight " + to_string(ws) + " incompatible with input " +
                                to_string(in));
  }
  const Index oh = g.transposed_extent(in.h);
  const Index ow = g.transposed_extent(in.w);
  const Index out_c = ws.c;
  const Index k_rows = out_c * g.kernel * g.kernel;
  Tensor<T> out(Shape{in.n, out_c, oh, ow});
  RowMatrix<T> cols(k_rows, in.plane());
  typename Tensor<T>::ConstMatrixMap w_mat(weight.value().data(), in.c, k_rows);
  const auto b = bias.value().array();
  for (Index n = 0; n < in.n; ++n) {
    cols.noalias() = w_mat.transpose() * x.value().sample_matrix(n);
    detail::col2im(cols.data(), out_c, oh, ow, g, in.h, in.w, out.data() + n * out.shape().sample());
    out.sample_matrix(n).colwise() += b.matrix();
  }
  return detail::make_result<T>(std::move(out), {x, weight, bias}, [g, k_rows](Node<T>& self) {
    const Tensor<T>& xv = self.inputs[0]->value;
    const Tensor<T>& wv = self.inputs[1]->value;
    const Shape in = xv.shape();
    const Shape os = self.value.shape();
    auto* gx = detail::grad_of(self, 0);
    auto* gw = detail::grad_of(self, 1);
    auto* gb = detail::grad_of(self, 2);
    typename Tensor<T>::ConstMatrixMap w_mat(wv.data(), in.c, k_rows);
    RowMatrix<T> cols(k_rows, in.plane());
    for (Index n = 0; n < in.n; ++n) {
      detail::im2col(self.grad.data() + n * os.sample(), os.c, os.h, os.w, g, in.h, in.w, cols.data());
      if (gx) gx->sample_matrix(n).noalias() += w_mat * cols;
      if (gw) {
        typename Tensor<T>::MatrixMap gw_mat(gw->data(), in.c, k_rows);
        gw_mat.noalias() += xv.sample_matrix(n) * cols.transpose();
      }
      if (gb) gb->array() += self.grad.sample_matrix(n).rowwise().sum().array();
    }
  });
}

/// Fully connected map of each flattened sample. weight: (out, in_features, 1, 1).
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  const Shape in = x.shape();
  const Shape ws = weight.shape();
  if (ws.c != in.sample()) {
    throw std::invalid_argument("linear: expected " + std::to_string(ws.c) + " features, got " +
                                std::to_string(in.sample()));
  }
  typename Tensor<T>::ConstMatrixMap xm(x.value().data(), in.n, in.sample());
  typename Tensor<T>::ConstMatrixMap wm(weight.value().data(), ws.n, ws.c);
  Tensor<T> out(Shape{in.n, ws.n, 1, 1});
  typename Tensor<T>::MatrixMap om(out.data(), in.n, ws.n);
  om.noalias() = xm * wm.transpose();
  om.rowwise() += bias.value().array().matrix().transpose();
  return detail::make_result<T>(std::move(out), {x, weight, bias}, [](Node<T>& self) {
    const Shape in = self.inputs[0]->value.shape();
    const Shape ws = self.inputs[1]->value.shape();
    typename Tensor<T>::ConstMatrixMap xm(self.inputs[0]->value.data(), in.n, in.sample());
    typename Tensor<T>::ConstMatrixMap wm(self.inputs[1]->value.data(), ws.n, ws.c);
    typename Tensor<T>::ConstMatrixMap go(self.grad.data(), in.n, ws.n);
    if (auto* g = detail::grad_of(self, 0)) {
      typename Tensor<T>::MatrixMap(g->data(), in.n, in.sample()).noalias() += go * wm;
    }
    if (auto* g = detail::grad_of(self, 1)) {
      typename Tensor<T>::MatrixMap(g->data(), ws.n, ws.c).noalias() += go.transpose() * xm;
    }
    if (auto* g = detail::grad_of(self, 2)) g->array() += go.colwise().sum().transpose().array();
  });
}

/// Per-sample, per-channel normalisation with affine gamma/beta of shape (1, c, 1, 1).
template <typename T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5)) {
  const Shape s = x.shape();
  if (gamma.shape().size() != s.c || beta.shape().size() != s.c) {
    throw std::invalid_argument("instance_norm: affine parameters must have one entry per channel");
  }
  const Index plane = s.plane();
  Tensor<T> normalized(s);
  Eigen::Array<T, Eigen::Dynamic, 1> inv_std(s.n * s.c);
  Tensor<T> out(s);
  for (Index p = 0; p < s.n * s.c; ++p) {
    const auto v = x.value().array().segment(p * plane, plane);
    const T mu = v.mean();
    const T var = (v - mu).square().mean();
    inv_std[p] = T(1) / std::sqrt(var + eps);
    normalized.array().segment(p * plane, plane) = (v - mu) * inv_std[p];
    const Index c = p % s.c;
    out.array().segment(p * plane, plane) =
        gamma.value()[c] * normalized.array().segment(p * plane, plane) + beta.value()[c];
  }
  return detail::make_result<T>(
      std::move(out), {x, gamma, beta}, [normalized = std::move(normalized), inv_std](Node<T>& self) {
        const Shape s = self.value.shape();
        const Index plane = s.plane();
        const T count = static_cast<T>(plane);
        const auto& gam = self.inputs[1]->value;
        auto* gx = detail::grad_of(self, 0);
        auto* gg = detail::grad_of(self, 1);
        auto* gb = detail::grad_of(self, 2);
        for (Index p = 0; p < s.n * s.c; ++p) {
          const Index c = p % s.c;
          const auto dy = self.grad.array().segment(p * plane, plane);
          const auto xhat = normalized.array().segment(p * plane, plane);
          if (gg) (*gg)[c] += (dy * xhat).sum();
          if (gb) (*gb)[c] += dy.sum();
          if (gx) {
            const auto dxhat = (dy * gam[c]).eval();
            const T sum_d = dxhat.sum();
            const T sum_dx = (dxhat * xhat).sum();
            gx->array().segment(p * plane, plane) += (inv_std[p] / count) * (count * dxhat - sum_d - xhat * sum_dx);
          }
        }
      });
}

template <typename T>
Var<T> avg_pool2(const Var<T>& x) {
  const Shape in = x.shape();
  if (in.h % 2 != 0 || in.w % 2 != 0) throw std::invalid_argument("avg_pool2 needs even spatial dims");
  const Shape s{in.n, in.c, in.h / 2, in.w / 2};
  Tensor<T> out(s);
  for (Index p = 0; p < in.n * in.c; ++p) {
    const T* src = x.value().data() + p * in.plane();
    T* dst = out.data() + p * s.plane();
    for (Index y = 0; y < s.h; ++y) {
      for (Index xx = 0; xx < s.w; ++xx) {
        const Index i = 2 * y * in.w + 2 * xx;
        dst[y * s.w + xx] = T(0.25) * (src[i] + src[i + 1] + src[i + in.w] + src[i + in.w + 1]);
      }
    }
  }
  return detail::make_result<T>(std::move(out), {x}, [](Node<T>& self) {
    auto* g = detail::grad_of(self, 0);
    if (!g) return;
    const Shape in = self.inputs[0]->value.shape();
    const Shape s = self.value.shape();
    for (Index p = 0; p < in.n * in.c; ++p) {
      T* dst = g->data() + p * in.plane();
      const T* src = self.grad.data() + p * s.plane();
      for (Index y = 0; y < s.h; ++y) {
        for (Index xx = 0; xx < s.w; ++xx) {
          const T v = T(0.25) * src[y * s.w + xx];
          const Index i = 2 * y * in.w + 2 * xx;
          dst[i] += v;
          dst[i + 1] += v;
          dst[i + in.w] += v;
          dst[i + in.w + 1] += v;
        }
      }
    }
  });
}

/// (n, c, h, w) -> (n, c, 1, 1) spatial mean.
template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  const Shape in = x.shape();
  Tensor<T> out(Shape{in.n, in.c, 1, 1});
  for (Index p = 0; p < in.n * in.c; ++p) out[p] = x.value().array().segment(p * in.plane(), in.plane()).mean();
  return detail::make_result<T>(std::move(out), {x}, [](Node<T>& self) {
    auto* g = detail::grad_of(self, 0);
    if (!g) return;
    const Shape in = self.inputs[0]->value.shape();
    for (Index p = 0; p < in.n * in.c; ++p) {
      g->array().segment(p * in.plane(), in.plane()) += self.grad[p] / static_cast<T>(in.plane());
    }
  });
}

/// Normalised Gram matrix per sample: (n, c, h, w) -> (n, c, c, 1), G = F F^T / (c * h * w).
template <typename T>
Var<T> gram(const Var<T>& x) {
  const Shape in = x.shape();
  const T inv = T(1) / static_cast<T>(in.sample());
  Tensor<T> out(Shape{in.n, in.c, in.c, 1});
  for (Index n = 0; n < in.n; ++n) {
    const auto f = x.value().sample_matrix(n);
    typename Tensor<T>::MatrixMap(out.data() + n * in.c * in.c, in.c, in.c).noalias() = inv * (f * f.transpose());
  }
  return detail::make_result<T>(std::move(out), {x}, [inv](Node<T>& self) {
    auto* g = detail::grad_of(self, 0);
    if (!g) return;
    const Shape in = self.inputs[0]->value.shape();
    for (Index n = 0; n < in.n; ++n) {
      typename Tensor<T>::ConstMatrixMap go(self.grad.data() + n * in.c * in.c, in.c, in.c);
      const auto f = self.inputs[0]->value.sample_matrix(n);
      g->sample_matrix(n).noalias() += inv * ((go + go.transpose()) * f);
    }
  });
}

}  // namespace gannotation
