#include "vitnerf/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vitnerf/core/errors.hpp"
#include "vitnerf/simd/kernels.hpp"

namespace vitnerf {
namespace {

template <typename T>
using Node = TensorNode<T>;

template <typename T>
T* grad_of(Node<T>& self, std::size_t i) {
  auto& p = self.parents[i];
  if (!p || !p->requires_grad) return nullptr;
  return p->grad_buffer().data();
}

template <typename T>
const std::vector<T>& data_of(Node<T>& self, std::size_t i) {
  return self.parents[i]->data;
}

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t a_rs, std::size_t a_cs, const T* b, std::size_t ldb,
          T* c, std::size_t ldc) {
  if (m == 0 || n == 0 || k == 0) return;
  simd::kernels<T>().gemm(m, n, k, a, a_rs, a_cs, b, ldb, c, ldc);
}

template <typename T>
std::vector<T> transposed(const T* a, std::size_t rows, std::size_t cols) {
  std::vector<T> t(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = a[i * cols + j];
  return t;
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

void require_rank(const Shape& s, std::size_t r, const char* op) {
  require(s.size() == r, std::string(op) + ": expected rank " + std::to_string(r) +
                             " input, got " + shape_str(s));
}

template <typename T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& x, F f, D dfdx) {
  std::vector<T> out(x.numel());
  const T* xp = x.ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xp[i]);
  return Tensor<T>::make_op(x.shape(), std::move(out), {x}, [dfdx](Node<T>& self) {
    T* gx = grad_of(self, 0);
    if (!gx) return;
    const auto& xv = data_of(self, 0);
    for (std::size_t i = 0; i < xv.size(); ++i)
      gx[i] += self.grad[i] * dfdx(xv[i], self.data[i]);
  });
}

}  // namespace

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  require(shape_numel(shape) == a.numel(),
          "reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  std::vector<T> out(a.data().begin(), a.data().end());
  return Tensor<T>::make_op(std::move(shape), std::move(out), {a}, [](Node<T>& self) {
    T* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.size(1) == b.size(0),
          "matmul: dimension mismatch between " + shape_str(a.shape()) + " and " +
              shape_str(b.shape()));
  const std::size_t m = a.size(0), k = a.size(1), n = b.size(1);
  std::vector<T> out(m * n, T(0));
  gemm(m, n, k, a.ptr(), k, std::size_t{1}, b.ptr(), n, out.data(), n);
  return Tensor<T>::make_op({m, n}, std::move(out), {a, b}, [m, k, n](Node<T>& self) {
    const T* gc = self.grad.data();
    if (T* ga = grad_of(self, 0)) {
      const auto bt = transposed(data_of(self, 1).data(), k, n);
      gemm(m, k, n, gc, n, std::size_t{1}, bt.data(), k, ga, k);
    }
    if (T* gb = grad_of(self, 1))
      gemm(k, n, m, data_of(self, 0).data(), std::size_t{1}, k, gc, n, gb, n);
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  require(x.rank() == 2 && w.rank() == 2 && x.size(1) == w.size(0),
          "linear: input " + shape_str(x.shape()) + " does not match weight " +
              shape_str(w.shape()));
  const std::size_t n = x.size(0), in = w.size(0), outd = w.size(1);
  if (bias.defined())
    require(bias.numel() == outd, "linear: bias " + shape_str(bias.shape()) +
                                      " does not match output width " + std::to_string(outd));
  std::vector<T> out(n * outd, T(0));
  if (bias.defined())
    for (std::size_t r = 0; r < n; ++r)
      std::copy(bias.data().begin(), bias.data().end(), out.begin() + r * outd);
  gemm(n, outd, in, x.ptr(), in, std::size_t{1}, w.ptr(), outd, out.data(), outd);
  return Tensor<T>::make_op({n, outd}, std::move(out), {x, w, bias},
                            [n, in, outd](Node<T>& self) {
    const T* gy = self.grad.data();
    if (T* gx = grad_of(self, 0)) {
      const auto wt = transposed(data_of(self, 1).data(), in, outd);
      gemm(n, in, outd, gy, outd, std::size_t{1}, wt.data(), in, gx, in);
    }
    if (T* gw = grad_of(self, 1))
      gemm(in, outd, n, data_of(self, 0).data(), std::size_t{1}, in, gy, outd, gw, outd);
    if (T* gb = grad_of(self, 2))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < outd; ++j) gb[j] += gy[r * outd + j];
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_rank(a.shape(), 2, "transpose");
  const std::size_t r = a.size(0), c = a.size(1);
  return Tensor<T>::make_op({c, r}, transposed(a.ptr(), r, c), {a}, [r, c](Node<T>& self) {
    T* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[j * r + i];
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(),
          "add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor<T>::make_op(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t p = 0; p < 2; ++p)
      if (T* g = grad_of(self, p)) simd::kernels<T>().axpy(T(1), self.grad.data(), g, self.grad.size());
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(),
          "sub: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor<T>::make_op(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    if (T* g = grad_of(self, 0)) simd::kernels<T>().axpy(T(1), self.grad.data(), g, self.grad.size());
    if (T* g = grad_of(self, 1)) simd::kernels<T>().axpy(T(-1), self.grad.data(), g, self.grad.size());
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(),
          "mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor<T>::make_op(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    const auto& av = data_of(self, 0);
    const auto& bv = data_of(self, 1);
    if (T* g = grad_of(self, 0))
      for (std::size_t i = 0; i < av.size(); ++i) g[i] += self.grad[i] * bv[i];
    if (T* g = grad_of(self, 1))
      for (std::size_t i = 0; i < av.size(); ++i) g[i] += self.grad[i] * av[i];
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return Tensor<T>::make_op(a.shape(), std::move(out), {a}, [factor](Node<T>& self) {
    if (T* g = grad_of(self, 0)) simd::kernels<T>().axpy(factor, self.grad.data(), g, self.grad.size());
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.numel());
  simd::kernels<T>().relu(x.ptr(), out.data(), out.size());
  return Tensor<T>::make_op(x.shape(), std::move(out), {x}, [](Node<T>& self) {
    if (T* g = grad_of(self, 0))
      simd::kernels<T>().relu_backward(data_of(self, 0).data(), self.grad.data(), g,
                                       self.grad.size());
  });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  constexpr T inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
  return unary(
      x, [](T v) { return T(0.5) * v * (T(1) + std::erf(v * inv_sqrt2)); },
      [](T v, T) {
        const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
        return cdf + v * inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
      });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      x,
      [](T v) {
        if (v >= 0) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
  return unary(
      x, [](T v) { return std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v))); },
      [](T v, T) {
        if (v >= 0) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary(x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> sin(const Tensor<T>& x) {
  return unary(x, [](T v) { return std::sin(v); }, [](T v, T) { return std::cos(v); });
}

template <typename T>
Tensor<T> cos(const Tensor<T>& x) {
  return unary(x, [](T v) { return std::cos(v); }, [](T v, T) { return -std::sin(v); });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  require(x.rank() >= 1, "softmax: empty shape");
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.numel() / d;
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.ptr() + r * d;
    T* yr = out.data() + r * d;
    const T mx = *std::max_element(xr, xr + d);
    T s = 0;
    for (std::size_t j = 0; j < d; ++j) s += (yr[j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < d; ++j) yr[j] /= s;
  }
  return Tensor<T>::make_op(x.shape(), std::move(out), {x}, [rows, d](Node<T>& self) {
    T* gx = grad_of(self, 0);
    if (!gx) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = self.data.data() + r * d;
      const T* gy = self.grad.data() + r * d;
      T dotv = 0;
      for (std::size_t j = 0; j < d; ++j) dotv += gy[j] * y[j];
      for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += y[j] * (gy[j] - dotv);
    }
  });
}

template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                    T eps) {
  require(x.rank() >= 1, "layernorm: empty shape");
  const std::size_t d = x.shape().back();
  require(gain.numel() == d && bias.numel() == d,
          "layernorm: gain/bias length must equal last dimension " + std::to_string(d));
  if (!(eps > T(0))) throw ArgumentError("layernorm: eps must be positive");
  const std::size_t rows = x.numel() / d;
  std::vector<T> out(x.numel());
  std::vector<T> xhat(x.numel());
  std::vector<T> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.ptr() + r * d;
    T mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= T(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= T(d);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (xr[j] - mean) * is;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gain[j] + bias[j];
    }
  }
  return Tensor<T>::make_op(
      x.shape(), std::move(out), {x, gain, bias},
      [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& self) {
        const auto& g = data_of(self, 1);
        T* gx = grad_of(self, 0);
        T* gg = grad_of(self, 1);
        T* gb = grad_of(self, 2);
        for (std::size_t r = 0; r < rows; ++r) {
          const T* gy = self.grad.data() + r * d;
          const T* h = xhat.data() + r * d;
          if (gg)
            for (std::size_t j = 0; j < d; ++j) gg[j] += gy[j] * h[j];
          if (gb)
            for (std::size_t j = 0; j < d; ++j) gb[j] += gy[j];
          if (gx) {
            T mean_g = 0, mean_gh = 0;
            for (std::size_t j = 0; j < d; ++j) {
              const T gh = gy[j] * g[j];
              mean_g += gh;
              mean_gh += gh * h[j];
            }
            mean_g /= T(d);
            mean_gh /= T(d);
            for (std::size_t j = 0; j < d; ++j)
              gx[r * d + j] += inv_std[r] * (gy[j] * g[j] - mean_g - h[j] * mean_gh);
          }
        }
      });
}

namespace {

struct ConvGeom {
  std::size_t cin, h, w, cout, k, stride, pad, ho, wo;
  std::size_t kdim() const { return cin * k * k; }
  std::size_t hw_out() const { return ho * wo; }
};

template <typename T>
void im2col(const T* x, const ConvGeom& g, T* cols) {
  const std::size_t n = g.hw_out();
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = cols + ((c * g.k + ky) * g.k + kx) * n;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            const bool inside = iy >= 0 && iy < static_cast<long>(g.h) && ix >= 0 &&
                                ix < static_cast<long>(g.w);
            row[oy * g.wo + ox] = inside ? x[(c * g.h + iy) * g.w + ix] : T(0);
          }
        }
      }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeom& g, T* gx) {
  const std::size_t n = g.hw_out();
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = cols + ((c * g.k + ky) * g.k + kx) * n;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
            gx[(c * g.h + iy) * g.w + ix] += row[oy * g.wo + ox];
          }
        }
      }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride) {
  require_rank(x.shape(), 3, "conv2d");
  require_rank(weight.shape(), 4, "conv2d weight");
  if (stride < 1) throw ArgumentError("conv2d: stride must be >= 1");
  ConvGeom g{};
  g.cin = x.size(0);
  g.h = x.size(1);
  g.w = x.size(2);
  g.cout = weight.size(0);
  g.k = weight.size(2);
  g.stride = stride;
  g.pad = g.k / 2;
  require(weight.size(1) == g.cin && weight.size(3) == g.k,
          "conv2d: weight " + shape_str(weight.shape()) + " does not match input " +
              shape_str(x.shape()));
  if (bias.defined())
    require(bias.numel() == g.cout, "conv2d: bias length must equal output channels");
  g.ho = (g.h + 2 * g.pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * g.pad - g.k) / stride + 1;

  const std::size_t n = g.hw_out(), kd = g.kdim();
  const bool direct = g.k == 1 && stride == 1;
  std::vector<T> cols;
  if (!direct) {
    cols.resize(kd * n);
    im2col(x.ptr(), g, cols.data());
  }
  const T* colp = direct ? x.ptr() : cols.data();
  std::vector<T> out(g.cout * n, T(0));
  if (bias.defined())
    for (std::size_t c = 0; c < g.cout; ++c)
      std::fill(out.begin() + c * n, out.begin() + (c + 1) * n, bias[c]);
  gemm(g.cout, n, kd, weight.ptr(), kd, std::size_t{1}, colp, n, out.data(), n);

  return Tensor<T>::make_op(
      {g.cout, g.ho, g.wo}, std::move(out), {x, weight, bias},
      [g, direct, cols = std::move(cols)](Node<T>& self) {
        const std::size_t n = g.hw_out(), kd = g.kdim();
        const T* gy = self.grad.data();
        if (T* gw = grad_of(self, 1)) {
          const T* colp = direct ? data_of(self, 0).data() : cols.data();
          const auto colt = transposed(colp, kd, n);
          gemm(g.cout, kd, n, gy, n, std::size_t{1}, colt.data(), kd, gw, kd);
        }
        if (T* gb = grad_of(self, 2))
          for (std::size_t c = 0; c < g.cout; ++c)
            for (std::size_t i = 0; i < n; ++i) gb[c] += gy[c * n + i];
        if (T* gx = grad_of(self, 0)) {
          const T* w = data_of(self, 1).data();
          if (direct) {
            gemm(kd, n, g.cout, w, std::size_t{1}, kd, gy, n, gx, n);
          } else {
            std::vector<T> gcols(kd * n, T(0));
            gemm(kd, n, g.cout, w, std::size_t{1}, kd, gy, n, gcols.data(), n);
            col2im_add(gcols.data(), g, gx);
          }
        }
      });
}

template <typename T>
Tensor<T> transposed_conv2d(const Tensor<T>& x, const Tensor<T>& weight,
                            const Tensor<T>& bias, std::size_t stride) {
  require_rank(x.shape(), 3, "transposed_conv2d");
  require_rank(weight.shape(), 4, "transposed_conv2d weight");
  const std::size_t cin = x.size(0), h = x.size(1), w = x.size(2);
  const std::size_t cout = weight.size(1), k = weight.size(2);
  require(weight.size(0) == cin && weight.size(3) == k,
          "transposed_conv2d: weight " + shape_str(weight.shape()) +
              " does not match input " + shape_str(x.shape()));
  if (k != stride)
    throw UnsupportedConfig("transposed_conv2d: only kernel == stride is supported (kernel " +
                            std::to_string(k) + ", stride " + std::to_string(stride) + ")");
  if (bias.defined())
    require(bias.numel() == cout, "transposed_conv2d: bias length must equal output channels");
  const std::size_t hw = h * w, rows = cout * k * k;
  const std::size_t ho = h * k, wo = w * k;

  // Y[(co, a, b) x (i, j)] = W^T x, then each input pixel tiles a k x k block.
  std::vector<T> y(rows * hw, T(0));
  gemm(rows, hw, cin, weight.ptr(), std::size_t{1}, rows, x.ptr(), hw, y.data(), hw);
  std::vector<T> out(cout * ho * wo);
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) {
        const T* yr = y.data() + ((co * k + a) * k + b) * hw;
        const T bv = bias.defined() ? bias[co] : T(0);
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t j = 0; j < w; ++j)
            out[(co * ho + i * k + a) * wo + j * k + b] = yr[i * w + j] + bv;
      }
  return Tensor<T>::make_op(
      {cout, ho, wo}, std::move(out), {x, weight, bias},
      [cin, h, w, cout, k, hw, rows, ho, wo](Node<T>& self) {
        std::vector<T> gy(rows * hw);
        for (std::size_t co = 0; co < cout; ++co)
          for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) {
              T* gr = gy.data() + ((co * k + a) * k + b) * hw;
              for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < w; ++j)
                  gr[i * w + j] = self.grad[(co * ho + i * k + a) * wo + j * k + b];
            }
        if (T* gx = grad_of(self, 0))
          gemm(cin, hw, rows, data_of(self, 1).data(), rows, std::size_t{1}, gy.data(), hw, gx, hw);
        if (T* gw = grad_of(self, 1)) {
          const auto gyt = transposed(gy.data(), rows, hw);
          gemm(cin, rows, hw, data_of(self, 0).data(), hw, std::size_t{1}, gyt.data(), rows, gw,
               rows);
        }
        if (T* gb = grad_of(self, 2))
          for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t i = 0; i < ho * wo; ++i) gb[co] += self.grad[co * ho * wo + i];
      });
}

template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                      BatchNormStats<T>& stats, bool training, T momentum, T eps) {
  require_rank(x.shape(), 3, "batchnorm2d");
  const std::size_t c = x.size(0), n = x.size(1) * x.size(2);
  require(gamma.numel() == c && beta.numel() == c,
          "batchnorm2d: gamma/beta length must equal channel count " + std::to_string(c));
  if (stats.running_mean.empty()) stats.running_mean.assign(c, T(0));
  if (stats.running_var.empty()) stats.running_var.assign(c, T(1));
  require(stats.running_mean.size() == c && stats.running_var.size() == c,
          "batchnorm2d: running statistics do not match channel count");

  std::vector<T> out(x.numel()), xhat(x.numel()), inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* xc = x.ptr() + ch * n;
    T mean, var;
    if (training) {
      mean = 0;
      for (std::size_t i = 0; i < n; ++i) mean += xc[i];
      mean /= T(n);
      var = 0;
      for (std::size_t i = 0; i < n; ++i) var += (xc[i] - mean) * (xc[i] - mean);
      var /= T(n);
      const T unbiased = n > 1 ? var * T(n) / T(n - 1) : var;
      stats.running_mean[ch] = (T(1) - momentum) * stats.running_mean[ch] + momentum * mean;
      stats.running_var[ch] = (T(1) - momentum) * stats.running_var[ch] + momentum * unbiased;
    } else {
      mean = stats.running_mean[ch];
      var = stats.running_var[ch];
    }
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[ch] = is;
    for (std::size_t i = 0; i < n; ++i) {
      const T h = (xc[i] - mean) * is;
      xhat[ch * n + i] = h;
      out[ch * n + i] = h * gamma[ch] + beta[ch];
    }
  }
  return Tensor<T>::make_op(
      x.shape(), std::move(out), {x, gamma, beta},
      [c, n, training, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& self) {
        const auto& g = data_of(self, 1);
        T* gx = grad_of(self, 0);
        T* gg = grad_of(self, 1);
        T* gb = grad_of(self, 2);
        for (std::size_t ch = 0; ch < c; ++ch) {
          const T* gy = self.grad.data() + ch * n;
          const T* h = xhat.data() + ch * n;
          T sum_g = 0, sum_gh = 0;
          for (std::size_t i = 0; i < n; ++i) {
            sum_g += gy[i];
            sum_gh += gy[i] * h[i];
          }
          if (gg) gg[ch] += sum_gh;
          if (gb) gb[ch] += sum_g;
          if (!gx) continue;
          const T scale_ = g[ch] * inv_std[ch];
          if (training) {
            const T mg = sum_g / T(n), mgh = sum_gh / T(n);
            for (std::size_t i = 0; i < n; ++i)
              gx[ch * n + i] += scale_ * (gy[i] - mg - h[i] * mgh);
          } else {
            for (std::size_t i = 0; i < n; ++i) gx[ch * n + i] += scale_ * gy[i];
          }
        }
      });
}

template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& map, const Tensor<T>& uv,
                          std::span<const unsigned char> valid) {
  require_rank(map.shape(), 3, "bilinear_sample");
  require(uv.rank() == 2 && uv.size(1) == 2,
          "bilinear_sample: uv must be [n x 2], got " + shape_str(uv.shape()));
  const std::size_t c = map.size(0), h = map.size(1), w = map.size(2);
  const std::size_t n = uv.size(0);
  require(valid.empty() || valid.size() == n, "bilinear_sample: validity mask length mismatch");

  // Channels-last copy so each tap reads one contiguous vector.
  std::vector<T> hwc(h * w * c);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < h * w; ++i) hwc[i * c + ch] = map[ch * h * w + i];

  struct Tap {
    std::size_t i00, i01, i10, i11;
    T fx, fy;
    bool ok;
  };
  std::vector<Tap> taps(n);
  std::vector<T> out(n * c, T(0));
  for (std::size_t p = 0; p < n; ++p) {
    Tap& t = taps[p];
    t.ok = valid.empty() || valid[p] != 0;
    if (!t.ok) continue;
    const T x = uv[2 * p] - T(0.5), y = uv[2 * p + 1] - T(0.5);
    const T xf = std::floor(x), yf = std::floor(y);
    t.fx = x - xf;
    t.fy = y - yf;
    auto clampi = [](T v, std::size_t hi) {
      if (!(v > T(0))) return std::size_t{0};
      if (v >= T(hi - 1)) return hi - 1;
      return static_cast<std::size_t>(v);
    };
    const std::size_t x0 = clampi(xf, w), x1 = clampi(xf + T(1), w);
    const std::size_t y0 = clampi(yf, h), y1 = clampi(yf + T(1), h);
    t.i00 = (y0 * w + x0) * c;
    t.i01 = (y0 * w + x1) * c;
    t.i10 = (y1 * w + x0) * c;
    t.i11 = (y1 * w + x1) * c;
    const T w00 = (T(1) - t.fx) * (T(1) - t.fy), w01 = t.fx * (T(1) - t.fy);
    const T w10 = (T(1) - t.fx) * t.fy, w11 = t.fx * t.fy;
    T* o = out.data() + p * c;
    for (std::size_t ch = 0; ch < c; ++ch)
      o[ch] = w00 * hwc[t.i00 + ch] + w01 * hwc[t.i01 + ch] + w10 * hwc[t.i10 + ch] +
              w11 * hwc[t.i11 + ch];
  }
  return Tensor<T>::make_op(
      {n, c}, std::move(out), {map, uv},
      [c, h, w, n, hwc = std::move(hwc), taps = std::move(taps)](Node<T>& self) {
        T* gmap = grad_of(self, 0);
        T* guv = grad_of(self, 1);
        std::vector<T> ghwc(gmap ? h * w * c : 0, T(0));
        for (std::size_t p = 0; p < n; ++p) {
          const Tap& t = taps[p];
          if (!t.ok) continue;
          const T* g = self.grad.data() + p * c;
          if (gmap) {
            const T w00 = (T(1) - t.fx) * (T(1) - t.fy), w01 = t.fx * (T(1) - t.fy);
            const T w10 = (T(1) - t.fx) * t.fy, w11 = t.fx * t.fy;
            for (std::size_t ch = 0; ch < c; ++ch) {
              ghwc[t.i00 + ch] += w00 * g[ch];
              ghwc[t.i01 + ch] += w01 * g[ch];
              ghwc[t.i10 + ch] += w10 * g[ch];
              ghwc[t.i11 + ch] += w11 * g[ch];
            }
          }
          if (guv) {
            T du = 0, dv = 0;
            for (std::size_t ch = 0; ch < c; ++ch) {
              const T v00 = hwc[t.i00 + ch], v01 = hwc[t.i01 + ch];
              const T v10 = hwc[t.i10 + ch], v11 = hwc[t.i11 + ch];
              du += g[ch] * ((T(1) - t.fy) * (v01 - v00) + t.fy * (v11 - v10));
              dv += g[ch] * ((T(1) - t.fx) * (v10 - v00) + t.fx * (v11 - v01));
            }
            guv[2 * p] += du;
            guv[2 * p + 1] += dv;
          }
        }
        if (gmap)
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < h * w; ++i) gmap[ch * h * w + i] += ghwc[i * c + ch];
      });
}

namespace {

struct ResizeTap {
  std::size_t i0, i1;
  double f;
};

std::vector<ResizeTap> resize_taps(std::size_t in, std::size_t out) {
  std::vector<ResizeTap> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    std::size_t i0 = static_cast<std::size_t>(src);
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, src - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& map, std::size_t out_h, std::size_t out_w) {
  require_rank(map.shape(), 3, "bilinear_resize");
  if (out_h == 0 || out_w == 0) throw ArgumentError("bilinear_resize: output size must be positive");
  const std::size_t c = map.size(0), h = map.size(1), w = map.size(2);
  if (h == out_h && w == out_w) return reshape(map, map.shape());
  const auto ty = resize_taps(h, out_h);
  const auto tx = resize_taps(w, out_w);
  std::vector<T> out(c * out_h * out_w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* m = map.ptr() + ch * h * w;
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const T fy = static_cast<T>(ty[oy].f);
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const T fx = static_cast<T>(tx[ox].f);
        const T top = (T(1) - fx) * m[ty[oy].i0 * w + tx[ox].i0] + fx * m[ty[oy].i0 * w + tx[ox].i1];
        const T bot = (T(1) - fx) * m[ty[oy].i1 * w + tx[ox].i0] + fx * m[ty[oy].i1 * w + tx[ox].i1];
        out[(ch * out_h + oy) * out_w + ox] = (T(1) - fy) * top + fy * bot;
      }
    }
  }
  return Tensor<T>::make_op({c, out_h, out_w}, std::move(out), {map},
                            [c, h, w, out_h, out_w, ty, tx](Node<T>& self) {
    T* gm = grad_of(self, 0);
    if (!gm) return;
    for (std::size_t ch = 0; ch < c; ++ch) {
      T* g = gm + ch * h * w;
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        const T fy = static_cast<T>(ty[oy].f);
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          const T fx = static_cast<T>(tx[ox].f);
          const T go = self.grad[(ch * out_h + oy) * out_w + ox];
          g[ty[oy].i0 * w + tx[ox].i0] += (T(1) - fy) * (T(1) - fx) * go;
          g[ty[oy].i0 * w + tx[ox].i1] += (T(1) - fy) * fx * go;
          g[ty[oy].i1 * w + tx[ox].i0] += fy * (T(1) - fx) * go;
          g[ty[oy].i1 * w + tx[ox].i1] += fy * fx * go;
        }
      }
    }
  });
}

template <typename T>
Tensor<T> gather(const Tensor<T>& a, Shape shape, std::vector<std::size_t> index) {
  require(shape_numel(shape) == index.size(),
          "gather: " + std::to_string(index.size()) + " indices for shape " + shape_str(shape));
  std::vector<T> out(index.size());
  const std::size_t n = a.numel();
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] < n, "gather: index out of range for shape " + shape_str(a.shape()));
    out[i] = a[index[i]];
  }
  return Tensor<T>::make_op(std::move(shape), std::move(out), {a},
                            [idx = std::move(index)](Node<T>& self) {
    T* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t i = 0; i < idx.size(); ++i) g[idx[i]] += self.grad[i];
  });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& a, std::size_t begin, std::size_t end) {
  require(a.rank() >= 1 && begin < end && end <= a.size(0),
          "slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
              ") invalid for shape " + shape_str(a.shape()));
  const std::size_t stride = a.numel() / a.size(0);
  Shape s = a.shape();
  s[0] = end - begin;
  std::vector<T> out(a.data().begin() + begin * stride, a.data().begin() + end * stride);
  return Tensor<T>::make_op(std::move(s), std::move(out), {a}, [begin, stride](Node<T>& self) {
    T* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * stride + i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, std::size_t begin, std::size_t end) {
  require(a.rank() == 2 && begin < end && end <= a.size(1),
          "slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
              ") invalid for shape " + shape_str(a.shape()));
  const std::size_t rows = a.size(0), cols = a.size(1), wd = end - begin;
  std::vector<T> out(rows * wd);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(a.ptr() + r * cols + begin, wd, out.data() + r * wd);
  return Tensor<T>::make_op({rows, wd}, std::move(out), {a},
                            [rows, cols, wd, begin](Node<T>& self) {
    T* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < wd; ++j) g[r * cols + begin + j] += self.grad[r * wd + j];
  });
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  require(!parts.empty(), "concat_rows: nothing to concatenate");
  Shape s = parts[0].shape();
  std::size_t rows = 0;
  std::vector<T> out;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    require(p.rank() == s.size() && std::equal(s.begin() + 1, s.end(), p.shape().begin() + 1),
            "concat_rows: incompatible shapes " + shape_str(s) + " and " + shape_str(p.shape()));
    rows += p.size(0);
    offsets.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  s[0] = rows;
  return Tensor<T>::make_op(std::move(s), std::move(out), parts,
                            [offsets](Node<T>& self) {
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      T* g = grad_of(self, i);
      if (!g) continue;
      const std::size_t len = self.parents[i]->data.size();
      for (std::size_t j = 0; j < len; ++j) g[j] += self.grad[offsets[i] + j];
    }
  });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  require(!parts.empty(), "concat_cols: nothing to concatenate");
  const std::size_t rows = parts[0].size(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require(p.rank() == 2 && p.size(0) == rows,
            "concat_cols: incompatible shapes " + shape_str(parts[0].shape()) + " and " +
                shape_str(p.shape()));
    widths.push_back(p.size(1));
    total += p.size(1);
  }
  std::vector<T> out(rows * total);
  std::size_t off = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(parts[i].ptr() + r * widths[i], widths[i], out.data() + r * total + off);
    off += widths[i];
  }
  return Tensor<T>::make_op({rows, total}, std::move(out), parts,
                            [rows, total, widths](Node<T>& self) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      if (T* g = grad_of(self, i))
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < widths[i]; ++j)
            g[r * widths[i] + j] += self.grad[r * total + off + j];
      off += widths[i];
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T s = 0;
  for (T v : a.data()) s += v;
  return Tensor<T>::make_op({1}, {s}, {a}, [](Node<T>& self) {
    T* g = grad_of(self, 0);
    if (!g) return;
    const std::size_t n = self.parents[0]->data.size();
    for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
  });
}

template <typename T>
Tensor<T> sum_squared_error(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "sum_squared_error: shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
  T s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return Tensor<T>::make_op({1}, {s}, {a, b}, [](Node<T>& self) {
    const auto& av = data_of(self, 0);
    const auto& bv = data_of(self, 1);
    const T g0 = self.grad[0];
    if (T* g = grad_of(self, 0))
      for (std::size_t i = 0; i < av.size(); ++i) g[i] += T(2) * g0 * (av[i] - bv[i]);
    if (T* g = grad_of(self, 1))
      for (std::size_t i = 0; i < av.size(); ++i) g[i] -= T(2) * g0 * (av[i] - bv[i]);
  });
}

#define VITNERF_INSTANTIATE_OPS(T)                                                         \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                    \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> transpose(const Tensor<T>&);                                         \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> scale(const Tensor<T>&, T);                                          \
  template Tensor<T> relu(const Tensor<T>&);                                              \
  template Tensor<T> gelu(const Tensor<T>&);                                              \
  template Tensor<T> sigmoid(const Tensor<T>&);                                           \
  template Tensor<T> softplus(const Tensor<T>&);                                          \
  template Tensor<T> exp(const Tensor<T>&);                                               \
  template Tensor<T> sin(const Tensor<T>&);                                               \
  template Tensor<T> cos(const Tensor<T>&);                                               \
  template Tensor<T> softmax(const Tensor<T>&);                                           \
  template Tensor<T> layernorm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);  \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
                            std::size_t);                                                 \
  template Tensor<T> transposed_conv2d(const Tensor<T>&, const Tensor<T>&,                \
                                       const Tensor<T>&, std::size_t);                    \
  template Tensor<T> batchnorm2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                 BatchNormStats<T>&, bool, T, T);                         \
  template Tensor<T> bilinear_sample(const Tensor<T>&, const Tensor<T>&,                  \
                                     std::span<const unsigned char>);                     \
  template Tensor<T> bilinear_resize(const Tensor<T>&, std::size_t, std::size_t);         \
  template Tensor<T> gather(const Tensor<T>&, Shape, std::vector<std::size_t>);          \
  template Tensor<T> slice_rows(const Tensor<T>&, std::size_t, std::size_t);              \
  template Tensor<T> slice_cols(const Tensor<T>&, std::size_t, std::size_t);              \
  template Tensor<T> concat_rows(const std::vector<Tensor<T>>&);                          \
  template Tensor<T> concat_cols(const std::vector<Tensor<T>>&);                          \
  template Tensor<T> sum(const Tensor<T>&);                                               \
  template Tensor<T> sum_squared_error(const Tensor<T>&, const Tensor<T>&);

VITNERF_INSTANTIATE_OPS(float)
VITNERF_INSTANTIATE_OPS(double)

}  // namespace vitnerf
