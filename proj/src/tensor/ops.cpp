// Copyright 2026 The fedtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtune/tensor/ops.h"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "gemm.h"

namespace fedtune::ops {
namespace {

constexpr int64_t kConvChunk = 8;

// Recycles the large lowering buffers of Conv3d. Fresh multi-megabyte
// allocations are served by mmap and pay a page fault per 4 KiB on first
// touch, which costs more than the GEMM they feed.
class ScratchPool {
 public:
  static constexpr size_t kMaxCachedBytes = size_t{1} << 30;

  template <typename T>
  static std::shared_ptr<T[]> Acquire(size_t n) {
    static_assert(alignof(T) <= alignof(std::max_align_t));
    const size_t bytes = n * sizeof(T);
    std::byte* raw = Instance().Take(bytes);
    if (!raw) raw = new std::byte[bytes];
    return std::shared_ptr<T[]>(reinterpret_cast<T*>(raw),
                                [bytes](T* p) { Instance().Give(reinterpret_cast<std::byte*>(p), bytes); });
  }

 private:
  static ScratchPool& Instance() {
    static ScratchPool* pool = new ScratchPool;
    return *pool;
  }

  std::byte* Take(size_t bytes) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = free_.lower_bound(bytes);
    if (it == free_.end() || it->first > 2 * bytes) return nullptr;
    std::byte* p = it->second.release();
    cached_ -= it->first;
    free_.erase(it);
    return p;
  }

  void Give(std::byte* p, size_t bytes) {
    std::lock_guard<std::mutex> lock(mu_);
    if (cached_ + bytes > kMaxCachedBytes) {
      delete[] p;
      return;
    }
    cached_ += bytes;
    free_.emplace(bytes, std::unique_ptr<std::byte[]>(p));
  }

  std::mutex mu_;
  std::multimap<size_t, std::unique_ptr<std::byte[]>> free_;
  size_t cached_ = 0;
};

using internal::Gemm;

void RequireSameDType(std::initializer_list<const Var*> vars, const char* op) {
  const DType first = (*vars.begin())->dtype();
  for (const Var* v : vars) {
    if (v->dtype() != first) throw ConfigError(std::string(op) + ": mixed dtypes");
  }
}

void RequireNdim(const Var& v, size_t ndim, const char* op, const char* what) {
  if (v.shape().size() != ndim) {
    throw ConfigError(std::string(op) + ": " + what + " must be " + std::to_string(ndim) +
                      "-D, got " + ShapeToString(v.shape()));
  }
}

// Rows of a [..., F] tensor viewed as a matrix.
int64_t LeadingRows(const Shape& shape) {
  int64_t rows = 1;
  for (size_t i = 0; i + 1 < shape.size(); ++i) rows *= shape[i];
  return rows;
}

template <typename T>
void Im2Col(const T* x, int64_t channels, int64_t depth, int64_t height, int64_t width,
            int64_t k, int64_t pad, int64_t out_d, int64_t out_h, int64_t out_w, T* col,
            int64_t ld) {
  const int64_t plane = out_h * out_w;
  for (int64_t c = 0; c < channels; ++c) {
    for (int64_t kd = 0; kd < k; ++kd) {
      for (int64_t kh = 0; kh < k; ++kh) {
        for (int64_t kw = 0; kw < k; ++kw) {
          const int64_t row = ((c * k + kd) * k + kh) * k + kw;
          T* dst = col + row * ld;
          for (int64_t od = 0; od < out_d; ++od) {
            const int64_t id = od + kd - pad;
            if (id < 0 || id >= depth) {
              std::fill(dst + od * plane, dst + (od + 1) * plane, T(0));
              continue;
            }
            for (int64_t oh = 0; oh < out_h; ++oh) {
              T* out_row = dst + od * plane + oh * out_w;
              const int64_t ih = oh + kh - pad;
              if (ih < 0 || ih >= height) {
                std::fill(out_row, out_row + out_w, T(0));
                continue;
              }
              const T* src = x + ((c * depth + id) * height + ih) * width + kw - pad;
              const int64_t lo = std::clamp<int64_t>(pad - kw, 0, out_w);
              const int64_t hi = std::clamp<int64_t>(width + pad - kw, lo, out_w);
              std::fill(out_row, out_row + lo, T(0));
              std::copy(src + lo, src + hi, out_row + lo);
              std::fill(out_row + hi, out_row + out_w, T(0));
            }
          }
        }
      }
    }
  }
}

template <typename T>
void Col2ImAccumulate(const T* col, int64_t channels, int64_t depth, int64_t height,
                      int64_t width, int64_t k, int64_t pad, int64_t out_d, int64_t out_h,
                      int64_t out_w, T* dx, int64_t ld) {
  const int64_t plane = out_h * out_w;
  for (int64_t c = 0; c < channels; ++c) {
    for (int64_t kd = 0; kd < k; ++kd) {
      for (int64_t kh = 0; kh < k; ++kh) {
        for (int64_t kw = 0; kw < k; ++kw) {
          const int64_t row = ((c * k + kd) * k + kh) * k + kw;
          const T* src = col + row * ld;
          for (int64_t od = 0; od < out_d; ++od) {
            const int64_t id = od + kd - pad;
            if (id < 0 || id >= depth) continue;
            for (int64_t oh = 0; oh < out_h; ++oh) {
              const int64_t ih = oh + kh - pad;
              if (ih < 0 || ih >= height) continue;
              const T* in_row = src + od * plane + oh * out_w;
              T* dst = dx + ((c * depth + id) * height + ih) * width;
              for (int64_t ow = 0; ow < out_w; ++ow) {
                const int64_t iw = ow + kw - pad;
                if (iw >= 0 && iw < width) dst[iw] += in_row[ow];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

Var Conv3d(const Var& input, const Var& weight, const Var& bias, Padding padding) {
  static constexpr const char* kOp = "conv3d";
  RequireSameDType({&input, &weight, &bias}, kOp);
  RequireNdim(input, 5, kOp, "input");
  RequireNdim(weight, 5, kOp, "weight");
  RequireNdim(bias, 1, kOp, "bias");
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  const int64_t batch = xs[0], cin = xs[1], depth = xs[2], height = xs[3], width = xs[4];
  const int64_t cout = ws[0], k = ws[2];
  if (ws[1] != cin) {
    throw ConfigError("conv3d: weight expects " + std::to_string(ws[1]) +
                      " input channels, input has " + std::to_string(cin));
  }
  if (ws[3] != k || ws[4] != k || k % 2 == 0) {
    throw ConfigError("conv3d: kernel must be cubic with odd extent, got " + ShapeToString(ws));
  }
  if (bias.shape()[0] != cout) throw ConfigError("conv3d: bias must have shape [Cout]");
  const int64_t pad = padding == Padding::kSame ? (k - 1) / 2 : 0;
  const int64_t out_d = depth + 2 * pad - k + 1;
  const int64_t out_h = height + 2 * pad - k + 1;
  const int64_t out_w = width + 2 * pad - k + 1;
  if (out_d <= 0 || out_h <= 0 || out_w <= 0) {
    throw ConfigError("conv3d: kernel larger than input " + ShapeToString(xs));
  }
  const int64_t positions = out_d * out_h * out_w;
  const int64_t patch = cin * k * k * k;
  const int64_t in_volume = cin * depth * height * width;
  const bool save_cols = weight.requires_grad();

  // Samples are lowered in chunks so one GEMM covers several of them.
  const int64_t chunk = std::min<int64_t>(batch, kConvChunk);

  Tape* tape = input.tape();
  return DispatchDType(input.dtype(), [&]<typename T>() {
    Tensor out({batch, cout, out_d, out_h, out_w}, input.dtype());
    auto cols = std::make_shared<std::vector<std::shared_ptr<T[]>>>();
    const T* x = input.value().data<T>().data();
    const T* w = weight.value().data<T>().data();
    const T* b = bias.value().data<T>().data();
    T* y = out.data<T>().data();
    std::shared_ptr<T[]> col;
    std::vector<T> ych(static_cast<size_t>(cout * chunk * positions));
    for (int64_t n0 = 0; n0 < batch; n0 += chunk) {
      const int64_t nb = std::min(chunk, batch - n0);
      const int64_t ld = nb * positions;
      if (!col || save_cols) col = ScratchPool::Acquire<T>(static_cast<size_t>(patch * chunk * positions));
      for (int64_t j = 0; j < nb; ++j) {
        Im2Col(x + (n0 + j) * in_volume, cin, depth, height, width, k, pad, out_d, out_h, out_w,
               col.get() + j * positions, ld);
      }
      Gemm<T>(false, false, cout, ld, patch, T(1), w, patch, col.get(), ld, T(0), ych.data(), ld);
      for (int64_t j = 0; j < nb; ++j) {
        for (int64_t c = 0; c < cout; ++c) {
          const T* src = ych.data() + c * ld + j * positions;
          T* dst = y + ((n0 + j) * cout + c) * positions;
          for (int64_t p = 0; p < positions; ++p) dst[p] = src[p] + b[c];
        }
      }
      if (save_cols) cols->push_back(std::move(col));
    }
    return tape->Record(
        std::move(out), {input, weight, bias},
        [=](const Tensor& grad_out) {
          const T* gy = grad_out.data<T>().data();
          if (bias.requires_grad()) {
            T* db = tape->GradBuffer(bias).data<T>().data();
            for (int64_t n = 0; n < batch; ++n) {
              for (int64_t c = 0; c < cout; ++c) {
                const T* row = gy + (n * cout + c) * positions;
                T acc = 0;
                for (int64_t p = 0; p < positions; ++p) acc += row[p];
                db[c] += acc;
              }
            }
          }
          if (!weight.requires_grad() && !input.requires_grad()) return;
          std::vector<T> gch(static_cast<size_t>(cout * chunk * positions));
          std::shared_ptr<T[]> dcol;
          if (input.requires_grad()) dcol = ScratchPool::Acquire<T>(static_cast<size_t>(patch * chunk * positions));
          for (int64_t n0 = 0, ci = 0; n0 < batch; n0 += chunk, ++ci) {
            const int64_t nb = std::min(chunk, batch - n0);
            const int64_t ld = nb * positions;
            for (int64_t j = 0; j < nb; ++j) {
              for (int64_t c = 0; c < cout; ++c) {
                const T* src = gy + ((n0 + j) * cout + c) * positions;
                std::copy(src, src + positions, gch.data() + c * ld + j * positions);
              }
            }
            if (weight.requires_grad()) {
              T* dw = tape->GradBuffer(weight).data<T>().data();
              Gemm<T>(false, true, cout, patch, ld, T(1), gch.data(), ld, (*cols)[ci].get(), ld,
                      T(1), dw, patch);
            }
            if (input.requires_grad()) {
              const T* wv = weight.value().data<T>().data();
              T* dx = tape->GradBuffer(input).data<T>().data();
              Gemm<T>(true, false, patch, ld, cout, T(1), wv, patch, gch.data(), ld, T(0),
                      dcol.get(), ld);
              for (int64_t j = 0; j < nb; ++j) {
                Col2ImAccumulate(dcol.get() + j * positions, cin, depth, height, width, k, pad,
                                 out_d, out_h, out_w, dx + (n0 + j) * in_volume, ld);
              }
            }
          }
        });
  });
}

namespace {

Var LinearImpl(const Var& input, const Var& weight, const Var* bias) {
  static constexpr const char* kOp = "linear";
  if (bias) {
    RequireSameDType({&input, &weight, bias}, kOp);
  } else {
    RequireSameDType({&input, &weight}, kOp);
  }
  RequireNdim(weight, 2, kOp, "weight");
  const Shape& xs = input.shape();
  if (xs.empty()) throw ConfigError("linear: input must have at least one dim");
  const int64_t features = xs.back();
  const int64_t outputs = weight.shape()[1];
  if (weight.shape()[0] != features) {
    throw ConfigError("linear: input " + ShapeToString(xs) + " incompatible with weight " +
                      ShapeToString(weight.shape()));
  }
  if (bias && bias->shape() != Shape{outputs}) {
    throw ConfigError("linear: bias must have shape [" + std::to_string(outputs) + "]");
  }
  const int64_t rows = LeadingRows(xs);
  Shape out_shape = xs;
  out_shape.back() = outputs;
  Tape* tape = input.tape();
  std::vector<Var> inputs = {input, weight};
  if (bias) inputs.push_back(*bias);
  const Var bias_var = bias ? *bias : Var();
  const bool has_bias = bias != nullptr;

  return DispatchDType(input.dtype(), [&]<typename T>() {
    Tensor out(out_shape, input.dtype());
    T* y = out.data<T>().data();
    Gemm<T>(false, false, rows, outputs, features, T(1), input.value().data<T>().data(), features,
            weight.value().data<T>().data(), outputs, T(0), y, outputs);
    if (has_bias) {
      const T* b = bias_var.value().data<T>().data();
      for (int64_t r = 0; r < rows; ++r) {
        for (int64_t o = 0; o < outputs; ++o) y[r * outputs + o] += b[o];
      }
    }
    return tape->Record(std::move(out), inputs, [=](const Tensor& grad_out) {
      const T* gy = grad_out.data<T>().data();
      if (input.requires_grad()) {
        Gemm<T>(false, true, rows, features, outputs, T(1), gy, outputs,
                weight.value().data<T>().data(), outputs, T(1),
                tape->GradBuffer(input).data<T>().data(), features);
      }
      if (weight.requires_grad()) {
        Gemm<T>(true, false, features, outputs, rows, T(1), input.value().data<T>().data(),
                features, gy, outputs, T(1), tape->GradBuffer(weight).data<T>().data(), outputs);
      }
      if (has_bias && bias_var.requires_grad()) {
        T* db = tape->GradBuffer(bias_var).data<T>().data();
        for (int64_t r = 0; r < rows; ++r) {
          for (int64_t o = 0; o < outputs; ++o) db[o] += gy[r * outputs + o];
        }
      }
    });
  });
}

}  // namespace

Var Linear(const Var& input, const Var& weight, const Var& bias) {
  return LinearImpl(input, weight, &bias);
}

Var MatMul(const Var& input, const Var& weight) { return LinearImpl(input, weight, nullptr); }

Var Add(const Var& a, const Var& b) {
  RequireSameDType({&a, &b}, "add");
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (bs.size() > as.size() || !std::equal(bs.rbegin(), bs.rend(), as.rbegin())) {
    throw ConfigError("add: cannot broadcast " + ShapeToString(bs) + " onto " +
                      ShapeToString(as));
  }
  const int64_t inner = b.value().numel();
  const int64_t outer = a.value().numel() / inner;
  Tape* tape = a.tape();
  return DispatchDType(a.dtype(), [&]<typename T>() {
    Tensor out = a.value();
    T* y = out.data<T>().data();
    const T* bv = b.value().data<T>().data();
    for (int64_t o = 0; o < outer; ++o) {
      for (int64_t i = 0; i < inner; ++i) y[o * inner + i] += bv[i];
    }
    return tape->Record(std::move(out), {a, b}, [=](const Tensor& grad_out) {
      const T* gy = grad_out.data<T>().data();
      if (a.requires_grad()) {
        T* da = tape->GradBuffer(a).data<T>().data();
        for (int64_t i = 0; i < outer * inner; ++i) da[i] += gy[i];
      }
      if (b.requires_grad()) {
        T* db = tape->GradBuffer(b).data<T>().data();
        for (int64_t o = 0; o < outer; ++o) {
          for (int64_t i = 0; i < inner; ++i) db[i] += gy[o * inner + i];
        }
      }
    });
  });
}

Var Scale(const Var& a, double factor) {
  Tape* tape = a.tape();
  return DispatchDType(a.dtype(), [&]<typename T>() {
    Tensor out = a.value();
    for (auto& v : out.data<T>()) v = static_cast<T>(v * factor);
    return tape->Record(std::move(out), {a}, [=](const Tensor& grad_out) {
      auto gy = grad_out.data<T>();
      auto da = tape->GradBuffer(a).data<T>();
      for (size_t i = 0; i < gy.size(); ++i) da[i] += static_cast<T>(gy[i] * factor);
    });
  });
}

Var Sum(const Var& a) {
  Tape* tape = a.tape();
  return DispatchDType(a.dtype(), [&]<typename T>() {
    double acc = 0.0;
    for (T v : a.value().data<T>()) acc += v;
    Tensor out = Tensor::Scalar(acc, a.dtype());
    return tape->Record(std::move(out), {a}, [=](const Tensor& grad_out) {
      const T g = grad_out.data<T>()[0];
      for (auto& v : tape->GradBuffer(a).data<T>()) v += g;
    });
  });
}

Var Mean(const Var& a) {
  return Scale(Sum(a), 1.0 / static_cast<double>(a.value().numel()));
}

Var Relu(const Var& x) {
  Tape* tape = x.tape();
  return DispatchDType(x.dtype(), [&]<typename T>() {
    Tensor out = x.value();
    for (auto& v : out.data<T>()) v = v > T(0) ? v : T(0);
    return tape->Record(std::move(out), {x}, [=](const Tensor& grad_out) {
      auto gy = grad_out.data<T>();
      auto xv = x.value().data<T>();
      auto dx = tape->GradBuffer(x).data<T>();
      for (size_t i = 0; i < gy.size(); ++i) {
        if (xv[i] > T(0)) dx[i] += gy[i];
      }
    });
  });
}

Var Gelu(const Var& x) {
  Tape* tape = x.tape();
  return DispatchDType(x.dtype(), [&]<typename T>() {
    Tensor out = x.value();
    for (auto& v : out.data<T>()) {
      const double d = v;
      v = static_cast<T>(0.5 * d * (1.0 + std::erf(d * std::numbers::sqrt2 / 2.0)));
    }
    return tape->Record(std::move(out), {x}, [=](const Tensor& grad_out) {
      auto gy = grad_out.data<T>();
      auto xv = x.value().data<T>();
      auto dx = tape->GradBuffer(x).data<T>();
      const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
      for (size_t i = 0; i < gy.size(); ++i) {
        const double d = xv[i];
        const double cdf = 0.5 * (1.0 + std::erf(d * std::numbers::sqrt2 / 2.0));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * d * d);
        dx[i] += static_cast<T>(gy[i] * (cdf + d * pdf));
      }
    });
  });
}

Var Softmax(const Var& x) {
  if (x.shape().empty()) throw ConfigError("softmax: input must have a class dim");
  const int64_t cols = x.shape().back();
  const int64_t rows = LeadingRows(x.shape());
  Tape* tape = x.tape();
  return DispatchDType(x.dtype(), [&]<typename T>() {
    Tensor out = x.value();
    T* y = out.data<T>().data();
    for (int64_t r = 0; r < rows; ++r) {
      T* row = y + r * cols;
      const T mx = *std::max_element(row, row + cols);
      double total = 0.0;
      for (int64_t c = 0; c < cols; ++c) {
        row[c] = static_cast<T>(std::exp(static_cast<double>(row[c] - mx)));
        total += row[c];
      }
      for (int64_t c = 0; c < cols; ++c) row[c] = static_cast<T>(row[c] / total);
    }
    auto saved = std::make_shared<Tensor>(out);
    return tape->Record(std::move(out), {x}, [=](const Tensor& grad_out) {
      const T* gy = grad_out.data<T>().data();
      const T* yv = saved->data<T>().data();
      T* dx = tape->GradBuffer(x).data<T>().data();
      for (int64_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (int64_t c = 0; c < cols; ++c) dot += gy[r * cols + c] * yv[r * cols + c];
        for (int64_t c = 0; c < cols; ++c) {
          dx[r * cols + c] += static_cast<T>(yv[r * cols + c] * (gy[r * cols + c] - dot));
        }
      }
    });
  });
}

Var LayerNorm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  static constexpr const char* kOp = "layernorm";
  RequireSameDType({&x, &gamma, &beta}, kOp);
  if (x.shape().empty()) throw ConfigError("layernorm: input must have a feature dim");
  const int64_t cols = x.shape().back();
  if (gamma.shape() != Shape{cols} || beta.shape() != Shape{cols}) {
    throw ConfigError("layernorm: gamma/beta must have shape [" + std::to_string(cols) + "]");
  }
  const int64_t rows = LeadingRows(x.shape());
  Tape* tape = x.tape();
  return DispatchDType(x.dtype(), [&]<typename T>() {
    Tensor out(x.shape(), x.dtype());
    auto mean = std::make_shared<std::vector<double>>(rows);
    auto rstd = std::make_shared<std::vector<double>>(rows);
    const T* xv = x.value().data<T>().data();
    const T* g = gamma.value().data<T>().data();
    const T* b = beta.value().data<T>().data();
    T* y = out.data<T>().data();
    for (int64_t r = 0; r < rows; ++r) {
      const T* row = xv + r * cols;
      double mu = 0.0;
      for (int64_t c = 0; c < cols; ++c) mu += row[c];
      mu /= static_cast<double>(cols);
      double var = 0.0;
      for (int64_t c = 0; c < cols; ++c) var += (row[c] - mu) * (row[c] - mu);
      var /= static_cast<double>(cols);
      const double inv = 1.0 / std::sqrt(var + eps);
      (*mean)[r] = mu;
      (*rstd)[r] = inv;
      for (int64_t c = 0; c < cols; ++c) {
        y[r * cols + c] = static_cast<T>((row[c] - mu) * inv * g[c] + b[c]);
      }
    }
    return tape->Record(std::move(out), {x, gamma, beta}, [=](const Tensor& grad_out) {
      const T* gy = grad_out.data<T>().data();
      const T* xs = x.value().data<T>().data();
      const T* gv = gamma.value().data<T>().data();
      T* dx = x.requires_grad() ? tape->GradBuffer(x).data<T>().data() : nullptr;
      T* dg = gamma.requires_grad() ? tape->GradBuffer(gamma).data<T>().data() : nullptr;
      T* db = beta.requires_grad() ? tape->GradBuffer(beta).data<T>().data() : nullptr;
      std::vector<double> xhat(static_cast<size_t>(cols));
      std::vector<double> dxhat(static_cast<size_t>(cols));
      for (int64_t r = 0; r < rows; ++r) {
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int64_t c = 0; c < cols; ++c) {
          const double gyc = gy[r * cols + c];
          xhat[c] = (xs[r * cols + c] - (*mean)[r]) * (*rstd)[r];
          dxhat[c] = gyc * gv[c];
          sum_dxhat += dxhat[c];
          sum_dxhat_xhat += dxhat[c] * xhat[c];
          if (dg) dg[c] += static_cast<T>(gyc * xhat[c]);
          if (db) db[c] += static_cast<T>(gyc);
        }
        if (dx) {
          const double inv_n = 1.0 / static_cast<double>(cols);
          for (int64_t c = 0; c < cols; ++c) {
            dx[r * cols + c] += static_cast<T>(
                (*rstd)[r] * (dxhat[c] - inv_n * sum_dxhat - xhat[c] * inv_n * sum_dxhat_xhat));
          }
        }
      }
    });
  });
}

Var GlobalAvgPool3d(const Var& x) {
  RequireNdim(x, 5, "global_avgpool3d", "input");
  const Shape& s = x.shape();
  const int64_t channels = s[0] * s[1];
  const int64_t volume = s[2] * s[3] * s[4];
  Tape* tape = x.tape();
  return DispatchDType(x.dtype(), [&]<typename T>() {
    Tensor out({s[0], s[1]}, x.dtype());
    const T* xv = x.value().data<T>().data();
    T* y = out.data<T>().data();
    for (int64_t c = 0; c < channels; ++c) {
      double acc = 0.0;
      for (int64_t i = 0; i < volume; ++i) acc += xv[c * volume + i];
      y[c] = static_cast<T>(acc / static_cast<double>(volume));
    }
    return tape->Record(std::move(out), {x}, [=](const Tensor& grad_out) {
      const T* gy = grad_out.data<T>().data();
      T* dx = tape->GradBuffer(x).data<T>().data();
      for (int64_t c = 0; c < channels; ++c) {
        const T g = static_cast<T>(gy[c] / static_cast<double>(volume));
        for (int64_t i = 0; i < volume; ++i) dx[c * volume + i] += g;
      }
    });
  });
}

Var CrossEntropyLogits(const Var& logits, std::span<const int> labels) {
  RequireNdim(logits, 2, "cross_entropy", "logits");
  const int64_t batch = logits.shape()[0];
  const int64_t classes = logits.shape()[1];
  if (static_cast<int64_t>(labels.size()) != batch) {
    throw ConfigError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                      std::to_string(batch));
  }
  for (int label : labels) {
    if (label < 0 || label >= classes) {
      throw ConfigError("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                        std::to_string(classes) + ")");
    }
  }
  std::vector<int> label_copy(labels.begin(), labels.end());
  Tape* tape = logits.tape();
  return DispatchDType(logits.dtype(), [&]<typename T>() {
    const T* z = logits.value().data<T>().data();
    auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(batch * classes));
    double total = 0.0;
    for (int64_t n = 0; n < batch; ++n) {
      const T* row = z + n * classes;
      const double mx = *std::max_element(row, row + classes);
      double se = 0.0;
      for (int64_t c = 0; c < classes; ++c) se += std::exp(row[c] - mx);
      const double lse = mx + std::log(se);
      for (int64_t c = 0; c < classes; ++c) {
        (*probs)[n * classes + c] = std::exp(row[c] - lse);
      }
      total += lse - row[label_copy[n]];
    }
    Tensor out = Tensor::Scalar(total / static_cast<double>(batch), logits.dtype());
    return tape->Record(std::move(out), {logits}, [=](const Tensor& grad_out) {
      const double g = grad_out.data<T>()[0] / static_cast<double>(batch);
      T* dz = tape->GradBuffer(logits).data<T>().data();
      for (int64_t n = 0; n < batch; ++n) {
        for (int64_t c = 0; c < classes; ++c) {
          const double onehot = c == label_copy[n] ? 1.0 : 0.0;
          dz[n * classes + c] += static_cast<T>(g * ((*probs)[n * classes + c] - onehot));
        }
      }
    });
  });
}

Var Reshape(const Var& x, const Shape& shape) {
  Tensor out = x.value().Reshaped(shape);
  Tape* tape = x.tape();
  return DispatchDType(x.dtype(), [&]<typename T>() {
    return tape->Record(std::move(out), {x}, [=](const Tensor& grad_out) {
      auto gy = grad_out.data<T>();
      auto dx = tape->GradBuffer(x).data<T>();
      for (size_t i = 0; i < gy.size(); ++i) dx[i] += gy[i];
    });
  });
}

Var TransposeLast2(const Var& x) {
  const Shape& s = x.shape();
  if (s.size() < 2) throw ConfigError("transpose: input must be at least 2-D");
  const int64_t rows = s[s.size() - 2];
  const int64_t cols = s.back();
  const int64_t batch = x.value().numel() / (rows * cols);
  Shape out_shape = s;
  std::swap(out_shape[s.size() - 2], out_shape[s.size() - 1]);
  Tape* tape = x.tape();
  return DispatchDType(x.dtype(), [&]<typename T>() {
    Tensor out(out_shape, x.dtype());
    const T* xv = x.value().data<T>().data();
    T* y = out.data<T>().data();
    for (int64_t b = 0; b < batch; ++b) {
      for (int64_t r = 0; r < rows; ++r) {
        for (int64_t c = 0; c < cols; ++c) {
          y[(b * cols + c) * rows + r] = xv[(b * rows + r) * cols + c];
        }
      }
    }
    return tape->Record(std::move(out), {x}, [=](const Tensor& grad_out) {
      const T* gy = grad_out.data<T>().data();
      T* dx = tape->GradBuffer(x).data<T>().data();
      for (int64_t b = 0; b < batch; ++b) {
        for (int64_t r = 0; r < rows; ++r) {
          for (int64_t c = 0; c < cols; ++c) {
            dx[(b * rows + r) * cols + c] += gy[(b * cols + c) * rows + r];
          }
        }
      }
    });
  });
}

Var Patchify(const Var& x, int64_t patch) {
  RequireNdim(x, 5, "patchify", "input");
  const Shape& s = x.shape();
  const int64_t batch = s[0], channels = s[1], size = s[2];
  if (s[3] != size || s[4] != size) throw ConfigError("patchify: input must be cubic");
  if (patch <= 0 || size % patch != 0) {
    throw ConfigError("patchify: size " + std::to_string(size) + " not divisible by patch " +
                      std::to_string(patch));
  }
  const int64_t grid = size / patch;
  const int64_t tokens = grid * grid * grid;
  const int64_t features = channels * patch * patch * patch;
  Tape* tape = x.tape();
  // Flat input offset of every (token, feature) pair, shared by both passes.
  auto offsets = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(tokens * features));
  for (int64_t gz = 0; gz < grid; ++gz) {
    for (int64_t gy = 0; gy < grid; ++gy) {
      for (int64_t gx = 0; gx < grid; ++gx) {
        const int64_t t = (gz * grid + gy) * grid + gx;
        for (int64_t c = 0; c < channels; ++c) {
          for (int64_t dz = 0; dz < patch; ++dz) {
            for (int64_t dy = 0; dy < patch; ++dy) {
              for (int64_t dx = 0; dx < patch; ++dx) {
                const int64_t f = ((c * patch + dz) * patch + dy) * patch + dx;
                (*offsets)[t * features + f] =
                    ((c * size + gz * patch + dz) * size + gy * patch + dy) * size + gx * patch + dx;
              }
            }
          }
        }
      }
    }
  }
  const int64_t in_volume = channels * size * size * size;
  const int64_t out_volume = tokens * features;
  return DispatchDType(x.dtype(), [&]<typename T>() {
    Tensor out({batch, tokens, features}, x.dtype());
    const T* xv = x.value().data<T>().data();
    T* y = out.data<T>().data();
    for (int64_t n = 0; n < batch; ++n) {
      for (int64_t i = 0; i < out_volume; ++i) y[n * out_volume + i] = xv[n * in_volume + (*offsets)[i]];
    }
    return tape->Record(std::move(out), {x}, [=](const Tensor& grad_out) {
      const T* gy = grad_out.data<T>().data();
      T* dx = tape->GradBuffer(x).data<T>().data();
      for (int64_t n = 0; n < batch; ++n) {
        for (int64_t i = 0; i < out_volume; ++i) {
          dx[n * in_volume + (*offsets)[i]] += gy[n * out_volume + i];
        }
      }
    });
  });
}

Var MultiHeadAttention(const Var& q, const Var& k, const Var& v, int64_t heads) {
  static constexpr const char* kOp = "attention";
  RequireSameDType({&q, &k, &v}, kOp);
  RequireNdim(q, 3, kOp, "query");
  if (k.shape() != q.shape() || v.shape() != q.shape()) {
    throw ConfigError("attention: query/key/value shapes differ");
  }
  const int64_t batch = q.shape()[0], tokens = q.shape()[1], dim = q.shape()[2];
  if (heads <= 0 || dim % heads != 0) {
    throw ConfigError("attention: embed dim " + std::to_string(dim) +
                      " not divisible by head count " + std::to_string(heads));
  }
  const int64_t head_dim = dim / heads;
  const bool need_grad = Tape::AnyRequiresGrad({q, k, v});
  Tape* tape = q.tape();
  return DispatchDType(q.dtype(), [&]<typename T>() {
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim)));
    Tensor out(q.shape(), q.dtype());
    const int64_t attn_size = tokens * tokens;
    auto probs = std::make_shared<std::vector<T>>(
        static_cast<size_t>(need_grad ? batch * heads * attn_size : attn_size));
    const T* qv = q.value().data<T>().data();
    const T* kv = k.value().data<T>().data();
    const T* vv = v.value().data<T>().data();
    T* y = out.data<T>().data();
    for (int64_t n = 0; n < batch; ++n) {
      for (int64_t h = 0; h < heads; ++h) {
        const int64_t base = n * tokens * dim + h * head_dim;
        T* p = probs->data() + (need_grad ? (n * heads + h) * attn_size : 0);
        Gemm<T>(false, true, tokens, tokens, head_dim, scale, qv + base, dim, kv + base, dim, T(0),
                p, tokens);
        for (int64_t r = 0; r < tokens; ++r) {
          T* row = p + r * tokens;
          const T mx = *std::max_element(row, row + tokens);
          double total = 0.0;
          for (int64_t c = 0; c < tokens; ++c) {
            row[c] = static_cast<T>(std::exp(static_cast<double>(row[c] - mx)));
            total += row[c];
          }
          const T inv = static_cast<T>(1.0 / total);
          for (int64_t c = 0; c < tokens; ++c) row[c] *= inv;
        }
        Gemm<T>(false, false, tokens, head_dim, tokens, T(1), p, tokens, vv + base, dim, T(0),
                y + base, dim);
      }
    }
    if (!need_grad) probs.reset();
    return tape->Record(std::move(out), {q, k, v}, [=](const Tensor& grad_out) {
      const T* gy = grad_out.data<T>().data();
      const T* qs = q.value().data<T>().data();
      const T* ks = k.value().data<T>().data();
      const T* vs = v.value().data<T>().data();
      T* dq = q.requires_grad() ? tape->GradBuffer(q).data<T>().data() : nullptr;
      T* dk = k.requires_grad() ? tape->GradBuffer(k).data<T>().data() : nullptr;
      T* dv = v.requires_grad() ? tape->GradBuffer(v).data<T>().data() : nullptr;
      std::vector<T> dp(static_cast<size_t>(attn_size));
      for (int64_t n = 0; n < batch; ++n) {
        for (int64_t h = 0; h < heads; ++h) {
          const int64_t base = n * tokens * dim + h * head_dim;
          const T* p = probs->data() + (n * heads + h) * attn_size;
          if (dv) {
            Gemm<T>(true, false, tokens, head_dim, tokens, T(1), p, tokens, gy + base, dim, T(1),
                    dv + base, dim);
          }
          if (!dq && !dk) continue;
          Gemm<T>(false, true, tokens, tokens, head_dim, T(1), gy + base, dim, vs + base, dim,
                  T(0), dp.data(), tokens);
          for (int64_t r = 0; r < tokens; ++r) {
            T* drow = dp.data() + r * tokens;
            const T* prow = p + r * tokens;
            double dot = 0.0;
            for (int64_t c = 0; c < tokens; ++c) dot += drow[c] * prow[c];
            for (int64_t c = 0; c < tokens; ++c) {
              drow[c] = static_cast<T>(prow[c] * (drow[c] - dot));
            }
          }
          if (dq) {
            Gemm<T>(false, false, tokens, head_dim, tokens, scale, dp.data(), tokens, ks + base,
                    dim, T(1), dq + base, dim);
          }
          if (dk) {
            Gemm<T>(true, false, tokens, head_dim, tokens, scale, dp.data(), tokens, qs + base,
                    dim, T(1), dk + base, dim);
          }
        }
      }
    });
  });
}

}  // namespace fedtune::ops
