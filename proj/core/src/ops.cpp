// Copyright 2026 The fuse-ser Authors. All Rights Reserved.
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

#include "fuse_ser/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace fuse_ser {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

void require_rank(const char* op, const Shape& shape, std::size_t rank, const char* what) {
  if (shape.size() != rank) {
    throw DimensionError(op, "rank", std::string(what) + " must have rank " + std::to_string(rank) +
                                         ", got " + to_string(shape));
  }
}

void require_equal(const char* op, const char* axis, std::size_t got, std::size_t expected) {
  if (got != expected) {
    throw DimensionError(op, axis, "expected " + std::to_string(expected) + ", got " + std::to_string(got));
  }
}

struct ConvGeometry {
  std::size_t n, c_in, t, f;
  std::size_t c_out, kt, kf;
  std::size_t out_t, out_f;
  Conv2dOptions opt;

  std::size_t patch() const { return c_in * kt * kf; }
  std::size_t positions() const { return out_t * out_f; }
};

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const std::size_t p = g.positions();
  for (std::size_t c = 0; c < g.c_in; ++c) {
    const T* plane = x + c * g.t * g.f;
    for (std::size_t i = 0; i < g.kt; ++i) {
      for (std::size_t j = 0; j < g.kf; ++j) {
        T* row = cols + ((c * g.kt + i) * g.kf + j) * p;
        for (std::size_t ot = 0; ot < g.out_t; ++ot) {
          const auto st = static_cast<std::ptrdiff_t>(ot * g.opt.stride_t + i) -
                          static_cast<std::ptrdiff_t>(g.opt.pad_t);
          T* dst = row + ot * g.out_f;
          if (st < 0 || st >= static_cast<std::ptrdiff_t>(g.t)) {
            std::fill(dst, dst + g.out_f, T{0});
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(st) * g.f;
          for (std::size_t of = 0; of < g.out_f; ++of) {
            const auto sf = static_cast<std::ptrdiff_t>(of * g.opt.stride_f + j) -
                            static_cast<std::ptrdiff_t>(g.opt.pad_f);
            dst[of] = (sf < 0 || sf >= static_cast<std::ptrdiff_t>(g.f)) ? T{0}
                                                                          : src[static_cast<std::size_t>(sf)];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* dx) {
  const std::size_t p = g.positions();
  for (std::size_t c = 0; c < g.c_in; ++c) {
    T* plane = dx + c * g.t * g.f;
    for (std::size_t i = 0; i < g.kt; ++i) {
      for (std::size_t j = 0; j < g.kf; ++j) {
        const T* row = cols + ((c * g.kt + i) * g.kf + j) * p;
        for (std::size_t ot = 0; ot < g.out_t; ++ot) {
          const auto st = static_cast<std::ptrdiff_t>(ot * g.opt.stride_t + i) -
                          static_cast<std::ptrdiff_t>(g.opt.pad_t);
          if (st < 0 || st >= static_cast<std::ptrdiff_t>(g.t)) continue;
          T* dst = plane + static_cast<std::size_t>(st) * g.f;
          const T* src = row + ot * g.out_f;
          for (std::size_t of = 0; of < g.out_f; ++of) {
            const auto sf = static_cast<std::ptrdiff_t>(of * g.opt.stride_f + j) -
                            static_cast<std::ptrdiff_t>(g.opt.pad_f);
            if (sf < 0 || sf >= static_cast<std::ptrdiff_t>(g.f)) continue;
            dst[static_cast<std::size_t>(sf)] += src[of];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, const Conv2dOptions& options) {
  require_rank("conv2d", input.shape(), 4, "input");
  require_rank("conv2d", weight.shape(), 4, "weight");
  require_rank("conv2d", bias.shape(), 1, "bias");
  if (options.stride_t == 0 || options.stride_f == 0) {
    throw DimensionError("conv2d", "stride", "stride must be positive");
  }
  ConvGeometry g{};
  g.opt = options;
  g.n = input.dim(0);
  g.c_in = input.dim(1);
  g.t = input.dim(2);
  g.f = input.dim(3);
  g.c_out = weight.dim(0);
  g.kt = weight.dim(2);
  g.kf = weight.dim(3);
  require_equal("conv2d", "C_in", weight.dim(1), g.c_in);
  require_equal("conv2d", "C_out", bias.dim(0), g.c_out);
  if (g.t + 2 * options.pad_t < g.kt) {
    throw DimensionError("conv2d", "T", "kernel " + std::to_string(g.kt) + " exceeds padded extent " +
                                            std::to_string(g.t + 2 * options.pad_t));
  }
  if (g.f + 2 * options.pad_f < g.kf) {
    throw DimensionError("conv2d", "F", "kernel " + std::to_string(g.kf) + " exceeds padded extent " +
                                            std::to_string(g.f + 2 * options.pad_f));
  }
  g.out_t = (g.t + 2 * options.pad_t - g.kt) / options.stride_t + 1;
  g.out_f = (g.f + 2 * options.pad_f - g.kf) / options.stride_f + 1;

  const std::size_t k = g.patch();
  const std::size_t p = g.positions();
  std::vector<T> out(g.n * g.c_out * p);
  std::vector<T> cols(k * p);
  ConstMapMat<T> w(weight.data().data(), g.c_out, k);
  auto b = bias.data();
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(input.data().data() + n * g.c_in * g.t * g.f, g, cols.data());
    MapMat<T> y(out.data() + n * g.c_out * p, g.c_out, p);
    y.noalias() = w * ConstMapMat<T>(cols.data(), k, p);
    for (std::size_t c = 0; c < g.c_out; ++c) y.row(c).array() += b[c];
  }

  return detail::make_result<T>(
      "conv2d", Shape{g.n, g.c_out, g.out_t, g.out_f}, std::move(out), {input, weight, bias},
      [g](detail::Node<T>& self) {
        auto& x = *self.inputs[0];
        auto& wn = *self.inputs[1];
        auto& bn = *self.inputs[2];
        const std::size_t k = g.patch();
        const std::size_t p = g.positions();
        std::vector<T> cols(k * p);
        std::vector<T> dcols(x.requires_grad ? k * p : 0);
        ConstMapMat<T> w(wn.data.data(), g.c_out, k);
        for (std::size_t n = 0; n < g.n; ++n) {
          ConstMapMat<T> dy(self.grad.data() + n * g.c_out * p, g.c_out, p);
          if (bn.requires_grad) {
            const T* row = self.grad.data() + n * g.c_out * p;
            for (std::size_t c = 0; c < g.c_out; ++c, row += p) bn.grad[c] += std::accumulate(row, row + p, T{0});
          }
          if (wn.requires_grad) {
            im2col(x.data.data() + n * g.c_in * g.t * g.f, g, cols.data());
            MapMat<T> dw(wn.grad.data(), g.c_out, k);
            dw.noalias() += dy * ConstMapMat<T>(cols.data(), k, p).transpose();
          }
          if (x.requires_grad) {
            MapMat<T> dc(dcols.data(), k, p);
            dc.noalias() = w.transpose() * dy;
            col2im_add(dcols.data(), g, x.grad.data() + n * g.c_in * g.t * g.f);
          }
        }
      });
}

template <typename T>
BasicTensor<T> batchnorm2d(const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                           const BasicTensor<T>& beta, BatchNormState<T>& state, Mode mode,
                           const BatchNormOptions& options) {
  require_rank("batchnorm2d", input.shape(), 4, "input");
  const std::size_t n = input.dim(0), c_count = input.dim(1), plane = input.dim(2) * input.dim(3);
  require_equal("batchnorm2d", "C", gamma.numel(), c_count);
  require_equal("batchnorm2d", "C", beta.numel(), c_count);
  require_equal("batchnorm2d", "C", state.running_mean.size(), c_count);
  require_equal("batchnorm2d", "C", state.running_var.size(), c_count);
  const std::size_t m = n * plane;
  auto x = input.data();
  auto gm = gamma.data();
  auto bt = beta.data();

  std::vector<T> xhat(x.size());
  std::vector<T> inv_std(c_count);
  std::vector<T> out(x.size());

  if (mode == Mode::kTrain) {
    if (m < 2) {
      throw DimensionError("batchnorm2d", "N*T*F",
                           "training mode needs at least 2 values per channel, got " + std::to_string(m));
    }
    for (std::size_t c = 0; c < c_count; ++c) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* src = x.data() + (i * c_count + c) * plane;
        for (std::size_t j = 0; j < plane; ++j) mean += static_cast<double>(src[j]);
      }
      mean /= static_cast<double>(m);
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* src = x.data() + (i * c_count + c) * plane;
        for (std::size_t j = 0; j < plane; ++j) {
          const double d = static_cast<double>(src[j]) - mean;
          var += d * d;
        }
      }
      const double unbiased = var / static_cast<double>(m - 1);
      var /= static_cast<double>(m);
      const T istd = static_cast<T>(1.0 / std::sqrt(var + options.eps));
      inv_std[c] = istd;
      const T mean_t = static_cast<T>(mean);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t base = (i * c_count + c) * plane;
        for (std::size_t j = 0; j < plane; ++j) {
          const T h = (x[base + j] - mean_t) * istd;
          xhat[base + j] = h;
          out[base + j] = gm[c] * h + bt[c];
        }
      }
      const T mom = static_cast<T>(options.momentum);
      state.running_mean[c] = (T{1} - mom) * state.running_mean[c] + mom * mean_t;
      state.running_var[c] = (T{1} - mom) * state.running_var[c] + mom * static_cast<T>(unbiased);
    }
    ++state.updates;
  } else {
    if (state.updates == 0) {
      throw UninitializedError(
          "batchnorm2d: eval mode requested but running statistics are uninitialized "
          "(no training batch has been seen)");
    }
    for (std::size_t c = 0; c < c_count; ++c) {
      const T istd = static_cast<T>(1.0 / std::sqrt(static_cast<double>(state.running_var[c]) + options.eps));
      inv_std[c] = istd;
      const T mean_t = state.running_mean[c];
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t base = (i * c_count + c) * plane;
        for (std::size_t j = 0; j < plane; ++j) {
          const T h = (x[base + j] - mean_t) * istd;
          xhat[base + j] = h;
          out[base + j] = gm[c] * h + bt[c];
        }
      }
    }
  }

  return detail::make_result<T>(
      "batchnorm2d", input.shape(), std::move(out), {input, gamma, beta},
      [n, c_count, plane, m, mode, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node<T>& self) {
        auto& xn = *self.inputs[0];
        auto& gn = *self.inputs[1];
        auto& bn = *self.inputs[2];
        const auto& dy = self.grad;
        for (std::size_t c = 0; c < c_count; ++c) {
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t base = (i * c_count + c) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
              sum_dy += static_cast<double>(dy[base + j]);
              sum_dy_xhat += static_cast<double>(dy[base + j]) * static_cast<double>(xhat[base + j]);
            }
          }
          if (gn.requires_grad) gn.grad[c] += static_cast<T>(sum_dy_xhat);
          if (bn.requires_grad) bn.grad[c] += static_cast<T>(sum_dy);
          if (!xn.requires_grad) continue;
          const T g = gn.data[c];
          if (mode == Mode::kEval) {
            for (std::size_t i = 0; i < n; ++i) {
              const std::size_t base = (i * c_count + c) * plane;
              for (std::size_t j = 0; j < plane; ++j) xn.grad[base + j] += dy[base + j] * g * inv_std[c];
            }
            continue;
          }
          // dx = gamma * istd / M * (M * dy - sum(dy) - xhat * sum(dy * xhat))
          const T scale = g * inv_std[c] / static_cast<T>(m);
          const T mt = static_cast<T>(m);
          const T sdy = static_cast<T>(sum_dy);
          const T sdyx = static_cast<T>(sum_dy_xhat);
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t base = (i * c_count + c) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
              xn.grad[base + j] += scale * (mt * dy[base + j] - sdy - xhat[base + j] * sdyx);
            }
          }
        }
      });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
  auto x = input.data();
  std::vector<T> out(x.size());
  if (auto* tape = detail::active_kink_tape()) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      out[i] = detail::kink_decide(*tape, !(x[i] <= T{0})) ? x[i] : T{0};
    }
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] <= T{0} ? T{0} : x[i];  // NaN passes through
  }
  return detail::make_result<T>("relu", input.shape(), std::move(out), {input}, [](detail::Node<T>& self) {
    auto& xn = *self.inputs[0];
    for (std::size_t i = 0; i < xn.data.size(); ++i) {
      if (xn.data[i] > T{0}) xn.grad[i] += self.grad[i];
    }
  });
}

template <typename T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& input, std::size_t window_t, std::size_t window_f) {
  require_rank("maxpool2d", input.shape(), 4, "input");
  if (window_t == 0 || window_f == 0) throw DimensionError("maxpool2d", "window", "window must be positive");
  const std::size_t n = input.dim(0), c = input.dim(1), t = input.dim(2), f = input.dim(3);
  if (t < window_t) {
    throw DimensionError("maxpool2d", "T", "window " + std::to_string(window_t) + " larger than extent " + std::to_string(t));
  }
  if (f < window_f) {
    throw DimensionError("maxpool2d", "F", "window " + std::to_string(window_f) + " larger than extent " + std::to_string(f));
  }
  const std::size_t ot = t / window_t, of = f / window_f;
  auto x = input.data();
  std::vector<T> out(n * c * ot * of);
  std::vector<std::size_t> argmax(out.size());
  auto* tape = detail::active_kink_tape();
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t in_base = plane * t * f;
    const std::size_t out_base = plane * ot * of;
    for (std::size_t i = 0; i < ot; ++i) {
      for (std::size_t j = 0; j < of; ++j) {
        std::size_t best = in_base + (i * window_t) * f + j * window_f;
        for (std::size_t di = 0; di < window_t; ++di) {
          for (std::size_t dj = 0; dj < window_f; ++dj) {
            const std::size_t idx = in_base + (i * window_t + di) * f + j * window_f + dj;
            if (x[idx] > x[best]) best = idx;
          }
        }
        if (tape) best = detail::kink_decide(*tape, best);
        out[out_base + i * of + j] = x[best];
        argmax[out_base + i * of + j] = best;
      }
    }
  }
  return detail::make_result<T>("maxpool2d", Shape{n, c, ot, of}, std::move(out), {input},
                                [argmax = std::move(argmax)](detail::Node<T>& self) {
                                  auto& xn = *self.inputs[0];
                                  for (std::size_t i = 0; i < argmax.size(); ++i) xn.grad[argmax[i]] += self.grad[i];
                                });
}

template <typename T>
BasicTensor<T> global_pool(const BasicTensor<T>& input) {
  require_rank("global_pool", input.shape(), 4, "input");
  const std::size_t n = input.dim(0), c = input.dim(1), plane = input.dim(2) * input.dim(3);
  auto x = input.data();
  std::vector<T> out(n * c);
  std::vector<std::size_t> argmax(n * c);
  auto* tape = detail::active_kink_tape();
  for (std::size_t p = 0; p < n * c; ++p) {
    const T* src = x.data() + p * plane;
    double total = 0.0;
    std::size_t best = 0;
    for (std::size_t j = 0; j < plane; ++j) {
      total += static_cast<double>(src[j]);
      if (src[j] > src[best]) best = j;
    }
    if (tape) best = detail::kink_decide(*tape, best);
    out[p] = static_cast<T>(total / static_cast<double>(plane)) + src[best];
    argmax[p] = p * plane + best;
  }
  return detail::make_result<T>("global_pool", Shape{n, c}, std::move(out), {input},
                                [plane, argmax = std::move(argmax)](detail::Node<T>& self) {
                                  auto& xn = *self.inputs[0];
                                  const T inv = T{1} / static_cast<T>(plane);
                                  for (std::size_t p = 0; p < argmax.size(); ++p) {
                                    const T g = self.grad[p];
                                    T* dst = xn.grad.data() + p * plane;
                                    for (std::size_t j = 0; j < plane; ++j) dst[j] += g * inv;
                                    xn.grad[argmax[p]] += g;
                                  }
                                });
}

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias) {
  require_rank("linear", input.shape(), 2, "input");
  require_rank("linear", weight.shape(), 2, "weight");
  require_rank("linear", bias.shape(), 1, "bias");
  const std::size_t n = input.dim(0), d_in = input.dim(1), d_out = weight.dim(0);
  require_equal("linear", "D_in", weight.dim(1), d_in);
  require_equal("linear", "D_out", bias.dim(0), d_out);
  std::vector<T> out(n * d_out);
  MapMat<T> y(out.data(), n, d_out);
  ConstMapMat<T> x(input.data().data(), n, d_in);
  ConstMapMat<T> w(weight.data().data(), d_out, d_in);
  y.noalias() = x * w.transpose();
  auto b = bias.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d_out; ++j) out[i * d_out + j] += b[j];
  }
  return detail::make_result<T>(
      "linear", Shape{n, d_out}, std::move(out), {input, weight, bias}, [n, d_in, d_out](detail::Node<T>& self) {
        auto& xn = *self.inputs[0];
        auto& wn = *self.inputs[1];
        auto& bn = *self.inputs[2];
        ConstMapMat<T> dy(self.grad.data(), n, d_out);
        if (xn.requires_grad) {
          MapMat<T> dx(xn.grad.data(), n, d_in);
          dx.noalias() += dy * ConstMapMat<T>(wn.data.data(), d_out, d_in);
        }
        if (wn.requires_grad) {
          MapMat<T> dw(wn.grad.data(), d_out, d_in);
          dw.noalias() += dy.transpose() * ConstMapMat<T>(xn.data.data(), n, d_in);
        }
        if (bn.requires_grad) {
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d_out; ++j) bn.grad[j] += self.grad[i * d_out + j];
          }
        }
      });
}

template <typename T>
BasicTensor<T> broadcast_add_channels(const BasicTensor<T>& maps, const BasicTensor<T>& vec) {
  require_rank("broadcast_add_channels", maps.shape(), 4, "maps");
  require_rank("broadcast_add_channels", vec.shape(), 2, "vec");
  const std::size_t n = maps.dim(0), c = maps.dim(1), plane = maps.dim(2) * maps.dim(3);
  require_equal("broadcast_add_channels", "N", vec.dim(0), n);
  require_equal("broadcast_add_channels", "C", vec.dim(1), c);
  auto x = maps.data();
  auto v = vec.data();
  std::vector<T> out(x.begin(), x.end());
  for (std::size_t p = 0; p < n * c; ++p) {
    // An exact zero shift leaves the map untouched (including signed zeros).
    if (v[p] == T{0}) continue;
    T* dst = out.data() + p * plane;
    for (std::size_t j = 0; j < plane; ++j) dst[j] += v[p];
  }
  return detail::make_result<T>("broadcast_add_channels", maps.shape(), std::move(out), {maps, vec},
                                [n, c, plane](detail::Node<T>& self) {
                                  auto& mn = *self.inputs[0];
                                  auto& vn = *self.inputs[1];
                                  if (mn.requires_grad) {
                                    for (std::size_t i = 0; i < self.grad.size(); ++i) mn.grad[i] += self.grad[i];
                                  }
                                  if (vn.requires_grad) {
                                    for (std::size_t p = 0; p < n * c; ++p) {
                                      T acc{0};
                                      const T* src = self.grad.data() + p * plane;
                                      for (std::size_t j = 0; j < plane; ++j) acc += src[j];
                                      vn.grad[p] += acc;
                                    }
                                  }
                                });
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) throw DimensionError("add", "all", to_string(a.shape()) + " vs " + to_string(b.shape()));
  auto x = a.data();
  auto y = b.data();
  std::vector<T> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (y[i] != T{0}) out[i] += y[i];
  }
  return detail::make_result<T>("add", a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i];
    }
  });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) throw DimensionError("mul", "all", to_string(a.shape()) + " vs " + to_string(b.shape()));
  auto x = a.data();
  auto y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return detail::make_result<T>("mul", a.shape(), std::move(out), {a, b}, [](detail::Node<T>& self) {
    auto& an = *self.inputs[0];
    auto& bn = *self.inputs[1];
    // a and b may be the same node (x * x); read data before accumulating.
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T ga = self.grad[i] * bn.data[i];
      const T gb = self.grad[i] * an.data[i];
      if (an.requires_grad) an.grad[i] += ga;
      if (bn.requires_grad) bn.grad[i] += gb;
    }
  });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& input) {
  double total = 0.0;
  for (auto v : input.data()) total += static_cast<double>(v);
  return detail::make_result<T>("sum", Shape{1}, std::vector<T>{static_cast<T>(total)}, {input},
                                [](detail::Node<T>& self) {
                                  auto& xn = *self.inputs[0];
                                  for (auto& g : xn.grad) g += self.grad[0];
                                });
}

template <typename T>
BasicTensor<T> weighted_sum(const BasicTensor<T>& input, std::span<const T> weights) {
  require_equal("weighted_sum", "all", weights.size(), input.numel());
  double total = 0.0;
  auto x = input.data();
  for (std::size_t i = 0; i < x.size(); ++i) total += static_cast<double>(x[i]) * static_cast<double>(weights[i]);
  std::vector<T> w(weights.begin(), weights.end());
  return detail::make_result<T>("weighted_sum", Shape{1}, std::vector<T>{static_cast<T>(total)}, {input},
                                [w = std::move(w)](detail::Node<T>& self) {
                                  auto& xn = *self.inputs[0];
                                  for (std::size_t i = 0; i < w.size(); ++i) xn.grad[i] += self.grad[0] * w[i];
                                });
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& input, Shape shape) {
  if (numel(shape) != input.numel()) {
    throw DimensionError("reshape", "all", to_string(input.shape()) + " cannot be viewed as " + to_string(shape));
  }
  auto x = input.data();
  return detail::make_result<T>("reshape", std::move(shape), std::vector<T>(x.begin(), x.end()), {input},
                                [](detail::Node<T>& self) {
                                  auto& xn = *self.inputs[0];
                                  for (std::size_t i = 0; i < self.grad.size(); ++i) xn.grad[i] += self.grad[i];
                                });
}

namespace detail {
template <typename T>
BasicTensor<T> apply_mask(const BasicTensor<T>& input, std::vector<T> mask, std::string_view op) {
  auto x = input.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * mask[i];
  return make_result<T>(op, input.shape(), std::move(out), {input}, [mask = std::move(mask)](Node<T>& self) {
    auto& xn = *self.inputs[0];
    for (std::size_t i = 0; i < mask.size(); ++i) xn.grad[i] += self.grad[i] * mask[i];
  });
}
template BasicTensor<float> apply_mask(const BasicTensor<float>&, std::vector<float>, std::string_view);
template BasicTensor<double> apply_mask(const BasicTensor<double>&, std::vector<double>, std::string_view);
}  // namespace detail

std::vector<double> softmax_rows(std::span<const double> logits, std::size_t cols) {
  if (cols == 0 || logits.size() % cols != 0) {
    throw DimensionError("softmax_rows", "K", "logit count " + std::to_string(logits.size()) +
                                                  " is not a multiple of " + std::to_string(cols));
  }
  std::vector<double> out(logits.size());
  for (std::size_t r = 0; r < logits.size() / cols; ++r) {
    const double* src = logits.data() + r * cols;
    double* dst = out.data() + r * cols;
    const double mx = *std::max_element(src, src + cols);
    double z = 0.0;
    for (std::size_t k = 0; k < cols; ++k) z += (dst[k] = std::exp(src[k] - mx));
    for (std::size_t k = 0; k < cols; ++k) dst[k] /= z;
  }
  return out;
}

#define FUSE_SER_INSTANTIATE_OPS(T)                                                                    \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,  \
                                 const Conv2dOptions&);                                                \
  template BasicTensor<T> batchnorm2d(const BasicTensor<T>&, const BasicTensor<T>&,                    \
                                      const BasicTensor<T>&, BatchNormState<T>&, Mode,                 \
                                      const BatchNormOptions&);                                        \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                                 \
  template BasicTensor<T> maxpool2d(const BasicTensor<T>&, std::size_t, std::size_t);                  \
  template BasicTensor<T> global_pool(const BasicTensor<T>&);                                          \
  template BasicTensor<T> linear(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> broadcast_add_channels(const BasicTensor<T>&, const BasicTensor<T>&);        \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                           \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                           \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                                  \
  template BasicTensor<T> weighted_sum(const BasicTensor<T>&, std::span<const T>);                     \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);

FUSE_SER_INSTANTIATE_OPS(float)
FUSE_SER_INSTANTIATE_OPS(double)

#undef FUSE_SER_INSTANTIATE_OPS

}  // namespace fuse_ser
