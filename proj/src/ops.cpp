/* Copyright 2026 The natcpu Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "nat/ops.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "nat/parallel.hpp"

namespace nat {

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw DimensionError("matmul needs rank >= 2 operands, got " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  const Index m = a.dim(-2);
  const Index k = a.dim(-1);
  const Index n = b.dim(-1);
  const bool shared_rhs = b.rank() == 2;
  const bool same_batch =
      b.rank() == a.rank() && std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin());
  if (b.dim(-2) != k || (!shared_rhs && !same_batch)) {
    throw DimensionError("matmul shape mismatch: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }

  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(n);
  Tensor<Scalar> c(out_shape);
  const Index batches = a.size() / (m * k);
  for (Index bi = 0; bi < batches; ++bi) {
    ConstMatrixMap<Scalar> lhs(a.raw() + bi * m * k, m, k);
    ConstMatrixMap<Scalar> rhs(b.raw() + (shared_rhs ? 0 : bi * k * n), k, n);
    MatrixMap<Scalar> out(c.raw() + bi * m * n, m, n);
    out.noalias() = lhs * rhs;
  }
  return c;
}

template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias) {
  if (weight.rank() != 2 || bias.rank() != 1 || weight.dim(0) != x.dim(-1) || bias.dim(0) != weight.dim(1)) {
    throw DimensionError("linear shape mismatch: input " + shape_string(x.shape()) + ", weight " +
                         shape_string(weight.shape()) + ", bias " + shape_string(bias.shape()));
  }
  Shape out_shape = x.shape();
  out_shape.back() = weight.dim(1);
  Tensor<Scalar> y(out_shape);
  auto out = y.matrix();
  out.noalias() = x.matrix() * weight.matrix();
  out.rowwise() += bias.matrix().row(0);
  return y;
}

template <typename Scalar>
Tensor<Scalar> softmax_last(const Tensor<Scalar>& x) {
  for (Scalar v : x.data()) {
    if (!std::isfinite(v)) throw NumericError("softmax input contains non-finite values");
  }
  Tensor<Scalar> y(x.shape());
  const Index cols = x.dim(-1);
  const Index rows = x.size() / cols;
  parallel_for(
      rows,
      [&](Index begin, Index end) {
        for (Index r = begin; r < end; ++r) {
          const Scalar* in = x.raw() + r * cols;
          Scalar* out = y.raw() + r * cols;
          Scalar peak = in[0];
          for (Index c = 1; c < cols; ++c) peak = std::max(peak, in[c]);
          Scalar total = 0;
          for (Index c = 0; c < cols; ++c) {
            out[c] = std::exp(in[c] - peak);
            total += out[c];
          }
          const Scalar inv = Scalar(1) / total;
          for (Index c = 0; c < cols; ++c) out[c] *= inv;
        }
      },
      64);
  return y;
}

template <typename Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma, const Tensor<Scalar>& beta,
                          double eps) {
  const Index channels = x.dim(-1);
  if (gamma.rank() != 1 || beta.rank() != 1 || gamma.dim(0) != channels || beta.dim(0) != channels) {
    throw DimensionError("layer_norm affine shapes " + shape_string(gamma.shape()) + ", " +
                         shape_string(beta.shape()) + " do not match input " + shape_string(x.shape()));
  }
  if (!(eps >= 0.0)) throw ConfigError("layer_norm eps must be non-negative");
  Tensor<Scalar> y(x.shape());
  const Index rows = x.size() / channels;
  parallel_for(
      rows,
      [&](Index begin, Index end) {
        for (Index r = begin; r < end; ++r) {
          const Scalar* in = x.raw() + r * channels;
          Scalar* out = y.raw() + r * channels;
          double mean = 0;
          for (Index c = 0; c < channels; ++c) mean += in[c];
          mean /= static_cast<double>(channels);
          double var = 0;
          for (Index c = 0; c < channels; ++c) {
            const double d = in[c] - mean;
            var += d * d;
          }
          var /= static_cast<double>(channels);
          const double denom = std::sqrt(var + eps);
          for (Index c = 0; c < channels; ++c) {
            // 0/0 for a constant slice with eps == 0 normalizes to 0.
            const double centered = in[c] - mean;
            const double xhat = centered == 0.0 ? 0.0 : centered / denom;
            out[c] = static_cast<Scalar>(xhat * gamma[c] + beta[c]);
          }
        }
      },
      64);
  return y;
}

template <typename Scalar>
Tensor<Scalar> gelu(const Tensor<Scalar>& x) {
  Tensor<Scalar> y(x.shape());
  const Scalar inv_sqrt2 = static_cast<Scalar>(0.70710678118654752440);
  parallel_for(
      x.size(),
      [&](Index begin, Index end) {
        for (Index i = begin; i < end; ++i) {
          const Scalar v = x[i];
          y[i] = Scalar(0.5) * v * (Scalar(1) + std::erf(v * inv_sqrt2));
        }
      },
      4096);
  return y;
}

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias,
                      Index stride, Index pad) {
  if (x.rank() != 3 || weight.rank() != 4 || bias.rank() != 1) {
    throw DimensionError("conv2d expects [H,W,Cin], [k,k,Cin,Cout], [Cout]; got " + shape_string(x.shape()) + ", " +
                         shape_string(weight.shape()) + ", " + shape_string(bias.shape()));
  }
  const Index k = weight.dim(0);
  const Index cin = x.dim(2);
  const Index cout = weight.dim(3);
  if (weight.dim(1) != k || weight.dim(2) != cin || bias.dim(0) != cout) {
    throw DimensionError("conv2d shape mismatch: input " + shape_string(x.shape()) + ", weight " +
                         shape_string(weight.shape()) + ", bias " + shape_string(bias.shape()));
  }
  if (k % 2 == 0) throw ConfigError("conv2d kernel size must be odd, got " + std::to_string(k));
  if (stride < 1 || pad < 0) throw ConfigError("conv2d needs stride >= 1 and pad >= 0");
  const Index height = x.dim(0);
  const Index width = x.dim(1);
  const Index out_h = conv_output_extent(height, k, stride, pad);
  const Index out_w = conv_output_extent(width, k, stride, pad);
  if (out_h < 1 || out_w < 1) {
    throw DimensionError("conv2d output would be empty for input " + shape_string(x.shape()) + " with kernel " +
                         std::to_string(k) + ", stride " + std::to_string(stride) + ", pad " + std::to_string(pad));
  }

  Tensor<Scalar> y({out_h, out_w, cout});
  const Scalar* in = x.raw();
  const Scalar* w = weight.raw();
  parallel_for(out_h, [&](Index begin, Index end) {
    std::vector<Scalar> acc(static_cast<std::size_t>(cout));
    for (Index oi = begin; oi < end; ++oi) {
      for (Index oj = 0; oj < out_w; ++oj) {
        std::fill(acc.begin(), acc.end(), Scalar(0));
        for (Index ki = 0; ki < k; ++ki) {
          const Index ii = oi * stride - pad + ki;
          if (ii < 0 || ii >= height) continue;
          for (Index kj = 0; kj < k; ++kj) {
            const Index jj = oj * stride - pad + kj;
            if (jj < 0 || jj >= width) continue;
            const Scalar* pixel = in + (ii * width + jj) * cin;
            const Scalar* taps = w + (ki * k + kj) * cin * cout;
            for (Index ci = 0; ci < cin; ++ci) {
              const Scalar v = pixel[ci];
              const Scalar* row = taps + ci * cout;
              for (Index co = 0; co < cout; ++co) acc[static_cast<std::size_t>(co)] += v * row[co];
            }
          }
        }
        Scalar* out = y.raw() + (oi * out_w + oj) * cout;
        for (Index co = 0; co < cout; ++co) out[co] = acc[static_cast<std::size_t>(co)] + bias[co];
      }
    }
  });
  return y;
}

template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& x) {
  if (x.rank() != 3) throw DimensionError("global_avg_pool expects [H,W,C], got " + shape_string(x.shape()));
  const Index channels = x.dim(2);
  const Index pixels = x.dim(0) * x.dim(1);
  Tensor<Scalar> y({channels});
  for (Index c = 0; c < channels; ++c) {
    double total = 0;
    for (Index p = 0; p < pixels; ++p) total += x[p * channels + c];
    y[c] = static_cast<Scalar>(total / static_cast<double>(pixels));
  }
  return y;
}

#define NAT_INSTANTIATE_OPS(S)                                                                          \
  template Tensor<S> matmul(const Tensor<S>&, const Tensor<S>&);                                       \
  template Tensor<S> linear(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);                     \
  template Tensor<S> softmax_last(const Tensor<S>&);                                                   \
  template Tensor<S> layer_norm(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, double);          \
  template Tensor<S> gelu(const Tensor<S>&);                                                           \
  template Tensor<S> conv2d(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, Index, Index);       \
  template Tensor<S> global_avg_pool(const Tensor<S>&);

NAT_INSTANTIATE_OPS(float)
NAT_INSTANTIATE_OPS(double)

#undef NAT_INSTANTIATE_OPS

}  // namespace nat
