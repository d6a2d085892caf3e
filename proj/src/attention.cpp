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

#include "nat/attention.hpp"

#include <algorithm>
#include <string>

#include "nat/ops.hpp"
#include "nat/parallel.hpp"

namespace nat {

namespace {

// Geometry shared by the fused kernels: per-axis windows for every query.
struct MapGeometry {
  Index height;
  Index width;
  Index heads;
  Index dim;
  Index kernel;
  std::vector<WindowGeometry> rows;
  std::vector<WindowGeometry> cols;

  Index win_h() const { return rows.front().len; }
  Index win_w() const { return cols.front().len; }
  Index slots() const { return win_h() * win_w(); }
};

MapGeometry make_geometry(const Shape& qshape, const NeighborhoodSpec& spec) {
  MapGeometry g{qshape[0], qshape[1], qshape[2], qshape[3], spec.kernel(), {}, {}};
  g.rows.reserve(static_cast<std::size_t>(g.height));
  g.cols.reserve(static_cast<std::size_t>(g.width));
  for (Index i = 0; i < g.height; ++i) g.rows.push_back(window_start(i, g.height, g.kernel));
  for (Index j = 0; j < g.width; ++j) g.cols.push_back(window_start(j, g.width, g.kernel));
  return g;
}

template <typename Scalar>
void check_qkv(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>* v) {
  if (q.rank() != 4) throw DimensionError("attention operands must be [H,W,heads,d], got " + shape_string(q.shape()));
  if (k.shape() != q.shape() || (v && v->shape() != q.shape())) {
    throw DimensionError("Q, K, V shapes differ: " + shape_string(q.shape()) + ", " + shape_string(k.shape()) +
                         (v ? ", " + shape_string(v->shape()) : std::string()));
  }
}

template <typename Scalar>
void check_bias(const Tensor<Scalar>& bias, Index heads, const NeighborhoodSpec& spec) {
  const Shape expected{heads, spec.bias_extent(), spec.bias_extent()};
  if (bias.shape() != expected) {
    throw DimensionError("bias table shape " + shape_string(bias.shape()) + " does not match expected " +
                         shape_string(expected));
  }
}

template <typename Scalar>
Scalar dot(const Scalar* a, const Scalar* b, Index n) {
  Scalar acc = 0;
  for (Index c = 0; c < n; ++c) acc += a[c] * b[c];
  return acc;
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> na_qk(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& bias,
                     const NeighborhoodSpec& spec) {
  check_qkv<Scalar>(q, k, nullptr);
  const MapGeometry g = make_geometry(q.shape(), spec);
  check_bias(bias, g.heads, spec);

  const Index slots = g.slots();
  const Index table = spec.bias_extent();
  const Index shift = spec.kernel() - 1;
  const Scalar inv_scale = static_cast<Scalar>(1.0 / attention_scale(g.dim));
  Tensor<Scalar> logits({g.height, g.width, g.heads, slots});

  parallel_for(g.height * g.width, [&](Index begin, Index end) {
    for (Index pix = begin; pix < end; ++pix) {
      const Index i = pix / g.width;
      const Index j = pix % g.width;
      const WindowGeometry& wr = g.rows[static_cast<std::size_t>(i)];
      const WindowGeometry& wc = g.cols[static_cast<std::size_t>(j)];
      for (Index h = 0; h < g.heads; ++h) {
        const Scalar* query = q.raw() + (pix * g.heads + h) * g.dim;
        const Scalar* table_h = bias.raw() + h * table * table;
        Scalar* out = logits.raw() + (pix * g.heads + h) * slots;
        Index m = 0;
        for (Index r = wr.start; r < wr.start + wr.len; ++r) {
          const Scalar* bias_row = table_h + (r - i + shift) * table;
          for (Index c = wc.start; c < wc.start + wc.len; ++c, ++m) {
            const Scalar* key = k.raw() + ((r * g.width + c) * g.heads + h) * g.dim;
            out[m] = (dot(query, key, g.dim) + bias_row[c - j + shift]) * inv_scale;
          }
        }
      }
    }
  });
  return logits;
}

template <typename Scalar>
Tensor<Scalar> na_av(const Tensor<Scalar>& probs, const Tensor<Scalar>& v, const NeighborhoodSpec& spec) {
  if (v.rank() != 4) throw DimensionError("values must be [H,W,heads,d], got " + shape_string(v.shape()));
  const MapGeometry g = make_geometry(v.shape(), spec);
  const Shape expected{g.height, g.width, g.heads, g.slots()};
  if (probs.shape() != expected) {
    throw DimensionError("attention weights shape " + shape_string(probs.shape()) + " does not match expected " +
                         shape_string(expected));
  }

  const Index slots = g.slots();
  Tensor<Scalar> out(v.shape());
  parallel_for(g.height * g.width, [&](Index begin, Index end) {
    for (Index pix = begin; pix < end; ++pix) {
      const Index i = pix / g.width;
      const Index j = pix % g.width;
      const WindowGeometry& wr = g.rows[static_cast<std::size_t>(i)];
      const WindowGeometry& wc = g.cols[static_cast<std::size_t>(j)];
      for (Index h = 0; h < g.heads; ++h) {
        const Scalar* weights = probs.raw() + (pix * g.heads + h) * slots;
        Scalar* dst = out.raw() + (pix * g.heads + h) * g.dim;
        Index m = 0;
        for (Index r = wr.start; r < wr.start + wr.len; ++r) {
          for (Index c = wc.start; c < wc.start + wc.len; ++c, ++m) {
            const Scalar* value = v.raw() + ((r * g.width + c) * g.heads + h) * g.dim;
            const Scalar w = weights[m];
            for (Index ch = 0; ch < g.dim; ++ch) dst[ch] += w * value[ch];
          }
        }
      }
    }
  });
  return out;
}

template <typename Scalar>
Tensor<Scalar> na_forward(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v,
                          const Tensor<Scalar>& bias, const NeighborhoodSpec& spec) {
  check_qkv(q, k, &v);
  return na_av(softmax_last(na_qk(q, k, bias, spec)), v, spec);
}

template <typename Scalar>
AttentionGrads<Scalar> na_backward(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v,
                                   const Tensor<Scalar>& bias, const NeighborhoodSpec& spec,
                                   const Tensor<Scalar>& dout) {
  check_qkv(q, k, &v);
  if (dout.shape() != q.shape()) {
    throw DimensionError("output gradient shape " + shape_string(dout.shape()) + " does not match " +
                         shape_string(q.shape()));
  }
  const MapGeometry g = make_geometry(q.shape(), spec);
  const Tensor<Scalar> probs = softmax_last(na_qk(q, k, bias, spec));
  const Index slots = g.slots();
  const Index pixels = g.height * g.width;
  const Scalar inv_scale = static_cast<Scalar>(1.0 / attention_scale(g.dim));

  auto value_at = [&](const Tensor<Scalar>& t, Index r, Index c, Index h) {
    return t.raw() + ((r * g.width + c) * g.heads + h) * g.dim;
  };

  // dP = dout . V, then through the softmax Jacobian and the 1/scale factor.
  Tensor<Scalar> dlogits(probs.shape());
  parallel_for(pixels, [&](Index begin, Index end) {
    std::vector<Scalar> dprob(static_cast<std::size_t>(slots));
    for (Index pix = begin; pix < end; ++pix) {
      const WindowGeometry& wr = g.rows[static_cast<std::size_t>(pix / g.width)];
      const WindowGeometry& wc = g.cols[static_cast<std::size_t>(pix % g.width)];
      for (Index h = 0; h < g.heads; ++h) {
        const Scalar* upstream = dout.raw() + (pix * g.heads + h) * g.dim;
        const Scalar* p = probs.raw() + (pix * g.heads + h) * slots;
        Index m = 0;
        for (Index r = wr.start; r < wr.start + wr.len; ++r) {
          for (Index c = wc.start; c < wc.start + wc.len; ++c, ++m) {
            dprob[static_cast<std::size_t>(m)] = dot(upstream, value_at(v, r, c, h), g.dim);
          }
        }
        Scalar expected = 0;
        for (Index s = 0; s < slots; ++s) expected += p[s] * dprob[static_cast<std::size_t>(s)];
        Scalar* dst = dlogits.raw() + (pix * g.heads + h) * slots;
        for (Index s = 0; s < slots; ++s) dst[s] = p[s] * (dprob[static_cast<std::size_t>(s)] - expected) * inv_scale;
      }
    }
  });

  AttentionGrads<Scalar> grads{Tensor<Scalar>(q.shape()), Tensor<Scalar>(k.shape()), Tensor<Scalar>(v.shape()),
                               Tensor<Scalar>(bias.shape()), std::move(dlogits)};
  const Tensor<Scalar>& dl = grads.dlogits;

  // dQ gathers over the query's own window.
  parallel_for(pixels, [&](Index begin, Index end) {
    for (Index pix = begin; pix < end; ++pix) {
      const WindowGeometry& wr = g.rows[static_cast<std::size_t>(pix / g.width)];
      const WindowGeometry& wc = g.cols[static_cast<std::size_t>(pix % g.width)];
      for (Index h = 0; h < g.heads; ++h) {
        const Scalar* w = dl.raw() + (pix * g.heads + h) * slots;
        Scalar* dst = grads.dq.raw() + (pix * g.heads + h) * g.dim;
        Index m = 0;
        for (Index r = wr.start; r < wr.start + wr.len; ++r) {
          for (Index c = wc.start; c < wc.start + wc.len; ++c, ++m) {
            const Scalar* key = value_at(k, r, c, h);
            for (Index ch = 0; ch < g.dim; ++ch) dst[ch] += w[m] * key[ch];
          }
        }
      }
    }
  });

  // dK and dV gather, per key pixel, over every query whose window holds it.
  // Only queries within L - 1 on each axis can qualify.
  const Index reach = g.kernel - 1;
  parallel_for(pixels, [&](Index begin, Index end) {
    for (Index key_pix = begin; key_pix < end; ++key_pix) {
      const Index r = key_pix / g.width;
      const Index c = key_pix % g.width;
      for (Index i = std::max<Index>(0, r - reach); i <= std::min(g.height - 1, r + reach); ++i) {
        const WindowGeometry& wr = g.rows[static_cast<std::size_t>(i)];
        if (!wr.contains(r)) continue;
        for (Index j = std::max<Index>(0, c - reach); j <= std::min(g.width - 1, c + reach); ++j) {
          const WindowGeometry& wc = g.cols[static_cast<std::size_t>(j)];
          if (!wc.contains(c)) continue;
          const Index qpix = i * g.width + j;
          const Index m = (r - wr.start) * wc.len + (c - wc.start);
          for (Index h = 0; h < g.heads; ++h) {
            const Index slot = (qpix * g.heads + h) * slots + m;
            const Scalar wk = dl[slot];
            const Scalar wv = probs[slot];
            const Scalar* query = value_at(q, i, j, h);
            const Scalar* upstream = value_at(dout, i, j, h);
            Scalar* dk = grads.dk.raw() + (key_pix * g.heads + h) * g.dim;
            Scalar* dv = grads.dv.raw() + (key_pix * g.heads + h) * g.dim;
            for (Index ch = 0; ch < g.dim; ++ch) {
              dk[ch] += wk * query[ch];
              dv[ch] += wv * upstream[ch];
            }
          }
        }
      }
    }
  });

  // Bias table: one head per task, queries and slots in raster order.
  const Index table = spec.bias_extent();
  parallel_for(g.heads, [&](Index begin, Index end) {
    for (Index h = begin; h < end; ++h) {
      Scalar* dst = grads.dbias.raw() + h * table * table;
      for (Index pix = 0; pix < pixels; ++pix) {
        const Index i = pix / g.width;
        const Index j = pix % g.width;
        const WindowGeometry& wr = g.rows[static_cast<std::size_t>(i)];
        const WindowGeometry& wc = g.cols[static_cast<std::size_t>(j)];
        const Scalar* w = dl.raw() + (pix * g.heads + h) * slots;
        Index m = 0;
        for (Index r = wr.start; r < wr.start + wr.len; ++r) {
          for (Index c = wc.start; c < wc.start + wc.len; ++c, ++m) {
            dst[(r - i + reach) * table + (c - j + reach)] += w[m];
          }
        }
      }
    }
  });
  return grads;
}

template <typename Scalar>
Tensor<Scalar> self_attention(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v) {
  if (q.rank() != 2 || k.shape() != q.shape() || v.rank() != 2 || v.dim(0) != q.dim(0)) {
    throw DimensionError("self_attention expects Q, K [M,d] and V [M,dv]; got " + shape_string(q.shape()) + ", " +
                         shape_string(k.shape()) + ", " + shape_string(v.shape()));
  }
  const Scalar inv_scale = static_cast<Scalar>(1.0 / attention_scale(q.dim(1)));
  Tensor<Scalar> scores({q.dim(0), k.dim(0)});
  scores.matrix().noalias() = (q.matrix() * k.matrix().transpose()) * inv_scale;
  return matmul(softmax_last(scores), v);
}

namespace {

// Extracts every stride-1 window of `source` ([H, W, F]) as [Gh, Gw, F, Lh, Lw],
// then edge-replicates the window grid back to [H, W, F, Lh, Lw].
template <typename T>
std::vector<T> unfold_replicate(const std::vector<T>& source, Index height, Index width, Index features,
                                Index kernel, Index& win_h, Index& win_w) {
  win_h = std::min(kernel, height);
  win_w = std::min(kernel, width);
  const Index grid_h = height - win_h + 1;
  const Index grid_w = width - win_w + 1;
  const Index window = win_h * win_w;

  std::vector<T> unfolded(static_cast<std::size_t>(grid_h * grid_w * features * window));
  for (Index gr = 0; gr < grid_h; ++gr) {
    for (Index gc = 0; gc < grid_w; ++gc) {
      for (Index f = 0; f < features; ++f) {
        T* dst = unfolded.data() + ((gr * grid_w + gc) * features + f) * window;
        for (Index a = 0; a < win_h; ++a) {
          for (Index b = 0; b < win_w; ++b) {
            dst[a * win_w + b] = source[static_cast<std::size_t>(((gr + a) * width + (gc + b)) * features + f)];
          }
        }
      }
    }
  }

  // Replicate padding: output cell (i, j) reads the nearest grid cell after
  // offsetting by the half window.
  const Index pad = (kernel - 1) / 2;
  const Index block = features * window;
  std::vector<T> padded(static_cast<std::size_t>(height * width * block));
  for (Index i = 0; i < height; ++i) {
    const Index gr = std::clamp(i - pad, Index{0}, grid_h - 1);
    for (Index j = 0; j < width; ++j) {
      const Index gc = std::clamp(j - pad, Index{0}, grid_w - 1);
      std::copy_n(unfolded.data() + (gr * grid_w + gc) * block, block, padded.data() + (i * width + j) * block);
    }
  }
  return padded;
}

}  // namespace

std::vector<std::vector<Pixel>> reference_neighbor_indices(Index height, Index width, const NeighborhoodSpec& spec) {
  std::vector<Index> coords(static_cast<std::size_t>(height * width * 2));
  for (Index i = 0; i < height; ++i) {
    for (Index j = 0; j < width; ++j) {
      coords[static_cast<std::size_t>((i * width + j) * 2)] = i;
      coords[static_cast<std::size_t>((i * width + j) * 2 + 1)] = j;
    }
  }
  Index win_h = 0;
  Index win_w = 0;
  const auto windows = unfold_replicate(coords, height, width, 2, spec.kernel(), win_h, win_w);
  const Index window = win_h * win_w;
  std::vector<std::vector<Pixel>> out(static_cast<std::size_t>(height * width));
  for (Index pix = 0; pix < height * width; ++pix) {
    const Index* rows = windows.data() + pix * 2 * window;
    const Index* cols = rows + window;
    auto& set = out[static_cast<std::size_t>(pix)];
    for (Index m = 0; m < window; ++m) set.emplace_back(rows[m], cols[m]);
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> na_reference(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v,
                            const Tensor<Scalar>& bias, const NeighborhoodSpec& spec) {
  check_qkv(q, k, &v);
  const Index height = q.dim(0);
  const Index width = q.dim(1);
  const Index heads = q.dim(2);
  const Index dim = q.dim(3);
  check_bias(bias, heads, spec);
  const Index features = heads * dim;

  auto materialize = [&](const Tensor<Scalar>& t, Index& win_h, Index& win_w) {
    std::vector<Scalar> flat(t.data().begin(), t.data().end());
    auto windows = unfold_replicate(flat, height, width, features, spec.kernel(), win_h, win_w);
    return Tensor<Scalar>({height, width, heads, dim, win_h, win_w}, std::move(windows));
  };
  Index win_h = 0;
  Index win_w = 0;
  const Tensor<Scalar> k_windows = materialize(k, win_h, win_w);
  const Tensor<Scalar> v_windows = materialize(v, win_h, win_w);
  const auto keys = reference_neighbor_indices(height, width, spec);
  const Index window = win_h * win_w;
  const Index shift = spec.kernel() - 1;
  const double scale = attention_scale(dim);

  Tensor<Scalar> logits({height, width, heads, window});
  for (Index pix = 0; pix < height * width; ++pix) {
    const Index i = pix / width;
    const Index j = pix % width;
    const auto& key_set = keys[static_cast<std::size_t>(pix)];
    for (Index h = 0; h < heads; ++h) {
      const Scalar* query = q.raw() + (pix * heads + h) * dim;
      const Scalar* kw = k_windows.raw() + (pix * heads + h) * dim * window;
      for (Index m = 0; m < window; ++m) {
        Scalar acc = 0;
        for (Index ch = 0; ch < dim; ++ch) acc += query[ch] * kw[ch * window + m];
        const auto [kr, kc] = key_set[static_cast<std::size_t>(m)];
        acc += bias(h, kr - i + shift, kc - j + shift);
        logits(i, j, h, m) = static_cast<Scalar>(acc / scale);
      }
    }
  }

  const Tensor<Scalar> probs = softmax_last(logits);
  Tensor<Scalar> out(q.shape());
  for (Index pix = 0; pix < height * width; ++pix) {
    for (Index h = 0; h < heads; ++h) {
      const Scalar* p = probs.raw() + (pix * heads + h) * window;
      const Scalar* vw = v_windows.raw() + (pix * heads + h) * dim * window;
      Scalar* dst = out.raw() + (pix * heads + h) * dim;
      for (Index ch = 0; ch < dim; ++ch) {
        Scalar acc = 0;
        for (Index m = 0; m < window; ++m) acc += p[m] * vw[ch * window + m];
        dst[ch] = acc;
      }
    }
  }
  return out;
}

template <typename Scalar>
std::array<Tensor<Scalar>, 3> split_qkv(const Tensor<Scalar>& qkv, Index heads) {
  if (qkv.rank() != 3 || qkv.dim(2) % 3 != 0) {
    throw DimensionError("qkv projection must be [H,W,3C], got " + shape_string(qkv.shape()));
  }
  const Index channels = qkv.dim(2) / 3;
  if (heads < 1 || channels % heads != 0) {
    throw ConfigError("channels " + std::to_string(channels) + " not divisible by heads " + std::to_string(heads));
  }
  const Index dim = channels / heads;
  const Index pixels = qkv.dim(0) * qkv.dim(1);
  const Shape shape{qkv.dim(0), qkv.dim(1), heads, dim};
  std::array<Tensor<Scalar>, 3> out{Tensor<Scalar>(shape), Tensor<Scalar>(shape), Tensor<Scalar>(shape)};
  for (Index p = 0; p < pixels; ++p) {
    for (Index part = 0; part < 3; ++part) {
      std::copy_n(qkv.raw() + p * 3 * channels + part * channels, channels,
                  out[static_cast<std::size_t>(part)].raw() + p * channels);
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> mhna_layer(const Tensor<Scalar>& x, const AttentionParams<Scalar>& params,
                          const NeighborhoodSpec& spec) {
  if (x.rank() != 3) throw DimensionError("mhna_layer expects [H,W,C], got " + shape_string(x.shape()));
  const Index channels = x.dim(2);
  if (params.heads < 1 || channels % params.heads != 0) {
    throw ConfigError("channels " + std::to_string(channels) + " not divisible by heads " +
                      std::to_string(params.heads));
  }
  auto [q, k, v] = split_qkv(linear(x, params.qkv_weight, params.qkv_bias), params.heads);
  Tensor<Scalar> attended = na_forward(q, k, v, params.rel_bias, spec);
  return linear(std::move(attended).reshaped(x.shape()), params.proj_weight, params.proj_bias);
}

#define NAT_INSTANTIATE_ATTENTION(S)                                                                          \
  template Tensor<S> na_qk(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, const NeighborhoodSpec&);   \
  template Tensor<S> na_av(const Tensor<S>&, const Tensor<S>&, const NeighborhoodSpec&);                     \
  template Tensor<S> na_forward(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, const Tensor<S>&,      \
                                const NeighborhoodSpec&);                                                    \
  template AttentionGrads<S> na_backward(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&,               \
                                         const Tensor<S>&, const NeighborhoodSpec&, const Tensor<S>&);       \
  template Tensor<S> self_attention(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);                   \
  template Tensor<S> na_reference(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, const Tensor<S>&,    \
                                  const NeighborhoodSpec&);                                                  \
  template std::array<Tensor<S>, 3> split_qkv(const Tensor<S>&, Index);                                      \
  template Tensor<S> mhna_layer(const Tensor<S>&, const AttentionParams<S>&, const NeighborhoodSpec&);

NAT_INSTANTIATE_ATTENTION(float)
NAT_INSTANTIATE_ATTENTION(double)

#undef NAT_INSTANTIATE_ATTENTION

}  // namespace nat
