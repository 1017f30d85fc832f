/* Copyright 2026 The LieGConv Authors. All Rights Reserved.

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

#include "liegconv/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace liegconv {

namespace {

using Node = DiffTensor::Node;

void require_same_shape(const DiffTensor& a, const DiffTensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape " + shape_string(a.shape()) +
                                " vs " + shape_string(b.shape()));
  }
}

bool wants(const Node& n, std::size_t i) { return n.inputs[i]->requires_grad; }
Tensor& grad_of(Node& n, std::size_t i) { return n.inputs[i]->grad_buffer(); }

template <typename Fwd, typename Deriv>
DiffTensor unary(const DiffTensor& x, Fwd fwd, Deriv deriv) {
  Tensor out(x.shape());
  const double* px = x.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(px[i]);
  return DiffTensor::make(std::move(out), {x}, [deriv](Node& n) {
    const Tensor& xv = n.inputs[0]->value;
    Tensor& gx = grad_of(n, 0);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += n.grad[i] * deriv(xv[i]);
  });
}

// Row-major C = alpha * op(A) * op(B) + beta * C.
void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (beta != 1.0) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] *= beta;
    }
    return;
  }
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
              static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha, a,
              static_cast<int>(lda), b, static_cast<int>(ldb), beta, c, static_cast<int>(ldc));
}

std::size_t wrap_index(std::ptrdiff_t i, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  std::ptrdiff_t r = i % m;
  return static_cast<std::size_t>(r < 0 ? r + m : r);
}

// Copies a Y x X plane into a (Y + 2r) x (X + 2r) buffer with the padding
// filled per `mode`.
void pad_plane(const double* src, std::size_t ny, std::size_t nx, std::size_t r, Padding mode,
               double* dst) {
  const std::size_t py = ny + 2 * r;
  const std::size_t px = nx + 2 * r;
  if (mode == Padding::kZero) {
    std::fill(dst, dst + py * px, 0.0);
    for (std::size_t y = 0; y < ny; ++y) std::copy(src + y * nx, src + (y + 1) * nx,
                                                   dst + (y + r) * px + r);
    return;
  }
  const auto ir = static_cast<std::ptrdiff_t>(r);
  for (std::size_t y = 0; y < py; ++y) {
    const std::size_t sy = wrap_index(static_cast<std::ptrdiff_t>(y) - ir, ny);
    for (std::size_t x = 0; x < px; ++x) {
      dst[y * px + x] = src[sy * nx + wrap_index(static_cast<std::ptrdiff_t>(x) - ir, nx)];
    }
  }
}

// Adjoint of pad_plane: folds a padded gradient back onto the plane.
void unpad_accumulate(const double* dpad, std::size_t ny, std::size_t nx, std::size_t r,
                      Padding mode, double* dsrc) {
  const std::size_t py = ny + 2 * r;
  const std::size_t px = nx + 2 * r;
  if (mode == Padding::kZero) {
    for (std::size_t y = 0; y < ny; ++y) {
      const double* row = dpad + (y + r) * px + r;
      double* out = dsrc + y * nx;
      for (std::size_t x = 0; x < nx; ++x) out[x] += row[x];
    }
    return;
  }
  const auto ir = static_cast<std::ptrdiff_t>(r);
  for (std::size_t y = 0; y < py; ++y) {
    const std::size_t sy = wrap_index(static_cast<std::ptrdiff_t>(y) - ir, ny);
    for (std::size_t x = 0; x < px; ++x) {
      dsrc[sy * nx + wrap_index(static_cast<std::ptrdiff_t>(x) - ir, nx)] += dpad[y * px + x];
    }
  }
}

struct ConvGeom {
  std::size_t batch, groups, cg, og, ny, nx, k, r;
  std::size_t plane() const { return ny * nx; }
  std::size_t padded() const { return (ny + 2 * r) * (nx + 2 * r); }
  std::size_t in_channels() const { return groups * cg; }
  std::size_t out_channels() const { return groups * og; }
};

// cols[(c, dy, dx), (y, x)] = padded_c[y + dy, x + dx].
void im2col(const double* padded, const ConvGeom& g, double* cols) {
  const std::size_t px = g.nx + 2 * g.r;
  const std::size_t n = g.plane();
  for (std::size_t c = 0; c < g.cg; ++c) {
    const double* pc = padded + c * g.padded();
    for (std::size_t dy = 0; dy < g.k; ++dy) {
      for (std::size_t dx = 0; dx < g.k; ++dx) {
        double* row = cols + ((c * g.k + dy) * g.k + dx) * n;
        for (std::size_t y = 0; y < g.ny; ++y) {
          const double* src = pc + (y + dy) * px + dx;
          std::copy(src, src + g.nx, row + y * g.nx);
        }
      }
    }
  }
}

void col2im(const double* cols, const ConvGeom& g, double* dpadded) {
  const std::size_t px = g.nx + 2 * g.r;
  const std::size_t n = g.plane();
  for (std::size_t c = 0; c < g.cg; ++c) {
    double* pc = dpadded + c * g.padded();
    for (std::size_t dy = 0; dy < g.k; ++dy) {
      for (std::size_t dx = 0; dx < g.k; ++dx) {
        const double* row = cols + ((c * g.k + dy) * g.k + dx) * n;
        for (std::size_t y = 0; y < g.ny; ++y) {
          double* dst = pc + (y + dy) * px + dx;
          const double* src = row + y * g.nx;
          for (std::size_t x = 0; x < g.nx; ++x) dst[x] += src[x];
        }
      }
    }
  }
}

void pad_group(const double* in, const ConvGeom& g, Padding mode, double* padded) {
  for (std::size_t c = 0; c < g.cg; ++c) {
    pad_plane(in + c * g.plane(), g.ny, g.nx, g.r, mode, padded + c * g.padded());
  }
}

void conv_forward(const double* x, const double* w, const ConvGeom& g, Padding mode,
                  double* out) {
  const std::size_t n = g.plane();
  const std::size_t kk = g.k * g.k;
  const std::size_t px = g.nx + 2 * g.r;
  std::vector<double> padded(g.k > 1 ? g.cg * g.padded() : 0);
  std::vector<double> cols(g.k > 1 && g.cg * g.og > 1 ? g.cg * kk * n : 0);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t gi = 0; gi < g.groups; ++gi) {
      const double* xg = x + (b * g.in_channels() + gi * g.cg) * n;
      const double* wg = w + gi * g.og * g.cg * kk;
      double* og = out + (b * g.out_channels() + gi * g.og) * n;
      if (g.k == 1) {
        gemm(false, false, g.og, n, g.cg, 1.0, wg, g.cg, xg, n, 0.0, og, n);
        continue;
      }
      pad_group(xg, g, mode, padded.data());
      if (g.cg == 1 && g.og == 1) {
        std::fill(og, og + n, 0.0);
        for (std::size_t dy = 0; dy < g.k; ++dy) {
          for (std::size_t dx = 0; dx < g.k; ++dx) {
            const double wv = wg[dy * g.k + dx];
            for (std::size_t y = 0; y < g.ny; ++y) {
              const double* prow = padded.data() + (y + dy) * px + dx;
              double* orow = og + y * g.nx;
              for (std::size_t xx = 0; xx < g.nx; ++xx) orow[xx] += wv * prow[xx];
            }
          }
        }
        continue;
      }
      im2col(padded.data(), g, cols.data());
      gemm(false, false, g.og, n, g.cg * kk, 1.0, wg, g.cg * kk, cols.data(), n, 0.0, og, n);
    }
  }
}

void conv_backward(const double* x, const double* w, const double* dout, const ConvGeom& g,
                   Padding mode, double* dx, double* dw) {
  const std::size_t n = g.plane();
  const std::size_t kk = g.k * g.k;
  const std::size_t px = g.nx + 2 * g.r;
  const bool depthwise = g.cg == 1 && g.og == 1;
  std::vector<double> padded(g.k > 1 ? g.cg * g.padded() : 0);
  std::vector<double> dpadded(g.k > 1 && dx ? g.cg * g.padded() : 0);
  std::vector<double> cols(g.k > 1 && !depthwise ? g.cg * kk * n : 0);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t gi = 0; gi < g.groups; ++gi) {
      const std::size_t in_off = (b * g.in_channels() + gi * g.cg) * n;
      const double* xg = x + in_off;
      const double* wg = w + gi * g.og * g.cg * kk;
      const double* dog = dout + (b * g.out_channels() + gi * g.og) * n;
      double* dwg = dw ? dw + gi * g.og * g.cg * kk : nullptr;
      if (g.k == 1) {
        if (dwg) gemm(false, true, g.og, g.cg, n, 1.0, dog, n, xg, n, 1.0, dwg, g.cg);
        if (dx) gemm(true, false, g.cg, n, g.og, 1.0, wg, g.cg, dog, n, 1.0, dx + in_off, n);
        continue;
      }
      pad_group(xg, g, mode, padded.data());
      if (dx) std::fill(dpadded.begin(), dpadded.end(), 0.0);
      if (depthwise) {
        for (std::size_t dy = 0; dy < g.k; ++dy) {
          for (std::size_t ddx = 0; ddx < g.k; ++ddx) {
            const double wv = wg[dy * g.k + ddx];
            double acc = 0.0;
            for (std::size_t y = 0; y < g.ny; ++y) {
              const double* prow = padded.data() + (y + dy) * px + ddx;
              const double* grow = dog + y * g.nx;
              for (std::size_t xx = 0; xx < g.nx; ++xx) acc += grow[xx] * prow[xx];
              if (dx) {
                double* drow = dpadded.data() + (y + dy) * px + ddx;
                for (std::size_t xx = 0; xx < g.nx; ++xx) drow[xx] += wv * grow[xx];
              }
            }
            if (dwg) dwg[dy * g.k + ddx] += acc;
          }
        }
      } else {
        if (dwg) {
          im2col(padded.data(), g, cols.data());
          gemm(false, true, g.og, g.cg * kk, n, 1.0, dog, n, cols.data(), n, 1.0, dwg,
               g.cg * kk);
        }
        if (dx) {
          gemm(true, false, g.cg * kk, n, g.og, 1.0, wg, g.cg * kk, dog, n, 0.0, cols.data(),
               n);
          col2im(cols.data(), g, dpadded.data());
        }
      }
      if (dx) {
        for (std::size_t c = 0; c < g.cg; ++c) {
          unpad_accumulate(dpadded.data() + c * g.padded(), g.ny, g.nx, g.r, mode,
                           dx + in_off + c * n);
        }
      }
    }
  }
}

thread_local MacCounter* g_mac_top = nullptr;

// Maps each input flat index to its output flat index for an axis reduction.
struct ReductionMap {
  Shape out_shape;
  std::vector<std::size_t> target;
  std::size_t out_size = 0;
};

ReductionMap build_reduction(const Shape& shape, std::span<const std::size_t> axes) {
  std::vector<bool> reduce(shape.size(), false);
  for (std::size_t a : axes) {
    if (a >= shape.size()) {
      throw std::invalid_argument("reduction axis " + std::to_string(a) + " out of range for " +
                                  shape_string(shape));
    }
    if (reduce[a]) throw std::invalid_argument("duplicate reduction axis");
    reduce[a] = true;
  }
  ReductionMap m;
  std::vector<std::size_t> out_stride(shape.size(), 0);
  std::size_t stride = 1;
  for (std::size_t i = shape.size(); i-- > 0;) {
    if (!reduce[i]) {
      out_stride[i] = stride;
      stride *= shape[i];
    }
  }
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (!reduce[i]) m.out_shape.push_back(shape[i]);
  }
  m.out_size = shape_numel(m.out_shape);
  const std::size_t total = shape_numel(shape);
  m.target.resize(total);
  std::vector<std::size_t> idx(shape.size(), 0);
  std::size_t off = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    m.target[flat] = off;
    for (std::size_t ax = shape.size(); ax-- > 0;) {
      ++idx[ax];
      off += out_stride[ax];
      if (idx[ax] < shape[ax]) break;
      off -= out_stride[ax] * shape[ax];
      idx[ax] = 0;
    }
  }
  return m;
}

}  // namespace

DiffTensor add(const DiffTensor& a, const DiffTensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return DiffTensor::make(std::move(out), {a, b}, [](Node& n) {
    if (wants(n, 0)) accumulate(grad_of(n, 0), n.grad);
    if (wants(n, 1)) accumulate(grad_of(n, 1), n.grad);
  });
}

DiffTensor sub(const DiffTensor& a, const DiffTensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return DiffTensor::make(std::move(out), {a, b}, [](Node& n) {
    if (wants(n, 0)) accumulate(grad_of(n, 0), n.grad);
    if (wants(n, 1)) {
      Tensor& gb = grad_of(n, 1);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= n.grad[i];
    }
  });
}

DiffTensor mul(const DiffTensor& a, const DiffTensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return DiffTensor::make(std::move(out), {a, b}, [](Node& n) {
    const Tensor& av = n.inputs[0]->value;
    const Tensor& bv = n.inputs[1]->value;
    if (wants(n, 0)) {
      Tensor& ga = grad_of(n, 0);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += n.grad[i] * bv[i];
    }
    if (wants(n, 1)) {
      Tensor& gb = grad_of(n, 1);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += n.grad[i] * av[i];
    }
  });
}

DiffTensor scale(const DiffTensor& a, double factor) {
  return unary(a, [factor](double v) { return factor * v; },
               [factor](double) { return factor; });
}

DiffTensor matmul(const DiffTensor& a, const DiffTensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_string(a.shape()) +
                                " and " + shape_string(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor out({m, n});
  gemm(false, false, m, n, k, 1.0, a.value().data(), k, b.value().data(), n, 0.0, out.data(), n);
  return DiffTensor::make(std::move(out), {a, b}, [m, k, n](Node& node) {
    const double* g = node.grad.data();
    if (wants(node, 0)) {
      gemm(false, true, m, k, n, 1.0, g, n, node.inputs[1]->value.data(), n, 1.0,
           grad_of(node, 0).data(), k);
    }
    if (wants(node, 1)) {
      gemm(true, false, k, n, m, 1.0, node.inputs[0]->value.data(), k, g, n, 1.0,
           grad_of(node, 1).data(), n);
    }
  });
}

DiffTensor add_row_bias(const DiffTensor& x, const DiffTensor& bias) {
  if (x.shape().size() != 2 || bias.shape() != Shape{x.shape()[1]}) {
    throw std::invalid_argument("add_row_bias: shapes " + shape_string(x.shape()) + " and " +
                                shape_string(bias.shape()));
  }
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  Tensor out = x.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bias.value()[c];
  return DiffTensor::make(std::move(out), {x, bias}, [rows, cols](Node& n) {
    if (wants(n, 0)) accumulate(grad_of(n, 0), n.grad);
    if (wants(n, 1)) {
      Tensor& gb = grad_of(n, 1);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gb[c] += n.grad[r * cols + c];
    }
  });
}

DiffTensor linear(const DiffTensor& x, const DiffTensor& weight, const DiffTensor& bias) {
  if (x.shape().size() != 2 || weight.shape().size() != 2 ||
      weight.shape()[1] != x.shape()[1]) {
    throw std::invalid_argument("linear: input " + shape_string(x.shape()) + " vs weight " +
                                shape_string(weight.shape()));
  }
  const std::size_t bsz = x.shape()[0], in = x.shape()[1], out_dim = weight.shape()[0];
  Tensor out({bsz, out_dim});
  gemm(false, true, bsz, out_dim, in, 1.0, x.value().data(), in, weight.value().data(), in, 0.0,
       out.data(), out_dim);
  DiffTensor y = DiffTensor::make(std::move(out), {x, weight}, [bsz, in, out_dim](Node& n) {
    const double* g = n.grad.data();
    if (wants(n, 0)) {
      gemm(false, false, bsz, in, out_dim, 1.0, g, out_dim, n.inputs[1]->value.data(), in, 1.0,
           grad_of(n, 0).data(), in);
    }
    if (wants(n, 1)) {
      gemm(true, false, out_dim, in, bsz, 1.0, g, out_dim, n.inputs[0]->value.data(), in, 1.0,
           grad_of(n, 1).data(), in);
    }
  });
  return bias.defined() ? add_row_bias(y, bias) : y;
}

DiffTensor sin(const DiffTensor& x) {
  return unary(x, [](double v) { return std::sin(v); }, [](double v) { return std::cos(v); });
}

DiffTensor relu(const DiffTensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

DiffTensor leaky_relu(const DiffTensor& x, double slope) {
  return unary(x, [slope](double v) { return v > 0.0 ? v : slope * v; },
               [slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

DiffTensor swish(const DiffTensor& x) {
  return unary(
      x, [](double v) { return v / (1.0 + std::exp(-v)); },
      [](double v) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 + v * (1.0 - s));
      });
}

DiffTensor reshape(const DiffTensor& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return DiffTensor::make(std::move(out), {x}, [](Node& n) {
    Tensor& gx = grad_of(n, 0);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += n.grad[i];
  });
}

DiffTensor permute(const DiffTensor& x, std::span<const std::size_t> perm) {
  const Shape& in = x.shape();
  if (perm.size() != in.size()) throw std::invalid_argument("permute: rank mismatch");
  std::vector<bool> seen(in.size(), false);
  Shape out_shape(in.size());
  for (std::size_t d = 0; d < perm.size(); ++d) {
    if (perm[d] >= in.size() || seen[perm[d]]) throw std::invalid_argument("permute: bad axes");
    seen[perm[d]] = true;
    out_shape[d] = in[perm[d]];
  }
  std::vector<std::size_t> in_stride(in.size(), 1);
  for (std::size_t a = in.size(); a-- > 1;) in_stride[a - 1] = in_stride[a] * in[a];
  // source[o] is the input offset read by output element o.
  auto source = std::make_shared<std::vector<std::size_t>>(x.size());
  std::vector<std::size_t> idx(in.size(), 0);
  std::size_t off = 0;
  for (std::size_t o = 0; o < x.size(); ++o) {
    (*source)[o] = off;
    for (std::size_t d = out_shape.size(); d-- > 0;) {
      ++idx[d];
      off += in_stride[perm[d]];
      if (idx[d] < out_shape[d]) break;
      off -= in_stride[perm[d]] * out_shape[d];
      idx[d] = 0;
    }
  }
  Tensor out(out_shape);
  const double* px = x.value().data();
  for (std::size_t o = 0; o < out.size(); ++o) out[o] = px[(*source)[o]];
  return DiffTensor::make(std::move(out), {x}, [source](Node& n) {
    Tensor& gx = grad_of(n, 0);
    for (std::size_t o = 0; o < source->size(); ++o) gx[(*source)[o]] += n.grad[o];
  });
}

DiffTensor conv2d_grouped(const DiffTensor& x, const DiffTensor& weight, std::size_t groups,
                          Padding padding) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (xs.size() != 4 || ws.size() != 4) {
    throw std::invalid_argument("conv2d: expected 4-d input and weight, got " + shape_string(xs) +
                                " and " + shape_string(ws));
  }
  if (groups == 0 || xs[1] % groups != 0 || ws[0] % groups != 0 || ws[1] != xs[1] / groups) {
    throw std::invalid_argument("conv2d: channel/group mismatch for input " + shape_string(xs) +
                                ", weight " + shape_string(ws) + ", groups " +
                                std::to_string(groups));
  }
  if (ws[2] != ws[3] || ws[2] % 2 == 0) {
    throw std::invalid_argument("conv2d: stencil must be square and odd, got " +
                                shape_string(ws));
  }
  ConvGeom g{xs[0], groups, ws[1], ws[0] / groups, xs[2], xs[3], ws[2], ws[2] / 2};
  Tensor out({g.batch, g.out_channels(), g.ny, g.nx});
  conv_forward(x.value().data(), weight.value().data(), g, padding, out.data());
  MacCounter::record(static_cast<std::uint64_t>(g.batch) * g.out_channels() * g.plane() * g.cg *
                     g.k * g.k);
  return DiffTensor::make(std::move(out), {x, weight}, [g, padding](Node& n) {
    double* dx = wants(n, 0) ? grad_of(n, 0).data() : nullptr;
    double* dw = wants(n, 1) ? grad_of(n, 1).data() : nullptr;
    conv_backward(n.inputs[0]->value.data(), n.inputs[1]->value.data(), n.grad.data(), g,
                  padding, dx, dw);
  });
}

DiffTensor max_pool2d(const DiffTensor& x, std::size_t window) {
  const Shape& xs = x.shape();
  if (xs.size() < 2 || window == 0) throw std::invalid_argument("max_pool2d: bad input");
  const std::size_t ny = xs[xs.size() - 2], nx = xs.back();
  const std::size_t oy = ny / window, ox = nx / window;
  if (oy == 0 || ox == 0) throw std::invalid_argument("max_pool2d: window exceeds input");
  const std::size_t planes = x.size() / (ny * nx);
  Shape os = xs;
  os[os.size() - 2] = oy;
  os.back() = ox;
  Tensor out(os);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  const double* px = x.value().data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < oy; ++y) {
      for (std::size_t xx = 0; xx < ox; ++xx) {
        std::size_t best = p * ny * nx + (y * window) * nx + xx * window;
        for (std::size_t dy = 0; dy < window; ++dy) {
          for (std::size_t dx = 0; dx < window; ++dx) {
            const std::size_t i = p * ny * nx + (y * window + dy) * nx + xx * window + dx;
            if (px[i] > px[best]) best = i;
          }
        }
        const std::size_t o = (p * oy + y) * ox + xx;
        out[o] = px[best];
        (*argmax)[o] = best;
      }
    }
  }
  return DiffTensor::make(std::move(out), {x}, [argmax](Node& n) {
    Tensor& gx = grad_of(n, 0);
    for (std::size_t o = 0; o < argmax->size(); ++o) gx[(*argmax)[o]] += n.grad[o];
  });
}

DiffTensor reduce_sum(const DiffTensor& x, std::span<const std::size_t> axes) {
  auto map = std::make_shared<ReductionMap>(build_reduction(x.shape(), axes));
  Tensor out(map->out_shape);
  for (std::size_t i = 0; i < x.size(); ++i) out[map->target[i]] += x.value()[i];
  return DiffTensor::make(std::move(out), {x}, [map](Node& n) {
    Tensor& gx = grad_of(n, 0);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += n.grad[map->target[i]];
  });
}

DiffTensor reduce_mean(const DiffTensor& x, std::span<const std::size_t> axes) {
  const std::size_t count = std::max<std::size_t>(1, x.size() / std::max<std::size_t>(
      1, shape_numel(build_reduction(x.shape(), axes).out_shape)));
  return scale(reduce_sum(x, axes), 1.0 / static_cast<double>(count));
}

DiffTensor reduce_max(const DiffTensor& x, std::span<const std::size_t> axes) {
  auto map = std::make_shared<ReductionMap>(build_reduction(x.shape(), axes));
  Tensor out(map->out_shape, -std::numeric_limits<double>::infinity());
  auto argmax = std::make_shared<std::vector<std::size_t>>(map->out_size, 0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t o = map->target[i];
    if (x.value()[i] > out[o]) {
      out[o] = x.value()[i];
      (*argmax)[o] = i;
    }
  }
  return DiffTensor::make(std::move(out), {x}, [argmax](Node& n) {
    Tensor& gx = grad_of(n, 0);
    for (std::size_t o = 0; o < argmax->size(); ++o) gx[(*argmax)[o]] += n.grad[o];
  });
}

DiffTensor sum_all(const DiffTensor& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return DiffTensor::make(Tensor::scalar(s), {x}, [](Node& n) {
    Tensor& gx = grad_of(n, 0);
    const double g = n.grad[0];
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

DiffTensor batch_norm(const DiffTensor& x, const DiffTensor& gamma, const DiffTensor& beta,
                      BatchNormState& state, bool training) {
  const Shape& xs = x.shape();
  if (xs.size() < 2) throw std::invalid_argument("batch_norm: input needs a channel axis");
  const std::size_t batch = xs[0], ch = xs[1];
  if (gamma.shape() != Shape{ch} || beta.shape() != Shape{ch}) {
    throw std::invalid_argument("batch_norm: affine parameters must have shape (" +
                                std::to_string(ch) + ")");
  }
  const std::size_t inner = x.size() / (batch * ch);
  const std::size_t count = batch * inner;
  if (state.running_mean.size() != ch) {
    state.running_mean = Tensor({ch}, 0.0);
    state.running_var = Tensor({ch}, 1.0);
  }
  if (training && count < 2) {
    throw std::invalid_argument("batch_norm: training needs more than one value per channel");
  }
  auto xhat = std::make_shared<Tensor>(xs);
  auto inv_std = std::make_shared<std::vector<double>>(ch);
  const double* px = x.value().data();
  for (std::size_t c = 0; c < ch; ++c) {
    double mean, var;
    if (training) {
      double s = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* p = px + (b * ch + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) s += p[i];
      }
      mean = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* p = px + (b * ch + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) ss += (p[i] - mean) * (p[i] - mean);
      }
      var = ss / static_cast<double>(count);
      const double unbiased = ss / static_cast<double>(count - 1);
      state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] +
                              state.momentum * mean;
      state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] +
                             state.momentum * unbiased;
    } else {
      mean = state.running_mean[c];
      var = state.running_var[c];
    }
    const double is = 1.0 / std::sqrt(var + state.eps);
    (*inv_std)[c] = is;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * ch + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) (*xhat)[off + i] = (px[off + i] - mean) * is;
    }
  }
  Tensor out(xs);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < ch; ++c) {
      const std::size_t off = (b * ch + c) * inner;
      const double gmm = gamma.value()[c], bt = beta.value()[c];
      for (std::size_t i = 0; i < inner; ++i) out[off + i] = gmm * (*xhat)[off + i] + bt;
    }
  }
  return DiffTensor::make(
      std::move(out), {x, gamma, beta},
      [xhat, inv_std, batch, ch, inner, count, training](Node& n) {
        const Tensor& gv = n.inputs[1]->value;
        std::vector<double> sum_g(ch, 0.0), sum_gx(ch, 0.0);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t c = 0; c < ch; ++c) {
            const std::size_t off = (b * ch + c) * inner;
            for (std::size_t i = 0; i < inner; ++i) {
              sum_g[c] += n.grad[off + i];
              sum_gx[c] += n.grad[off + i] * (*xhat)[off + i];
            }
          }
        }
        if (wants(n, 1)) {
          Tensor& gg = grad_of(n, 1);
          for (std::size_t c = 0; c < ch; ++c) gg[c] += sum_gx[c];
        }
        if (wants(n, 2)) {
          Tensor& gb = grad_of(n, 2);
          for (std::size_t c = 0; c < ch; ++c) gb[c] += sum_g[c];
        }
        if (!wants(n, 0)) return;
        Tensor& gx = grad_of(n, 0);
        const double inv_n = 1.0 / static_cast<double>(count);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t c = 0; c < ch; ++c) {
            const std::size_t off = (b * ch + c) * inner;
            const double k = gv[c] * (*inv_std)[c];
            for (std::size_t i = 0; i < inner; ++i) {
              const double g = n.grad[off + i];
              gx[off + i] += training ? k * (g - inv_n * (sum_g[c] + (*xhat)[off + i] * sum_gx[c]))
                                      : k * g;
            }
          }
        }
      });
}

DiffTensor softmax_cross_entropy(const DiffTensor& logits, std::span<const int> labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2 || s[0] != labels.size() || s[0] == 0) {
    throw std::invalid_argument("softmax_cross_entropy: logits " + shape_string(s) + " vs " +
                                std::to_string(labels.size()) + " labels");
  }
  const std::size_t bsz = s[0], k = s[1];
  auto probs = std::make_shared<Tensor>(s);
  auto lab = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
  double loss = 0.0;
  for (std::size_t b = 0; b < bsz; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw std::invalid_argument("softmax_cross_entropy: label out of range");
    }
    const double* row = logits.value().data() + b * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    for (std::size_t j = 0; j < k; ++j) (*probs)[b * k + j] = std::exp(row[j] - mx) / z;
    loss += (std::log(z) + mx) - row[y];
  }
  loss /= static_cast<double>(bsz);
  return DiffTensor::make(Tensor::scalar(loss), {logits}, [probs, lab, bsz, k](Node& n) {
    Tensor& gl = grad_of(n, 0);
    const double g = n.grad[0] / static_cast<double>(bsz);
    for (std::size_t b = 0; b < bsz; ++b) {
      for (std::size_t j = 0; j < k; ++j) {
        const double onehot = static_cast<int>(j) == (*lab)[b] ? 1.0 : 0.0;
        gl[b * k + j] += g * ((*probs)[b * k + j] - onehot);
      }
    }
  });
}

DiffTensor gather_scaled(const DiffTensor& src, std::shared_ptr<const GatherPlan> plan) {
  const std::size_t total = shape_numel(plan->shape);
  if (plan->index.size() != total || plan->coef.size() != total) {
    throw std::invalid_argument("gather_scaled: plan size does not match its shape");
  }
  Tensor out(plan->shape);
  const double* ps = src.value().data();
  const auto n = static_cast<std::int64_t>(src.size());
  for (std::size_t k = 0; k < total; ++k) {
    const std::int64_t i = plan->index[k];
    if (i >= n) throw std::invalid_argument("gather_scaled: index out of range");
    out[k] = i < 0 ? 0.0 : plan->coef[k] * ps[i];
  }
  return DiffTensor::make(std::move(out), {src}, [plan](Node& node) {
    Tensor& gs = grad_of(node, 0);
    for (std::size_t k = 0; k < plan->index.size(); ++k) {
      const std::int64_t i = plan->index[k];
      if (i >= 0) gs[static_cast<std::size_t>(i)] += plan->coef[k] * node.grad[k];
    }
  });
}

MacCounter::MacCounter() : parent_(g_mac_top) { g_mac_top = this; }
MacCounter::~MacCounter() { g_mac_top = parent_; }

void MacCounter::record(std::uint64_t macs) {
  for (MacCounter* c = g_mac_top; c; c = c->parent_) c->count_ += macs;
}

Adam::Adam(std::vector<DiffTensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.shape(), 0.0);
    v_.emplace_back(p.shape(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    if (!params_[p].has_grad()) continue;
    Tensor& w = params_[p].mutable_value();
    const Tensor& g = params_[p].node()->grad;
    Tensor& m = m_[p];
    Tensor& v = v_[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] + config_.weight_decay * w[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
      w[i] -= config_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double grad_check(const std::function<DiffTensor(const DiffTensor&)>& fn, const Tensor& input,
                  double eps) {
  DiffTensor x = DiffTensor::parameter(input);
  DiffTensor y = fn(x);
  if (y.size() != 1) throw std::invalid_argument("grad_check: function must be scalar-valued");
  y.backward();
  const Tensor analytic = x.grad();

  std::vector<double> numeric(input.size());
  double max_numeric = 0.0;
  {
    NoGradGuard no_grad;
    Tensor probe = input;
    for (std::size_t i = 0; i < input.size(); ++i) {
      probe[i] = input[i] + eps;
      const double fp = fn(DiffTensor(probe)).value().item();
      probe[i] = input[i] - eps;
      const double fm = fn(DiffTensor(probe)).value().item();
      probe[i] = input[i];
      numeric[i] = (fp - fm) / (2.0 * eps);
      max_numeric = std::max(max_numeric, std::abs(numeric[i]));
    }
  }
  const double floor = std::max(1e-3 * max_numeric, 1e-12);
  double worst = 0.0;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double g = analytic[i], n = numeric[i];
    const double denom = std::max({std::abs(g), std::abs(n), floor});
    worst = std::max(worst, std::abs(g - n) / denom);
  }
  return worst;
}

void set_num_threads(int n) { openblas_set_num_threads(n < 1 ? 1 : n); }

}  // namespace liegconv
