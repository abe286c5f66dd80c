// SPDX-License-Identifier: Apache-2.0
#include "conv_gemm.hpp"

#include <Eigen/Dense>

namespace symplan::detail {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

// Source pixel for output (i, j) and tap offset (di, dj); -1 if padded.
inline long source_pixel(const ConvGeometry& g, int b, int i, int j, int di, int dj) {
  int si = i + di;
  int sj = j + dj;
  if (g.padding == Padding::circular) {
    si = (si % g.h + g.h) % g.h;
    sj = (sj % g.w + g.w) % g.w;
  } else if (si < 0 || si >= g.h || sj < 0 || sj >= g.w) {
    return -1;
  }
  return (static_cast<long>(b) * g.h + si) * g.w + sj;
}

void im2col(const ConvGeometry& g, const double* x, RowMat& cols) {
  const int r = g.radius();
  const int width = g.taps() * g.c_in;
  cols.resize(g.pixels(), width);
  for (int b = 0; b < g.n; ++b) {
    for (int i = 0; i < g.h; ++i) {
      for (int j = 0; j < g.w; ++j) {
        const long p = (static_cast<long>(b) * g.h + i) * g.w + j;
        double* row = cols.data() + p * width;
        for (int di = -r; di <= r; ++di) {
          for (int dj = -r; dj <= r; ++dj) {
            const int tap = (di + r) * g.size + (dj + r);
            double* dst = row + tap * g.c_in;
            const long src = source_pixel(g, b, i, j, di, dj);
            if (src < 0) {
              std::fill(dst, dst + g.c_in, 0.0);
            } else {
              std::copy(x + src * g.c_in, x + (src + 1) * g.c_in, dst);
            }
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const RowMat& cols, double* dx) {
  const int r = g.radius();
  const int width = g.taps() * g.c_in;
  for (int b = 0; b < g.n; ++b) {
    for (int i = 0; i < g.h; ++i) {
      for (int j = 0; j < g.w; ++j) {
        const long p = (static_cast<long>(b) * g.h + i) * g.w + j;
        const double* row = cols.data() + p * width;
        for (int di = -r; di <= r; ++di) {
          for (int dj = -r; dj <= r; ++dj) {
            const long src = source_pixel(g, b, i, j, di, dj);
            if (src < 0) continue;
            const double* s = row + ((di + r) * g.size + (dj + r)) * g.c_in;
            double* d = dx + src * g.c_in;
            for (int c = 0; c < g.c_in; ++c) d[c] += s[c];
          }
        }
      }
    }
  }
}

RowMat kernel_matrix(const ConvGeometry& g, const double* kernel) {
  RowMat k(g.taps() * g.c_in, g.c_out);
  for (int t = 0; t < g.taps(); ++t) {
    for (int co = 0; co < g.c_out; ++co) {
      for (int ci = 0; ci < g.c_in; ++ci) {
        k(t * g.c_in + ci, co) = kernel[(static_cast<long>(t) * g.c_out + co) * g.c_in + ci];
      }
    }
  }
  return k;
}

}  // namespace

void conv_forward(const ConvGeometry& g, const double* x, const double* kernel, double* out) {
  RowMap y(out, g.pixels(), g.c_out);
  if (g.size == 1) {
    ConstRowMap xin(x, g.pixels(), g.c_in);
    ConstRowMap k(kernel, g.c_out, g.c_in);
    y.noalias() = xin * k.transpose();
    return;
  }
  thread_local RowMat cols;
  im2col(g, x, cols);
  y.noalias() = cols * kernel_matrix(g, kernel);
}

void conv_backward(const ConvGeometry& g, const double* x, const double* kernel,
                   const double* dout, double* dx, double* dkernel) {
  ConstRowMap dy(dout, g.pixels(), g.c_out);
  if (g.size == 1) {
    ConstRowMap xin(x, g.pixels(), g.c_in);
    ConstRowMap k(kernel, g.c_out, g.c_in);
    if (dx) {
      RowMap dxin(dx, g.pixels(), g.c_in);
      dxin.noalias() += dy * k;
    }
    if (dkernel) {
      RowMap dk(dkernel, g.c_out, g.c_in);
      dk.noalias() += dy.transpose() * xin;
    }
    return;
  }
  if (dkernel) {
    thread_local RowMat cols;
    im2col(g, x, cols);
    RowMat dk = cols.transpose() * dy;
    for (int t = 0; t < g.taps(); ++t) {
      for (int co = 0; co < g.c_out; ++co) {
        for (int ci = 0; ci < g.c_in; ++ci) {
          dkernel[(static_cast<long>(t) * g.c_out + co) * g.c_in + ci] += dk(t * g.c_in + ci, co);
        }
      }
    }
  }
  if (dx) {
    thread_local RowMat dcols;
    dcols.noalias() = dy * kernel_matrix(g, kernel).transpose();
    col2im_add(g, dcols, dx);
  }
}

}  // namespace symplan::detail
