// SPDX-License-Identifier: Apache-2.0
// Internal im2col + GEMM convolution shared by the field-level conv2d and the
// autodiff tape. Tensors are [n, h, w, c] row-major; kernels are
// [tap][c_out][c_in] with tap = (di + r) * F + (dj + r).
#ifndef SYMPLAN_SRC_CONV_GEMM_HPP
#define SYMPLAN_SRC_CONV_GEMM_HPP

#include <vector>

#include "symplan/field.hpp"

namespace symplan::detail {

struct ConvGeometry {
  int n = 1;
  int h = 1;
  int w = 1;
  int c_in = 1;
  int c_out = 1;
  int size = 1;  // F
  Padding padding = Padding::zero;

  int radius() const { return (size - 1) / 2; }
  int taps() const { return size * size; }
  long pixels() const { return static_cast<long>(n) * h * w; }
};

void conv_forward(const ConvGeometry& geo, const double* x, const double* kernel, double* out);

/// Accumulates into dx (if non-null) and dkernel (if non-null).
void conv_backward(const ConvGeometry& geo, const double* x, const double* kernel,
                   const double* dout, double* dx, double* dkernel);

}  // namespace symplan::detail

#endif  // SYMPLAN_SRC_CONV_GEMM_HPP
