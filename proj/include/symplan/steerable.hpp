// SPDX-License-Identifier: Apache-2.0
/**
 * @file   steerable.hpp
 * @brief  Steerable convolution kernels.
 *
 * A kernel psi maps fibers of type `in` to fibers of type `out` and is
 * steerable when psi(h.x) = rho_out(h) psi(x) rho_in(h^-1) for every h in the
 * fiber group and every centered offset x. Steerable kernels are obtained by
 * averaging an unconstrained kernel over the group; the averaging map is an
 * orthogonal projector on kernel space, so gradients taken with respect to
 * the projected kernel pull back to the free parameters by the same map.
 *
 * Layout: value index ((tap * c_out) + co) * c_in + ci with
 * tap = (di + r) * F + (dj + r), r = (F - 1) / 2.
 */
#ifndef SYMPLAN_STEERABLE_HPP
#define SYMPLAN_STEERABLE_HPP

#include <random>
#include <span>
#include <utility>
#include <vector>

#include "symplan/field.hpp"

namespace symplan {

/// Stride is always 1 and there is never a bias; output size equals input size.
struct ConvSpec {
  Padding padding = Padding::zero;
};

/// Group average of `raw`. Throws for even `size` or mismatched groups.
std::vector<double> project_kernel(std::span<const double> raw, const FieldType& in,
                                   const FieldType& out, int size);

/// max over h, x of |psi(h.x) - rho_out(h) psi(x) rho_in(h^-1)|.
double check_steerability(std::span<const double> kernel, const FieldType& in,
                          const FieldType& out, int size);

class SteerableKernel {
 public:
  SteerableKernel() = default;
  /// Zero kernel.
  SteerableKernel(FieldType in, FieldType out, int size);
  SteerableKernel(FieldType in, FieldType out, int size, std::vector<double> raw);

  /// Center tap = identity; steerable whenever in == out.
  static SteerableKernel identity(const FieldType& type, int size);

  const FieldType& in_type() const { return in_; }
  const FieldType& out_type() const { return out_; }
  const Group& group() const { return in_.group(); }
  int size() const { return size_; }
  int taps() const { return size_ * size_; }
  int in_dim() const { return in_.total_dim(); }
  int out_dim() const { return out_.total_dim(); }
  std::size_t parameter_count() const { return raw_.size(); }

  std::span<const double> raw() const { return raw_; }
  const std::vector<double>& projected() const { return projected_; }
  void set_raw(std::vector<double> raw);

  /// Uniform in [-a, a], a = sqrt(1 / (c_in * F^2)), then projection.
  void init_uniform(std::mt19937_64& rng);

  /// Applies the projector to an arbitrary kernel-shaped array (used to pull
  /// gradients back to the free parameters).
  std::vector<double> project(std::span<const double> kernel) const;

  double value(int di, int dj, int co, int ci) const;

 private:
  FieldType in_;
  FieldType out_;
  int size_ = 1;
  std::vector<double> raw_;
  std::vector<double> projected_;
};

/// Same-padded cross-correlation with the projected kernel.
FeatureField conv2d(const SteerableKernel& kernel, const FeatureField& f, const ConvSpec& spec);

/// Violation of the kernel's projected values.
double check_steerability(const SteerableKernel& kernel);

/// max deviation between conv(shift f) and shift(conv f) over `shifts`.
/// Circular padding compares everywhere with cyclic shifts; zero padding uses
/// zero-filled translations and compares on cells at distance >= F - 1 from
/// the border both before and after the shift.
double translation_equivariance_check(const SteerableKernel& kernel, const FeatureField& f,
                                      std::span<const std::pair<int, int>> shifts,
                                      Padding padding = Padding::circular);

}  // namespace symplan

#endif  // SYMPLAN_STEERABLE_HPP
