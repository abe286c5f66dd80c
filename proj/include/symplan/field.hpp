// SPDX-License-Identifier: Apache-2.0
/**
 * @file   field.hpp
 * @brief  Feature fields over an H x W grid and the induced group action.
 *
 * Channels are stored fiber-major: the C values of pixel (i, j) are
 * contiguous at offset (i * W + j) * C.
 */
#ifndef SYMPLAN_FIELD_HPP
#define SYMPLAN_FIELD_HPP

#include <span>
#include <vector>

#include "symplan/group.hpp"

namespace symplan {

enum class Padding { zero, circular };

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class FeatureField {
 public:
  FeatureField() = default;
  FeatureField(int rows, int cols, FieldType type, Padding hint = Padding::zero);
  FeatureField(int rows, int cols, FieldType type, std::vector<double> data,
               Padding hint = Padding::zero);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int channels() const { return type_.total_dim(); }
  const FieldType& type() const { return type_; }
  Padding padding_hint() const { return padding_; }

  double at(int i, int j, int c) const { return data_[offset(i, j) + c]; }
  double& at(int i, int j, int c) { return data_[offset(i, j) + c]; }
  std::span<const double> fiber(int i, int j) const {
    return {data_.data() + offset(i, j), static_cast<std::size_t>(channels())};
  }
  std::span<double> fiber(int i, int j) {
    return {data_.data() + offset(i, j), static_cast<std::size_t>(channels())};
  }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  std::size_t offset(int i, int j) const {
    return (static_cast<std::size_t>(i) * cols_ + j) * channels();
  }

  int rows_ = 0;
  int cols_ = 0;
  FieldType type_;
  Padding padding_ = Padding::zero;
  std::vector<double> data_;
};

/// (g.f)(x) = rho(g) f(g^-1 x), rho the block-diagonal field-type matrix.
FeatureField transform_field(const GroupElement& g, const FeatureField& f);

/// Channel concatenation; the field type is the direct sum of the inputs.
FeatureField stack_fields(std::span<const FeatureField> fields);

FeatureField pointwise_add(const FeatureField& a, const FeatureField& b);
FeatureField pointwise_scale(const FeatureField& f, double c);

/// Elementwise maximum across `copies` identically typed channel blocks.
FeatureField channel_block_max(const FeatureField& f, int copies);

/// out(i, j) = f(i - di, j - dj) with wrap-around.
FeatureField cyclic_shift(const FeatureField& f, int di, int dj);

double max_abs_diff(const FeatureField& a, const FeatureField& b);
double l2_norm(const FeatureField& f);

}  // namespace symplan

#endif  // SYMPLAN_FIELD_HPP
