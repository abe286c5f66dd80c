// SPDX-License-Identifier: Apache-2.0
#include "symplan/field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace symplan {

FeatureField::FeatureField(int rows, int cols, FieldType type, Padding hint)
    : rows_(rows), cols_(cols), type_(std::move(type)), padding_(hint) {
  if (rows <= 0 || cols <= 0) throw ShapeMismatch("field must have positive extent");
  data_.assign(static_cast<std::size_t>(rows) * cols * type_.total_dim(), 0.0);
}

FeatureField::FeatureField(int rows, int cols, FieldType type, std::vector<double> data,
                           Padding hint)
    : rows_(rows), cols_(cols), type_(std::move(type)), padding_(hint), data_(std::move(data)) {
  if (rows <= 0 || cols <= 0) throw ShapeMismatch("field must have positive extent");
  if (data_.size() != static_cast<std::size_t>(rows) * cols * type_.total_dim()) {
    throw ShapeMismatch("field data has " + std::to_string(data_.size()) +
                        " values, expected rows*cols*total_dim");
  }
}

FeatureField transform_field(const GroupElement& g, const FeatureField& f) {
  if (!(g.group == f.type().group())) {
    throw GroupMismatch("transform_field: element of " + g.group.token() +
                        " applied to a field over " + f.type().group().token());
  }
  FeatureField out(f.rows(), f.cols(), f.type(), f.padding_hint());
  const auto g_inv = inverse(g);
  const int c = f.channels();
  if (f.type().is_permutation()) {
    const auto perm = f.type().permutation(g);
    for (int i = 0; i < f.rows(); ++i) {
      for (int j = 0; j < f.cols(); ++j) {
        const auto [si, sj] = grid_action(g_inv, i, j, f.rows(), f.cols());
        const auto src = f.fiber(si, sj);
        auto dst = out.fiber(i, j);
        for (int k = 0; k < c; ++k) dst[perm[k]] = src[k];
      }
    }
    return out;
  }
  const Eigen::MatrixXd rho = f.type().matrix(g);
  for (int i = 0; i < f.rows(); ++i) {
    for (int j = 0; j < f.cols(); ++j) {
      const auto [si, sj] = grid_action(g_inv, i, j, f.rows(), f.cols());
      const auto src = f.fiber(si, sj);
      Eigen::Map<const Eigen::VectorXd> v(src.data(), c);
      Eigen::Map<Eigen::VectorXd> w(out.fiber(i, j).data(), c);
      w = rho * v;
    }
  }
  return out;
}

FeatureField stack_fields(std::span<const FeatureField> fields) {
  if (fields.empty()) throw ShapeMismatch("stack_fields needs at least one field");
  if (fields.size() == 1) return fields.front();
  const int rows = fields.front().rows();
  const int cols = fields.front().cols();
  FieldType type;
  for (const auto& f : fields) {
    if (f.rows() != rows || f.cols() != cols) {
      throw ShapeMismatch("stack_fields: spatial sizes differ");
    }
    type = type + f.type();
  }
  FeatureField out(rows, cols, type, fields.front().padding_hint());
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      auto dst = out.fiber(i, j);
      std::size_t at = 0;
      for (const auto& f : fields) {
        const auto src = f.fiber(i, j);
        std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(at));
        at += src.size();
      }
    }
  }
  return out;
}

FeatureField pointwise_add(const FeatureField& a, const FeatureField& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || !(a.type() == b.type())) {
    throw ShapeMismatch("pointwise_add: shape or field type mismatch");
  }
  FeatureField out = a;
  for (std::size_t k = 0; k < out.data().size(); ++k) out.data()[k] += b.data()[k];
  return out;
}

FeatureField pointwise_scale(const FeatureField& f, double c) {
  FeatureField out = f;
  for (double& v : out.data()) v *= c;
  return out;
}

FeatureField channel_block_max(const FeatureField& f, int copies) {
  const auto& reps = f.type().reps();
  if (copies <= 0 || reps.size() % static_cast<std::size_t>(copies) != 0) {
    throw ShapeMismatch("channel_block_max: " + std::to_string(reps.size()) +
                        " representations do not split into " + std::to_string(copies) +
                        " equal blocks");
  }
  const std::size_t per_block = reps.size() / static_cast<std::size_t>(copies);
  std::vector<Representation> block(reps.begin(), reps.begin() + static_cast<std::ptrdiff_t>(per_block));
  for (std::size_t b = 1; b < static_cast<std::size_t>(copies); ++b) {
    for (std::size_t k = 0; k < per_block; ++k) {
      if (!(reps[b * per_block + k] == block[k])) {
        throw ShapeMismatch("channel_block_max: blocks have different field types");
      }
    }
  }
  FieldType out_type(f.type().group(), block);
  const int width = out_type.total_dim();
  FeatureField out(f.rows(), f.cols(), out_type, f.padding_hint());
  for (int i = 0; i < f.rows(); ++i) {
    for (int j = 0; j < f.cols(); ++j) {
      const auto src = f.fiber(i, j);
      auto dst = out.fiber(i, j);
      for (int k = 0; k < width; ++k) {
        double m = src[k];
        for (int b = 1; b < copies; ++b) m = std::max(m, src[b * width + k]);
        dst[k] = m;
      }
    }
  }
  return out;
}

FeatureField cyclic_shift(const FeatureField& f, int di, int dj) {
  FeatureField out(f.rows(), f.cols(), f.type(), f.padding_hint());
  const int h = f.rows();
  const int w = f.cols();
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const int si = ((i - di) % h + h) % h;
      const int sj = ((j - dj) % w + w) % w;
      const auto src = f.fiber(si, sj);
      std::copy(src.begin(), src.end(), out.fiber(i, j).begin());
    }
  }
  return out;
}

double max_abs_diff(const FeatureField& a, const FeatureField& b) {
  if (a.data().size() != b.data().size()) throw ShapeMismatch("max_abs_diff: sizes differ");
  double m = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k) {
    m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
  }
  return m;
}

double l2_norm(const FeatureField& f) {
  double s = 0.0;
  for (double v : f.data()) s += v * v;
  return std::sqrt(s);
}

}  // namespace symplan
