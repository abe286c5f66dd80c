// SPDX-License-Identifier: Apache-2.0
#include "symplan/steerable.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "conv_gemm.hpp"

namespace symplan {

namespace {

void validate(const FieldType& in, const FieldType& out, int size) {
  if (size <= 0 || size % 2 == 0) {
    throw std::invalid_argument("kernel size must be odd and positive, got " +
                                std::to_string(size));
  }
  if (!(in.group() == out.group())) {
    throw GroupMismatch("kernel input type over " + in.group().token() +
                        " but output type over " + out.group().token());
  }
}

std::size_t kernel_len(const FieldType& in, const FieldType& out, int size) {
  return static_cast<std::size_t>(size) * size * in.total_dim() * out.total_dim();
}

// tap index of the offset obtained by acting with h on each tap.
std::vector<int> tap_permutation(const GroupElement& h, int size) {
  const int r = (size - 1) / 2;
  std::vector<int> perm(static_cast<std::size_t>(size) * size);
  for (int di = -r; di <= r; ++di) {
    for (int dj = -r; dj <= r; ++dj) {
      const auto [hi, hj] = kernel_offset_action(h, di, dj);
      perm[(di + r) * size + (dj + r)] = (hi + r) * size + (hj + r);
    }
  }
  return perm;
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

// psi_bar(x) = 1/|H| sum_h rho_out(h)^T raw(h.x) rho_in(h)
std::vector<double> project_kernel(std::span<const double> raw, const FieldType& in,
                                   const FieldType& out, int size) {
  validate(in, out, size);
  if (raw.size() != kernel_len(in, out, size)) {
    throw ShapeMismatch("kernel has " + std::to_string(raw.size()) + " values, expected " +
                        std::to_string(kernel_len(in, out, size)));
  }
  const Group& group = in.group();
  const int ci_n = in.total_dim();
  const int co_n = out.total_dim();
  const int taps = size * size;
  const std::size_t block = static_cast<std::size_t>(ci_n) * co_n;
  if (group.is_trivial()) return {raw.begin(), raw.end()};

  std::vector<double> acc(raw.size(), 0.0);
  const bool permutation = in.is_permutation() && out.is_permutation();
  for (const auto& h : elements(group)) {
    const auto tperm = tap_permutation(h, size);
    if (permutation) {
      // (rho_out^T A rho_in)[a][b] = A[pi_out(a)][pi_in(b)]
      const auto pin = in.permutation(h);
      const auto pout = out.permutation(h);
      for (int t = 0; t < taps; ++t) {
        const double* src = raw.data() + tperm[t] * block;
        double* dst = acc.data() + t * block;
        for (int a = 0; a < co_n; ++a) {
          const double* src_row = src + static_cast<std::size_t>(pout[a]) * ci_n;
          double* dst_row = dst + static_cast<std::size_t>(a) * ci_n;
          for (int b = 0; b < ci_n; ++b) dst_row[b] += src_row[pin[b]];
        }
      }
    } else {
      const Eigen::MatrixXd rin = in.matrix(h);
      const Eigen::MatrixXd rout = out.matrix(h);
      for (int t = 0; t < taps; ++t) {
        Eigen::Map<const RowMat> a(raw.data() + tperm[t] * block, co_n, ci_n);
        Eigen::Map<RowMat> d(acc.data() + t * block, co_n, ci_n);
        d.noalias() += rout.transpose() * a * rin;
      }
    }
  }
  const double inv = 1.0 / group.order();
  for (double& v : acc) v *= inv;
  return acc;
}

double check_steerability(std::span<const double> kernel, const FieldType& in,
                          const FieldType& out, int size) {
  validate(in, out, size);
  const int ci_n = in.total_dim();
  const int co_n = out.total_dim();
  const int taps = size * size;
  const std::size_t block = static_cast<std::size_t>(ci_n) * co_n;
  double worst = 0.0;
  for (const auto& h : elements(in.group())) {
    const auto tperm = tap_permutation(h, size);
    const Eigen::MatrixXd rin_inv = in.matrix(inverse(h));
    const Eigen::MatrixXd rout = out.matrix(h);
    for (int t = 0; t < taps; ++t) {
      Eigen::Map<const RowMat> at_hx(kernel.data() + tperm[t] * block, co_n, ci_n);
      Eigen::Map<const RowMat> at_x(kernel.data() + t * block, co_n, ci_n);
      const RowMat diff = at_hx - rout * at_x * rin_inv;
      if (diff.size() > 0) worst = std::max(worst, diff.cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

SteerableKernel::SteerableKernel(FieldType in, FieldType out, int size)
    : SteerableKernel(in, out, size, std::vector<double>(kernel_len(in, out, size), 0.0)) {}

SteerableKernel::SteerableKernel(FieldType in, FieldType out, int size, std::vector<double> raw)
    : in_(std::move(in)), out_(std::move(out)), size_(size) {
  validate(in_, out_, size_);
  set_raw(std::move(raw));
}

SteerableKernel SteerableKernel::identity(const FieldType& type, int size) {
  SteerableKernel k(type, type, size);
  std::vector<double> raw(k.parameter_count(), 0.0);
  const int r = (size - 1) / 2;
  const int center = r * size + r;
  const int c = type.total_dim();
  for (int a = 0; a < c; ++a) raw[(static_cast<std::size_t>(center) * c + a) * c + a] = 1.0;
  k.set_raw(std::move(raw));
  return k;
}

void SteerableKernel::set_raw(std::vector<double> raw) {
  if (raw.size() != kernel_len(in_, out_, size_)) {
    throw ShapeMismatch("raw kernel size mismatch");
  }
  raw_ = std::move(raw);
  projected_ = project_kernel(raw_, in_, out_, size_);
}

void SteerableKernel::init_uniform(std::mt19937_64& rng) {
  const double a = std::sqrt(1.0 / (static_cast<double>(in_dim()) * size_ * size_));
  std::vector<double> raw(parameter_count());
  for (double& v : raw) {
    // 53-bit uniform in [0, 1)
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = (2.0 * u - 1.0) * a;
  }
  set_raw(std::move(raw));
}

std::vector<double> SteerableKernel::project(std::span<const double> kernel) const {
  return project_kernel(kernel, in_, out_, size_);
}

double SteerableKernel::value(int di, int dj, int co, int ci) const {
  const int r = (size_ - 1) / 2;
  const int t = (di + r) * size_ + (dj + r);
  return projected_[(static_cast<std::size_t>(t) * out_dim() + co) * in_dim() + ci];
}

double check_steerability(const SteerableKernel& kernel) {
  return check_steerability(kernel.projected(), kernel.in_type(), kernel.out_type(),
                            kernel.size());
}

FeatureField conv2d(const SteerableKernel& kernel, const FeatureField& f, const ConvSpec& spec) {
  if (!(f.type() == kernel.in_type())) {
    throw ShapeMismatch("conv2d: field type does not match the kernel input type");
  }
  FeatureField out(f.rows(), f.cols(), kernel.out_type(), spec.padding);
  detail::ConvGeometry geo;
  geo.h = f.rows();
  geo.w = f.cols();
  geo.c_in = kernel.in_dim();
  geo.c_out = kernel.out_dim();
  geo.size = kernel.size();
  geo.padding = spec.padding;
  detail::conv_forward(geo, f.data().data(), kernel.projected().data(), out.data().data());
  return out;
}

namespace {

FeatureField zero_fill_shift(const FeatureField& f, int di, int dj) {
  FeatureField out(f.rows(), f.cols(), f.type(), f.padding_hint());
  for (int i = 0; i < f.rows(); ++i) {
    for (int j = 0; j < f.cols(); ++j) {
      const int si = i - di;
      const int sj = j - dj;
      if (si < 0 || si >= f.rows() || sj < 0 || sj >= f.cols()) continue;
      const auto src = f.fiber(si, sj);
      std::copy(src.begin(), src.end(), out.fiber(i, j).begin());
    }
  }
  return out;
}

}  // namespace

double translation_equivariance_check(const SteerableKernel& kernel, const FeatureField& f,
                                      std::span<const std::pair<int, int>> shifts,
                                      Padding padding) {
  const ConvSpec spec{padding};
  const FeatureField base = conv2d(kernel, f, spec);
  const int margin = kernel.size() - 1;
  double worst = 0.0;
  for (const auto& [di, dj] : shifts) {
    if (padding == Padding::circular) {
      const FeatureField lhs = conv2d(kernel, cyclic_shift(f, di, dj), spec);
      worst = std::max(worst, max_abs_diff(lhs, cyclic_shift(base, di, dj)));
      continue;
    }
    const FeatureField lhs = conv2d(kernel, zero_fill_shift(f, di, dj), spec);
    const FeatureField rhs = zero_fill_shift(base, di, dj);
    auto interior = [&](int i, int j) {
      return i >= margin && i < f.rows() - margin && j >= margin && j < f.cols() - margin;
    };
    for (int i = 0; i < f.rows(); ++i) {
      for (int j = 0; j < f.cols(); ++j) {
        if (!interior(i, j) || !interior(i - di, j - dj)) continue;
        for (int c = 0; c < lhs.channels(); ++c) {
          worst = std::max(worst, std::abs(lhs.at(i, j, c) - rhs.at(i, j, c)));
        }
      }
    }
  }
  return worst;
}

}  // namespace symplan
