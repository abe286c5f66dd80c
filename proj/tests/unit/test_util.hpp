// SPDX-License-Identifier: Apache-2.0
// Shared fixtures for the unit tests.
#ifndef SYMPLAN_TESTS_TEST_UTIL_HPP
#define SYMPLAN_TESTS_TEST_UTIL_HPP

#include <random>
#include <vector>

#include "symplan/field.hpp"
#include "symplan/planner.hpp"

namespace symplan::testing {

inline std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline FeatureField random_field(int rows, int cols, const FieldType& type, std::mt19937_64& rng) {
  return FeatureField(rows, cols, type,
                      random_values(static_cast<std::size_t>(rows) * cols * type.total_dim(), rng));
}

inline SteerableKernel random_kernel(const FieldType& in, const FieldType& out, int size,
                                     std::mt19937_64& rng) {
  return SteerableKernel(in, out, size,
                         random_values(static_cast<std::size_t>(size) * size * in.total_dim() *
                                           out.total_dim(),
                                       rng));
}

inline Group d4() { return Group(GroupKind::dihedral, 4); }
inline Group c4() { return Group(GroupKind::cyclic, 4); }

inline std::vector<Group> all_groups() {
  return {Group(GroupKind::cyclic, 2),   Group(GroupKind::cyclic, 4),
          Group(GroupKind::cyclic, 8),   Group(GroupKind::dihedral, 2),
          Group(GroupKind::dihedral, 4), Group(GroupKind::dihedral, 8)};
}

/// Random obstacle map with a free goal; not necessarily solvable.
inline OccupancyMap random_map(int size, double density, std::mt19937_64& rng, bool torus = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  OccupancyMap m(size, size, torus);
  for (auto& c : m.occupancy) c = u(rng) < density ? 1 : 0;
  std::uniform_int_distribution<int> pick(0, size - 1);
  m.goal_row = pick(rng);
  m.goal_col = pick(rng);
  m.set_obstacle(m.goal_row, m.goal_col, false);
  // keep one free neighbour so the map is valid
  const int ni = (m.goal_row + 1) % size;
  m.set_obstacle(ni, m.goal_col, false);
  return m;
}

inline PlannerConfig small_config(Variant variant, const std::string& group = "d4") {
  PlannerConfig c;
  c.variant = variant;
  c.group = variant == Variant::vin ? "none" : group;
  c.k = 2;
  c.f = 3;
  c.cq = 2;
  c.ch = 3;
  c.train_size = 5;
  return c;
}

/// Random model whose value block W^V is non-zero too (init() zeroes it).
inline PlannerModel random_model(const PlannerConfig& config, std::uint64_t seed) {
  PlannerModel m(config);
  m.init(seed);
  std::mt19937_64 rng(seed ^ 0x5eed);
  m.transition().kernel().init_uniform(rng);
  return m;
}

/// Cyclic translation of a map (obstacles and goal).
inline OccupancyMap shift_map(const OccupancyMap& m, int di, int dj) {
  OccupancyMap out(m.rows, m.cols, m.torus);
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) {
      out.set_obstacle((i + di + m.rows) % m.rows, (j + dj + m.cols) % m.cols, m.obstacle(i, j));
    }
  }
  out.goal_row = (m.goal_row + di + m.rows) % m.rows;
  out.goal_col = (m.goal_col + dj + m.cols) % m.cols;
  return out;
}

}  // namespace symplan::testing

#endif  // SYMPLAN_TESTS_TEST_UTIL_HPP
