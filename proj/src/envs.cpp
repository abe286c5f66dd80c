// SPDX-License-Identifier: Apache-2.0
#include "symplan/envs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <string>

namespace symplan {

std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint32_t split, std::uint64_t index,
                             std::uint32_t attempt) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ split);
  h = splitmix64(h ^ index);
  return splitmix64(h ^ attempt);
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  const int span = hi - lo + 1;
  return lo + std::min(span - 1, static_cast<int>(uniform01(rng) * span));
}

std::vector<int> bfs_distances(const OccupancyMap& map) {
  std::vector<int> dist(map.cells(), kUnreachable);
  if (map.obstacle(map.goal_row, map.goal_col)) return dist;
  std::deque<std::pair<int, int>> frontier;
  dist[map.goal_row * map.cols + map.goal_col] = 0;
  frontier.emplace_back(map.goal_row, map.goal_col);
  while (!frontier.empty()) {
    const auto [i, j] = frontier.front();
    frontier.pop_front();
    const int d = dist[i * map.cols + j];
    // Moves are reversible, so neighbours of (i, j) are one step further.
    for (int a = 0; a < kNumActions; ++a) {
      const auto nb = step(map, i, j, a);
      if (!nb || map.obstacle(nb->first, nb->second)) continue;
      int& nd = dist[nb->first * map.cols + nb->second];
      if (nd != kUnreachable) continue;
      nd = d + 1;
      frontier.push_back(*nb);
    }
  }
  return dist;
}

bool is_solvable(const OccupancyMap& map) {
  const auto dist = bfs_distances(map);
  for (int s = 0; s < map.cells(); ++s) {
    if (map.occupancy[s] == 0 && dist[s] == kUnreachable) return false;
  }
  return true;
}

void remove_unreachable(OccupancyMap& map) {
  const auto dist = bfs_distances(map);
  for (int s = 0; s < map.cells(); ++s) {
    if (dist[s] == kUnreachable) map.occupancy[s] = 1;
  }
}

std::vector<std::uint8_t> expert_labels(const OccupancyMap& map) {
  const auto dist = bfs_distances(map);
  std::vector<std::uint8_t> labels(map.cells(), ad::kIgnoreLabel);
  for (int i = 0; i < map.rows; ++i) {
    for (int j = 0; j < map.cols; ++j) {
      const int d = dist[i * map.cols + j];
      if (d <= 0 || map.obstacle(i, j)) continue;
      for (int a = 0; a < kNumActions; ++a) {
        const auto nb = step(map, i, j, a);
        if (!nb) continue;
        const int nd = dist[nb->first * map.cols + nb->second];
        if (nd != kUnreachable && nd < d) {
          labels[i * map.cols + j] = static_cast<std::uint8_t>(a);
          break;
        }
      }
    }
  }
  return labels;
}

namespace {

// Places the goal and fills unreachable cells; false when the attempt is
// degenerate.
bool finish_map(OccupancyMap& map, std::mt19937_64& rng) {
  std::vector<int> free;
  for (int s = 0; s < map.cells(); ++s) {
    if (map.occupancy[s] == 0) free.push_back(s);
  }
  if (free.size() < 2) return false;
  const int goal = free[uniform_int(rng, 0, static_cast<int>(free.size()) - 1)];
  map.goal_row = goal / map.cols;
  map.goal_col = goal % map.cols;
  const auto dist = bfs_distances(map);
  const auto reached = std::count_if(dist.begin(), dist.end(), [](int d) { return d >= 0; });
  if (reached < 2 || 2 * static_cast<std::size_t>(reached) < free.size()) return false;
  remove_unreachable(map);
  return true;
}

}  // namespace

OccupancyMap gen_maze(const MazeSpec& spec, std::uint32_t split, std::uint64_t index) {
  if (spec.size < 3) throw std::invalid_argument("maze size must be at least 3");
  if (!(spec.obstacle_density >= 0.0 && spec.obstacle_density < 1.0)) {
    throw std::invalid_argument("obstacle density must lie in [0, 1)");
  }
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::mt19937_64 rng(substream_seed(spec.seed, split, index, attempt));
    OccupancyMap map(spec.size, spec.size);
    for (auto& cell : map.occupancy) cell = uniform01(rng) < spec.obstacle_density ? 1 : 0;
    if (finish_map(map, rng)) return map;
  }
  throw GenerationError("no usable maze after " + std::to_string(kMaxAttempts) +
                        " attempts (index " + std::to_string(index) + ")");
}

std::size_t BinaryGrid::count() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

BinaryGrid rotate_quarter(const BinaryGrid& grid) {
  if (grid.rows != grid.cols) throw NotAGridSymmetry("quarter turn of a non-square grid");
  BinaryGrid out(grid.rows, grid.cols, grid.torus);
  const int n = grid.rows;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) out.set(n - 1 - j, i, grid.at(i, j));
  }
  return out;
}

namespace {

BinaryGrid workspace_from(const ManipSpec& spec, std::mt19937_64& rng, int num_obstacles) {
  const int res = spec.resolution;
  BinaryGrid ws(res, res);
  const int count = num_obstacles >= 0
                        ? num_obstacles
                        : uniform_int(rng, spec.min_obstacles, spec.max_obstacles);
  const double base = res / 2.0;
  const int max_side = std::min(spec.max_side, res);
  for (int o = 0; o < count; ++o) {
    for (int tries = 0; tries < 100; ++tries) {
      const int h = uniform_int(rng, spec.min_side, max_side);
      const int w = uniform_int(rng, spec.min_side, max_side);
      const int r0 = uniform_int(rng, 0, res - h);
      const int c0 = uniform_int(rng, 0, res - w);
      // Closest point of [r0, r0 + h] x [c0, c0 + w] to the base.
      const double dr = std::clamp(base, double(r0), double(r0 + h)) - base;
      const double dc = std::clamp(base, double(c0), double(c0 + w)) - base;
      if (std::hypot(dr, dc) <= spec.base_clearance) continue;
      for (int i = r0; i < r0 + h; ++i) {
        for (int j = c0; j < c0 + w; ++j) ws.set(i, j, true);
      }
      break;
    }
  }
  return ws;
}

}  // namespace

BinaryGrid gen_workspace(const ManipSpec& spec, std::uint32_t split, std::uint64_t index,
                         int num_obstacles) {
  std::mt19937_64 rng(substream_seed(spec.seed, split, index, 0));
  return workspace_from(spec, rng, num_obstacles);
}

std::pair<double, double> half_bin_direction(int m, int bins) {
  if (bins <= 0 || bins % 2 != 0) throw std::invalid_argument("bins must be even and positive");
  const int turn = 2 * bins;
  const int quarter = bins / 2;
  m = ((m % turn) + turn) % turn;
  const int q = m / quarter;
  const double phi = (m % quarter) * std::numbers::pi / bins;
  double c = std::cos(phi);
  double s = std::sin(phi);
  for (int k = 0; k < q; ++k) {
    const double t = c;
    c = -s;
    s = t;
  }
  return {c, s};
}

BinaryGrid workspace_to_cspace(const BinaryGrid& workspace, int bins, double link1, double link2,
                               int samples_per_link) {
  if (workspace.rows != workspace.cols) throw std::invalid_argument("workspace must be square");
  if (samples_per_link < 2) throw std::invalid_argument("need at least two samples per link");
  const int res = workspace.rows;
  const int base = res / 2;
  auto hits = [&](double u, double w) {
    const int i = base + static_cast<int>(std::floor(u));
    const int j = base + static_cast<int>(std::floor(w));
    return i >= 0 && i < res && j >= 0 && j < res && workspace.at(i, j);
  };
  // Offsets (u, w) = (row, col) relative to the base; rows grow downward, so
  // a counterclockwise angle theta points along (-sin, cos).
  auto link_hits = [&](double u0, double w0, double c, double s, double length) {
    for (int k = 0; k < samples_per_link; ++k) {
      const double t = length * k / (samples_per_link - 1);
      if (hits(u0 + t * -s, w0 + t * c)) return true;
    }
    return false;
  };
  BinaryGrid cs(bins, bins, true);
  for (int b1 = 0; b1 < bins; ++b1) {
    const int m1 = 2 * b1 + 1;
    const auto [c1, s1] = half_bin_direction(m1, bins);
    if (link_hits(0.0, 0.0, c1, s1, link1)) {
      for (int b2 = 0; b2 < bins; ++b2) cs.set(b1, b2, true);
      continue;
    }
    const double ue = link1 * -s1;
    const double we = link1 * c1;
    for (int b2 = 0; b2 < bins; ++b2) {
      const auto [c12, s12] = half_bin_direction(m1 + 2 * b2 + 1, bins);
      cs.set(b1, b2, link_hits(ue, we, c12, s12, link2));
    }
  }
  return cs;
}

OccupancyMap gen_manip_map(const ManipSpec& spec, std::uint32_t split, std::uint64_t index) {
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::mt19937_64 rng(substream_seed(spec.seed, split, index, attempt));
    const BinaryGrid ws = workspace_from(spec, rng, -1);
    const BinaryGrid cs =
        workspace_to_cspace(ws, spec.bins, spec.link1, spec.link2, spec.samples_per_link);
    OccupancyMap map(spec.bins, spec.bins, true);
    map.occupancy = cs.cells;
    if (finish_map(map, rng)) return map;
  }
  throw GenerationError("no usable configuration space after " + std::to_string(kMaxAttempts) +
                        " attempts (index " + std::to_string(index) + ")");
}

}  // namespace symplan
