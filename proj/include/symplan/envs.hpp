// SPDX-License-Identifier: Apache-2.0
/**
 * @file   envs.hpp
 * @brief  Random mazes, two-link manipulator configuration spaces, and BFS
 *         expert labels.
 *
 * Every generator is a pure function of (seed, split, index): the substream
 * seed is derived with splitmix64 and drives a std::mt19937_64.
 */
#ifndef SYMPLAN_ENVS_HPP
#define SYMPLAN_ENVS_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "symplan/planner.hpp"

namespace symplan {

inline constexpr int kUnreachable = -1;

std::uint64_t splitmix64(std::uint64_t x);
/// Independent seed for one generation attempt of one map.
std::uint64_t substream_seed(std::uint64_t seed, std::uint32_t split, std::uint64_t index,
                             std::uint32_t attempt);
/// 53-bit uniform in [0, 1).
double uniform01(std::mt19937_64& rng);
/// Uniform integer in [lo, hi].
int uniform_int(std::mt19937_64& rng, int lo, int hi);

/// Shortest 4-connected path lengths to the goal over free cells (wrapping
/// on torus maps); kUnreachable elsewhere, 0 at the goal.
std::vector<int> bfs_distances(const OccupancyMap& map);

/// True when every free cell reaches the goal.
bool is_solvable(const OccupancyMap& map);

/// Turns free cells that cannot reach the goal into obstacles.
void remove_unreachable(OccupancyMap& map);

/// First action in (N, W, S, E) order stepping to a strictly closer cell;
/// kIgnoreLabel on obstacles, the goal, and unreachable cells.
std::vector<std::uint8_t> expert_labels(const OccupancyMap& map);

struct MazeSpec {
  int size = 15;
  double obstacle_density = 0.3;
  std::uint64_t seed = 0;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxAttempts = 64;

/// i.i.d. obstacles, goal uniform over free cells, unreachable cells
/// filled. An attempt is rejected when the goal's component holds fewer than
/// half of the free cells or no cell besides the goal; after kMaxAttempts
/// rejections GenerationError is thrown.
OccupancyMap gen_maze(const MazeSpec& spec, std::uint32_t split = 0, std::uint64_t index = 0);

/// Square occupancy grid; torus marks wrap-around adjacency.
struct BinaryGrid {
  int rows = 0;
  int cols = 0;
  bool torus = false;
  std::vector<std::uint8_t> cells;

  BinaryGrid() = default;
  BinaryGrid(int r, int c, bool wrap = false)
      : rows(r), cols(c), torus(wrap), cells(static_cast<std::size_t>(r) * c, 0) {}
  bool at(int i, int j) const { return cells[static_cast<std::size_t>(i) * cols + j] != 0; }
  void set(int i, int j, bool v) { cells[static_cast<std::size_t>(i) * cols + j] = v ? 1 : 0; }
  std::size_t count() const;

  friend bool operator==(const BinaryGrid&, const BinaryGrid&) = default;
};

/// Quarter-turn counterclockwise rotation about the grid centre.
BinaryGrid rotate_quarter(const BinaryGrid& grid);

struct ManipSpec {
  int resolution = 96;
  int min_obstacles = 0;
  int max_obstacles = 5;
  int bins = 18;
  double link1 = 24.0;
  double link2 = 24.0;
  double base_clearance = 8.0;  ///< radius of the obstacle-free disk at the base
  int min_side = 6;
  int max_side = 24;
  int samples_per_link = 256;
  std::uint64_t seed = 0;
};

/// Rectangles placed uniformly, rejected when they reach into the base disk.
/// `num_obstacles` < 0 draws the count uniformly from [min_obstacles, max_obstacles].
BinaryGrid gen_workspace(const ManipSpec& spec, std::uint32_t split = 0, std::uint64_t index = 0,
                         int num_obstacles = -1);

/// Unit direction of the bin-centre angle of half-bin index m (angle m pi / bins).
/// Quadrants are reduced exactly, so m and m + bins / 2 differ by an exact
/// quarter turn.
std::pair<double, double> half_bin_direction(int m, int bins);

/// Configuration space of the arm with its base at the workspace centre:
/// rows index theta1, columns index theta2 (relative to link 1), bin centres
/// at (b + 1/2) 360 / bins degrees, counterclockwise from east. A cell is
/// occupied when a sample point of either link lies in an obstacle cell.
BinaryGrid workspace_to_cspace(const BinaryGrid& workspace, int bins, double link1, double link2,
                               int samples_per_link = 256);

/// C-space map on the torus with a goal and unreachable cells filled, using
/// the same rejection rule as gen_maze.
OccupancyMap gen_manip_map(const ManipSpec& spec, std::uint32_t split = 0, std::uint64_t index = 0);

}  // namespace symplan

#endif  // SYMPLAN_ENVS_HPP
