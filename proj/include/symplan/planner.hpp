// SPDX-License-Identifier: Apache-2.0
/**
 * @file   planner.hpp
 * @brief  Spatial MDPs, the exact value-iteration oracle, and the VIN / SymVIN
 *         planners built on steerable convolutions.
 *
 * Planner graph for a batch of maps M (two trivial channels: obstacle, goal):
 *
 *   H   = conv_F(M)                          hidden, C_H trivial fibers
 *   R   = conv_1x1(H)                        C_Q trivial fibers
 *   V_0 = 0
 *   Q_k = conv_F(concat(R, V_{k-1}))         k = 0..K, kernel [W^R; W^V]
 *   V_k = max over the C_Q blocks of Q_k
 *   logits = conv_1x1(Q_K)
 *
 * A 1x1 equivariant map from trivial to regular fibers is constant over the
 * fiber, so R is kept as C_Q trivial channels; lifting it to the Q type
 * first gives the same function class. The stacked kernel acts blockwise,
 * so conv_F(R; W^R) is computed once and each iteration only convolves V.
 * W^R and W^V are stored as separate parameters; the steerability
 * constraint splits the same way. Q_0 = conv_F(R; W^R), so K = 0 and K = 1
 * agree.
 *
 * VIN is the same graph over the trivial group.
 */
#ifndef SYMPLAN_PLANNER_HPP
#define SYMPLAN_PLANNER_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <span>
#include <string>
#include <vector>

#include "symplan/autodiff.hpp"
#include "symplan/field.hpp"
#include "symplan/steerable.hpp"

namespace symplan {

struct OccupancyMap {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> occupancy;  ///< 1 = obstacle, row-major
  int goal_row = 0;
  int goal_col = 0;
  bool torus = false;

  OccupancyMap() = default;
  OccupancyMap(int rows, int cols, bool torus = false);

  bool obstacle(int i, int j) const { return occupancy[static_cast<std::size_t>(i) * cols + j] != 0; }
  void set_obstacle(int i, int j, bool v) {
    occupancy[static_cast<std::size_t>(i) * cols + j] = v ? 1 : 0;
  }
  bool is_goal(int i, int j) const { return i == goal_row && j == goal_col; }
  int cells() const { return rows * cols; }

  /// Throws std::invalid_argument on an obstacle goal or no free non-goal cell.
  void validate() const;

  friend bool operator==(const OccupancyMap&, const OccupancyMap&) = default;
};

/// Map seen from g: cell x of the result is cell g^-1 x of `map`.
OccupancyMap transform_map(const GroupElement& g, const OccupancyMap& map);

/// Target of action a from (i, j); nullopt when a zero-padded map is left.
std::optional<std::pair<int, int>> step(const OccupancyMap& map, int i, int j, int action);

struct SpatialMDP {
  int rows = 0;
  int cols = 0;
  bool torus = false;
  double gamma = 1.0;
  double step_cost = -1.0;
  double trap_reward = 0.0;
  int goal_row = 0;
  int goal_col = 0;
  std::vector<double> reward;  ///< [cell][action]

  double r(int i, int j, int a) const {
    return reward[(static_cast<std::size_t>(i) * cols + j) * kNumActions + a];
  }
  /// Successor under the obstacle-free transition. Leaving a zero-padded map
  /// keeps the agent in place.
  std::pair<int, int> next(int i, int j, int a) const;
};

/// `trap_reward` defaults to -4 H W when not given.
SpatialMDP build_spatial_mdp(const OccupancyMap& map, double gamma = 1.0, double step_cost = -1.0,
                             std::optional<double> trap_reward = std::nullopt);

/// Rewards as a field over D4 with the four action channels typed by the
/// action representation.
FeatureField reward_field(const SpatialMDP& mdp);

struct ValueIterationResult {
  FeatureField value;                  ///< one trivial D4 channel
  FeatureField q;                      ///< action representation of D4
  std::vector<std::uint8_t> policy;    ///< argmax of q, ties to the lowest action
  int converged_after = -1;            ///< first k with V_k = V_{k-1}, or -1
};

/// V_0 = trap floor, V_k = max(floor, max_a R + gamma V_{k-1}(next)), goal pinned
/// at 0. `history`, when given, receives V_0 .. V_iterations.
ValueIterationResult exact_value_iteration(const SpatialMDP& mdp, int iterations,
                                           std::vector<FeatureField>* history = nullptr);

/// Per-pixel argmax over the channels of a 4-channel field, ties to the
/// lowest index.
std::vector<std::uint8_t> extract_policy(const FeatureField& logits);
std::vector<std::uint8_t> extract_policy(std::span<const double> logits, int cells);

struct RolloutResult {
  bool success = false;
  int steps = 0;
};

/// Greedy rollout with a horizon of H W steps. Hitting an obstacle or leaving
/// a zero-padded map fails.
RolloutResult rollout(std::span<const std::uint8_t> policy, const OccupancyMap& map, int start_row,
                      int start_col);

enum class Variant { vin, symvin };
enum class FiberRep { regular, trivial };

std::string to_string(Variant v);
std::string to_string(FiberRep r);
Variant variant_from_string(const std::string& s);
FiberRep fiber_rep_from_string(const std::string& s);

struct PlannerConfig {
  Variant variant = Variant::symvin;
  std::string group = "d4";  ///< forced to "none" for VIN
  int k = 30;
  int f = 3;
  int cq = 16;
  int ch = 150;
  Padding padding = Padding::zero;
  bool equivariant_head = false;
  FiberRep q_rep = FiberRep::regular;
  FiberRep v_rep = FiberRep::regular;
  int train_size = 15;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
  Group fiber_group() const;
};

/// Field types of every stage of the graph.
struct PlannerTypes {
  FieldType map;
  FieldType hidden;
  FieldType reward;  ///< C_Q trivial fibers
  FieldType q;
  FieldType v;
  FieldType logits;  ///< action representation or four trivial channels
  int copies = 1;    ///< blocks reduced by the max
};

PlannerTypes planner_types(const PlannerConfig& config);

class PlannerModel {
 public:
  /// Zero-initialised kernels.
  explicit PlannerModel(PlannerConfig config);

  /// Uniform initialisation of every kernel from one generator, in
  /// parameter order; the value block W^V is then zeroed.
  void init(std::uint64_t seed);

  const PlannerConfig& config() const { return config_; }
  const PlannerTypes& types() const { return types_; }
  /// Changes K only; parameters are independent of K.
  void set_iterations(int k);

  /// Order: hidden, reward, reward block W^R, value block W^V, policy.
  std::vector<ad::Parameter>& parameters() { return params_; }
  const std::vector<ad::Parameter>& parameters() const { return params_; }
  ad::Parameter& hidden() { return params_[0]; }
  ad::Parameter& reward() { return params_[1]; }
  ad::Parameter& reward_transition() { return params_[2]; }
  ad::Parameter& transition() { return params_[3]; }
  ad::Parameter& policy() { return params_[4]; }
  const ad::Parameter& hidden() const { return params_[0]; }
  const ad::Parameter& reward() const { return params_[1]; }
  const ad::Parameter& reward_transition() const { return params_[2]; }
  const ad::Parameter& transition() const { return params_[3]; }
  const ad::Parameter& policy() const { return params_[4]; }

  std::size_t parameter_count() const;
  void zero_grad();

 private:
  PlannerConfig config_;
  PlannerTypes types_;
  std::vector<ad::Parameter> params_;
};

/// [n, h, w, 2] tensor of (obstacle, goal) indicators. All maps share a shape.
ad::Tensor encode_maps(std::span<const OccupancyMap> maps);

struct ForwardGraph {
  ad::Var logits;
  ad::Var reward;       ///< R
  ad::Var reward_conv;  ///< conv_F(R; W^R) = Q_0
  std::vector<ad::Var> q;  ///< Q_1 .. Q_K (only when recorded)
  std::vector<ad::Var> v;  ///< V_1 .. V_K (only when recorded)
};

/// Records the planner graph on `tape` for a batch of encoded maps.
ForwardGraph build_forward(ad::Tape& tape, PlannerModel& model, const ad::Tensor& maps,
                           bool record_iterations = false);

/// Logits [n, h, w, 4] without recording a graph; keeps only the current V.
ad::Tensor infer_logits(const PlannerModel& model, const ad::Tensor& maps);

struct PlannerTrace {
  std::vector<FeatureField> q;  ///< Q_1 .. Q_K typed by the Q field type
  std::vector<FeatureField> v;  ///< V_1 .. V_K typed by the V field type
  FeatureField logits;          ///< typed by the logits field type
};

/// Single-map forward returning the logits field.
FeatureField planner_forward(const PlannerModel& model, const OccupancyMap& map);
/// Single-map forward keeping every iteration.
PlannerTrace planner_trace(const PlannerModel& model, const OccupancyMap& map);

/// Throw std::invalid_argument unless the model has the named variant.
FeatureField vin_forward(const PlannerModel& model, const OccupancyMap& map);
FeatureField symvin_forward(const PlannerModel& model, const OccupancyMap& map);

/// Re-types a four-channel field by the action representation of `group`
/// (c4 or d4) so it can be transformed.
FeatureField as_action_field(const FeatureField& f, const Group& group);

using LogitsFn = std::function<FeatureField(const OccupancyMap&)>;

struct AuditRow {
  GroupElement element;
  double deviation = 0.0;
};

/// For every grid symmetry g of `group`: max |forward(g.M) - g.forward(M)| with the logits
/// transformed by the action representation. Requires a square map.
std::vector<AuditRow> equivariance_audit(const LogitsFn& forward, const OccupancyMap& map,
                                         const Group& group);
double max_deviation(std::span<const AuditRow> rows);

/// Per-iteration audit of V_k and Q_k over the grid symmetries of the fiber
/// group (the quarter-turn subgroup for C8 and D8):
/// entry k-1 is the max over g of the deviation at iteration k.
std::vector<double> iteration_audit(const PlannerModel& model, const OccupancyMap& map);

/// Checkpoint container, see checkpoint.cpp for the byte layout.
struct TrainState {
  int epochs_done = 0;
  double best_val = -1.0;
  std::vector<std::vector<double>> second_moments;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_checkpoint(const std::string& path, const PlannerModel& model,
                     const TrainState* state = nullptr);
struct LoadedCheckpoint {
  PlannerModel model;
  std::optional<TrainState> state;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace symplan

#endif  // SYMPLAN_PLANNER_HPP
