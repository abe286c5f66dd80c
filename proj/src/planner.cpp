// SPDX-License-Identifier: Apache-2.0
#include "symplan/planner.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "conv_gemm.hpp"

namespace symplan {

OccupancyMap::OccupancyMap(int r, int c, bool wrap)
    : rows(r), cols(c), occupancy(static_cast<std::size_t>(r) * c, 0), torus(wrap) {
  if (r <= 0 || c <= 0) throw std::invalid_argument("map must have positive extent");
}

void OccupancyMap::validate() const {
  if (rows <= 0 || cols <= 0 || occupancy.size() != static_cast<std::size_t>(rows) * cols) {
    throw std::invalid_argument("map storage does not match its extent");
  }
  if (goal_row < 0 || goal_row >= rows || goal_col < 0 || goal_col >= cols) {
    throw std::invalid_argument("goal outside the map");
  }
  if (obstacle(goal_row, goal_col)) throw std::invalid_argument("goal cell is an obstacle");
  const auto free = std::count(occupancy.begin(), occupancy.end(), std::uint8_t{0});
  if (free < 2) throw std::invalid_argument("map has no free cell besides the goal");
}

OccupancyMap transform_map(const GroupElement& g, const OccupancyMap& map) {
  OccupancyMap out(map.rows, map.cols, map.torus);
  const GroupElement g_inv = inverse(g);
  for (int i = 0; i < map.rows; ++i) {
    for (int j = 0; j < map.cols; ++j) {
      const auto [si, sj] = grid_action(g_inv, i, j, map.rows, map.cols);
      out.set_obstacle(i, j, map.obstacle(si, sj));
    }
  }
  const auto [gi, gj] = grid_action(g, map.goal_row, map.goal_col, map.rows, map.cols);
  out.goal_row = gi;
  out.goal_col = gj;
  return out;
}

std::optional<std::pair<int, int>> step(const OccupancyMap& map, int i, int j, int action) {
  const auto [di, dj] = displacement(action);
  int ni = i + di;
  int nj = j + dj;
  if (map.torus) {
    ni = (ni + map.rows) % map.rows;
    nj = (nj + map.cols) % map.cols;
  } else if (ni < 0 || ni >= map.rows || nj < 0 || nj >= map.cols) {
    return std::nullopt;
  }
  return std::pair{ni, nj};
}

std::pair<int, int> SpatialMDP::next(int i, int j, int a) const {
  const auto [di, dj] = displacement(a);
  int ni = i + di;
  int nj = j + dj;
  if (torus) return {(ni + rows) % rows, (nj + cols) % cols};
  if (ni < 0 || ni >= rows || nj < 0 || nj >= cols) return {i, j};
  return {ni, nj};
}

SpatialMDP build_spatial_mdp(const OccupancyMap& map, double gamma, double step_cost,
                             std::optional<double> trap_reward) {
  map.validate();
  SpatialMDP mdp;
  mdp.rows = map.rows;
  mdp.cols = map.cols;
  mdp.torus = map.torus;
  mdp.gamma = gamma;
  mdp.step_cost = step_cost;
  mdp.trap_reward = trap_reward.value_or(-4.0 * map.rows * map.cols);
  mdp.goal_row = map.goal_row;
  mdp.goal_col = map.goal_col;
  mdp.reward.assign(static_cast<std::size_t>(map.cells()) * kNumActions, 0.0);
  for (int i = 0; i < map.rows; ++i) {
    for (int j = 0; j < map.cols; ++j) {
      if (map.is_goal(i, j)) continue;
      for (int a = 0; a < kNumActions; ++a) {
        const auto target = step(map, i, j, a);
        const bool trap = !target || map.obstacle(target->first, target->second);
        mdp.reward[(static_cast<std::size_t>(i) * map.cols + j) * kNumActions + a] =
            trap ? mdp.trap_reward : step_cost;
      }
    }
  }
  return mdp;
}

namespace {

const Group& d4() {
  static const Group g(GroupKind::dihedral, 4);
  return g;
}

FieldType d4_action_type() {
  return FieldType(d4(), {action_representation(d4())});
}

FieldType d4_scalar_type() {
  return FieldType(d4(), {Representation::trivial(d4())});
}

}  // namespace

FeatureField reward_field(const SpatialMDP& mdp) {
  return FeatureField(mdp.rows, mdp.cols, d4_action_type(), mdp.reward);
}

ValueIterationResult exact_value_iteration(const SpatialMDP& mdp, int iterations,
                                           std::vector<FeatureField>* history) {
  const int cells = mdp.rows * mdp.cols;
  const int goal = mdp.goal_row * mdp.cols + mdp.goal_col;
  const double floor = mdp.trap_reward;
  std::vector<double> v(cells, floor);
  v[goal] = 0.0;
  auto snapshot = [&] {
    if (history) history->emplace_back(mdp.rows, mdp.cols, d4_scalar_type(), v);
  };
  snapshot();
  ValueIterationResult res;
  std::vector<double> next_v(cells);
  for (int k = 1; k <= iterations; ++k) {
    for (int i = 0; i < mdp.rows; ++i) {
      for (int j = 0; j < mdp.cols; ++j) {
        const int s = i * mdp.cols + j;
        if (s == goal) {
          next_v[s] = 0.0;
          continue;
        }
        double best = floor;
        for (int a = 0; a < kNumActions; ++a) {
          const auto [ni, nj] = mdp.next(i, j, a);
          best = std::max(best, mdp.r(i, j, a) + mdp.gamma * v[ni * mdp.cols + nj]);
        }
        next_v[s] = best;
      }
    }
    const bool same = next_v == v;
    v.swap(next_v);
    snapshot();
    if (same && res.converged_after < 0) res.converged_after = k;
  }
  res.value = FeatureField(mdp.rows, mdp.cols, d4_scalar_type(), v);
  res.q = FeatureField(mdp.rows, mdp.cols, d4_action_type());
  for (int i = 0; i < mdp.rows; ++i) {
    for (int j = 0; j < mdp.cols; ++j) {
      if (i * mdp.cols + j == goal) continue;
      for (int a = 0; a < kNumActions; ++a) {
        const auto [ni, nj] = mdp.next(i, j, a);
        res.q.at(i, j, a) = mdp.r(i, j, a) + mdp.gamma * v[ni * mdp.cols + nj];
      }
    }
  }
  res.policy = extract_policy(res.q);
  return res;
}

std::vector<std::uint8_t> extract_policy(std::span<const double> logits, int cells) {
  if (logits.size() != static_cast<std::size_t>(cells) * kNumActions) {
    throw ShapeMismatch("extract_policy: expected four channels per cell");
  }
  std::vector<std::uint8_t> policy(cells);
  for (int s = 0; s < cells; ++s) {
    const double* z = logits.data() + static_cast<std::size_t>(s) * kNumActions;
    policy[s] = static_cast<std::uint8_t>(std::max_element(z, z + kNumActions) - z);
  }
  return policy;
}

std::vector<std::uint8_t> extract_policy(const FeatureField& logits) {
  if (logits.channels() != kNumActions) {
    throw ShapeMismatch("extract_policy: field has " + std::to_string(logits.channels()) +
                        " channels, expected 4");
  }
  return extract_policy(logits.data(), logits.rows() * logits.cols());
}

RolloutResult rollout(std::span<const std::uint8_t> policy, const OccupancyMap& map, int start_row,
                      int start_col) {
  RolloutResult res;
  int i = start_row;
  int j = start_col;
  const int horizon = map.cells();
  while (!map.is_goal(i, j)) {
    if (res.steps >= horizon) return res;
    const int a = policy[static_cast<std::size_t>(i) * map.cols + j];
    if (a >= kNumActions) return res;
    const auto target = step(map, i, j, a);
    if (!target) return res;
    std::tie(i, j) = *target;
    ++res.steps;
    if (map.obstacle(i, j)) return res;
  }
  res.success = true;
  return res;
}

std::string to_string(Variant v) {
  return v == Variant::vin ? "vin" : "symvin";
}

std::string to_string(FiberRep r) {
  return r == FiberRep::regular ? "regular" : "trivial";
}

Variant variant_from_string(const std::string& s) {
  if (s == "vin") return Variant::vin;
  if (s == "symvin") return Variant::symvin;
  throw std::invalid_argument("unknown model '" + s + "' (expected vin or symvin)");
}

FiberRep fiber_rep_from_string(const std::string& s) {
  if (s == "regular") return FiberRep::regular;
  if (s == "trivial") return FiberRep::trivial;
  throw std::invalid_argument("unknown fiber representation '" + s +
                              "' (expected regular or trivial)");
}

Group PlannerConfig::fiber_group() const {
  if (variant == Variant::vin) return Group::trivial();
  return Group::from_token(group);
}

void PlannerConfig::validate() const {
  if (k < 0) throw std::invalid_argument("K must be non-negative");
  if (f <= 0 || f % 2 == 0) throw std::invalid_argument("kernel size must be odd and positive");
  if (cq <= 0 || ch <= 0) throw std::invalid_argument("channel counts must be positive");
  if (train_size <= 0) throw std::invalid_argument("train size must be positive");
  const Group g = fiber_group();
  if (variant == Variant::symvin && g.is_trivial()) {
    throw std::invalid_argument("symvin needs a non-trivial group");
  }
  if (q_rep == FiberRep::trivial && v_rep == FiberRep::regular) {
    throw std::invalid_argument("a regular V field cannot be reduced from trivial Q fibers");
  }
  if (equivariant_head) {
    if (variant != Variant::symvin) {
      throw std::invalid_argument("the equivariant policy head needs symvin");
    }
    action_representation(g);
  }
}

PlannerTypes planner_types(const PlannerConfig& config) {
  config.validate();
  const Group g = config.fiber_group();
  const Representation triv = Representation::trivial(g);
  const bool regular_q = config.variant == Variant::symvin && config.q_rep == FiberRep::regular;
  const Representation qrep = regular_q ? Representation::regular(g) : triv;
  PlannerTypes t;
  t.map = FieldType::repeated(triv, 2);
  t.hidden = FieldType::repeated(triv, config.ch);
  t.reward = FieldType::repeated(triv, config.cq);
  t.q = FieldType::repeated(qrep, config.cq);
  if (regular_q && config.v_rep == FiberRep::regular) {
    t.v = FieldType::repeated(qrep, 1);
    t.copies = config.cq;
  } else {
    t.v = FieldType::repeated(triv, 1);
    t.copies = t.q.total_dim();
  }
  if (config.equivariant_head) {
    t.logits = FieldType(g, {action_representation(g)});
  } else {
    t.logits = FieldType::repeated(Representation::trivial(Group::trivial()), kNumActions);
  }
  return t;
}

PlannerModel::PlannerModel(PlannerConfig config)
    : config_(std::move(config)), types_(planner_types(config_)) {
  if (config_.variant == Variant::vin) config_.group = "none";
  const int f = config_.f;
  params_.emplace_back("hidden", SteerableKernel(types_.map, types_.hidden, f));
  params_.emplace_back("reward", SteerableKernel(types_.hidden, types_.reward, 1));
  params_.emplace_back("reward_transition", SteerableKernel(types_.reward, types_.q, f));
  params_.emplace_back("transition", SteerableKernel(types_.v, types_.q, f));
  if (config_.equivariant_head) {
    params_.emplace_back("policy", SteerableKernel(types_.q, types_.logits, 1));
  } else {
    const FieldType flat =
        FieldType::repeated(Representation::trivial(Group::trivial()), types_.q.total_dim());
    params_.emplace_back("policy", SteerableKernel(flat, types_.logits, 1));
  }
}

void PlannerModel::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : params_) {
    p.kernel().init_uniform(rng);
    p.zero_grad();
  }
  // W^V starts at zero so the K-fold recurrence neither explodes nor
  // vanishes before training.
  SteerableKernel& t = transition().kernel();
  t.set_raw(std::vector<double>(t.parameter_count(), 0.0));
}

void PlannerModel::set_iterations(int k) {
  if (k < 0) throw std::invalid_argument("K must be non-negative");
  config_.k = k;
}

std::size_t PlannerModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.kernel().parameter_count();
  return n;
}

void PlannerModel::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

ad::Tensor encode_maps(std::span<const OccupancyMap> maps) {
  if (maps.empty()) throw ShapeMismatch("encode_maps: empty batch");
  const int h = maps[0].rows;
  const int w = maps[0].cols;
  ad::Tensor t(ad::Shape{static_cast<int>(maps.size()), h, w, 2});
  for (std::size_t b = 0; b < maps.size(); ++b) {
    const OccupancyMap& m = maps[b];
    if (m.rows != h || m.cols != w) throw ShapeMismatch("encode_maps: maps differ in size");
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        t.at(static_cast<int>(b), i, j, 0) = m.obstacle(i, j) ? 1.0 : 0.0;
        t.at(static_cast<int>(b), i, j, 1) = m.is_goal(i, j) ? 1.0 : 0.0;
      }
    }
  }
  return t;
}

ForwardGraph build_forward(ad::Tape& tape, PlannerModel& model, const ad::Tensor& maps,
                           bool record_iterations) {
  const PlannerConfig& cfg = model.config();
  if (maps.shape.c != 2) throw ShapeMismatch("planner input must have two channels");
  ForwardGraph out;
  const ad::Var x = tape.input(maps);
  const ad::Var h = tape.conv2d(tape.param(model.hidden()), x, cfg.padding);
  out.reward = tape.conv1x1(tape.param(model.reward()), h);
  out.reward_conv = tape.conv2d(tape.param(model.reward_transition()), out.reward, cfg.padding);
  ad::Var q = out.reward_conv;
  if (cfg.k > 0) {
    const ad::Var t = tape.param(model.transition());
    ad::Var v = tape.block_max(q, model.types().copies);
    if (record_iterations) {
      out.q.push_back(q);
      out.v.push_back(v);
    }
    for (int k = 2; k <= cfg.k; ++k) {
      q = tape.add(out.reward_conv, tape.conv2d(t, v, cfg.padding));
      v = tape.block_max(q, model.types().copies);
      if (record_iterations) {
        out.q.push_back(q);
        out.v.push_back(v);
      }
    }
  }
  out.logits = tape.conv1x1(tape.param(model.policy()), q);
  return out;
}

namespace {

using detail::ConvGeometry;

std::vector<double> run_conv(const SteerableKernel& k, const ad::Shape& s,
                             const std::vector<double>& x, Padding padding) {
  ConvGeometry g;
  g.n = s.n;
  g.h = s.h;
  g.w = s.w;
  g.c_in = k.in_dim();
  g.c_out = k.out_dim();
  g.size = k.size();
  g.padding = padding;
  std::vector<double> out(static_cast<std::size_t>(g.pixels()) * g.c_out);
  detail::conv_forward(g, x.data(), k.projected().data(), out.data());
  return out;
}

// Same comparison order as the tape so results agree bitwise.
void block_max_into(const std::vector<double>& q, int channels, int copies,
                    std::vector<double>& v) {
  const int block = channels / copies;
  const std::size_t pixels = q.size() / channels;
  v.resize(pixels * block);
  for (std::size_t px = 0; px < pixels; ++px) {
    const double* src = q.data() + px * channels;
    double* dst = v.data() + px * block;
    std::copy_n(src, block, dst);
    for (int m = 1; m < copies; ++m) {
      const double* blk = src + static_cast<std::size_t>(m) * block;
      for (int c = 0; c < block; ++c) {
        if (blk[c] > dst[c]) dst[c] = blk[c];
      }
    }
  }
}

// Direct forward pass; `trace` (n = 1 only) receives every iteration.
ad::Tensor forward_direct(const PlannerModel& model, const ad::Tensor& maps,
                          PlannerTrace* trace) {
  const PlannerConfig& cfg = model.config();
  const PlannerTypes& types = model.types();
  if (maps.shape.c != 2) throw ShapeMismatch("planner input must have two channels");
  ad::Shape s = maps.shape;
  const std::vector<double> h = run_conv(model.hidden().kernel(), s, maps.data, cfg.padding);
  const std::vector<double> r = run_conv(model.reward().kernel(), s, h, Padding::zero);
  const int qc = types.q.total_dim();
  const std::vector<double> rc = run_conv(model.reward_transition().kernel(), s, r, cfg.padding);
  std::vector<double> q = rc;
  std::vector<double> v;
  auto record = [&] {
    if (!trace) return;
    trace->q.emplace_back(s.h, s.w, types.q, q, cfg.padding);
    trace->v.emplace_back(s.h, s.w, types.v, v, cfg.padding);
  };
  if (cfg.k > 0) {
    block_max_into(q, qc, types.copies, v);
    record();
    for (int k = 2; k <= cfg.k; ++k) {
      const std::vector<double> tv = run_conv(model.transition().kernel(), s, v, cfg.padding);
      for (std::size_t i = 0; i < q.size(); ++i) q[i] = rc[i] + tv[i];
      block_max_into(q, qc, types.copies, v);
      record();
    }
  }
  s.c = kNumActions;
  ad::Tensor logits(s, run_conv(model.policy().kernel(), maps.shape, q, Padding::zero));
  if (trace) {
    trace->logits = FeatureField(s.h, s.w, types.logits, logits.data, cfg.padding);
  }
  return logits;
}

}  // namespace

ad::Tensor infer_logits(const PlannerModel& model, const ad::Tensor& maps) {
  return forward_direct(model, maps, nullptr);
}

FeatureField planner_forward(const PlannerModel& model, const OccupancyMap& map) {
  const ad::Tensor x = encode_maps(std::span(&map, 1));
  ad::Tensor logits = forward_direct(model, x, nullptr);
  return FeatureField(map.rows, map.cols, model.types().logits, std::move(logits.data),
                      model.config().padding);
}

PlannerTrace planner_trace(const PlannerModel& model, const OccupancyMap& map) {
  PlannerTrace trace;
  forward_direct(model, encode_maps(std::span(&map, 1)), &trace);
  return trace;
}

FeatureField vin_forward(const PlannerModel& model, const OccupancyMap& map) {
  if (model.config().variant != Variant::vin) {
    throw std::invalid_argument("vin_forward called with a symvin model");
  }
  return planner_forward(model, map);
}

FeatureField symvin_forward(const PlannerModel& model, const OccupancyMap& map) {
  if (model.config().variant != Variant::symvin) {
    throw std::invalid_argument("symvin_forward called with a vin model");
  }
  return planner_forward(model, map);
}

FeatureField as_action_field(const FeatureField& f, const Group& group) {
  if (f.channels() != kNumActions) {
    throw ShapeMismatch("as_action_field: expected four channels");
  }
  return FeatureField(f.rows(), f.cols(), FieldType(group, {action_representation(group)}),
                      f.data(), f.padding_hint());
}

namespace {

std::vector<GroupElement> grid_symmetries(const Group& group) {
  std::vector<GroupElement> out;
  for (const auto& g : elements(group)) {
    if (g.quarter_turns()) out.push_back(g);
  }
  return out;
}

}  // namespace

std::vector<AuditRow> equivariance_audit(const LogitsFn& forward, const OccupancyMap& map,
                                         const Group& group) {
  if (map.rows != map.cols) throw NotAGridSymmetry("equivariance audit needs a square map");
  const FeatureField base = as_action_field(forward(map), group);
  std::vector<AuditRow> rows;
  for (const auto& g : grid_symmetries(group)) {
    const FeatureField lhs = as_action_field(forward(transform_map(g, map)), group);
    rows.push_back({g, max_abs_diff(lhs, transform_field(g, base))});
  }
  return rows;
}

double max_deviation(std::span<const AuditRow> rows) {
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, r.deviation);
  return worst;
}

std::vector<double> iteration_audit(const PlannerModel& model, const OccupancyMap& map) {
  if (map.rows != map.cols) throw NotAGridSymmetry("iteration audit needs a square map");
  const PlannerTrace base = planner_trace(model, map);
  std::vector<double> worst(base.v.size(), 0.0);
  for (const auto& g : grid_symmetries(model.config().fiber_group())) {
    const PlannerTrace moved = planner_trace(model, transform_map(g, map));
    for (std::size_t k = 0; k < base.v.size(); ++k) {
      const double dv = max_abs_diff(moved.v[k], transform_field(g, base.v[k]));
      const double dq = max_abs_diff(moved.q[k], transform_field(g, base.q[k]));
      worst[k] = std::max({worst[k], dv, dq});
    }
  }
  return worst;
}

}  // namespace symplan
