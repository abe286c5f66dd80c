// SPDX-License-Identifier: Apache-2.0
#include "symplan/group.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace symplan {

namespace {

int mod(int a, int n) { return ((a % n) + n) % n; }

void require_same_group(const Group& a, const Group& b, const char* what) {
  if (!(a == b)) {
    throw GroupMismatch(std::string(what) + ": operands belong to " + a.token() +
                        " and " + b.token());
  }
}

// Square ring of radius rho, indexed counterclockwise starting at (0, rho).
int ring_index(int di, int dj, int rho) {
  if (dj == rho && di <= 0) return -di;
  if (di == -rho) return rho + (rho - dj);
  if (dj == -rho) return 3 * rho + (di + rho);
  if (di == rho) return 5 * rho + (dj + rho);
  return 7 * rho + (rho - di);
}

std::pair<int, int> ring_offset(int index, int rho) {
  const int t = mod(index, 8 * rho);
  if (t <= rho) return {-t, rho};
  if (t <= 3 * rho) return {-rho, rho - (t - rho)};
  if (t <= 5 * rho) return {-rho + (t - 3 * rho), -rho};
  if (t <= 7 * rho) return {rho, -rho + (t - 5 * rho)};
  return {rho - (t - 7 * rho), rho};
}

}  // namespace

Group::Group(GroupKind k, int rotation_order) : kind(k), n(rotation_order) {
  if (n != 1 && n != 2 && n != 4 && n != 8) {
    throw std::invalid_argument("rotation order must be 1, 2, 4 or 8, got " +
                                std::to_string(n));
  }
  if (kind == GroupKind::dihedral && n == 1) {
    throw std::invalid_argument("D1 is not supported");
  }
}

Group Group::from_token(const std::string& token) {
  if (token == "none" || token == "c1") return trivial();
  if (token.size() == 2 && (token[0] == 'c' || token[0] == 'd')) {
    const int n = token[1] - '0';
    if (n == 2 || n == 4 || n == 8) {
      return Group(token[0] == 'c' ? GroupKind::cyclic : GroupKind::dihedral, n);
    }
  }
  throw std::invalid_argument("unknown group token '" + token +
                              "' (expected none, c2, c4, c8, d2, d4, d8)");
}

std::string Group::token() const {
  if (is_trivial()) return "none";
  return std::string(kind == GroupKind::cyclic ? "c" : "d") + std::to_string(n);
}

std::optional<int> GroupElement::quarter_turns() const {
  if ((rotation * 4) % group.n != 0) return std::nullopt;
  return rotation * 4 / group.n;
}

std::string to_string(const GroupElement& g) {
  if (g.is_identity()) return "e";
  std::ostringstream os;
  if (g.rotation != 0) {
    os << "r";
    if (g.rotation > 1) os << "^" << g.rotation;
  }
  if (g.reflected) os << "s";
  return os.str();
}

GroupElement identity(const Group& group) { return GroupElement{group, 0, false}; }

GroupElement rotation_generator(const Group& group) {
  return GroupElement{group, group.n > 1 ? 1 : 0, false};
}

GroupElement reflection_generator(const Group& group) {
  if (group.kind != GroupKind::dihedral) {
    throw std::invalid_argument("cyclic group " + group.token() + " has no reflection");
  }
  return GroupElement{group, 0, true};
}

std::vector<GroupElement> elements(const Group& group) {
  std::vector<GroupElement> out;
  out.reserve(static_cast<std::size_t>(group.order()));
  for (int k = 0; k < group.n; ++k) out.push_back(GroupElement{group, k, false});
  if (group.kind == GroupKind::dihedral) {
    for (int k = 0; k < group.n; ++k) out.push_back(GroupElement{group, k, true});
  }
  return out;
}

// (r^a s^f)(r^b s^e) = r^(a + (-1)^f b) s^(f + e), using s r = r^-1 s.
GroupElement compose(const GroupElement& g, const GroupElement& h) {
  require_same_group(g.group, h.group, "compose");
  const int n = g.group.n;
  const int b = g.reflected ? -h.rotation : h.rotation;
  return GroupElement{g.group, mod(g.rotation + b, n), g.reflected != h.reflected};
}

GroupElement inverse(const GroupElement& g) {
  if (g.reflected) return g;
  return GroupElement{g.group, mod(-g.rotation, g.group.n), false};
}

std::pair<int, int> displacement(int direction) {
  switch (direction) {
    case north: return {-1, 0};
    case west: return {0, -1};
    case south: return {1, 0};
    case east: return {0, 1};
    default: throw std::out_of_range("direction index must be in [0, 4)");
  }
}

std::pair<int, int> rotate_offset(const GroupElement& g, int di, int dj) {
  const auto q = g.quarter_turns();
  if (!q) throw NotAGridSymmetry(to_string(g) + " in " + g.group.token() +
                                 " is not a quarter-turn symmetry");
  if (g.reflected) dj = -dj;
  for (int t = 0; t < *q; ++t) {
    const int ni = -dj;
    dj = di;
    di = ni;
  }
  return {di, dj};
}

int action_on_actions(const GroupElement& g, int direction) {
  const auto [di, dj] = displacement(direction);
  const auto moved = rotate_offset(g, di, dj);
  for (int a = 0; a < kNumActions; ++a) {
    if (displacement(a) == moved) return a;
  }
  throw std::logic_error("rotated displacement is not a unit move");
}

std::pair<int, int> grid_action(const GroupElement& g, int i, int j, int rows,
                                int cols) {
  if (i < 0 || i >= rows || j < 0 || j >= cols) {
    throw std::out_of_range("grid index outside the array");
  }
  const auto q = g.quarter_turns();
  if (!q) throw NotAGridSymmetry(to_string(g) + " does not map grid cells to grid cells");
  if ((*q % 2 == 1) && rows != cols) {
    throw NotAGridSymmetry("quarter-turn rotation requires a square grid");
  }
  if (g.reflected) j = cols - 1 - j;
  switch (*q) {
    case 0: return {i, j};
    case 1: return {rows - 1 - j, i};
    case 2: return {rows - 1 - i, cols - 1 - j};
    default: return {j, cols - 1 - i};
  }
}

std::pair<int, int> kernel_offset_action(const GroupElement& g, int di, int dj) {
  const int rho = std::max(std::abs(di), std::abs(dj));
  if (rho == 0) return {0, 0};
  if (g.reflected) dj = -dj;
  const int step = g.rotation * (8 * rho / g.group.n);
  return ring_offset(ring_index(di, dj, rho) + step, rho);
}

Representation Representation::trivial(const Group& g) {
  return Representation{RepKind::trivial, g, 1, std::nullopt};
}

Representation Representation::regular(const Group& g) {
  return Representation{RepKind::regular, g, g.order(), std::nullopt};
}

Representation Representation::quotient(const Group& g, const GroupElement& reflection) {
  if (g.kind != GroupKind::dihedral) {
    throw std::invalid_argument("quotient representation needs a dihedral group");
  }
  require_same_group(g, reflection.group, "quotient");
  if (!reflection.reflected) {
    throw std::invalid_argument("quotient subgroup must be generated by a reflection");
  }
  return Representation{RepKind::quotient, g, g.n, reflection};
}

Representation Representation::standard(const Group& g) {
  return Representation{RepKind::standard, g, 2, std::nullopt};
}

std::vector<int> Representation::permutation(const GroupElement& g) const {
  require_same_group(group, g.group, "rep_matrix");
  std::vector<int> perm(static_cast<std::size_t>(dim));
  switch (kind) {
    case RepKind::trivial:
      perm[0] = 0;
      break;
    case RepKind::regular:
      for (const auto& h : elements(group)) perm[h.index()] = compose(g, h).index();
      break;
    case RepKind::quotient: {
      // cosets r^k H with H = {e, t}, t = r^a s
      const int a = quotient_reflection->rotation;
      for (int k = 0; k < group.n; ++k) {
        const auto gk = compose(g, GroupElement{group, k, false});
        perm[k] = gk.reflected ? mod(gk.rotation - a, group.n) : gk.rotation;
      }
      break;
    }
    case RepKind::standard:
      throw std::logic_error("standard representation is not a permutation");
  }
  return perm;
}

Eigen::MatrixXd Representation::matrix(const GroupElement& g) const {
  require_same_group(group, g.group, "rep_matrix");
  if (kind == RepKind::standard) {
    const double theta = 2.0 * std::numbers::pi * g.rotation / group.n;
    Eigen::Matrix2d rot;
    rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    // quarter turns are exact
    if (auto q = g.quarter_turns()) {
      static const int c[4] = {1, 0, -1, 0};
      static const int s[4] = {0, 1, 0, -1};
      rot << c[*q], -s[*q], s[*q], c[*q];
    }
    Eigen::Matrix2d flip = Eigen::Matrix2d::Identity();
    if (g.reflected) flip(0, 0) = -1.0;
    return rot * flip;
  }
  const auto perm = permutation(g);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) m(perm[k], k) = 1.0;
  return m;
}

GroupElement action_quotient_reflection(const Group& group) {
  if (group.kind != GroupKind::dihedral || group.n != 4) {
    throw std::invalid_argument("action quotient is defined for D4 only");
  }
  for (int a = 0; a < group.n; ++a) {
    const GroupElement t{group, a, true};
    const auto rep = Representation::quotient(group, t);
    bool consistent = true;
    for (const auto& g : elements(group)) {
      const auto perm = rep.permutation(g);
      for (int d = 0; d < kNumActions; ++d) {
        consistent = consistent && perm[d] == action_on_actions(g, d);
      }
    }
    if (consistent) return t;
  }
  throw std::logic_error("no reflection subgroup matches the action ordering");
}

Representation action_representation(const Group& group) {
  if (group.kind == GroupKind::dihedral && group.n == 4) {
    return Representation::quotient(group, action_quotient_reflection(group));
  }
  if (group.kind == GroupKind::cyclic && group.n == 4) {
    return Representation::regular(group);
  }
  throw std::invalid_argument("group " + group.token() +
                              " has no four-dimensional action representation; "
                              "only c4 and d4 support an equivariant policy head");
}

FieldType::FieldType(Group group, std::vector<Representation> reps)
    : group_(group), reps_(std::move(reps)) {
  for (const auto& r : reps_) {
    require_same_group(group_, r.group, "FieldType");
    total_dim_ += r.dim;
  }
}

FieldType FieldType::repeated(const Representation& rep, int copies) {
  return FieldType(rep.group, std::vector<Representation>(static_cast<std::size_t>(copies), rep));
}

bool FieldType::is_permutation() const {
  for (const auto& r : reps_) {
    if (!r.is_permutation()) return false;
  }
  return true;
}

std::vector<int> FieldType::permutation(const GroupElement& g) const {
  std::vector<int> perm;
  perm.reserve(static_cast<std::size_t>(total_dim_));
  int offset = 0;
  for (const auto& r : reps_) {
    for (int p : r.permutation(g)) perm.push_back(offset + p);
    offset += r.dim;
  }
  return perm;
}

Eigen::MatrixXd FieldType::matrix(const GroupElement& g) const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(total_dim_, total_dim_);
  int offset = 0;
  for (const auto& r : reps_) {
    m.block(offset, offset, r.dim, r.dim) = r.matrix(g);
    offset += r.dim;
  }
  return m;
}

FieldType FieldType::operator+(const FieldType& other) const {
  if (reps_.empty()) return other;
  if (other.reps_.empty()) return *this;
  require_same_group(group_, other.group_, "direct sum");
  auto reps = reps_;
  reps.insert(reps.end(), other.reps_.begin(), other.reps_.end());
  return FieldType(group_, std::move(reps));
}

}  // namespace symplan
