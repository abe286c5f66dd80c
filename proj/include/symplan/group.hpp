// SPDX-License-Identifier: Apache-2.0
/**
 * @file   group.hpp
 * @brief  Finite rotation/reflection groups acting on the square grid and
 *         their permutation/orthogonal representations.
 *
 * Elements are written g = r^k s^f: first the reflection s (left-right flip)
 * is applied, then k counterclockwise rotations by 2*pi/n.
 */
#ifndef SYMPLAN_GROUP_HPP
#define SYMPLAN_GROUP_HPP

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace symplan {

class GroupMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a group element has no exact realization on a pixel grid
/// (45 degree rotations, or quarter turns of a non-square grid).
class NotAGridSymmetry : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class GroupKind { cyclic, dihedral };

struct Group {
  GroupKind kind = GroupKind::cyclic;
  int n = 1;  ///< rotation order; 1, 2, 4 or 8

  Group() = default;
  Group(GroupKind k, int rotation_order);

  static Group trivial() { return Group(GroupKind::cyclic, 1); }
  /// Parses "none", "c2", "c4", "c8", "d2", "d4", "d8".
  static Group from_token(const std::string& token);
  std::string token() const;

  int order() const { return kind == GroupKind::dihedral ? 2 * n : n; }
  bool is_trivial() const { return order() == 1; }

  friend bool operator==(const Group&, const Group&) = default;
};

struct GroupElement {
  Group group;
  int rotation = 0;
  bool reflected = false;

  /// Position of this element in elements(group).
  int index() const { return rotation + (reflected ? group.n : 0); }
  bool is_identity() const { return rotation == 0 && !reflected; }
  /// Number of counterclockwise quarter turns, if the rotation part is a
  /// multiple of 90 degrees.
  std::optional<int> quarter_turns() const;

  friend bool operator==(const GroupElement&, const GroupElement&) = default;
};

std::string to_string(const GroupElement& g);

GroupElement identity(const Group& group);
GroupElement rotation_generator(const Group& group);
/// The left-right flip s. Throws for cyclic groups.
GroupElement reflection_generator(const Group& group);

/// Identity first, rotations ascending, then reflected rotations ascending.
std::vector<GroupElement> elements(const Group& group);
GroupElement compose(const GroupElement& g, const GroupElement& h);
GroupElement inverse(const GroupElement& g);

/// Movement actions in counterclockwise order.
enum Direction : int { north = 0, west = 1, south = 2, east = 3 };
inline constexpr int kNumActions = 4;

/// Unit displacement (row, col) of each direction; rows grow southwards.
std::pair<int, int> displacement(int direction);

/// Action of g on the four movement directions. Throws NotAGridSymmetry
/// when g rotates by a non-multiple of 90 degrees.
int action_on_actions(const GroupElement& g, int direction);

/// Linear part of the grid action on a displacement / kernel offset.
/// Exact rotation for quarter turns.
std::pair<int, int> rotate_offset(const GroupElement& g, int di, int dj);

/// Whole-array action on cell (i, j) of an H x W grid.
std::pair<int, int> grid_action(const GroupElement& g, int i, int j, int rows,
                                int cols);

/// Action on centered kernel offsets in [-r, r]^2. Each square ring of
/// radius rho (8*rho cells) is cycled by rho*8/n cells per generator step, so
/// 45 degree rotations of C8/D8 act as ring shifts; for quarter turns this
/// is the exact rotation.
std::pair<int, int> kernel_offset_action(const GroupElement& g, int di, int dj);

enum class RepKind { trivial, regular, quotient, standard };

struct Representation {
  RepKind kind = RepKind::trivial;
  Group group;
  int dim = 1;
  /// Reflection t generating the subgroup {e, t} (quotient only).
  std::optional<GroupElement> quotient_reflection;

  static Representation trivial(const Group& g);
  static Representation regular(const Group& g);
  static Representation quotient(const Group& g, const GroupElement& reflection);
  static Representation standard(const Group& g);

  bool is_permutation() const { return kind != RepKind::standard; }

  /// Image of basis vector k under g (permutation kinds only):
  /// rho(g) e_k = e_{permutation(g)[k]}.
  std::vector<int> permutation(const GroupElement& g) const;
  Eigen::MatrixXd matrix(const GroupElement& g) const;

  friend bool operator==(const Representation&, const Representation&) = default;
};

/// Reflection subgroup of D_n whose coset permutation coincides with the
/// geometric action on (north, west, south, east).
GroupElement action_quotient_reflection(const Group& group);

/// Permutation representation on the four movement directions: the quotient
/// representation for D4, the regular one for C4.
Representation action_representation(const Group& group);

/// Direct sum of representations; describes how the channels of a feature
/// field transform.
class FieldType {
 public:
  FieldType() = default;
  FieldType(Group group, std::vector<Representation> reps);

  static FieldType repeated(const Representation& rep, int copies);

  const Group& group() const { return group_; }
  const std::vector<Representation>& reps() const { return reps_; }
  int total_dim() const { return total_dim_; }
  bool is_permutation() const;

  /// Block-diagonal channel permutation (permutation types only).
  std::vector<int> permutation(const GroupElement& g) const;
  Eigen::MatrixXd matrix(const GroupElement& g) const;

  FieldType operator+(const FieldType& other) const;  // direct sum
  friend bool operator==(const FieldType&, const FieldType&) = default;

 private:
  Group group_;
  std::vector<Representation> reps_;
  int total_dim_ = 0;
};

}  // namespace symplan

#endif  // SYMPLAN_GROUP_HPP
