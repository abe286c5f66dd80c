// SPDX-License-Identifier: Apache-2.0
/**
 * @file   dataset.hpp
 * @brief  On-disk dataset container and its JSON manifest.
 *
 * Layout, little-endian: "SYMP", u32 version=1, u32 task (0 nav, 1 manip on
 * the torus), u32 count, u32 H, u32 W, then per sample H*W occupancy bytes,
 * H*W goal bytes and H*W expert bytes. The manifest lives at path + ".json".
 */
#ifndef SYMPLAN_DATASET_HPP
#define SYMPLAN_DATASET_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "symplan/planner.hpp"

namespace symplan {

enum class Task : std::uint32_t { nav2d = 0, manip2d = 1 };

std::string to_string(Task t);
Task task_from_string(const std::string& s);

struct Sample {
  OccupancyMap map;
  std::vector<std::uint8_t> expert;

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct Dataset {
  Task task = Task::nav2d;
  int rows = 0;
  int cols = 0;
  std::vector<Sample> samples;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class BadMagicError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};
class VersionMismatchError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};
class TruncatedFileError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

std::string encode_dataset(const Dataset& data);
/// `path` is only used in error messages.
Dataset decode_dataset(const std::string& bytes, const std::string& path = "<memory>");

void write_dataset(const Dataset& data, const std::string& path);
Dataset read_dataset(const std::string& path);

enum class Split : std::uint32_t { train = 0, val = 1, test = 2 };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct DatasetManifest {
  Task task = Task::nav2d;
  int size = 15;  ///< grid side, or bins for manipulation
  int count = 0;
  std::uint64_t seed = 0;
  double density = 0.3;  ///< obstacle density (navigation only)
  Split split = Split::train;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Samples for one split; deterministic in the manifest.
Dataset generate_split(const DatasetManifest& manifest);

void write_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

/// FNV-1a hash of a map's occupancy and goal.
std::uint64_t map_hash(const OccupancyMap& map);

}  // namespace symplan

#endif  // SYMPLAN_DATASET_HPP
