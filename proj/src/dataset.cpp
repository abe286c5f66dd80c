// SPDX-License-Identifier: Apache-2.0
#include "symplan/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "symplan/envs.hpp"

namespace symplan {

static_assert(std::endian::native == std::endian::little, "dataset I/O assumes little-endian");

namespace {

constexpr char kMagic[4] = {'S', 'Y', 'M', 'P'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 5 * sizeof(std::uint32_t);

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v;
  std::memcpy(&v, in.data() + at, 4);
  return v;
}

}  // namespace

std::string to_string(Task t) {
  return t == Task::nav2d ? "nav2d" : "manip2d";
}

Task task_from_string(const std::string& s) {
  if (s == "nav2d") return Task::nav2d;
  if (s == "manip2d") return Task::manip2d;
  throw std::invalid_argument("unknown task '" + s + "' (expected nav2d or manip2d)");
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + s + "'");
}

std::string encode_dataset(const Dataset& data) {
  const std::size_t cells = static_cast<std::size_t>(data.rows) * data.cols;
  std::string out;
  out.reserve(kHeaderBytes + data.samples.size() * cells * 3);
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(data.task));
  put_u32(out, static_cast<std::uint32_t>(data.samples.size()));
  put_u32(out, static_cast<std::uint32_t>(data.rows));
  put_u32(out, static_cast<std::uint32_t>(data.cols));
  for (const Sample& s : data.samples) {
    const OccupancyMap& m = s.map;
    if (m.rows != data.rows || m.cols != data.cols || s.expert.size() != cells) {
      throw DatasetError("encode_dataset: sample shape differs from the dataset shape");
    }
    if (m.torus != (data.task == Task::manip2d)) {
      throw DatasetError("encode_dataset: torus flag does not match the task");
    }
    for (std::uint8_t v : m.occupancy) out.push_back(static_cast<char>(v ? 1 : 0));
    for (std::size_t c = 0; c < cells; ++c) {
      const bool goal = static_cast<int>(c) == m.goal_row * m.cols + m.goal_col;
      out.push_back(static_cast<char>(goal ? 1 : 0));
    }
    out.append(reinterpret_cast<const char*>(s.expert.data()), cells);
  }
  return out;
}

Dataset decode_dataset(const std::string& bytes, const std::string& path) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw BadMagicError(path + ": not a dataset file (bad magic)");
  }
  if (bytes.size() < kHeaderBytes) throw TruncatedFileError(path + ": truncated header");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kVersion) {
    throw VersionMismatchError(path + ": dataset version " + std::to_string(version) +
                               ", expected " + std::to_string(kVersion));
  }
  const std::uint32_t task = get_u32(bytes, 8);
  if (task > 1) throw DatasetError(path + ": unknown task id " + std::to_string(task));
  const std::uint32_t count = get_u32(bytes, 12);
  Dataset data;
  data.task = static_cast<Task>(task);
  data.rows = static_cast<int>(get_u32(bytes, 16));
  data.cols = static_cast<int>(get_u32(bytes, 20));
  const std::size_t cells = static_cast<std::size_t>(data.rows) * data.cols;
  if (bytes.size() != kHeaderBytes + count * cells * 3) {
    if (bytes.size() < kHeaderBytes + count * cells * 3) {
      throw TruncatedFileError(path + ": truncated after the header (" +
                               std::to_string(bytes.size()) + " bytes)");
    }
    throw DatasetError(path + ": trailing bytes after the last sample");
  }
  const bool torus = data.task == Task::manip2d;
  std::size_t at = kHeaderBytes;
  data.samples.reserve(count);
  for (std::uint32_t n = 0; n < count; ++n) {
    Sample s;
    s.map = OccupancyMap(data.rows, data.cols, torus);
    std::memcpy(s.map.occupancy.data(), bytes.data() + at, cells);
    at += cells;
    int goals = 0;
    for (std::size_t c = 0; c < cells; ++c) {
      if (bytes[at + c] != 0) {
        s.map.goal_row = static_cast<int>(c) / data.cols;
        s.map.goal_col = static_cast<int>(c) % data.cols;
        ++goals;
      }
    }
    if (goals != 1) throw DatasetError(path + ": sample " + std::to_string(n) + " has no unique goal");
    at += cells;
    s.expert.assign(bytes.begin() + static_cast<std::ptrdiff_t>(at),
                    bytes.begin() + static_cast<std::ptrdiff_t>(at + cells));
    at += cells;
    data.samples.push_back(std::move(s));
  }
  return data;
}

void write_dataset(const Dataset& data, const std::string& path) {
  const std::string bytes = encode_dataset(data);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError(path + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DatasetError(path + ": write failed");
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError(path + ": cannot open dataset");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_dataset(ss.str(), path);
}

Dataset generate_split(const DatasetManifest& m) {
  Dataset data;
  data.task = m.task;
  data.rows = m.size;
  data.cols = m.size;
  data.samples.reserve(m.count);
  const auto split = static_cast<std::uint32_t>(m.split);
  for (int n = 0; n < m.count; ++n) {
    Sample s;
    if (m.task == Task::nav2d) {
      s.map = gen_maze(MazeSpec{m.size, m.density, m.seed}, split, n);
    } else {
      ManipSpec spec;
      spec.bins = m.size;
      spec.seed = m.seed;
      s.map = gen_manip_map(spec, split, n);
    }
    s.expert = expert_labels(s.map);
    data.samples.push_back(std::move(s));
  }
  return data;
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
  const nlohmann::json j = {{"task", to_string(m.task)}, {"size", m.size},
                            {"count", m.count},          {"seed", m.seed},
                            {"density", m.density},      {"split", to_string(m.split)}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DatasetError(path + ": cannot open for writing");
  out << j.dump(2) << "\n";
  if (!out) throw DatasetError(path + ": write failed");
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError(path + ": cannot open manifest");
  nlohmann::json j;
  try {
    in >> j;
    DatasetManifest m;
    m.task = task_from_string(j.at("task").get<std::string>());
    m.size = j.at("size").get<int>();
    m.count = j.at("count").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.density = j.at("density").get<double>();
    m.split = split_from_string(j.at("split").get<std::string>());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(path + ": malformed manifest: " + e.what());
  }
}

std::uint64_t map_hash(const OccupancyMap& map) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  for (std::uint8_t v : map.occupancy) mix(v);
  for (int v : {map.goal_row, map.goal_col, map.rows, map.cols}) {
    for (int k = 0; k < 4; ++k) mix(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  return h;
}

}  // namespace symplan
