// SPDX-License-Identifier: Apache-2.0
// Checkpoint layout, little-endian:
//   "SYMM" u32 version=1
//   u32 variant, u32 len + group token bytes, u32 K, F, C_Q, C_H, padding,
//   equivariant head, q_rep, v_rep, train size
//   u32 parameter count, then per parameter u32 length + f64 raw values
//   u32 has_state; if set: u32 epochs done, f64 best validation success,
//   u32 count, then per parameter u32 length + f64 second moments
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "symplan/planner.hpp"

namespace symplan {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[4] = {'S', 'Y', 'M', 'M'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void f64s(std::span<const double> v) {
    u32(static_cast<std::uint32_t>(v.size()));
    raw(v.data(), v.size() * sizeof(double));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void raw(const void* p, std::size_t n) { buf_.write(static_cast<const char*>(p), n); }
  std::string bytes() const { return buf_.str(); }

 private:
  std::ostringstream buf_;
};

class Reader {
 public:
  Reader(std::string data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}

  void raw(void* p, std::size_t n) {
    if (pos_ + n > data_.size()) throw CheckpointError(path_ + ": truncated checkpoint");
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    raw(&v, sizeof v);
    return v;
  }
  std::vector<double> f64s() {
    const std::uint32_t n = u32();
    if (static_cast<std::size_t>(n) * sizeof(double) > data_.size() - pos_) {
      throw CheckpointError(path_ + ": truncated checkpoint");
    }
    std::vector<double> v(n);
    raw(v.data(), n * sizeof(double));
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > 64) throw CheckpointError(path_ + ": corrupt group token");
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const PlannerModel& model, const TrainState* state) {
  const PlannerConfig& c = model.config();
  Writer w;
  w.raw(kMagic, 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(c.variant));
  w.str(c.group);
  w.u32(static_cast<std::uint32_t>(c.k));
  w.u32(static_cast<std::uint32_t>(c.f));
  w.u32(static_cast<std::uint32_t>(c.cq));
  w.u32(static_cast<std::uint32_t>(c.ch));
  w.u32(static_cast<std::uint32_t>(c.padding));
  w.u32(c.equivariant_head ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(c.q_rep));
  w.u32(static_cast<std::uint32_t>(c.v_rep));
  w.u32(static_cast<std::uint32_t>(c.train_size));
  w.u32(static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& p : model.parameters()) w.f64s(p.kernel().raw());
  w.u32(state ? 1 : 0);
  if (state) {
    w.u32(static_cast<std::uint32_t>(state->epochs_done));
    w.f64(state->best_val);
    w.u32(static_cast<std::uint32_t>(state->second_moments.size()));
    for (const auto& m : state->second_moments) w.f64s(m);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(path + ": cannot open for writing");
  const std::string bytes = w.bytes();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(path + ": write failed");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(path + ": cannot open checkpoint");
  std::ostringstream ss;
  ss << in.rdbuf();
  Reader r(ss.str(), path);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError(path + ": not a checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw CheckpointError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  PlannerConfig c;
  const std::uint32_t variant = r.u32();
  if (variant > 1) throw CheckpointError(path + ": unknown variant");
  c.variant = static_cast<Variant>(variant);
  c.group = r.str();
  c.k = static_cast<int>(r.u32());
  c.f = static_cast<int>(r.u32());
  c.cq = static_cast<int>(r.u32());
  c.ch = static_cast<int>(r.u32());
  c.padding = r.u32() == 1 ? Padding::circular : Padding::zero;
  c.equivariant_head = r.u32() != 0;
  c.q_rep = r.u32() == 1 ? FiberRep::trivial : FiberRep::regular;
  c.v_rep = r.u32() == 1 ? FiberRep::trivial : FiberRep::regular;
  c.train_size = static_cast<int>(r.u32());
  PlannerModel model(c);
  const std::uint32_t count = r.u32();
  if (count != model.parameters().size()) {
    throw CheckpointError(path + ": parameter count does not match the manifest");
  }
  for (auto& p : model.parameters()) {
    std::vector<double> raw = r.f64s();
    if (raw.size() != p.kernel().parameter_count()) {
      throw CheckpointError(path + ": parameter '" + p.name() + "' has the wrong length");
    }
    p.kernel().set_raw(std::move(raw));
  }
  LoadedCheckpoint out{std::move(model), std::nullopt};
  if (r.u32() != 0) {
    TrainState st;
    st.epochs_done = static_cast<int>(r.u32());
    st.best_val = r.f64();
    const std::uint32_t n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) st.second_moments.push_back(r.f64s());
    out.state = std::move(st);
  }
  if (!r.done()) throw CheckpointError(path + ": trailing bytes after checkpoint");
  return out;
}

}  // namespace symplan
