// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,2,...] [--work DIR] [--verbose]
//
// Criteria 6, 7, 8 and 10 train models and take about two CPU hours together.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "symplan/envs.hpp"
#include "symplan/harness.hpp"

namespace fs = std::filesystem;
using namespace symplan;

namespace {

// Pinned tolerances and budgets.
constexpr double kOracleSeconds = 10.0;
constexpr double kTheoremSeconds = 5.0;
constexpr double kSteerTol = 1e-10;
constexpr double kIdempotentTol = 1e-12;
constexpr double kConvTol = 1e-6;
constexpr double kIterationTol = 1e-4;
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr double kFdStep = 1e-5;
constexpr double kTableMargin = 10.0;  // percentage points
constexpr double kTableCpuSeconds = 7200.0;

// Pinned training setup.
constexpr std::uint64_t kDataSeed = 1;
constexpr int kTrainMaps = 1000;
constexpr int kEvalMaps = 200;
constexpr int kEpochs = 30;
constexpr int kManipEpochs = 20;
constexpr int kBatch = 32;
constexpr double kVinLr = 1e-3;
constexpr double kSymvinLr = 3e-4;  // 1e-3 destabilises the K = 30 recurrence
constexpr std::uint64_t kSeeds[] = {1, 2, 3};
constexpr std::uint64_t kGeneralizeSeed = 7;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<OccupancyMap> mazes(int count, int size, std::uint64_t seed) {
  std::vector<OccupancyMap> maps;
  for (int n = 0; n < count; ++n) maps.push_back(gen_maze({size, 0.3, seed}, 3, n));
  return maps;
}

// Random model with the value block drawn too; init() starts it at zero.
PlannerModel random_model(const PlannerConfig& config, std::uint64_t seed) {
  PlannerModel m(config);
  m.init(seed);
  std::mt19937_64 rng(seed ^ 0x5eed);
  m.transition().kernel().init_uniform(rng);
  return m;
}

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  long violations = 0;
  long starts = 0;
  for (const OccupancyMap& m : mazes(100, 15, 11)) {
    const auto policy = exact_value_iteration(build_spatial_mdp(m), m.cells()).policy;
    const auto dist = bfs_distances(m);
    for (int s = 0; s < m.cells(); ++s) {
      if (dist[s] <= 0) continue;
      ++starts;
      const RolloutResult r = rollout(policy, m, s / m.cols, s % m.cols);
      violations += !(r.success && r.steps == dist[s]);
    }
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && secs < kOracleSeconds,
          fmt("%ld violations over %ld starts on 100 maps, %.2f s", violations, starts, secs)};
}

Outcome theorem_check() {
  const auto t0 = std::chrono::steady_clock::now();
  int mismatches = 0;
  const Group d4 = Group::from_token("d4");
  for (const OccupancyMap& m : mazes(20, 15, 12)) {
    const FeatureField v = exact_value_iteration(build_spatial_mdp(m), m.cells()).value;
    for (const auto& g : elements(d4)) {
      const OccupancyMap gm = transform_map(g, m);
      const FeatureField gv = exact_value_iteration(build_spatial_mdp(gm), gm.cells()).value;
      mismatches += gv.data() != transform_field(g, v).data();
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < kTheoremSeconds,
          fmt("%d of 160 (map, element) pairs differ, %.2f s", mismatches, secs)};
}

Outcome kernel_constraint() {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double steer = 0.0;
  double idem = 0.0;
  double conv = 0.0;
  int kernels = 0;
  auto check_kernel = [&](const FieldType& in, const FieldType& out, int size, bool convolve) {
    std::vector<double> raw(static_cast<std::size_t>(size) * size * in.total_dim() *
                            out.total_dim());
    for (double& x : raw) x = u(rng);
    const SteerableKernel k(in, out, size, raw);
    ++kernels;
    steer = std::max(steer, check_steerability(k));
    const auto again = k.project(k.projected());
    for (std::size_t i = 0; i < again.size(); ++i) {
      idem = std::max(idem, std::abs(again[i] - k.projected()[i]));
    }
    if (!convolve) return;
    std::vector<double> values(static_cast<std::size_t>(9 * 9) * in.total_dim());
    for (double& x : values) x = u(rng);
    const FeatureField f(9, 9, in, values);
    for (Padding p : {Padding::zero, Padding::circular}) {
      const FeatureField base = conv2d(k, f, {p});
      for (const auto& g : elements(in.group())) {
        conv = std::max(conv, max_abs_diff(conv2d(k, transform_field(g, f), {p}),
                                           transform_field(g, base)));
      }
    }
  };
  for (const char* token : {"c2", "c4", "c8", "d2", "d4", "d8"}) {
    const Group g = Group::from_token(token);
    const FieldType triv = FieldType::repeated(Representation::trivial(g), 2);
    const FieldType reg = FieldType::repeated(Representation::regular(g), 2);
    for (int size : {1, 3, 5}) {
      check_kernel(triv, reg, size, false);
      check_kernel(reg, reg, size, false);
      check_kernel(reg + triv, triv + reg, size, false);
    }
  }
  // Every kernel of the planner, convolved under all of D4.
  PlannerConfig c;
  c.cq = 4;
  c.ch = 6;
  c.equivariant_head = true;
  const PlannerModel m(c);
  for (const auto& p : m.parameters()) {
    check_kernel(p.kernel().in_type(), p.kernel().out_type(), p.kernel().size(), true);
  }
  const bool pass = steer < kSteerTol && idem < kIdempotentTol && conv < kConvTol;
  return {pass, fmt("%d kernels: steerability %.2e, idempotence %.2e, conv deviation %.2e", kernels,
                    steer, idem, conv)};
}

Outcome iteration_equivariance() {
  PlannerConfig c;  // K = 30, F = 3, C_Q = 16 regular, 150 hidden channels
  c.equivariant_head = true;
  double worst_iter = 0.0;
  double worst_out = 0.0;
  int checked = 0;
  const auto maps = mazes(10, 15, 14);
  for (std::size_t n = 0; n < maps.size(); ++n) {
    const PlannerModel model = random_model(c, 100 + n);
    const auto audit = iteration_audit(model, maps[n]);
    checked += static_cast<int>(audit.size());
    for (double d : audit) worst_iter = std::max(worst_iter, d);
    const LogitsFn fn = [&](const OccupancyMap& x) { return symvin_forward(model, x); };
    worst_out = std::max(worst_out, max_deviation(equivariance_audit(fn, maps[n], c.fiber_group())));
  }
  const bool pass = checked == 10 * c.k && worst_iter < kIterationTol && worst_out < kIterationTol;
  return {pass, fmt("%d iterations audited, max deviation %.2e (logits %.2e)", checked, worst_iter,
                    worst_out)};
}

double gradient_error(const PlannerConfig& c, std::uint64_t seed) {
  PlannerModel model = random_model(c, seed);
  std::vector<OccupancyMap> maps;
  for (int n = 0; n < 2; ++n) maps.push_back(gen_maze({5, 0.3, seed}, 3, n));
  const ad::Tensor x = encode_maps(maps);
  std::vector<std::uint8_t> labels;
  for (const auto& m : maps) {
    const auto e = expert_labels(m);
    labels.insert(labels.end(), e.begin(), e.end());
  }
  auto loss = [&] {
    ad::Tape tape;
    return tape.value(tape.softmax_ce(build_forward(tape, model, x).logits, labels)).data[0];
  };
  model.zero_grad();
  {
    ad::Tape tape;
    tape.backward(tape.softmax_ce(build_forward(tape, model, x).logits, labels));
  }
  double worst = 0.0;
  for (auto& p : model.parameters()) {
    const std::vector<double> grad = p.grad();
    std::vector<double> raw(p.kernel().raw().begin(), p.kernel().raw().end());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const double keep = raw[i];
      raw[i] = keep + kFdStep;
      p.kernel().set_raw(raw);
      const double up = loss();
      raw[i] = keep - kFdStep;
      p.kernel().set_raw(raw);
      const double down = loss();
      raw[i] = keep;
      p.kernel().set_raw(raw);
      const double fd = (up - down) / (2 * kFdStep);
      worst = std::max(worst, std::abs(grad[i] - fd) /
                                  std::max({std::abs(grad[i]), std::abs(fd), 1e-6}));
    }
  }
  return worst;
}

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  PlannerConfig vin;
  vin.variant = Variant::vin;
  vin.group = "none";
  vin.k = 2;
  vin.cq = 4;
  vin.ch = 4;
  vin.train_size = 5;
  PlannerConfig sym = vin;
  sym.variant = Variant::symvin;
  sym.group = "d4";
  sym.cq = 2;
  const double ev = gradient_error(vin, 21);
  const double es = gradient_error(sym, 22);
  const double secs = seconds_since(t0);
  return {ev < kGradTol && es < kGradTol && secs < kGradSeconds,
          fmt("max relative error vin %.2e, symvin %.2e, %.1f s", ev, es, secs)};
}

PlannerConfig vin_config(int size) {
  PlannerConfig c;
  c.variant = Variant::vin;
  c.group = "none";
  c.cq = 100;
  c.train_size = size;
  return c;
}

PlannerConfig symvin_config(int size) {
  PlannerConfig c;
  c.train_size = size;
  return c;
}

class Trainer {
 public:
  Trainer(fs::path work, bool verbose) : work_(std::move(work)), verbose_(verbose) {}

  const Dataset& data(Task task, int size, Split split) {
    const auto key = std::make_tuple(task, size, split);
    auto it = data_.find(key);
    if (it != data_.end()) return it->second;
    DatasetManifest m;
    m.task = task;
    m.size = size;
    m.count = split == Split::train ? kTrainMaps : kEvalMaps;
    m.seed = kDataSeed;
    m.split = split;
    return data_.emplace(key, generate_split(m)).first->second;
  }

  /// Trains (or reuses within this process) and returns the best-validation model.
  const PlannerModel& train(const std::string& name, Task task, const PlannerConfig& config,
                            double lr, int epochs, std::uint64_t seed) {
    auto it = models_.find(name);
    if (it != models_.end()) return it->second;
    const int size = config.train_size;
    PlannerModel model(config);
    model.init(seed);
    const fs::path dir = work_ / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    TrainOptions opt;
    opt.epochs = epochs;
    opt.batch = kBatch;
    opt.lr = lr;
    opt.seed = seed;
    opt.metrics_path = (dir / "metrics.csv").string();
    opt.best_checkpoint = (dir / "best.ckpt").string();
    opt.verbose = verbose_;
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult r =
        train_model(model, data(task, size, Split::train), data(task, size, Split::val), opt);
    std::printf("  trained %-24s %d epochs in %.0f s, best val %.2f%%\n", name.c_str(), epochs,
                seconds_since(t0), r.state.best_val);
    std::fflush(stdout);
    return models_.emplace(name, load_checkpoint(opt.best_checkpoint).model).first->second;
  }

  double test_success(const std::string& name, Task task, const PlannerConfig& config, double lr,
                      int epochs, std::uint64_t seed) {
    const PlannerModel& m = train(name, task, config, lr, epochs, seed);
    return evaluate_model(m, data(task, config.train_size, Split::test).samples).success_rate;
  }

 private:
  fs::path work_;
  bool verbose_;
  std::map<std::tuple<Task, int, Split>, Dataset> data_;
  std::map<std::string, PlannerModel> models_;
};

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt("%.2f", x);
  return s;
}

Outcome table_direction(Trainer& t) {
  const double c0 = cpu_seconds();
  std::vector<double> vin, sym, gap;
  for (std::uint64_t seed : kSeeds) {
    vin.push_back(t.test_success(fmt("vin_s%llu", (unsigned long long)seed), Task::nav2d,
                                 vin_config(15), kVinLr, kEpochs, seed));
    sym.push_back(t.test_success(fmt("symvin_s%llu", (unsigned long long)seed), Task::nav2d,
                                 symvin_config(15), kSymvinLr, kEpochs, seed));
    gap.push_back(sym.back() - vin.back());
  }
  const double cpu = cpu_seconds() - c0;
  const bool pass = median(gap) >= kTableMargin && cpu <= kTableCpuSeconds;
  return {pass, fmt("test success vin [%s] symvin [%s], median gap %.2f pp, %.0f CPU s",
                    join(vin).c_str(), join(sym).c_str(), median(gap), cpu)};
}

Outcome generalization(Trainer& t) {
  std::vector<std::string> parts;
  bool pass = true;
  for (int size : {15, 28}) {
    DatasetManifest m;
    m.size = size;
    m.count = kEvalMaps;
    m.seed = kGeneralizeSeed;
    m.split = Split::test;
    const Dataset d = generate_split(m);
    std::vector<double> vin, sym;
    for (std::uint64_t seed : kSeeds) {
      for (bool symmetric : {false, true}) {
        const std::string name =
            fmt("%s_s%llu", symmetric ? "symvin" : "vin", (unsigned long long)seed);
        PlannerModel model = symmetric ? t.train(name, Task::nav2d, symvin_config(15), kSymvinLr,
                                                 kEpochs, seed)
                                       : t.train(name, Task::nav2d, vin_config(15), kVinLr,
                                                 kEpochs, seed);
        model.set_iterations(generalization_iterations(size));
        (symmetric ? sym : vin).push_back(evaluate_model(model, d.samples).success_rate);
      }
    }
    pass = pass && median(sym) >= median(vin);
    parts.push_back(fmt("M=%d K=%d vin %.2f symvin %.2f", size, generalization_iterations(size),
                        median(vin), median(sym)));
  }
  return {pass, "median success " + parts[0] + "; " + parts[1]};
}

Outcome torus_manipulation(Trainer& t) {
  const Dataset& test = t.data(Task::manip2d, 18, Split::test);
  long shorter = 0;
  long across = 0;
  long bad_labels = 0;
  for (const Sample& s : test.samples) {
    OccupancyMap flat = s.map;
    flat.torus = false;
    const auto dt = bfs_distances(s.map);
    const auto df = bfs_distances(flat);
    const int rows = s.map.rows;
    const int cols = s.map.cols;
    for (int c = 0; c < s.map.cells(); ++c) {
      if (dt[c] <= 0) continue;
      shorter += df[c] == kUnreachable || dt[c] < df[c];
      const int a = s.expert[c];
      const auto nb = step(s.map, c / cols, c % cols, a);
      bad_labels += !nb || dt[nb->first * cols + nb->second] != dt[c] - 1;
      const int i = c / cols;
      const int j = c % cols;
      across += (i == 0 && a == north) || (i == rows - 1 && a == south) ||
                (j == 0 && a == west) || (j == cols - 1 && a == east);
    }
  }
  const EvalResult oracle = evaluate_oracle(test.samples);
  PlannerConfig vin = vin_config(18);
  vin.padding = Padding::circular;
  PlannerConfig sym = symvin_config(18);
  sym.padding = Padding::circular;
  const double sv = t.test_success("manip_vin_s1", Task::manip2d, vin, kVinLr, kManipEpochs, 1);
  const double ss =
      t.test_success("manip_symvin_s1", Task::manip2d, sym, kSymvinLr, kManipEpochs, 1);
  const bool pass = shorter > 0 && across > 0 && bad_labels == 0 && oracle.success_rate == 100.0 &&
                    ss > sv;
  return {pass, fmt("%ld starts shorter on the torus, %ld labels cross the seam, %ld bad labels, "
                    "oracle %.2f%%, test success vin %.2f symvin %.2f",
                    shorter, across, bad_labels, oracle.success_rate, sv, ss)};
}

Outcome determinism(const fs::path& work) {
  DatasetManifest m;
  m.size = 15;
  m.count = 64;
  m.seed = kDataSeed;
  const Dataset train = generate_split(m);
  m.count = 16;
  m.split = Split::val;
  const Dataset val = generate_split(m);
  PlannerConfig c;
  c.k = 10;
  c.cq = 4;
  c.ch = 16;
  std::vector<std::string> csv;
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = work / fmt("determinism_%d", run);
    fs::remove_all(dir);
    fs::create_directories(dir);
    PlannerModel model(c);
    model.init(5);
    TrainOptions opt;
    opt.epochs = 2;
    opt.batch = 16;
    opt.lr = kSymvinLr;
    opt.seed = 5;
    opt.timing = false;
    opt.metrics_path = (dir / "metrics.csv").string();
    train_model(model, train, val, opt);
    std::ifstream in(opt.metrics_path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    csv.push_back(ss.str());
  }
  const auto lines = std::count(csv[0].begin(), csv[0].end(), '\n');
  return {csv[0] == csv[1] && lines == 5,
          fmt("two 2-epoch runs, %ld CSV lines, %s", static_cast<long>(lines),
              csv[0] == csv[1] ? "byte-identical" : "different")};
}

Outcome ablation(Trainer& t) {
  PlannerConfig trivial = symvin_config(15);
  trivial.q_rep = FiberRep::trivial;
  trivial.v_rep = FiberRep::trivial;
  const double reg = t.test_success("symvin_s1", Task::nav2d, symvin_config(15), kSymvinLr, kEpochs, 1);
  const double triv =
      t.test_success("symvin_trivial_s1", Task::nav2d, trivial, kSymvinLr, kEpochs, 1);
  return {triv < reg, fmt("test success regular %.2f, trivial %.2f", reg, triv)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  std::string work = "acceptance_work";
  bool verbose = false;
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--work", work, "scratch directory for checkpoints and metrics");
  app.add_flag("--verbose", verbose, "per-epoch progress on stderr");
  CLI11_PARSE(app, argc, argv);
  retain_heap_memory();
  fs::create_directories(work);
  Trainer trainer(work, verbose);

  const std::map<int, std::function<Outcome()>> criteria = {
      {1, oracle_equivalence},
      {2, theorem_check},
      {3, kernel_constraint},
      {4, iteration_equivariance},
      {5, gradients},
      {6, [&] { return table_direction(trainer); }},
      {7, [&] { return generalization(trainer); }},
      {8, [&] { return torus_manipulation(trainer); }},
      {9, [&] { return determinism(work); }},
      {10, [&] { return ablation(trainer); }},
  };
  const std::set<int> wanted(only.begin(), only.end());
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
