// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "symplan/envs.hpp"
#include "symplan/harness.hpp"
#include "test_util.hpp"

namespace symplan {
namespace {

namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(fs::temp_directory_path() / ("symplan_test_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& leaf) const { return (path_ / leaf).string(); }
  std::string str() const { return path_.string(); }

 private:
  fs::path path_;
};

Dataset nav_data(int size, int count, std::uint64_t seed, Split split = Split::test) {
  DatasetManifest m;
  m.size = size;
  m.count = count;
  m.seed = seed;
  m.split = split;
  return generate_split(m);
}

RunConfig tiny_run(const std::string& data, const std::string& out) {
  RunConfig c;
  c.model = testing::small_config(Variant::symvin);
  c.model.k = 4;
  c.size = 7;
  c.epochs = 2;
  c.batch = 8;
  c.seed = 3;
  c.data = data;
  c.out = out;
  c.train_count = 24;
  c.val_count = 6;
  c.test_count = 6;
  c.timing = false;
  return c;
}

TEST(MetricsCsv, RoundTripsExactly) {
  const MetricsRow row{3, "val", 0.1 + 0.2, 100.0 / 3.0, 12.5, 1e-17};
  EXPECT_EQ(parse_csv_row(to_csv(row)), row);
  EXPECT_STREQ(kMetricsHeader, "epoch,split,loss,success_rate,spl,wall_seconds");
  EXPECT_THROW(parse_csv_row("1,val,2"), std::invalid_argument);
  EXPECT_THROW(parse_csv_row("x,val,1,2,3,4"), std::invalid_argument);
}

TEST(Evaluate, OracleIsPerfectAtBothSizes) {
  for (int size : {15, 18}) {
    const Dataset d = nav_data(size, 200, 5);
    const EvalResult r = evaluate_oracle(d.samples);
    EXPECT_EQ(r.success_rate, 100.0) << size;
    EXPECT_EQ(r.spl, 100.0) << size;
    EXPECT_EQ(r.map_success_rate, 100.0) << size;
    EXPECT_EQ(r.maps, 200);
  }
}

TEST(Evaluate, NorthPolicyNeverReachesASouthernGoal) {
  Sample s;
  s.map = OccupancyMap(5, 5);
  s.map.goal_row = 4;
  s.map.goal_col = 2;
  s.expert = expert_labels(s.map);
  const std::vector<std::vector<std::uint8_t>> policies{std::vector<std::uint8_t>(25, north)};
  const EvalResult r = evaluate_policies(std::span(&s, 1), policies);
  EXPECT_EQ(r.starts, 24);
  EXPECT_EQ(r.success_rate, 0.0);
  EXPECT_EQ(r.spl, 0.0);
}

TEST(Evaluate, SplNeverExceedsSuccess) {
  const Dataset d = nav_data(9, 20, 6);
  const PlannerModel m = testing::random_model(testing::small_config(Variant::vin), 6);
  const EvalResult r = evaluate_model(m, d.samples, 7);
  EXPECT_LE(r.spl, r.success_rate);
  EXPECT_GE(r.success_rate, 0.0);
  EXPECT_LE(r.success_rate, 100.0);
  EXPECT_GT(r.loss, 0.0);
}

TEST(Evaluate, DetourIsChargedBySpl) {
  Sample s;
  s.map = OccupancyMap(2, 2);
  s.expert = expert_labels(s.map);
  // (0,1) goes the long way round: 3 steps where 1 suffices
  const std::vector<std::vector<std::uint8_t>> policies{{north, south, north, west}};
  const EvalResult r = evaluate_policies(std::span(&s, 1), policies);
  EXPECT_EQ(r.success_rate, 100.0);
  EXPECT_NEAR(r.spl, 100.0 * (1.0 / 3.0 + 1.0 + 1.0) / 3.0, 1e-12);
}

TEST(Render, OracleOnEmptyThreeByThree) {
  OccupancyMap m(3, 3);
  m.goal_row = 1;
  m.goal_col = 1;
  const auto policy = exact_value_iteration(build_spatial_mdp(m), 9).policy;
  EXPECT_EQ(render_ascii(m, policy), "vv<\n>G<\n^^^\n");
}

TEST(Render, MasksGoalAndObstacles) {
  OccupancyMap m(2, 3);
  m.goal_row = 0;
  m.goal_col = 0;
  m.set_obstacle(1, 2, true);
  const std::vector<std::uint8_t> policy{east, east, 2, 3, ad::kIgnoreLabel, north};
  EXPECT_EQ(render_ascii(m, policy), "G>v\n>.#\n");
}

TEST(Generalize, IterationRule) {
  EXPECT_EQ(generalization_iterations(15), 22);
  EXPECT_EQ(generalization_iterations(28), 40);
}

TEST(Commands, GenDataIsDeterministic) {
  TempDir a("gen_a");
  TempDir b("gen_b");
  std::ostringstream log;
  ASSERT_EQ(cmd_gen_data(tiny_run("", a.str()), log), 0);
  ASSERT_EQ(cmd_gen_data(tiny_run("", b.str()), log), 0);
  for (const std::string split : {"train", "val", "test"}) {
    EXPECT_EQ(slurp(a / (split + ".bin")), slurp(b / (split + ".bin")));
    EXPECT_EQ(read_manifest(a / (split + ".bin.json")).split, split_from_string(split));
  }
  EXPECT_EQ(read_dataset(a / "train.bin").samples.size(), 24u);
}

TEST(Commands, ManipulationDataIsTorus) {
  TempDir dir("gen_manip");
  RunConfig c = tiny_run("", dir.str());
  c.task = Task::manip2d;
  c.size = 18;
  c.train_count = 2;
  std::ostringstream log;
  ASSERT_EQ(cmd_gen_data(c, log), 0);
  const Dataset d = read_dataset(dir / "train.bin");
  EXPECT_EQ(d.task, Task::manip2d);
  EXPECT_TRUE(d.samples[0].map.torus);
}

TEST(Commands, ZeroEpochsWritesHeaderAndInitCheckpoint) {
  TempDir dir("zero_epochs");
  std::ostringstream log;
  ASSERT_EQ(cmd_gen_data(tiny_run("", dir / "data"), log), 0);
  RunConfig c = tiny_run(dir / "data", dir / "run");
  c.epochs = 0;
  ASSERT_EQ(cmd_train(c, log), 0);
  EXPECT_EQ(slurp(dir / "run/metrics.csv"), std::string(kMetricsHeader) + "\n");
  const LoadedCheckpoint ck = load_checkpoint(dir / "run/best.ckpt");
  PlannerModel fresh(ck.model.config());
  fresh.init(c.seed);
  for (std::size_t k = 0; k < fresh.parameters().size(); ++k) {
    const auto a = fresh.parameters()[k].kernel().raw();
    const auto b = ck.model.parameters()[k].kernel().raw();
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
}

TEST(Commands, TrainingIsDeterministicAndResumesBitwise) {
  TempDir dir("resume");
  std::ostringstream log;
  ASSERT_EQ(cmd_gen_data(tiny_run("", dir / "data"), log), 0);
  ASSERT_EQ(cmd_train(tiny_run(dir / "data", dir / "a"), log), 0);
  ASSERT_EQ(cmd_train(tiny_run(dir / "data", dir / "b"), log), 0);
  const std::string full = slurp(dir / "a/metrics.csv");
  EXPECT_EQ(full, slurp(dir / "b/metrics.csv"));
  EXPECT_EQ(read_metrics(dir / "a/metrics.csv").size(), 4u);

  RunConfig first = tiny_run(dir / "data", dir / "c");
  first.epochs = 1;
  ASSERT_EQ(cmd_train(first, log), 0);
  RunConfig rest = tiny_run(dir / "data", dir / "c");
  rest.resume = dir / "c/last.ckpt";
  ASSERT_EQ(cmd_train(rest, log), 0);
  EXPECT_EQ(slurp(dir / "c/metrics.csv"), full);
  EXPECT_EQ(slurp(dir / "c/last.ckpt"), slurp(dir / "a/last.ckpt"));
}

TEST(Commands, EvalNeedsKAtForeignSizes) {
  TempDir dir("eval_size");
  std::ostringstream log;
  ASSERT_EQ(cmd_gen_data(tiny_run("", dir / "data"), log), 0);
  RunConfig c = tiny_run(dir / "data", dir / "run");
  c.epochs = 0;
  ASSERT_EQ(cmd_train(c, log), 0);
  RunConfig other = tiny_run("", dir / "big");
  other.size = 9;
  ASSERT_EQ(cmd_gen_data(other, log), 0);
  RunConfig e = tiny_run(dir / "big", "");
  e.checkpoint = dir / "run/best.ckpt";
  EXPECT_THROW(cmd_eval(e, log), std::invalid_argument);
  e.k_given = true;
  e.model.k = 13;
  EXPECT_EQ(cmd_eval(e, log), 0);
}

TEST(Commands, GeneralizeAtNativeSizeMatchesEval) {
  TempDir dir("generalize");
  std::ostringstream log;
  RunConfig data = tiny_run("", dir / "data");
  data.size = 15;
  data.train_count = 2;
  data.test_count = 8;
  ASSERT_EQ(cmd_gen_data(data, log), 0);
  RunConfig train = tiny_run(dir / "data", dir / "run");
  train.epochs = 0;
  ASSERT_EQ(cmd_train(train, log), 0);

  RunConfig g = tiny_run("", "");
  g.checkpoint = dir / "run/best.ckpt";
  g.sizes = {15, 28};
  g.eval_count = 8;
  std::ostringstream gen;
  ASSERT_EQ(cmd_generalize(g, gen), 0);
  std::istringstream lines(gen.str());
  std::string header, native, large;
  std::getline(lines, header);
  std::getline(lines, native);
  std::getline(lines, large);
  EXPECT_EQ(header, "size,k,loss,success_rate,spl,map_success_rate");
  EXPECT_EQ(large.substr(0, 6), "28,40,");

  RunConfig e = tiny_run(dir / "data", dir / "eval.json");
  e.checkpoint = g.checkpoint;
  e.k_given = true;
  e.model.k = 22;
  std::ostringstream ev;
  ASSERT_EQ(cmd_eval(e, ev), 0);
  std::istringstream eval_lines(ev.str());
  std::string row;
  std::getline(eval_lines, row);
  std::getline(eval_lines, row);
  const MetricsRow m = parse_csv_row(row);
  char expected[256];
  std::snprintf(expected, sizeof expected, "15,22,%.17g,%.17g,%.17g,", m.loss, m.success_rate,
                m.spl);
  EXPECT_EQ(native.substr(0, std::strlen(expected)), expected);
}

TEST(Commands, EquivCheckReportsIdentityZero) {
  TempDir dir("equiv");
  RunConfig c = tiny_run("", dir / "model.ckpt");
  PlannerConfig mc = c.model;
  mc.equivariant_head = true;
  save_checkpoint(dir / "model.ckpt", testing::random_model(mc, 4));
  RunConfig e = tiny_run("", "");
  e.model.group = "";
  e.checkpoint = dir / "model.ckpt";
  e.maps = 2;
  std::ostringstream out;
  ASSERT_EQ(cmd_equiv_check(e, out), 0);
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "element,max_deviation");
  std::getline(lines, line);
  EXPECT_EQ(line, "e,0");
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    const double dev = std::stod(line.substr(line.find(',') + 1));
    EXPECT_LT(dev, 1e-4) << line;
  }
  EXPECT_EQ(rows, 8);  // seven more elements and the aggregate
}

TEST(Commands, RenderOracleMarksGoal) {
  TempDir dir("render");
  std::ostringstream log;
  ASSERT_EQ(cmd_gen_data(tiny_run("", dir.str()), log), 0);
  RunConfig r = tiny_run(dir.str(), "");
  r.split = "val";
  r.index = 1;
  std::ostringstream out;
  ASSERT_EQ(cmd_render(r, out), 0);
  const std::string text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), 'G'), 1);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
  EXPECT_EQ(text.find('.'), std::string::npos);
}

}  // namespace
}  // namespace symplan
