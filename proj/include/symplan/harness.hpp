// SPDX-License-Identifier: Apache-2.0
/**
 * @file   harness.hpp
 * @brief  Evaluation metrics, the training loop, and the CLI commands.
 *
 * Success rate and SPL are averaged over (map, start) pairs, every free
 * non-goal cell being a start; the per-map success rate is reported beside
 * them. All percentages lie in [0, 100].
 */
#ifndef SYMPLAN_HARNESS_HPP
#define SYMPLAN_HARNESS_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "symplan/dataset.hpp"
#include "symplan/planner.hpp"

namespace symplan {

struct EvalResult {
  double loss = 0.0;
  double success_rate = 0.0;      ///< per start, percent
  double spl = 0.0;               ///< per start, percent
  double map_success_rate = 0.0;  ///< mean over maps of the per-map success fraction, percent
  long starts = 0;
  int maps = 0;
};

/// Scores one policy per sample (H W actions each).
EvalResult evaluate_policies(std::span<const Sample> samples,
                             std::span<const std::vector<std::uint8_t>> policies);
/// Exact value-iteration policies (gamma 1, step cost -1, H W iterations).
EvalResult evaluate_oracle(std::span<const Sample> samples);
/// Greedy policies of the model; `loss` is the masked cross-entropy.
EvalResult evaluate_model(const PlannerModel& model, std::span<const Sample> samples,
                          int batch = 32);

struct MetricsRow {
  int epoch = 0;
  std::string split;
  double loss = 0.0;
  double success_rate = 0.0;
  double spl = 0.0;
  double wall_seconds = 0.0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

inline constexpr const char* kMetricsHeader = "epoch,split,loss,success_rate,spl,wall_seconds";

/// Values printed with %.17g so parsing returns them exactly.
std::string to_csv(const MetricsRow& row);
MetricsRow parse_csv_row(const std::string& line);
std::vector<MetricsRow> read_metrics(const std::string& path);

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainOptions {
  int epochs = 30;
  int batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  bool timing = true;            ///< false writes 0 wall seconds
  int train_eval_maps = 200;     ///< train-row metrics use the first maps of the split
  std::string metrics_path;      ///< appended; header written when the file is new
  std::string best_checkpoint;   ///< best validation success so far
  std::string last_checkpoint;   ///< latest state, for resuming
  bool verbose = false;
};

struct TrainResult {
  std::vector<MetricsRow> rows;
  TrainState state;
};

/// Runs epochs state.epochs_done + 1 .. options.epochs. `resume` carries
/// optimizer moments and counters from a checkpoint. Batch order in an epoch
/// depends on (seed, epoch) only. Throws DivergenceError on a non-finite loss.
TrainResult train_model(PlannerModel& model, const Dataset& train, const Dataset& val,
                        const TrainOptions& options, const TrainState* resume = nullptr);

/// ASCII panel: '#' obstacle, 'G' goal, '^' '<' 'v' '>' for N W S E, '.'
/// when a free cell has no action.
std::string render_ascii(const OccupancyMap& map, std::span<const std::uint8_t> policy);

/// Generalisation iterations K = ceil(sqrt(2) M).
int generalization_iterations(int size);

/// Keeps freed tensor buffers in the heap instead of returning them to the
/// OS (glibc only; a no-op elsewhere). Training allocates the same large
/// buffers every batch.
void retain_heap_memory();

struct RunConfig {
  std::string command;
  Task task = Task::nav2d;
  PlannerConfig model;
  bool k_given = false;
  int size = 15;
  double lr = 1e-3;
  int batch = 32;
  int epochs = 30;
  std::uint64_t seed = 0;
  std::string data;  ///< dataset directory (train/val/test.bin) or file
  std::string out;
  std::string checkpoint;
  std::string resume;
  std::vector<int> sizes;
  int train_count = 1000;
  int val_count = 200;
  int test_count = 200;
  int eval_count = 200;
  double density = 0.3;
  std::string split = "test";
  int index = 0;
  int maps = 10;
  bool timing = true;
  bool verbose = false;
};

/// Each command writes its report to `out` and returns a process exit code.
int cmd_gen_data(const RunConfig& config, std::ostream& out);
int cmd_train(const RunConfig& config, std::ostream& out);
int cmd_eval(const RunConfig& config, std::ostream& out);
int cmd_equiv_check(const RunConfig& config, std::ostream& out);
int cmd_generalize(const RunConfig& config, std::ostream& out);
int cmd_render(const RunConfig& config, std::ostream& out);

/// `dir`/`split`.bin when `dir` is a directory, else `dir` itself.
std::string split_path(const std::string& dir, const std::string& split);

}  // namespace symplan

#endif  // SYMPLAN_HARNESS_HPP
