// SPDX-License-Identifier: Apache-2.0
// symplan: dataset generation, training, evaluation and audits.
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "symplan/harness.hpp"

namespace {

struct Flags {
  std::string task = "nav2d";
  std::string model = "symvin";
  std::string group;
  std::string padding;
  std::string q_rep = "regular";
  std::string v_rep = "regular";
  int k = 30;
  bool no_timing = false;
};

void add_flags(CLI::App* cmd, symplan::RunConfig& c, Flags& f) {
  cmd->add_option("--task", f.task, "nav2d or manip2d")->capture_default_str();
  cmd->add_option("--model", f.model, "vin or symvin")->capture_default_str();
  cmd->add_option("--group", f.group, "c2, c4, c8, d2, d4 or d8 (symvin default d4)");
  cmd->add_option("--size", c.size, "map side (bins for manip2d)")->capture_default_str();
  cmd->add_option("--k", f.k, "value-iteration steps")->capture_default_str();
  cmd->add_option("--f", c.model.f, "transition kernel size")->capture_default_str();
  cmd->add_option("--cq", c.model.cq, "Q fiber copies")->capture_default_str();
  cmd->add_option("--ch", c.model.ch, "hidden channels of the map encoder")->capture_default_str();
  cmd->add_option("--q-rep", f.q_rep, "regular or trivial Q fibers")->capture_default_str();
  cmd->add_option("--v-rep", f.v_rep, "regular or trivial V fibers")->capture_default_str();
  cmd->add_option("--lr", c.lr, "RMSprop learning rate")->capture_default_str();
  cmd->add_option("--batch", c.batch, "maps per batch")->capture_default_str();
  cmd->add_option("--epochs", c.epochs, "training epochs")->capture_default_str();
  cmd->add_option("--seed", c.seed, "random seed")->capture_default_str();
  cmd->add_option("--data", c.data, "dataset directory or file");
  cmd->add_option("--out", c.out, "output directory or file");
  cmd->add_option("--checkpoint", c.checkpoint, "model checkpoint");
  cmd->add_option("--resume", c.resume, "checkpoint to resume training from");
  cmd->add_option("--padding", f.padding, "zero or circular (manip2d default circular)");
  cmd->add_flag("--equiv-head", c.model.equivariant_head, "equivariant policy head (c4, d4)");
  cmd->add_option("--sizes", c.sizes, "evaluation sizes for generalize")->delimiter(',');
  cmd->add_option("--density", c.density, "maze obstacle density")->capture_default_str();
  cmd->add_option("--train-count", c.train_count)->capture_default_str();
  cmd->add_option("--val-count", c.val_count)->capture_default_str();
  cmd->add_option("--test-count", c.test_count)->capture_default_str();
  cmd->add_option("--eval-count", c.eval_count, "fresh maps per size for generalize")
      ->capture_default_str();
  cmd->add_option("--split", c.split, "split read by eval, equiv-check and render")
      ->capture_default_str();
  cmd->add_option("--index", c.index, "sample rendered by render")->capture_default_str();
  cmd->add_option("--maps", c.maps, "maps audited by equiv-check")->capture_default_str();
  cmd->add_flag("--no-timing", f.no_timing, "write 0 wall seconds for reproducible CSVs");
  cmd->add_flag("--verbose", c.verbose, "progress on stderr");
}

void finish(CLI::App* cmd, symplan::RunConfig& c, const Flags& f) {
  using namespace symplan;
  c.task = task_from_string(f.task);
  c.model.variant = variant_from_string(f.model);
  c.model.group = c.model.variant == Variant::vin ? "none" : (f.group.empty() ? "d4" : f.group);
  c.k_given = cmd->count("--k") > 0;
  // VIN defaults to 100 plain Q channels, SymVIN to 16 regular copies.
  if (cmd->count("--cq") == 0 && c.model.variant == Variant::vin) c.model.cq = 100;
  c.model.k = f.k;
  c.model.q_rep = fiber_rep_from_string(f.q_rep);
  c.model.v_rep = fiber_rep_from_string(f.v_rep);
  if (f.padding.empty()) {
    c.model.padding = c.task == Task::manip2d ? Padding::circular : Padding::zero;
  } else if (f.padding == "zero") {
    c.model.padding = Padding::zero;
  } else if (f.padding == "circular") {
    c.model.padding = Padding::circular;
  } else {
    throw std::invalid_argument("unknown padding '" + f.padding + "'");
  }
  c.timing = !f.no_timing;
  // equiv-check audits in the checkpoint's group unless one is named.
  if (c.command == "equiv-check") c.model.group = f.group;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace symplan;
  CLI::App app{"Symmetric value-iteration planners on grids"};
  app.require_subcommand(1);
  const std::map<std::string, int (*)(const RunConfig&, std::ostream&)> commands = {
      {"gen-data", cmd_gen_data}, {"train", cmd_train},           {"eval", cmd_eval},
      {"equiv-check", cmd_equiv_check}, {"generalize", cmd_generalize}, {"render", cmd_render}};
  const std::map<std::string, std::string> help = {
      {"gen-data", "write train/val/test datasets and manifests"},
      {"train", "train a planner, writing metrics.csv and checkpoints"},
      {"eval", "success rate and SPL of a checkpoint on a split"},
      {"equiv-check", "per-element equivariance deviations of a checkpoint"},
      {"generalize", "success versus map size with K = ceil(sqrt(2) M)"},
      {"render", "ASCII policy panel of one map"}};
  std::map<std::string, RunConfig> configs;
  std::map<std::string, Flags> flags;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, fn] : commands) {
    configs[name].command = name;
    subs[name] = app.add_subcommand(name, help.at(name));
    add_flags(subs[name], configs[name], flags[name]);
  }
  CLI11_PARSE(app, argc, argv);
  retain_heap_memory();
  for (const auto& [name, fn] : commands) {
    if (!subs[name]->parsed()) continue;
    try {
      finish(subs[name], configs[name], flags[name]);
      return fn(configs[name], std::cout);
    } catch (const std::exception& e) {
      std::cerr << "symplan " << name << ": " << e.what() << "\n";
      return 2;
    }
  }
  return 1;
}
