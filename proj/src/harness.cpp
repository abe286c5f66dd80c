// SPDX-License-Identifier: Apache-2.0
#include "symplan/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "json.hpp"
#include "symplan/envs.hpp"

namespace symplan {

namespace fs = std::filesystem;

EvalResult evaluate_policies(std::span<const Sample> samples,
                             std::span<const std::vector<std::uint8_t>> policies) {
  if (samples.size() != policies.size()) {
    throw std::invalid_argument("evaluate_policies: one policy per sample required");
  }
  EvalResult res;
  long successes = 0;
  double spl_sum = 0.0;
  double map_sum = 0.0;
  for (std::size_t n = 0; n < samples.size(); ++n) {
    const OccupancyMap& map = samples[n].map;
    const auto dist = bfs_distances(map);
    long map_starts = 0;
    long map_success = 0;
    for (int i = 0; i < map.rows; ++i) {
      for (int j = 0; j < map.cols; ++j) {
        const int l = dist[i * map.cols + j];
        if (l <= 0) continue;
        const RolloutResult r = rollout(policies[n], map, i, j);
        ++map_starts;
        if (!r.success) continue;
        ++map_success;
        spl_sum += static_cast<double>(l) / std::max(r.steps, l);
      }
    }
    res.starts += map_starts;
    successes += map_success;
    if (map_starts > 0) map_sum += static_cast<double>(map_success) / map_starts;
  }
  res.maps = static_cast<int>(samples.size());
  if (res.starts > 0) {
    res.success_rate = 100.0 * static_cast<double>(successes) / res.starts;
    res.spl = 100.0 * spl_sum / res.starts;
  }
  if (res.maps > 0) res.map_success_rate = 100.0 * map_sum / res.maps;
  return res;
}

EvalResult evaluate_oracle(std::span<const Sample> samples) {
  std::vector<std::vector<std::uint8_t>> policies;
  policies.reserve(samples.size());
  for (const Sample& s : samples) {
    const SpatialMDP mdp = build_spatial_mdp(s.map);
    policies.push_back(exact_value_iteration(mdp, s.map.cells()).policy);
  }
  return evaluate_policies(samples, policies);
}

EvalResult evaluate_model(const PlannerModel& model, std::span<const Sample> samples, int batch) {
  if (batch <= 0) throw std::invalid_argument("batch must be positive");
  std::vector<std::vector<std::uint8_t>> policies;
  policies.reserve(samples.size());
  double loss_sum = 0.0;
  std::vector<OccupancyMap> maps;
  std::vector<std::uint8_t> labels;
  for (std::size_t start = 0; start < samples.size(); start += batch) {
    const std::size_t end = std::min(samples.size(), start + batch);
    maps.clear();
    labels.clear();
    for (std::size_t n = start; n < end; ++n) {
      maps.push_back(samples[n].map);
      labels.insert(labels.end(), samples[n].expert.begin(), samples[n].expert.end());
    }
    const ad::Tensor logits = infer_logits(model, encode_maps(maps));
    loss_sum += ad::softmax_ce_value(logits, labels) * static_cast<double>(end - start);
    const std::size_t per_map = static_cast<std::size_t>(maps[0].cells()) * kNumActions;
    for (std::size_t b = 0; b < maps.size(); ++b) {
      policies.push_back(extract_policy(
          std::span(logits.data.data() + b * per_map, per_map), maps[b].cells()));
    }
  }
  EvalResult res = evaluate_policies(samples, policies);
  if (!samples.empty()) res.loss = loss_sum / static_cast<double>(samples.size());
  return res;
}

std::string to_csv(const MetricsRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%s,%.17g,%.17g,%.17g,%.17g", r.epoch, r.split.c_str(), r.loss,
                r.success_rate, r.spl, r.wall_seconds);
  return buf;
}

MetricsRow parse_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) fields.push_back(item);
  if (fields.size() != 6) throw std::invalid_argument("metrics row needs six fields: " + line);
  MetricsRow r;
  try {
    r.epoch = std::stoi(fields[0]);
    r.split = fields[1];
    r.loss = std::stod(fields[2]);
    r.success_rate = std::stod(fields[3]);
    r.spl = std::stod(fields[4]);
    r.wall_seconds = std::stod(fields[5]);
  } catch (const std::logic_error&) {
    throw std::invalid_argument("malformed metrics row: " + line);
  }
  return r;
}

std::vector<MetricsRow> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open metrics file");
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw std::runtime_error(path + ": missing metrics header");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(parse_csv_row(line));
  }
  return rows;
}

namespace {

// Fisher-Yates with the portable integer draw, so orders match across
// standard libraries.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(substream_seed(seed, 0x5348u, static_cast<std::uint64_t>(epoch), 0));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

}  // namespace

TrainResult train_model(PlannerModel& model, const Dataset& train, const Dataset& val,
                        const TrainOptions& options, const TrainState* resume) {
  if (options.batch <= 0) throw std::invalid_argument("batch must be positive");
  if (train.samples.empty()) throw std::invalid_argument("training split is empty");
  TrainResult result;
  if (resume) result.state = *resume;
  ad::RmsProp optimizer(ad::RmsPropConfig{options.lr, 0.99, 1e-8});
  if (resume) optimizer.state() = resume->second_moments;

  std::ofstream metrics;
  if (!options.metrics_path.empty()) {
    const bool fresh = !fs::exists(options.metrics_path) || fs::file_size(options.metrics_path) == 0;
    metrics.open(options.metrics_path, std::ios::app);
    if (!metrics) throw std::runtime_error(options.metrics_path + ": cannot open metrics file");
    if (fresh) metrics << kMetricsHeader << "\n" << std::flush;
  }
  auto save = [&](const std::string& path) {
    if (!path.empty()) save_checkpoint(path, model, &result.state);
  };
  if (result.state.epochs_done >= options.epochs) {
    save(options.last_checkpoint);
    if (!resume) save(options.best_checkpoint);
    return result;
  }

  const std::size_t n_train = train.samples.size();
  const std::span<const Sample> train_eval(
      train.samples.data(),
      std::min<std::size_t>(n_train, static_cast<std::size_t>(std::max(0, options.train_eval_maps))));
  std::vector<OccupancyMap> maps;
  std::vector<std::uint8_t> labels;
  for (int epoch = result.state.epochs_done + 1; epoch <= options.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto order = epoch_order(n_train, options.seed, epoch);
    double loss_sum = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < n_train; start += options.batch, ++batch_index) {
      const std::size_t end = std::min(n_train, start + options.batch);
      maps.clear();
      labels.clear();
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = train.samples[order[k]];
        maps.push_back(s.map);
        labels.insert(labels.end(), s.expert.begin(), s.expert.end());
      }
      model.zero_grad();
      ad::Tape tape;
      const ForwardGraph g = build_forward(tape, model, encode_maps(maps));
      const ad::Var loss = tape.softmax_ce(g.logits, labels);
      const double value = tape.value(loss).data[0];
      if (!std::isfinite(value)) {
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(batch_index));
      }
      tape.backward(loss);
      optimizer.step(model.parameters());
      loss_sum += value * static_cast<double>(end - start);
    }
    const double train_loss = loss_sum / static_cast<double>(n_train);
    const EvalResult tr = evaluate_model(model, train_eval, options.batch);
    std::optional<EvalResult> va;
    if (!val.samples.empty()) va = evaluate_model(model, val.samples, options.batch);
    const double wall =
        options.timing
            ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
            : 0.0;
    std::vector<MetricsRow> rows{{epoch, "train", train_loss, tr.success_rate, tr.spl, wall}};
    if (va) rows.push_back({epoch, "val", va->loss, va->success_rate, va->spl, wall});
    for (const auto& r : rows) {
      if (metrics.is_open()) metrics << to_csv(r) << "\n";
      result.rows.push_back(r);
    }
    if (metrics.is_open()) metrics.flush();
    if (options.verbose) {
      std::fprintf(stderr, "epoch %d  train loss %.4f  val success %.2f%%  (%.1fs)\n", epoch,
                   train_loss, va ? va->success_rate : 0.0, wall);
    }
    result.state.epochs_done = epoch;
    result.state.second_moments = optimizer.state();
    const double score = va ? va->success_rate : tr.success_rate;
    if (score > result.state.best_val) {
      result.state.best_val = score;
      save(options.best_checkpoint);
    }
    save(options.last_checkpoint);
  }
  return result;
}

std::string render_ascii(const OccupancyMap& map, std::span<const std::uint8_t> policy) {
  static constexpr char kArrows[kNumActions] = {'^', '<', 'v', '>'};
  std::string out;
  for (int i = 0; i < map.rows; ++i) {
    for (int j = 0; j < map.cols; ++j) {
      const int a = policy[static_cast<std::size_t>(i) * map.cols + j];
      if (map.is_goal(i, j)) {
        out.push_back('G');
      } else if (map.obstacle(i, j)) {
        out.push_back('#');
      } else {
        out.push_back(a < kNumActions ? kArrows[a] : '.');
      }
    }
    out.push_back('\n');
  }
  return out;
}

int generalization_iterations(int size) {
  return static_cast<int>(std::ceil(std::sqrt(2.0) * size));
}

void retain_heap_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

std::string split_path(const std::string& dir, const std::string& split) {
  if (fs::is_directory(dir)) return (fs::path(dir) / (split + ".bin")).string();
  return dir;
}

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

PlannerModel model_from(const RunConfig& c, const Dataset& train) {
  PlannerConfig mc = c.model;
  mc.train_size = train.rows;
  PlannerModel model(mc);
  model.init(c.seed);
  return model;
}

void prepare_for(PlannerModel& model, const RunConfig& c, int size) {
  if (c.k_given) {
    model.set_iterations(c.model.k);
  } else if (size != model.config().train_size) {
    throw std::invalid_argument("maps are " + std::to_string(size) + "x" + std::to_string(size) +
                                " but the model was trained at " +
                                std::to_string(model.config().train_size) +
                                "; pass --k to choose the iteration count");
  }
}

}  // namespace

int cmd_gen_data(const RunConfig& c, std::ostream& out) {
  require(!c.out.empty(), "gen-data needs --out");
  fs::create_directories(c.out);
  const std::pair<Split, int> splits[] = {
      {Split::train, c.train_count}, {Split::val, c.val_count}, {Split::test, c.test_count}};
  for (const auto& [split, count] : splits) {
    DatasetManifest m;
    m.task = c.task;
    m.size = c.size;
    m.count = count;
    m.seed = c.seed;
    m.density = c.density;
    m.split = split;
    const std::string path = (fs::path(c.out) / (to_string(split) + ".bin")).string();
    write_dataset(generate_split(m), path);
    write_manifest(m, path + ".json");
    out << path << "\n";
  }
  return 0;
}

int cmd_train(const RunConfig& c, std::ostream& out) {
  require(!c.data.empty(), "train needs --data");
  require(!c.out.empty(), "train needs --out");
  const Dataset train = read_dataset(split_path(c.data, "train"));
  const Dataset val = fs::is_directory(c.data) && fs::exists(split_path(c.data, "val"))
                          ? read_dataset(split_path(c.data, "val"))
                          : Dataset{};
  fs::create_directories(c.out);
  TrainOptions opt;
  opt.epochs = c.epochs;
  opt.batch = c.batch;
  opt.lr = c.lr;
  opt.seed = c.seed;
  opt.timing = c.timing;
  opt.verbose = c.verbose;
  opt.metrics_path = (fs::path(c.out) / "metrics.csv").string();
  opt.best_checkpoint = (fs::path(c.out) / "best.ckpt").string();
  opt.last_checkpoint = (fs::path(c.out) / "last.ckpt").string();
  std::optional<PlannerModel> model;
  std::optional<TrainState> state;
  if (!c.resume.empty()) {
    LoadedCheckpoint ck = load_checkpoint(c.resume);
    model.emplace(std::move(ck.model));
    state = ck.state;
  } else {
    fs::remove(opt.metrics_path);
    model.emplace(model_from(c, train));
  }
  require(train.rows == model->config().train_size,
          "training maps do not match the model's training size");
  try {
    const TrainResult r = train_model(*model, train, val, opt, state ? &*state : nullptr);
    out << kMetricsHeader << "\n";
    for (const auto& row : r.rows) out << to_csv(row) << "\n";
  } catch (const DivergenceError& e) {
    out << "diverged: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

int cmd_eval(const RunConfig& c, std::ostream& out) {
  require(!c.checkpoint.empty(), "eval needs --checkpoint");
  require(!c.data.empty(), "eval needs --data");
  LoadedCheckpoint ck = load_checkpoint(c.checkpoint);
  const Dataset data = read_dataset(split_path(c.data, c.split));
  prepare_for(ck.model, c, data.rows);
  const EvalResult r = evaluate_model(ck.model, data.samples, c.batch);
  const MetricsRow row{ck.state ? ck.state->epochs_done : 0, c.split, r.loss, r.success_rate, r.spl,
                       0.0};
  out << kMetricsHeader << "\n" << to_csv(row) << "\n";
  if (!c.out.empty()) {
    const nlohmann::json j = {{"split", c.split},
                              {"k", ck.model.config().k},
                              {"loss", r.loss},
                              {"success_rate", r.success_rate},
                              {"spl", r.spl},
                              {"map_success_rate", r.map_success_rate},
                              {"starts", r.starts},
                              {"maps", r.maps}};
    std::ofstream f(c.out);
    if (!f) throw std::runtime_error(c.out + ": cannot open for writing");
    f << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_equiv_check(const RunConfig& c, std::ostream& out) {
  require(!c.checkpoint.empty(), "equiv-check needs --checkpoint");
  const LoadedCheckpoint ck = load_checkpoint(c.checkpoint);
  std::vector<OccupancyMap> maps;
  if (!c.data.empty()) {
    const Dataset data = read_dataset(split_path(c.data, c.split));
    for (int n = 0; n < std::min<int>(c.maps, static_cast<int>(data.samples.size())); ++n) {
      maps.push_back(data.samples[n].map);
    }
  } else {
    for (int n = 0; n < c.maps; ++n) {
      maps.push_back(gen_maze(MazeSpec{c.size, c.density, c.seed}, 2, n));
    }
  }
  // A named group wins; otherwise the model's own group when its logits
  // carry that action, else D4.
  const std::string& own = ck.model.config().group;
  const std::string token =
      !c.model.group.empty() && c.model.group != "none" ? c.model.group
      : (own == "c4" || own == "d4")                    ? own
                                                        : "d4";
  const Group group = Group::from_token(token);
  const PlannerModel& model = ck.model;
  const LogitsFn fn = [&](const OccupancyMap& m) { return planner_forward(model, m); };
  std::vector<AuditRow> worst;
  for (const auto& m : maps) {
    const auto rows = equivariance_audit(fn, m, group);
    if (worst.empty()) {
      worst = rows;
      continue;
    }
    for (std::size_t k = 0; k < rows.size(); ++k) {
      worst[k].deviation = std::max(worst[k].deviation, rows[k].deviation);
    }
  }
  char buf[64];
  out << "element,max_deviation\n";
  for (const auto& r : worst) {
    std::snprintf(buf, sizeof buf, "%.17g", r.deviation);
    out << to_string(r.element) << "," << buf << "\n";
  }
  std::snprintf(buf, sizeof buf, "%.17g", max_deviation(worst));
  out << "all," << buf << "\n";
  return 0;
}

int cmd_generalize(const RunConfig& c, std::ostream& out) {
  require(!c.checkpoint.empty(), "generalize needs --checkpoint");
  require(!c.sizes.empty(), "generalize needs --sizes");
  LoadedCheckpoint ck = load_checkpoint(c.checkpoint);
  out << "size,k,loss,success_rate,spl,map_success_rate\n";
  char buf[256];
  for (int size : c.sizes) {
    DatasetManifest m;
    m.task = c.task;
    m.size = size;
    m.count = c.eval_count;
    m.seed = c.seed;
    m.density = c.density;
    m.split = Split::test;
    const Dataset data = generate_split(m);
    const int k = generalization_iterations(size);
    ck.model.set_iterations(k);
    const EvalResult r = evaluate_model(ck.model, data.samples, c.batch);
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g", size, k, r.loss,
                  r.success_rate, r.spl, r.map_success_rate);
    out << buf << "\n";
  }
  return 0;
}

int cmd_render(const RunConfig& c, std::ostream& out) {
  require(!c.data.empty(), "render needs --data");
  const Dataset data = read_dataset(split_path(c.data, c.split));
  require(c.index >= 0 && c.index < static_cast<int>(data.samples.size()),
          "--index outside the dataset");
  const OccupancyMap& map = data.samples[c.index].map;
  std::vector<std::uint8_t> policy;
  if (c.checkpoint.empty()) {
    policy = exact_value_iteration(build_spatial_mdp(map), map.cells()).policy;
  } else {
    LoadedCheckpoint ck = load_checkpoint(c.checkpoint);
    if (c.k_given) ck.model.set_iterations(c.model.k);
    policy = extract_policy(planner_forward(ck.model, map));
  }
  out << render_ascii(map, policy);
  return 0;
}

}  // namespace symplan
