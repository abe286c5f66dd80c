// SPDX-License-Identifier: Apache-2.0
// Python bindings: maps, the exact oracle, planners, audits and the CLI commands.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "symplan/envs.hpp"
#include "symplan/harness.hpp"

namespace py = pybind11;
using namespace symplan;

namespace {

py::array_t<double> field_array(const FeatureField& f) {
  py::array_t<double> out({f.rows(), f.cols(), f.channels()});
  std::copy(f.data().begin(), f.data().end(), out.mutable_data());
  return out;
}

template <typename T>
py::array_t<T> grid_array(const std::vector<T>& v, int rows, int cols) {
  py::array_t<T> out({rows, cols});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

OccupancyMap map_from_array(py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> occ,
                            int goal_row, int goal_col, bool torus) {
  if (occ.ndim() != 2) throw std::invalid_argument("occupancy must be a 2-D array");
  OccupancyMap m(static_cast<int>(occ.shape(0)), static_cast<int>(occ.shape(1)), torus);
  std::copy(occ.data(), occ.data() + occ.size(), m.occupancy.begin());
  for (auto& c : m.occupancy) c = c ? 1 : 0;
  m.goal_row = goal_row;
  m.goal_col = goal_col;
  m.validate();
  return m;
}

using Command = int (*)(const RunConfig&, std::ostream&);

std::string run_command(Command fn, const RunConfig& c) {
  std::ostringstream out;
  const int code = fn(c, out);
  if (code != 0) throw std::runtime_error(c.command + " failed (" + std::to_string(code) + "): " + out.str());
  return out.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Symmetric value-iteration planners on grids";

  py::class_<OccupancyMap>(m, "OccupancyMap")
      .def(py::init(&map_from_array), py::arg("occupancy"), py::arg("goal_row"),
           py::arg("goal_col"), py::arg("torus") = false)
      .def_readonly("rows", &OccupancyMap::rows)
      .def_readonly("cols", &OccupancyMap::cols)
      .def_readonly("goal_row", &OccupancyMap::goal_row)
      .def_readonly("goal_col", &OccupancyMap::goal_col)
      .def_readonly("torus", &OccupancyMap::torus)
      .def_property_readonly("occupancy",
                             [](const OccupancyMap& o) {
                               return grid_array(o.occupancy, o.rows, o.cols);
                             })
      .def("__eq__", [](const OccupancyMap& a, const OccupancyMap& b) { return a == b; });

  m.def("gen_maze",
        [](int size, double density, std::uint64_t seed, std::uint32_t split, std::uint64_t index) {
          return gen_maze(MazeSpec{size, density, seed}, split, index);
        },
        py::arg("size") = 15, py::arg("density") = 0.3, py::arg("seed") = 0,
        py::arg("split") = 0, py::arg("index") = 0);
  m.def("gen_manip_map",
        [](int bins, std::uint64_t seed, std::uint32_t split, std::uint64_t index) {
          ManipSpec spec;
          spec.bins = bins;
          spec.seed = seed;
          return gen_manip_map(spec, split, index);
        },
        py::arg("bins") = 18, py::arg("seed") = 0, py::arg("split") = 0, py::arg("index") = 0);
  m.def("bfs_distances",
        [](const OccupancyMap& o) { return grid_array(bfs_distances(o), o.rows, o.cols); });
  m.def("expert_labels",
        [](const OccupancyMap& o) { return grid_array(expert_labels(o), o.rows, o.cols); });
  m.def("transform_map", [](const std::string& group, int rotation, bool reflected,
                            const OccupancyMap& o) {
    return transform_map(GroupElement{Group::from_token(group), rotation, reflected}, o);
  });

  m.def("exact_value_iteration",
        [](const OccupancyMap& o, int iterations) {
          const auto r = exact_value_iteration(build_spatial_mdp(o),
                                               iterations < 0 ? o.cells() : iterations);
          py::dict d;
          d["value"] = field_array(r.value);
          d["q"] = field_array(r.q);
          d["policy"] = grid_array(r.policy, o.rows, o.cols);
          d["converged_after"] = r.converged_after;
          return d;
        },
        py::arg("map"), py::arg("iterations") = -1);
  m.def("rollout",
        [](const std::vector<std::uint8_t>& policy, const OccupancyMap& o, int i, int j) {
          const RolloutResult r = rollout(policy, o, i, j);
          return py::make_tuple(r.success, r.steps);
        });
  m.def("render_ascii", [](const OccupancyMap& o, const std::vector<std::uint8_t>& policy) {
    return render_ascii(o, policy);
  });

  py::enum_<Variant>(m, "Variant").value("vin", Variant::vin).value("symvin", Variant::symvin);
  py::enum_<FiberRep>(m, "FiberRep")
      .value("regular", FiberRep::regular)
      .value("trivial", FiberRep::trivial);
  py::enum_<Padding>(m, "Padding").value("zero", Padding::zero).value("circular", Padding::circular);

  py::class_<PlannerConfig>(m, "PlannerConfig")
      .def(py::init<>())
      .def_readwrite("variant", &PlannerConfig::variant)
      .def_readwrite("group", &PlannerConfig::group)
      .def_readwrite("k", &PlannerConfig::k)
      .def_readwrite("f", &PlannerConfig::f)
      .def_readwrite("cq", &PlannerConfig::cq)
      .def_readwrite("ch", &PlannerConfig::ch)
      .def_readwrite("padding", &PlannerConfig::padding)
      .def_readwrite("equivariant_head", &PlannerConfig::equivariant_head)
      .def_readwrite("q_rep", &PlannerConfig::q_rep)
      .def_readwrite("v_rep", &PlannerConfig::v_rep)
      .def_readwrite("train_size", &PlannerConfig::train_size)
      .def("validate", &PlannerConfig::validate);

  py::class_<PlannerModel>(m, "PlannerModel")
      .def(py::init<PlannerConfig>())
      .def("init", &PlannerModel::init, py::arg("seed"))
      .def_property_readonly("config", &PlannerModel::config)
      .def("set_iterations", &PlannerModel::set_iterations)
      .def("parameter_count", &PlannerModel::parameter_count)
      .def("forward", [](const PlannerModel& model,
                         const OccupancyMap& o) { return field_array(planner_forward(model, o)); })
      .def("policy",
           [](const PlannerModel& model, const OccupancyMap& o) {
             return grid_array(extract_policy(planner_forward(model, o)), o.rows, o.cols);
           })
      .def("equivariance_deviation",
           [](const PlannerModel& model, const OccupancyMap& o, const std::string& group) {
             const LogitsFn fn = [&](const OccupancyMap& x) { return planner_forward(model, x); };
             return max_deviation(equivariance_audit(fn, o, Group::from_token(group)));
           },
           py::arg("map"), py::arg("group") = "d4")
      .def("iteration_audit", &iteration_audit)
      .def("save", [](const PlannerModel& model, const std::string& path) {
        save_checkpoint(path, model);
      });
  m.def("load_checkpoint", [](const std::string& path) { return load_checkpoint(path).model; });

  py::register_exception<CheckpointError>(m, "CheckpointError");
  py::register_exception<DatasetError>(m, "DatasetError");

  // CLI commands, configured by keyword; each returns the command's report.
  m.def("gen_data",
        [](const std::string& out, int size, int train, int val, int test, std::uint64_t seed,
           const std::string& task) {
          RunConfig c;
          c.command = "gen-data";
          c.out = out;
          c.size = size;
          c.train_count = train;
          c.val_count = val;
          c.test_count = test;
          c.seed = seed;
          c.task = task_from_string(task);
          return run_command(cmd_gen_data, c);
        },
        py::arg("out"), py::arg("size") = 15, py::arg("train") = 1000, py::arg("val") = 200,
        py::arg("test") = 200, py::arg("seed") = 0, py::arg("task") = "nav2d");
  m.def("train",
        [](const PlannerConfig& model, const std::string& data, const std::string& out, int epochs,
           double lr, int batch, std::uint64_t seed, bool timing) {
          RunConfig c;
          c.command = "train";
          c.model = model;
          c.data = data;
          c.out = out;
          c.epochs = epochs;
          c.lr = lr;
          c.batch = batch;
          c.seed = seed;
          c.timing = timing;
          return run_command(cmd_train, c);
        },
        py::arg("model"), py::arg("data"), py::arg("out"), py::arg("epochs") = 30,
        py::arg("lr") = 1e-3, py::arg("batch") = 32, py::arg("seed") = 0,
        py::arg("timing") = true);
  m.def("evaluate",
        [](const std::string& checkpoint, const std::string& data, const std::string& split) {
          RunConfig c;
          c.command = "eval";
          c.checkpoint = checkpoint;
          c.data = data;
          c.split = split;
          return parse_csv_row(run_command(cmd_eval, c).substr(std::string(kMetricsHeader).size() + 1))
              .success_rate;
        },
        py::arg("checkpoint"), py::arg("data"), py::arg("split") = "test");
}
