#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fcdistill/experiments.hpp"
#include "fcdistill/transfer.hpp"

namespace py = pybind11;
using namespace fcdistill;

namespace {

py::dict trajectory_dict(const Trajectory& t) {
  const auto n = static_cast<py::ssize_t>(t.size());
  py::array_t<double> time(n), i_l(n), v_cf(n), v_o(n), v_in(n), i_o(n), i_ref(n), load_r(n);
  py::array_t<std::uint8_t> mode(n);
  for (py::ssize_t k = 0; k < n; ++k) {
    const TrajectoryRecord& r = t.records[static_cast<std::size_t>(k)];
    time.mutable_at(k) = r.t;
    i_l.mutable_at(k) = r.x.i_l;
    v_cf.mutable_at(k) = r.x.v_cf;
    v_o.mutable_at(k) = r.x.v_o;
    v_in.mutable_at(k) = r.w.v_in;
    i_o.mutable_at(k) = r.w.i_o;
    i_ref.mutable_at(k) = r.i_ref;
    load_r.mutable_at(k) = r.load_r;
    mode.mutable_at(k) = static_cast<std::uint8_t>(r.mode);
  }
  py::dict d;
  d["t"] = time;
  d["i_l"] = i_l;
  d["v_cf"] = v_cf;
  d["v_o"] = v_o;
  d["v_in"] = v_in;
  d["i_o"] = i_o;
  d["i_ref"] = i_ref;
  d["load_r"] = load_r;
  d["mode"] = mode;
  return d;
}

py::dict metrics_dict(const MetricsReport& m) {
  py::dict d;
  for (const auto& [k, v] : metrics_fields(m)) d[py::str(k)] = v;
  return d;
}

std::pair<Trajectory, MetricsReport> rollout(const ScenarioConfig& s, const ConverterParams& p,
                                             const SwitchingPolicy& policy, const MpcConfig& mpc) {
  const EpisodeOutcome o = run_episode_partial(s, policy, p);
  if (o.trajectory.empty()) throw std::runtime_error("rollout diverged before the first sample");
  return {o.trajectory, compute_metrics(o.trajectory, s.v_ref, mpc, {p.i_safe_lo, p.i_safe_hi})};
}

py::tuple features_and_labels(const Dataset& ds) {
  const auto n = static_cast<py::ssize_t>(ds.size());
  py::array_t<float> x({n, static_cast<py::ssize_t>(FeatureVector::kSize)});
  py::array_t<std::uint8_t> y(n);
  auto xv = x.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < n; ++i) {
    const auto a = ds.samples[static_cast<std::size_t>(i)].z.to_array();
    for (py::ssize_t j = 0; j < static_cast<py::ssize_t>(a.size()); ++j) {
      xv(i, j) = static_cast<float>(a[static_cast<std::size_t>(j)]);
    }
    y.mutable_at(i) = static_cast<std::uint8_t>(ds.samples[static_cast<std::size_t>(i)].label);
  }
  return py::make_tuple(x, y);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Switched-affine converter models, the MPC expert and the distilled MLP policy";

  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);

  py::enum_<SwitchMode>(m, "SwitchMode")
      .value("OP", SwitchMode::OP)
      .value("PO", SwitchMode::PO)
      .value("NO", SwitchMode::NO)
      .value("ON", SwitchMode::ON);

  py::enum_<Topology>(m, "Topology")
      .value("FC_BOOST", Topology::FcBoost)
      .value("NPC_BUCK", Topology::NpcBuck);

  py::class_<ConverterParams>(m, "ConverterParams")
      .def(py::init<>())
      .def_readwrite("l", &ConverterParams::l)
      .def_readwrite("c_f", &ConverterParams::c_f)
      .def_readwrite("c", &ConverterParams::c)
      .def_readwrite("ts", &ConverterParams::ts)
      .def_readwrite("i_safe_lo", &ConverterParams::i_safe_lo)
      .def_readwrite("i_safe_hi", &ConverterParams::i_safe_hi)
      .def("validate", &ConverterParams::validate)
      .def("__repr__", [](const ConverterParams& p) {
        return "ConverterParams(l=" + std::to_string(p.l) + ", c_f=" + std::to_string(p.c_f) +
               ", c=" + std::to_string(p.c) + ", ts=" + std::to_string(p.ts) + ")";
      });

  py::class_<PlantState>(m, "PlantState")
      .def(py::init<double, double, double>(), py::arg("i_l") = 0.0, py::arg("v_cf") = 0.0,
           py::arg("v_o") = 0.0)
      .def_readwrite("i_l", &PlantState::i_l)
      .def_readwrite("v_cf", &PlantState::v_cf)
      .def_readwrite("v_o", &PlantState::v_o)
      .def("__eq__", [](const PlantState& a, const PlantState& b) { return a == b; })
      .def("__repr__", [](const PlantState& s) {
        return "PlantState(i_l=" + std::to_string(s.i_l) + ", v_cf=" + std::to_string(s.v_cf) +
               ", v_o=" + std::to_string(s.v_o) + ")";
      });

  py::class_<Exogenous>(m, "Exogenous")
      .def(py::init<double, double>(), py::arg("v_in") = 0.0, py::arg("i_o") = 0.0)
      .def_readwrite("v_in", &Exogenous::v_in)
      .def_readwrite("i_o", &Exogenous::i_o);

  py::class_<FeatureVector>(m, "FeatureVector")
      .def(py::init([](double i_l, double v_cf, double v_o, double i_ref, double v_in, double i_o) {
             return FeatureVector{i_l, v_cf, v_o, i_ref, v_in, i_o};
           }),
           py::arg("i_l"), py::arg("v_cf"), py::arg("v_o"), py::arg("i_ref"), py::arg("v_in"),
           py::arg("i_o"))
      .def_readwrite("i_l", &FeatureVector::i_l)
      .def_readwrite("v_cf", &FeatureVector::v_cf)
      .def_readwrite("v_o", &FeatureVector::v_o)
      .def_readwrite("i_ref", &FeatureVector::i_ref)
      .def_readwrite("v_in", &FeatureVector::v_in)
      .def_readwrite("i_o", &FeatureVector::i_o)
      .def("to_list", [](const FeatureVector& z) {
        const auto a = z.to_array();
        return std::vector<double>(a.begin(), a.end());
      });

  py::class_<MpcConfig>(m, "MpcConfig")
      .def(py::init([](double v_ref) { return default_mpc_config(v_ref); }), py::arg("v_ref") = 180.0)
      .def_readwrite("horizon", &MpcConfig::horizon)
      .def_readwrite("beam_width", &MpcConfig::beam_width)
      .def_readwrite("lambda_i", &MpcConfig::lambda_i)
      .def_readwrite("lambda_cf", &MpcConfig::lambda_cf)
      .def_readwrite("v_cf_ref", &MpcConfig::v_cf_ref)
      .def_readwrite("topology", &MpcConfig::topology)
      .def("validate", &MpcConfig::validate);

  m.def("nominal_params", &nominal_params);
  m.def("perturb_params", &perturb_params, py::arg("p"), py::arg("d_l"), py::arg("d_cf"), py::arg("d_c"));
  m.def("mode_coefficients", [](SwitchMode mode) {
    const ModeCoefficients c = mode_coefficients(mode);
    return py::make_tuple(c.a_vo, c.a_cf, c.alpha, c.beta);
  });
  m.def("discrete_step", &discrete_step, py::arg("x"), py::arg("w"), py::arg("mode"), py::arg("p"));
  m.def("buck_discrete_step", &buck_discrete_step, py::arg("x"), py::arg("w"), py::arg("mode"),
        py::arg("p"));
  m.def("stage_cost", &stage_cost, py::arg("x"), py::arg("i_ref"), py::arg("cfg"));

  auto decision = [](const Decision& d) { return py::make_tuple(d.mode, d.cost); };
  m.def(
      "beam_decide",
      [decision](const FeatureVector& z, const ConverterParams& p, const MpcConfig& c) {
        return decision(beam_decide(z, p, c));
      },
      py::arg("z"), py::arg("p"), py::arg("cfg"), "Returns (mode, cost).");
  m.def(
      "exhaustive_decide",
      [decision](const FeatureVector& z, const ConverterParams& p, const MpcConfig& c) {
        return decision(exhaustive_decide(z, p, c));
      },
      py::arg("z"), py::arg("p"), py::arg("cfg"), "Returns (mode, cost).");

  m.def("canonical_s1_json", [] { return scenario_to_json(canonical_s1()); });
  m.def("buck_s1_json", [] { return scenario_to_json(buck_scenario_s1()); });
  m.def("buck_s2_json", [] { return scenario_to_json(buck_scenario_s2()); });
  m.def(
      "sample_scenario_json",
      [](const std::string& kind, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        return scenario_to_json(sample_scenario(parse_scenario_kind(kind), rng).first);
      },
      py::arg("kind"), py::arg("seed"));

  m.def(
      "run_expert_episode",
      [](const std::string& scenario_json, const MpcConfig& base) {
        const ScenarioConfig s = scenario_from_json(scenario_json);
        const ConverterParams p = episode_params(s, nominal_params());
        const MpcConfig mpc = episode_mpc(base, s);
        std::pair<Trajectory, MetricsReport> out;
        {
          py::gil_scoped_release release;
          out = rollout(
              s, p,
              [&](const FeatureVector& z) { return label_features(Labeler::BeamExpert, z, p, mpc); },
              mpc);
        }
        return py::make_tuple(trajectory_dict(out.first), metrics_dict(out.second));
      },
      py::arg("scenario_json"), py::arg("mpc") = default_mpc_config(),
      "Closed-loop rollout under the MPC expert; returns (trajectory, metrics).");

  py::class_<MlpModel>(m, "MlpModel")
      .def_readonly("hidden", &MlpModel::hidden)
      .def_property_readonly("parameter_count", [](const MlpModel& mdl) { return mdl.params.size(); })
      .def("predict", &predict_mode<float>, py::arg("z"))
      .def("probabilities",
           [](const MlpModel& mdl, const FeatureVector& z) {
             const auto p = forward(mdl, z);
             return std::vector<float>(p.begin(), p.end());
           })
      .def("save", [](const MlpModel& mdl, const std::string& path) { save_model(mdl, path); });

  m.def("init_mlp", &init_mlp<float>, py::arg("hidden") = kDefaultHidden, py::arg("seed") = 1);
  m.def("load_model", &load_model, py::arg("path"));

  m.def(
      "run_student_episode",
      [](const MlpModel& model, const std::string& scenario_json, const MpcConfig& base) {
        const ScenarioConfig s = scenario_from_json(scenario_json);
        const ConverterParams p = episode_params(s, nominal_params());
        const MpcConfig mpc = episode_mpc(base, s);
        std::pair<Trajectory, MetricsReport> out;
        {
          py::gil_scoped_release release;
          out = rollout(s, p, mlp_policy(model), mpc);
        }
        return py::make_tuple(trajectory_dict(out.first), metrics_dict(out.second));
      },
      py::arg("model"), py::arg("scenario_json"), py::arg("mpc") = default_mpc_config());

  py::class_<Dataset>(m, "Dataset")
      .def("__len__", &Dataset::size)
      .def_property_readonly("histogram",
                             [](const Dataset& d) {
                               return std::vector<std::size_t>(d.meta.histogram.begin(),
                                                               d.meta.histogram.end());
                             })
      .def_property_readonly("dropped_episodes", [](const Dataset& d) { return d.meta.dropped_episodes; })
      .def("arrays", &features_and_labels, "Returns (features float32 [n, 6], labels uint8 [n]).")
      .def("save", [](const Dataset& d, const std::string& path) { save_dataset(d, path); });

  m.def("load_dataset", &load_dataset, py::arg("path"));
  m.def("default_pipeline_config_json", [] { return pipeline_config_to_json(PipelineConfig{}); });

  m.def(
      "generate_dataset",
      [](const std::string& config_json, bool greedy, bool domain_randomization) {
        const PipelineConfig cfg = pipeline_config_from_json(config_json);
        py::gil_scoped_release release;
        return generate_dataset(cfg, greedy ? Labeler::GreedySurrogate : Labeler::BeamExpert,
                                domain_randomization);
      },
      py::arg("config_json"), py::arg("greedy") = false, py::arg("domain_randomization") = true);

  m.def(
      "train_offline",
      [](const std::string& config_json, const Dataset& ds) {
        const PipelineConfig cfg = pipeline_config_from_json(config_json);
        OfflineResult r;
        {
          py::gil_scoped_release release;
          r = train_offline(cfg, ds);
        }
        py::list history;
        for (const EpochStats& e : r.history) {
          py::dict row;
          row["epoch"] = e.epoch;
          row["train_loss"] = e.train_loss;
          row["train_acc"] = e.train_acc;
          row["val_loss"] = e.val_loss;
          row["val_acc"] = e.val_acc;
          history.append(row);
        }
        return py::make_tuple(r.model, r.test_accuracy, history);
      },
      py::arg("config_json"), py::arg("dataset"), "Returns (model, test_accuracy, history).");

  m.def(
      "bench_decision_time",
      [](const MlpModel& model, std::size_t n, std::uint64_t seed) {
        BenchResult b;
        {
          py::gil_scoped_release release;
          b = bench_decision_time(default_mpc_config(), model, n, seed);
        }
        py::dict d;
        d["expert_us"] = b.expert_us;
        d["ann_us"] = b.ann_us;
        d["ratio"] = b.ratio;
        d["decisions"] = b.decisions;
        return d;
      },
      py::arg("model"), py::arg("n") = 2000, py::arg("seed") = 1);

  m.attr("build_id") = build_id();
}
