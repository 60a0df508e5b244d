// fcdistill: command-line driver for data generation, training, DAgger,
// evaluation, ablations, sweeps, latency benchmarks and transfer runs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "fcdistill/experiments.hpp"
#include "fcdistill/transfer.hpp"

namespace fs = std::filesystem;
using namespace fcdistill;

namespace {

struct Common {
  std::string config;
  std::string run_dir = "runs/default";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<int> batch;
  std::optional<int> eval_episodes;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON pipeline config")->check(CLI::ExistingFile);
  app->add_option("--run-dir", c.run_dir, "output directory")->capture_default_str();
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--threads", c.threads, "worker threads (0 = all cores)");
  app->add_option("--epochs", c.epochs, "training epochs");
  app->add_option("--lr", c.lr, "learning rate");
  app->add_option("--batch", c.batch, "minibatch size");
  app->add_option("--eval-episodes", c.eval_episodes, "randomized test rollouts per scenario");
}

PipelineConfig resolve(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : load_pipeline_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) cfg.threads = *c.threads;
  if (c.epochs) cfg.train.epochs = *c.epochs;
  if (c.lr) cfg.train.lr = *c.lr;
  if (c.batch) cfg.train.batch_size = *c.batch;
  if (c.eval_episodes) cfg.eval_episodes = *c.eval_episodes;
  cfg.validate();
  return cfg;
}

fs::path subdir(const Common& c, const std::string& name) {
  fs::path p = fs::path(c.run_dir) / name;
  fs::create_directories(p);
  return p;
}

std::string in_run(const Common& c, const std::string& dir, const std::string& file,
                   const std::string& given) {
  if (!given.empty()) {
    const fs::path p(given);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    return given;
  }
  return (subdir(c, dir) / file).string();
}

void record_config(const Common& c, const PipelineConfig& cfg, const std::string& command) {
  save_pipeline_config(cfg, (subdir(c, "configs") / (command + ".json")).string());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text << '\n';
}

std::string default_data(const Common& c) { return (fs::path(c.run_dir) / "data" / "dataset.fcds").string(); }
std::string default_model(const Common& c, const std::string& name) {
  return (fs::path(c.run_dir) / "models" / name).string();
}

void print_rows_summary(const std::vector<RolloutRow>& rows) {
  std::vector<std::pair<std::string, std::string>> keys;
  for (const RolloutRow& r : rows) {
    const auto k = std::make_pair(r.scenario, r.controller);
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  }
  std::printf("%-4s %-10s %12s %12s %10s %8s %6s\n", "scn", "controller", "MSE_vo", "MSE_iL",
              "Os_vo", "N_viol", "div");
  for (const auto& k : keys) {
    std::vector<MetricsReport> reps;
    int diverged = 0;
    for (const RolloutRow& r : rows) {
      if (r.scenario == k.first && r.controller == k.second) {
        reps.push_back(r.metrics);
        diverged += r.diverged ? 1 : 0;
      }
    }
    const MetricsReport m = aggregate_metrics(reps);
    std::printf("%-4s %-10s %12.4f %12.4f %10.4f %8ld %6d\n", k.first.c_str(), k.second.c_str(),
                m.mse_vo, m.mse_il, m.overshoot_vo, m.n_il_viol, diverged);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MPC-to-neural switching policy distillation for the FC-TLBC"};
  app.require_subcommand(1);

  // gen-data
  Common gen_c;
  std::vector<int> gen_episodes;
  std::string gen_labeler = "expert", gen_out, gen_csv;
  bool gen_no_dr = false;
  auto* gen = app.add_subcommand("gen-data", "generate an expert-labelled dataset");
  add_common(gen, gen_c);
  gen->add_option("--episodes", gen_episodes, "episodes per subset: nominal operating parametric")
      ->expected(3);
  gen->add_option("--labeler", gen_labeler, "expert | greedy")->capture_default_str();
  gen->add_flag("--no-dr", gen_no_dr, "nominal scenario only");
  gen->add_option("--out", gen_out, "dataset path");
  gen->add_option("--csv", gen_csv, "also export CSV");

  // train
  Common tr_c;
  std::string tr_data, tr_out, tr_history;
  std::optional<int> tr_hidden;
  auto* tr = app.add_subcommand("train", "train the student on a dataset");
  add_common(tr, tr_c);
  tr->add_option("--data", tr_data, "dataset path");
  tr->add_option("--out", tr_out, "model path");
  tr->add_option("--history", tr_history, "training history CSV");
  tr->add_option("--hidden", tr_hidden, "hidden width");

  // dagger
  Common dg_c;
  std::string dg_data, dg_model, dg_out, dg_stats;
  std::optional<std::size_t> dg_budget;
  std::optional<int> dg_iters, dg_ft_epochs;
  auto* dg = app.add_subcommand("dagger", "disagreement-based DAgger refinement");
  add_common(dg, dg_c);
  dg->add_option("--data", dg_data, "base dataset path");
  dg->add_option("--model", dg_model, "student to refine");
  dg->add_option("--budget", dg_budget, "mismatch samples over all iterations");
  dg->add_option("--iterations", dg_iters, "DAgger iterations");
  dg->add_option("--finetune-epochs", dg_ft_epochs, "fine-tune epochs over all iterations");
  dg->add_option("--out", dg_out, "refined model path");
  dg->add_option("--stats", dg_stats, "per-iteration CSV");

  // eval
  Common ev_c;
  std::string ev_model;
  bool ev_dump = false;
  auto* ev = app.add_subcommand("eval", "S1/S2/S3 comparison of expert and student");
  add_common(ev, ev_c);
  ev->add_option("--model", ev_model, "student model");
  ev->add_flag("--dump-trajectories", ev_dump, "write every rollout as CSV");

  // ablate
  Common ab_c;
  std::vector<std::string> ab_names;
  auto* ab = app.add_subcommand("ablate", "train and evaluate the ablation matrix");
  add_common(ab, ab_c);
  ab->add_option("--configs", ab_names, "FULL NO_DAGGER NO_DR NO_EXPERT");

  // sweep
  Common sw_c;
  std::string sw_axis = "dagger_budget", sw_data, sw_model;
  std::vector<double> sw_grid;
  std::vector<std::uint64_t> sw_seeds;
  std::optional<int> sw_epochs;
  auto* sw = app.add_subcommand("sweep", "sensitivity sweep over the DAgger budget or DR intensity");
  add_common(sw, sw_c);
  sw->add_option("--axis", sw_axis, "dagger_budget | dr_intensity")->capture_default_str();
  sw->add_option("--grid", sw_grid, "grid values (budgets, or intensities in percent)");
  sw->add_option("--seeds", sw_seeds, "seeds per grid point");
  sw->add_option("--sweep-epochs", sw_epochs, "retraining epochs per point");
  sw->add_option("--data", sw_data, "base dataset (budget axis)");
  sw->add_option("--model", sw_model, "pre-trained base model (budget axis)");

  // bench
  Common bn_c;
  std::string bn_model;
  std::size_t bn_n = 5000;
  auto* bn = app.add_subcommand("bench", "per-decision latency of expert and student");
  add_common(bn, bn_c);
  bn->add_option("--model", bn_model, "student model");
  bn->add_option("--n", bn_n, "timed decisions")->capture_default_str();

  // transfer
  Common tf_c;
  std::string tf_source;
  std::vector<std::uint64_t> tf_seeds;
  auto* tf = app.add_subcommand("transfer", "FC-TLBC -> Buck-3L transfer experiment");
  add_common(tf, tf_c);
  tf->add_option("--source-model", tf_source, "pre-trained FC-TLBC source (trained when absent)");
  tf->add_option("--seeds", tf_seeds, "experiment seeds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      PipelineConfig cfg = resolve(gen_c);
      if (!gen_episodes.empty()) cfg.episodes = {gen_episodes[0], gen_episodes[1], gen_episodes[2]};
      record_config(gen_c, cfg, "gen-data");
      const Dataset ds = generate_dataset(cfg, parse_labeler(gen_labeler), !gen_no_dr);
      const std::string out = in_run(gen_c, "data", "dataset.fcds", gen_out);
      save_dataset(ds, out);
      if (!gen_csv.empty()) export_dataset_csv(ds, gen_csv);
      std::printf("%zu samples (nominal %zu, operating %zu, parametric %zu), %zu dropped episodes\n",
                  ds.size(), ds.meta.subset_counts[0], ds.meta.subset_counts[1],
                  ds.meta.subset_counts[2], ds.meta.dropped_episodes);
      std::printf("classes OP %zu PO %zu NO %zu ON %zu -> %s\n", ds.meta.histogram[0],
                  ds.meta.histogram[1], ds.meta.histogram[2], ds.meta.histogram[3], out.c_str());
    } else if (*tr) {
      PipelineConfig cfg = resolve(tr_c);
      if (tr_hidden) cfg.hidden = *tr_hidden;
      record_config(tr_c, cfg, "train");
      Dataset ds = load_dataset(tr_data.empty() ? default_data(tr_c) : tr_data);
      const std::vector<double> weights = ds.meta.labeler == Labeler::GreedySurrogate
                                              ? present_class_weights(ds.meta.histogram)
                                              : std::vector<double>{};
      const OfflineResult r = train_offline(cfg, ds, weights);
      const std::string out = in_run(tr_c, "models", "base.fcnn", tr_out);
      save_model(r.model, out);
      write_history_csv(r.history, in_run(tr_c, "tables", "train_history.csv", tr_history));
      const double val = r.history.empty() ? 0.0 : r.history.back().val_acc;
      write_text((subdir(tr_c, "reports") / "train.json").string(),
                 nlohmann::json{{"build_id", build_id()},
                                {"seed", cfg.seed},
                                {"train", r.split.train.size()},
                                {"val", r.split.val.size()},
                                {"test", r.split.test.size()},
                                {"val_accuracy", val},
                                {"test_accuracy", r.test_accuracy}}
                     .dump(2));
      std::printf("train %zu / val %zu / test %zu samples: val acc %.4f, test acc %.4f -> %s\n",
                  r.split.train.size(), r.split.val.size(), r.split.test.size(), val,
                  r.test_accuracy, out.c_str());
    } else if (*dg) {
      PipelineConfig cfg = resolve(dg_c);
      if (dg_budget) cfg.dagger.budget = *dg_budget;
      if (dg_iters) cfg.dagger.iterations = *dg_iters;
      if (dg_ft_epochs) cfg.dagger.finetune_epochs = *dg_ft_epochs;
      record_config(dg_c, cfg, "dagger");
      const Dataset ds = load_dataset(dg_data.empty() ? default_data(dg_c) : dg_data);
      const MlpModel student = load_model(dg_model.empty() ? default_model(dg_c, "base.fcnn") : dg_model);
      const DatasetSplit sp = split(ds, cfg.split, cfg.seed);
      DaggerConfig d = cfg.dagger;
      d.train = cfg.train;
      d.mpc = cfg.mpc;
      d.threads = cfg.threads;
      d.sampler = boost_sampler(cfg.ranges);
      const DaggerResult r = run_dagger(student, sp.train, sp.val, d);
      const std::string out = in_run(dg_c, "models", "dagger.fcnn", dg_out);
      save_model(r.model, out);
      write_dagger_stats_csv(r.stats, in_run(dg_c, "tables", "dagger_stats.csv", dg_stats));
      save_dataset(r.mismatches, (subdir(dg_c, "data") / "mismatch.fcds").string());
      for (const DaggerIterationStats& s : r.stats) {
        std::printf("iteration %d: %zu/%zu disagreements (%.4f), +%zu samples, aggregate %zu\n",
                    s.iteration, s.disagreements, s.visited, s.mismatch_rate, s.added,
                    s.aggregate_size);
      }
      std::printf("test acc %.4f -> %s\n", evaluate(r.model, sp.test).accuracy, out.c_str());
    } else if (*ev) {
      const PipelineConfig cfg = resolve(ev_c);
      record_config(ev_c, cfg, "eval");
      const MlpModel model = load_model(ev_model.empty() ? default_model(ev_c, "dagger.fcnn") : ev_model);
      const SuiteResult r = run_scenario_suite(model, cfg);
      write_rollouts_csv(r.rows, cfg.seed, (subdir(ev_c, "tables") / "eval_rollouts.csv").string());
      write_summary_csv(r.rows, cfg.seed, (subdir(ev_c, "tables") / "eval_summary.csv").string());
      const fs::path reports = subdir(ev_c, "reports/eval");
      for (const RolloutRow& row : r.rows) {
        write_text((reports / (row.scenario + "_" + row.controller + "_" +
                               std::to_string(row.episode) + ".json")).string(),
                   metrics_to_json(row.metrics));
      }
      if (ev_dump) {
        const fs::path dir = subdir(ev_c, "trajectories");
        for (ScenarioKind kind : {ScenarioKind::S1, ScenarioKind::S2, ScenarioKind::S3}) {
          const auto eps = evaluation_set(kind, cfg.eval_episodes, cfg.eval_seed, cfg.ranges);
          for (std::size_t i = 0; i < eps.size(); ++i) {
            const std::string stem = std::string(to_string(kind)) + "_" + std::to_string(i);
            save_scenario(eps[i].scenario, (dir / (stem + "_scenario.json")).string());
            save_trajectory_csv(
                run_episode_partial(eps[i].scenario, mlp_policy(model), eps[i].params).trajectory,
                (dir / (stem + "_ANN.csv")).string());
            if (kind != ScenarioKind::S3) {
              save_trajectory_csv(run_episode_partial(eps[i].scenario,
                                                      expert_factory(cfg.mpc)(eps[i]), eps[i].params)
                                      .trajectory,
                                  (dir / (stem + "_MPC.csv")).string());
            }
          }
        }
      }
      print_rows_summary(r.rows);
    } else if (*ab) {
      const PipelineConfig cfg = resolve(ab_c);
      record_config(ab_c, cfg, "ablate");
      std::vector<AblationConfig> grid;
      for (const std::string& n : ab_names) grid.push_back(ablation_config(parse_ablation(n)));
      if (grid.empty()) grid = default_ablation_grid();
      const AblationModels models = train_ablation_models(cfg, grid);
      for (const auto& [name, model] : models.models) {
        save_model(model, (subdir(ab_c, "models") / ("ablation_" + std::string(to_string(name)) + ".fcnn")).string());
      }
      const auto rows = evaluate_ablation(models, cfg);
      write_rollouts_csv(rows, cfg.seed, (subdir(ab_c, "tables") / "ablation_rollouts.csv").string());
      write_summary_csv(rows, cfg.seed, (subdir(ab_c, "tables") / "ablation_summary.csv").string());
      print_rows_summary(rows);
    } else if (*sw) {
      const PipelineConfig cfg = resolve(sw_c);
      record_config(sw_c, cfg, "sweep");
      SweepSpec spec = SweepSpec::defaults(parse_sweep_axis(sw_axis));
      if (!sw_grid.empty()) spec.grid = sw_grid;
      if (!sw_seeds.empty()) spec.seeds = sw_seeds;
      if (sw_epochs) spec.epochs = *sw_epochs;
      OfflineResult base;
      if (spec.axis == SweepAxis::DaggerBudget) {
        const Dataset ds = load_dataset(sw_data.empty() ? default_data(sw_c) : sw_data);
        base.split = split(ds, cfg.split, cfg.seed);
        base.model = load_model(sw_model.empty() ? default_model(sw_c, "base.fcnn") : sw_model);
      }
      const auto points = run_sweep(spec, cfg, base);
      const std::string stem = "sweep_" + std::string(to_string(spec.axis));
      write_sweep_csv(points, spec.axis, cfg.seed, (subdir(sw_c, "tables") / (stem + ".csv")).string());
      write_sweep_variance_csv(points, (subdir(sw_c, "tables") / (stem + "_variance.csv")).string());
      for (const SweepPoint& p : points) {
        std::printf("%s=%g seed %llu %s: MSE_vo %.4f MSE_iL %.4f N_viol %ld eff %.4f\n",
                    sw_axis.c_str(), p.value, static_cast<unsigned long long>(p.seed),
                    p.scenario.c_str(), p.metrics.mse_vo, p.metrics.mse_il, p.metrics.n_il_viol,
                    p.metrics.eff_avg);
      }
    } else if (*bn) {
      const PipelineConfig cfg = resolve(bn_c);
      const MlpModel model = load_model(bn_model.empty() ? default_model(bn_c, "dagger.fcnn") : bn_model);
      const BenchResult b = bench_decision_time(cfg.mpc, model, bn_n, cfg.seed);
      std::ofstream os((subdir(bn_c, "tables") / "bench.csv").string());
      os << "build_id,seed,decisions,expert_us,ann_us,ratio\n"
         << build_id() << ',' << cfg.seed << ',' << b.decisions << ',' << b.expert_us << ','
         << b.ann_us << ',' << b.ratio << '\n';
      std::printf("expert %.3f us/decision, ANN %.3f us/decision, speedup %.1fx\n", b.expert_us,
                  b.ann_us, b.ratio);
    } else if (*tf) {
      const PipelineConfig cfg = resolve(tf_c);
      TransferConfig t;
      t.source_model = tf_source;
      t.mpc = cfg.mpc;
      t.threads = cfg.threads;
      if (!tf_seeds.empty()) t.seeds = tf_seeds;
      if (tf_c.lr) t.lr = *tf_c.lr;
      if (tf_c.batch) t.batch_size = *tf_c.batch;
      const TransferResult r = run_transfer_experiment(t);
      write_transfer_accuracy_csv(r, (subdir(tf_c, "tables") / "transfer_accuracy.csv").string());
      std::vector<RolloutRow> rows;
      for (const TransferSeedResult& s : r.seeds) {
        rows.insert(rows.end(), s.rows.begin(), s.rows.end());
        std::printf("seed %llu: source %.4f, scratch %.4f, transfer %.4f\n",
                    static_cast<unsigned long long>(s.seed), s.source_accuracy,
                    s.scratch_accuracy, s.transfer_accuracy);
      }
      write_rollouts_csv(rows, cfg.seed, (subdir(tf_c, "tables") / "transfer_rollouts.csv").string());
      write_summary_csv(rows, cfg.seed, (subdir(tf_c, "tables") / "transfer_summary.csv").string());
      print_rows_summary(rows);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
