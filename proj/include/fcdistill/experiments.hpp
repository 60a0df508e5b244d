#pragma once

// Experiment orchestration: the offline/DAgger training pipeline, scenario
// comparisons, the ablation matrix, sensitivity sweeps and the decision
// latency benchmark.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fcdistill/dagger.hpp"
#include "fcdistill/dataset.hpp"
#include "fcdistill/metrics.hpp"
#include "fcdistill/mlp.hpp"

namespace fcdistill {

/// Identifier of the build (git describe at configure time, or "unknown").
std::string build_id();

/// Everything the boost pipeline needs, loadable from one JSON file.
struct PipelineConfig {
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::array<int, 3> episodes{2, 4, 4};  // nominal, operating, parametric
  RandomizationRanges ranges;
  std::array<double, 3> split{0.8, 0.1, 0.1};
  MpcConfig mpc = default_mpc_config();
  int hidden = kDefaultHidden;
  TrainConfig train;
  DaggerConfig dagger;
  int eval_episodes = 10;  // randomized test rollouts per scenario kind
  std::uint64_t eval_seed = 1001;

  void validate() const;
};

std::string pipeline_config_to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const std::string& text);
PipelineConfig load_pipeline_config(const std::string& path);
void save_pipeline_config(const PipelineConfig& cfg, const std::string& path);

/// Expert dataset of the pipeline. Without domain randomization every episode
/// is the nominal step-response scenario.
Dataset generate_dataset(const PipelineConfig& cfg, Labeler labeler = Labeler::BeamExpert,
                         bool domain_randomization = true);

struct OfflineResult {
  MlpModel model;
  DatasetSplit split;
  TrainHistory history;
  double test_accuracy = 0.0;
};

/// Splits the dataset, fits the normalizer on the training split and trains a
/// freshly initialized network. `weights` overrides the inverse-frequency
/// class weights when non-empty.
OfflineResult train_offline(const PipelineConfig& cfg, const Dataset& ds,
                            std::vector<double> weights = {});

/// DAgger settings of the pipeline: training, expert and ranges taken from
/// `cfg`. Without domain randomization each iteration rolls out the nominal
/// scenario once.
DaggerConfig pipeline_dagger(const PipelineConfig& cfg, bool domain_randomization = true);

/// Inverse-frequency weights for the classes that occur; absent classes get
/// weight 1 (they never enter the loss).
std::vector<double> present_class_weights(const ClassHistogram& histogram);

/// Fixed evaluation episodes of one scenario kind. S1 has a single canonical
/// episode; S2/S3 draw `n` episodes from `seed`.
std::vector<EpisodeSpec> evaluation_set(ScenarioKind kind, int n, std::uint64_t seed,
                                        const RandomizationRanges& ranges = {});

/// Builds a closed-loop policy for one episode (the expert needs its plant).
using PolicyFactory = std::function<SwitchingPolicy(const EpisodeSpec&)>;

PolicyFactory expert_factory(const MpcConfig& mpc);
PolicyFactory student_factory(const MlpModel& model);

struct RolloutRow {
  std::string scenario;
  std::string controller;
  int episode = 0;
  std::uint64_t seed = 0;  // scenario seed
  bool diverged = false;
  MetricsReport metrics;
};

/// Runs `factory` on every episode; a diverged rollout is scored on the
/// samples recorded before the divergence.
std::vector<RolloutRow> run_rollouts(const PolicyFactory& factory, const std::string& controller,
                                     const std::string& scenario,
                                     const std::vector<EpisodeSpec>& episodes,
                                     const MpcConfig& mpc, unsigned threads = 0);

/// Field-wise mean of the reports (integer counters are summed).
MetricsReport aggregate_metrics(const std::vector<MetricsReport>& reports);

struct SuiteResult {
  std::vector<RolloutRow> rows;
};

/// S1/S2 with both the expert and the student, S3 with the student only.
SuiteResult run_scenario_suite(const MlpModel& model, const PipelineConfig& cfg);

/// Per-rollout CSV: build id, master seed, scenario, controller, episode,
/// scenario seed, diverged flag and every metric.
void write_rollouts_csv(const std::vector<RolloutRow>& rows, std::uint64_t master_seed,
                        const std::string& path);

/// One row per (scenario, controller) with mean metrics.
void write_summary_csv(const std::vector<RolloutRow>& rows, std::uint64_t master_seed,
                       const std::string& path);

enum class AblationName : std::uint8_t { Full, NoDagger, NoDr, NoExpert };

std::string_view to_string(AblationName a);
AblationName parse_ablation(std::string_view name);

struct AblationConfig {
  AblationName name = AblationName::Full;
  bool expert_labels = true;
  bool domain_randomization = true;
  bool dagger = true;
};

AblationConfig ablation_config(AblationName name);
std::vector<AblationConfig> default_ablation_grid();

struct AblationModels {
  std::vector<std::pair<AblationName, MlpModel>> models;
};

/// Trains every configuration of `grid`. NO_DAGGER reuses the pre-DAgger
/// network of FULL when both are requested.
AblationModels train_ablation_models(const PipelineConfig& cfg,
                                     const std::vector<AblationConfig>& grid);

/// Evaluates each model on the same fixed S1/S2/S3 episodes.
std::vector<RolloutRow> evaluate_ablation(const AblationModels& models, const PipelineConfig& cfg);

std::vector<RolloutRow> run_ablation(const PipelineConfig& cfg,
                                     const std::vector<AblationConfig>& grid);

enum class SweepAxis : std::uint8_t { DaggerBudget, DrIntensity };

std::string_view to_string(SweepAxis a);
SweepAxis parse_sweep_axis(std::string_view name);

struct SweepSpec {
  SweepAxis axis = SweepAxis::DaggerBudget;
  std::vector<double> grid;  // budgets, or intensities in percent
  int epochs = 40;
  std::vector<std::uint64_t> seeds{1, 2, 3};

  /// Default grids: budgets {0, 500, ..., 12000}, intensities {10, ..., 100} %.
  static SweepSpec defaults(SweepAxis axis);
};

struct SweepPoint {
  double value = 0.0;
  std::uint64_t seed = 0;
  std::string scenario;
  MetricsReport metrics;  // mean over the scenario's fixed episodes
  bool diverged = false;
};

/// Budget axis: refines `base` with at most N mismatch samples per grid point
/// (N = 0 is the base itself). Intensity axis: regenerates the dataset with
/// ranges scaled by r and retrains from scratch. Every point is evaluated on
/// the same S2/S3 episodes.
std::vector<SweepPoint> run_sweep(const SweepSpec& spec, const PipelineConfig& cfg,
                                  const OfflineResult& base);

void write_sweep_csv(const std::vector<SweepPoint>& points, SweepAxis axis,
                     std::uint64_t master_seed, const std::string& path);

/// Metrics ordered by decreasing variance across the sweep, per scenario.
void write_sweep_variance_csv(const std::vector<SweepPoint>& points, const std::string& path);

struct BenchResult {
  double expert_us = 0.0;
  double ann_us = 0.0;
  double ratio = 0.0;
  std::size_t decisions = 0;
};

/// Median per-decision latency over `n` feature vectors drawn from a recorded
/// expert trajectory, after a warm-up, single threaded.
BenchResult bench_decision_time(const MpcConfig& mpc, const MlpModel& model, std::size_t n,
                                std::uint64_t seed);

}  // namespace fcdistill
