#pragma once

// Disagreement-based DAgger: the student drives the closed loop, the expert
// relabels every visited state, and only disagreements are aggregated before
// fine-tuning.

#include <array>
#include <cstdint>
#include <vector>

#include "fcdistill/dataset.hpp"
#include "fcdistill/mlp.hpp"

namespace fcdistill {

struct DaggerConfig {
  int iterations = 3;
  std::array<int, 3> episodes{1, 2, 2};  // rollouts per iteration: nominal, operating, parametric
  std::size_t budget = 12000;            // mismatch samples over all iterations
  int finetune_epochs = 280;             // over all iterations
  TrainConfig train;                     // lr, batch size and seed of the fine-tuning
  std::uint64_t seed = 11;
  MpcConfig mpc = default_mpc_config();
  Labeler labeler = Labeler::BeamExpert;
  ScenarioSampler sampler;  // defaults to boost_sampler()
  unsigned threads = 0;

  void validate() const;
};

struct MismatchSet {
  Dataset samples;  // expert-labelled disagreement states, subset Dagger
  std::size_t visited = 0;
  std::size_t disagreements = 0;
  std::size_t diverged_episodes = 0;

  double mismatch_rate() const {
    return visited == 0 ? 0.0 : static_cast<double>(disagreements) / static_cast<double>(visited);
  }
};

/// One scenario plus the plant it runs on.
struct EpisodeSpec {
  ScenarioConfig scenario;
  ConverterParams params;
};

/// Draws the rollout episodes of DAgger iteration `iteration`.
std::vector<EpisodeSpec> dagger_episodes(const DaggerConfig& cfg, int iteration);

/// Rolls out every episode under `student`, queries the expert (with the
/// episode's plant) at each visited state and keeps the disagreements, in
/// episode order, up to `budget`. A diverging rollout ends early; what it
/// visited is kept.
MismatchSet collect_mismatch(const SwitchingPolicy& student, const std::vector<EpisodeSpec>& episodes,
                             std::size_t budget, const MpcConfig& mpc, Labeler labeler,
                             unsigned threads = 0);

struct DaggerIterationStats {
  int iteration = 0;
  std::size_t visited = 0;
  std::size_t disagreements = 0;
  double mismatch_rate = 0.0;
  std::size_t added = 0;
  std::size_t aggregate_size = 0;
  std::size_t diverged_episodes = 0;
  int epochs = 0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct DaggerResult {
  MlpModel model;
  std::vector<DaggerIterationStats> stats;
  Dataset mismatches;  // everything aggregated on top of the base set
};

/// Iterates collect -> aggregate -> fine-tune. Class weights are recomputed on
/// the aggregate before every fine-tuning pass; the normalizer is kept.
DaggerResult run_dagger(const MlpModel& student, std::span<const Sample> base_train,
                        std::span<const Sample> val, const DaggerConfig& cfg);

/// Fraction of student-visited states on which the student and the expert
/// disagree, pooled over the given rollouts.
double disagreement_rate(const MlpModel& student, const std::vector<EpisodeSpec>& episodes,
                         const MpcConfig& mpc, unsigned threads = 0);

void write_dagger_stats_csv(const std::vector<DaggerIterationStats>& stats,
                            const std::string& path);

}  // namespace fcdistill
