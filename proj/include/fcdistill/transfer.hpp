#pragma once

// Cross-topology transfer: an FC-TLBC source network is adapted to the NPC
// three-level buck by re-initializing its output layer and fine-tuning on
// buck expert data, and compared against training from scratch.

#include <cstdint>
#include <string>
#include <vector>

#include "fcdistill/experiments.hpp"

namespace fcdistill {

/// Buck operating point: v_ref 80 V, V_in 120 V, load 20 Ohm.
ScenarioConfig buck_base_scenario();

/// Moderate disturbance: load 20 -> 10 Ohm at 0.05 s, 0.15 s long.
ScenarioConfig buck_scenario_s1();

/// Strong disturbance: load 20 -> 10 Ohm at 0.05 s, V_in 120 -> 100 V at
/// 0.1 s, load back to 20 Ohm at 0.15 s, 0.25 s long.
ScenarioConfig buck_scenario_s2();

/// Randomized buck episodes for the target dataset.
struct BuckRanges {
  double v_in_lo = 100.0, v_in_hi = 140.0;
  double r_lo = 8.0, r_hi = 30.0;
  int events = 2;
  double duration = 0.1;
  double event_margin = 0.02;
};

ScenarioSampler buck_sampler(const BuckRanges& ranges = {},
                             const ConverterParams& base = nominal_params());

struct TransferConfig {
  std::string source_model;  // optional pre-trained source; trained here when empty
  std::size_t source_samples = 8203;
  int source_epochs = 60;
  std::array<int, 3> source_episodes{1, 1, 1};
  std::size_t target_samples = 4053;
  int target_epochs = 40;
  int target_episodes = 8;
  double test_fraction = 0.2;
  int hidden = kDefaultHidden;
  double lr = 1e-3;
  int batch_size = 2048;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  MpcConfig mpc = default_mpc_config();
  BuckRanges buck;
  unsigned threads = 0;

  void validate() const;
};

/// Copies w1 and b1 bit-exactly from `source`, draws a fresh output layer from
/// `seed` and fits the normalizer on the target training samples. Throws when
/// the source width differs from `hidden`.
MlpModel transfer_init(const MlpModel& source, std::uint64_t seed,
                       std::span<const Sample> target_train, int hidden = kDefaultHidden);

/// Seeded uniform subsample without replacement (all samples when n >= size).
std::vector<Sample> subsample(std::span<const Sample> samples, std::size_t n, std::uint64_t seed);

struct TransferSeedResult {
  std::uint64_t seed = 0;
  double source_accuracy = 0.0;
  double scratch_accuracy = 0.0;
  double transfer_accuracy = 0.0;
  std::size_t target_train = 0;
  std::size_t target_test = 0;
  std::vector<RolloutRow> rows;  // MPC, Scratch, Transfer on S1 and S2
};

struct TransferResult {
  std::vector<TransferSeedResult> seeds;
};

TransferResult run_transfer_experiment(const TransferConfig& cfg);

/// One row per seed with the three accuracies.
void write_transfer_accuracy_csv(const TransferResult& r, const std::string& path);

}  // namespace fcdistill
