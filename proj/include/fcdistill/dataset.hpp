#pragma once

// Domain-randomized expert datasets: generation, class statistics, episode-
// disjoint splits and the binary container format.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fcdistill/mpc.hpp"
#include "fcdistill/scenario.hpp"

namespace fcdistill {

/// Dataset subsets: nominal step responses, operating-point randomization and
/// parameter randomization. DAgger marks the mismatch samples it aggregates.
enum class Subset : std::uint8_t { Nominal = 0, Operating = 1, Parametric = 2, Dagger = 3 };

std::string_view to_string(Subset s);
Subset parse_subset(std::string_view name);

/// Who labels (and drives) the data-collection rollouts.
enum class Labeler : std::uint8_t { BeamExpert, GreedySurrogate };

std::string_view to_string(Labeler l);
Labeler parse_labeler(std::string_view name);

struct Sample {
  FeatureVector z;
  SwitchMode label = SwitchMode::OP;
};

struct EpisodeInfo {
  Subset subset = Subset::Nominal;
  ScenarioConfig scenario;
  ConverterParams params;
  std::size_t offset = 0;  // index of the episode's first sample
  std::size_t count = 0;
};

/// Per-feature standardization. Features with a standard deviation below
/// 1e-9 keep std = 1.
struct FeatureNormalizer {
  std::array<float, FeatureVector::kSize> mean{};
  std::array<float, FeatureVector::kSize> stddev{1, 1, 1, 1, 1, 1};

  friend bool operator==(const FeatureNormalizer&, const FeatureNormalizer&) = default;
};

FeatureNormalizer fit_normalizer(std::span<const Sample> samples);

using ClassHistogram = std::array<std::size_t, kNumModes>;

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

struct DatasetMeta {
  std::array<std::size_t, 4> subset_counts{};  // indexed by Subset
  ClassHistogram histogram{};
  std::optional<FeatureNormalizer> normalizer;
  std::optional<SplitSizes> split_sizes;
  std::uint64_t seed = 0;
  std::size_t dropped_episodes = 0;
  Labeler labeler = Labeler::BeamExpert;
  MpcConfig mpc;
  std::vector<EpisodeInfo> episodes;
};

struct Dataset {
  std::vector<Sample> samples;
  DatasetMeta meta;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

/// Maps a subset to a scenario (and its plant) for one episode.
using ScenarioSampler =
    std::function<std::pair<ScenarioConfig, ConverterParams>(Subset, std::mt19937_64&)>;

/// Boost sampler: nominal -> S1, operating -> S2, parametric -> S3.
ScenarioSampler boost_sampler(const RandomizationRanges& ranges = {},
                              const ConverterParams& base = nominal_params());

struct GenerationSpec {
  std::array<int, 3> episodes{1, 2, 2};  // nominal, operating, parametric
  std::uint64_t seed = 1;
  MpcConfig mpc = default_mpc_config();
  Labeler labeler = Labeler::BeamExpert;
  ScenarioSampler sampler;  // defaults to boost_sampler()
  unsigned threads = 0;
};

/// Seeded generator for episode `index` of `subset`; independent of thread
/// scheduling.
std::mt19937_64 episode_rng(std::uint64_t master_seed, Subset subset, std::size_t index);

/// Labels the (float32-rounded) feature vector with the chosen labeler.
SwitchMode label_features(Labeler labeler, const FeatureVector& z, const ConverterParams& p,
                          const MpcConfig& cfg);

/// Expert configuration for an episode (balancing reference from its v_ref).
MpcConfig episode_mpc(const MpcConfig& base, const ScenarioConfig& scenario);

/// Runs every requested episode in closed loop under the labeler and records
/// one sample per step. Diverged episodes are dropped and counted.
Dataset collect_expert_dataset(const GenerationSpec& spec);

ClassHistogram class_histogram(std::span<const Sample> samples);

/// Inverse-frequency weights total / (4 count_c). Throws when a class is
/// absent.
std::array<double, kNumModes> class_weights(const ClassHistogram& histogram);

/// Appends `more` to `base`, re-basing episode offsets and refreshing counts.
void append_dataset(Dataset& base, const Dataset& more);

/// Recomputes histogram and subset counts from samples and episodes.
void refresh_meta(Dataset& ds);

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
  std::vector<int> episode_partition;  // 0 train, 1 val, 2 test per episode
};

/// Seeded, episode-disjoint split. Episodes are shuffled and assigned in order
/// until each partition reaches its share of the total sample count.
DatasetSplit split(const Dataset& ds, std::array<double, 3> fractions, std::uint64_t seed);

/// Re-runs the expert on a seeded `fraction` of samples with their episode's
/// plant and returns the number of labels that differ.
std::size_t audit_labels(const Dataset& ds, double fraction, std::uint64_t seed,
                         std::size_t* checked = nullptr);

// Binary container: "FCDS" magic, u32 version, u64 meta length, meta JSON,
// u64 record count, then records of 6 little-endian float32 + 1 label byte.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);
void export_dataset_csv(const Dataset& ds, const std::string& path);

}  // namespace fcdistill
