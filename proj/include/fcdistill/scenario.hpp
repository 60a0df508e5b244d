#pragma once

// Closed-loop episodes: outer PI voltage loop, scenario timelines with step
// events, randomized scenario samplers and trajectory export.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fcdistill/converter.hpp"
#include "fcdistill/mpc.hpp"

namespace fcdistill {

enum class EventTarget : std::uint8_t { VIn, LoadR };

struct StepEvent {
  double time = 0.0;  // s
  EventTarget target = EventTarget::VIn;
  double value = 0.0;  // V or Ohm

  friend bool operator==(const StepEvent&, const StepEvent&) = default;
};

/// Discrete PI gains and the i_ref clamp of the outer voltage loop.
struct OuterLoopConfig {
  double k_p = 0.35;    // A/V
  double k_i = 120.0;   // A/(V s)
  double i_ref_lo = 0.0;  // A
  double i_ref_hi = 45.0; // A

  friend bool operator==(const OuterLoopConfig&, const OuterLoopConfig&) = default;
};

struct OuterLoopState {
  OuterLoopConfig cfg;
  double integral = 0.0;  // V s
};

/// PI law on e = v_ref - v_o with conditional integration: when the
/// unclamped output leaves [i_ref_lo, i_ref_hi] the integral is not advanced.
std::pair<double, OuterLoopState> outer_current_reference(const OuterLoopState& state, double v_o,
                                                          double v_ref, double ts);

enum class ScenarioKind : std::uint8_t { S1, S2, S3 };

std::string_view to_string(ScenarioKind k);
ScenarioKind parse_scenario_kind(std::string_view name);

struct ScenarioConfig {
  Topology topology = Topology::FcBoost;
  double duration = 0.5;  // s
  double v_ref = 180.0;   // V
  double v_in = 120.0;    // initial input voltage, V
  double load_r = 36.0;   // initial load resistance, Ohm
  std::vector<StepEvent> events;
  double d_l = 0.0;
  double d_cf = 0.0;
  double d_c = 0.0;
  std::uint64_t seed = 0;
  OuterLoopConfig outer;

  /// Throws std::invalid_argument on a non-positive duration, unsorted or
  /// out-of-range events, or a non-positive load at any time.
  void validate() const;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// Policy contract: a feature vector in, an admissible mode out.
using SwitchingPolicy = std::function<SwitchMode(const FeatureVector&)>;

struct TrajectoryRecord {
  double t = 0.0;
  PlantState x;
  Exogenous w;
  double i_ref = 0.0;
  SwitchMode mode = SwitchMode::OP;
  double load_r = 0.0;
};

struct Trajectory {
  double ts = 0.0;
  std::vector<TrajectoryRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

/// Number of control steps in an episode of the given duration.
std::size_t step_count(double duration, double ts);

/// Index of the first step whose time is at or after `time`.
std::size_t event_step(double time, double ts);

/// Steady operating point for the given reference, input voltage and load.
PlantState steady_state(Topology topology, double v_ref, double v_in, double load_r);

/// Runs one closed-loop episode. Each step applies pending events, measures
/// i_o = v_o / R, updates the outer loop, queries the policy, records the
/// pre-step sample and advances the plant. Throws DivergenceError carrying the
/// step index if the plant leaves the finite range.
Trajectory run_episode(const ScenarioConfig& cfg, const SwitchingPolicy& policy,
                       const ConverterParams& p);

struct EpisodeOutcome {
  Trajectory trajectory;    // samples recorded before any divergence
  long diverged_step = -1;  // -1 when the episode ran to completion

  bool diverged() const { return diverged_step >= 0; }
};

/// As run_episode, but a divergence ends the episode instead of throwing.
EpisodeOutcome run_episode_partial(const ScenarioConfig& cfg, const SwitchingPolicy& policy,
                                   const ConverterParams& p);

/// Ranges the randomized scenarios draw from.
struct RandomizationRanges {
  double v_in_lo = 80.0, v_in_hi = 140.0;
  double r_lo = 10.0, r_hi = 100.0;
  double rho = 0.3;
  int events = 4;
  double duration = 0.5;
  double event_margin = 0.05;

  /// Scales every range about its midpoint by factor r (rho scales by r).
  RandomizationRanges scaled(double r) const;
};

/// The canonical nominal scenario: V_in 120 -> 100 V at 0.2 s, -> 130 V at
/// 0.3 s, load 36 -> 20 Ohm at 0.4 s, 0.5 s long.
ScenarioConfig canonical_s1();

/// Draws a scenario of the given kind together with its (possibly perturbed)
/// plant parameters.
std::pair<ScenarioConfig, ConverterParams> sample_scenario(
    ScenarioKind kind, std::mt19937_64& rng, const RandomizationRanges& ranges = {},
    const ConverterParams& base = nominal_params());

/// Parameters of the plant an episode runs on.
ConverterParams episode_params(const ScenarioConfig& cfg, const ConverterParams& base);

// Serialization. Scenario configs are JSON objects; trajectories are CSV with
// the header t,i_L,v_Cf,v_o,V_in,i_o,i_ref,mode,R.
std::string scenario_to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_from_json(const std::string& text);
void save_scenario(const ScenarioConfig& cfg, const std::string& path);
ScenarioConfig load_scenario(const std::string& path);

void write_trajectory_csv(const Trajectory& traj, std::ostream& os);
void save_trajectory_csv(const Trajectory& traj, const std::string& path);

}  // namespace fcdistill
