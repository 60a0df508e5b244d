#pragma once

// N-step FCS-MPC expert: horizon cost, exhaustive search and beam search over
// switching sequences, applied in receding-horizon fashion.

#include <cstdint>
#include <span>

#include "fcdistill/converter.hpp"

namespace fcdistill {

/// Measured information vector handed to every switching policy. The member
/// order is the network input order.
struct FeatureVector {
  double i_l = 0.0;
  double v_cf = 0.0;
  double v_o = 0.0;
  double i_ref = 0.0;
  double v_in = 0.0;
  double i_o = 0.0;

  static constexpr std::size_t kSize = 6;

  std::array<double, kSize> to_array() const { return {i_l, v_cf, v_o, i_ref, v_in, i_o}; }
  static FeatureVector from_array(const std::array<double, kSize>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
  }
  PlantState state() const { return {i_l, v_cf, v_o}; }
  Exogenous exogenous() const { return {v_in, i_o}; }
  bool finite() const;

  /// Rounds every entry through float32, the precision datasets are stored at.
  FeatureVector quantized() const;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct MpcConfig {
  int horizon = 5;
  int beam_width = 15;
  double lambda_i = 1.0;
  double lambda_cf = 0.007;
  double v_cf_ref = 90.0;
  Topology topology = Topology::FcBoost;

  void validate() const;
};

/// Table-V expert for a given output reference (v_cf_ref = v_ref / 2).
MpcConfig default_mpc_config(double v_ref = 180.0);

/// Maximum horizon accepted by exhaustive_decide.
inline constexpr int kMaxExhaustiveHorizon = 10;
/// Beam nodes pack the sequence base-4 into 32 bits.
inline constexpr int kMaxHorizon = 15;

struct Decision {
  SwitchMode mode = SwitchMode::OP;
  double cost = 0.0;
  std::uint32_t sequence = 0;  // base-4 digits, first mode most significant
};

/// Work counters filled in by the search routines when requested.
struct SearchStats {
  std::uint64_t stage_evaluations = 0;
  std::uint64_t complete_sequences = 0;
};

double stage_cost(const PlantState& x_pred, double i_ref, const MpcConfig& cfg);

/// Capacitor balancing reference used by the expert at this operating point:
/// v_o_ref / 2 for the boost, V_in / 2 for the buck.
double balance_reference(const MpcConfig& cfg, const FeatureVector& z);

/// Rolls the model through `seq` with w and i_ref held constant and sums the
/// stage cost of every successor state. Throws DivergenceError if the
/// prediction leaves the finite range.
double sequence_cost(const PlantState& x, const Exogenous& w, double i_ref,
                     std::span<const SwitchMode> seq, const ConverterParams& p,
                     const MpcConfig& cfg);

/// Global argmin over all 4^N sequences. Ties go to the lexicographically
/// smallest sequence in the canonical mode order.
Decision exhaustive_decide(const FeatureVector& z, const ConverterParams& p, const MpcConfig& cfg,
                           SearchStats* stats = nullptr);

/// Beam search keeping the K lowest-cost partial sequences at every depth.
Decision beam_decide(const FeatureVector& z, const ConverterParams& p, const MpcConfig& cfg,
                     SearchStats* stats = nullptr);

/// One-step argmin of the stage cost. Used as the label source of the
/// no-expert ablation.
Decision greedy_decide(const FeatureVector& z, const ConverterParams& p, const MpcConfig& cfg);

/// Unpacks the first `horizon` modes of a packed sequence.
std::array<SwitchMode, kMaxHorizon> unpack_sequence(std::uint32_t packed, int horizon);

}  // namespace fcdistill
