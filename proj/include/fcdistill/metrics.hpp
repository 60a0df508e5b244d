#pragma once

#include <string>

#include "fcdistill/mpc.hpp"
#include "fcdistill/scenario.hpp"

namespace fcdistill {

/// Closed-loop quality of one rollout.
struct MetricsReport {
  double mse_vo = 0.0;
  double mse_vcf = 0.0;
  double mse_il = 0.0;
  double sse_vo = 0.0;   // signed, final sample
  double sse_vcf = 0.0;  // signed, final sample
  double overshoot_vo = 0.0;   // V
  double overshoot_vcf = 0.0;  // V
  double mp_vo = 0.0;   // %
  double mp_vcf = 0.0;  // %
  double t_set_vo = 0.0;   // s, last exit from the +-2 % band
  double t_set_vcf = 0.0;  // s
  double ripple_vo = 0.0;
  double ripple_vcf = 0.0;
  double ripple_window_start = 0.0;  // s
  bool ripple_window_scaled = false;
  double penalty_over = 0.0;
  double penalty_sag = 0.0;
  long n_il_viol = 0;
  long switch_count = 0;
  double switch_freq = 0.0;  // Hz
  long n_sa = 0;
  long n_sb = 0;
  long n_trans_total = 0;
  double e_in = 0.0;   // J
  double e_out = 0.0;  // J
  double p_out_avg = 0.0;  // W
  double eff_avg = 0.0;
  double j_sum = 0.0;
  double j_mean = 0.0;
  long steps = 0;
};

struct CurrentLimits {
  double lo;
  double hi;
};

/// Evaluates every metric over the record stream. The capacitor reference is
/// v_ref / 2 for the boost and V_in / 2 (per sample) for the buck; the
/// accumulated stage cost uses the same weights as the expert.
MetricsReport compute_metrics(const Trajectory& traj, double v_ref, const MpcConfig& mpc_cfg,
                              CurrentLimits i_safe);

/// Flat JSON object, one key per field.
std::string metrics_to_json(const MetricsReport& m);

/// Field names and values in a fixed order, for CSV tables.
std::vector<std::pair<std::string, double>> metrics_fields(const MetricsReport& m);

}  // namespace fcdistill
