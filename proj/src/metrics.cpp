#include "fcdistill/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace fcdistill {

namespace {

// Rollouts shorter than this use the last 20 % of the episode as the ripple
// window instead of t >= 0.4 s.
constexpr double kNominalEpisode = 0.5;
constexpr double kRippleStart = 0.4;

double population_std(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

}  // namespace

MetricsReport compute_metrics(const Trajectory& traj, double v_ref, const MpcConfig& mpc_cfg,
                              CurrentLimits i_safe) {
  if (traj.empty()) throw std::invalid_argument("cannot evaluate metrics on an empty trajectory");
  if (!(traj.ts > 0.0)) throw std::invalid_argument("trajectory has no control period");

  const auto& recs = traj.records;
  const std::size_t n = recs.size();
  const double nd = static_cast<double>(n);
  const double ts = traj.ts;
  const double t_total = nd * ts;
  const bool buck = mpc_cfg.topology == Topology::NpcBuck;
  auto cf_ref = [&](const TrajectoryRecord& r) { return buck ? 0.5 * r.w.v_in : 0.5 * v_ref; };

  MetricsReport m;
  m.steps = static_cast<long>(n);

  double max_vo = -std::numeric_limits<double>::infinity();
  double max_cf_err = -std::numeric_limits<double>::infinity();
  bool vo_left = false, cf_left = false;
  MpcConfig cost_cfg = mpc_cfg;

  for (std::size_t k = 0; k < n; ++k) {
    const TrajectoryRecord& r = recs[k];
    const double vcf_ref = cf_ref(r);
    const double evo = r.x.v_o - v_ref;
    const double ecf = r.x.v_cf - vcf_ref;
    const double eil = r.x.i_l - r.i_ref;
    m.mse_vo += evo * evo;
    m.mse_vcf += ecf * ecf;
    m.mse_il += eil * eil;

    max_vo = std::max(max_vo, r.x.v_o);
    max_cf_err = std::max(max_cf_err, ecf);

    if (r.x.v_o < 0.98 * v_ref || r.x.v_o > 1.02 * v_ref) {
      m.t_set_vo = r.t;
      vo_left = true;
    }
    if (r.x.v_cf < 0.98 * vcf_ref || r.x.v_cf > 1.02 * vcf_ref) {
      m.t_set_vcf = r.t;
      cf_left = true;
    }

    m.penalty_over += std::max(r.x.v_o - 1.05 * v_ref, 0.0);
    m.penalty_sag += std::max(0.95 * v_ref - r.x.v_o, 0.0);
    if (r.x.i_l < i_safe.lo || r.x.i_l > i_safe.hi) ++m.n_il_viol;

    if (k > 0) {
      const SwitchMode prev = recs[k - 1].mode;
      const bool a = s_a(r.mode) != s_a(prev);
      const bool b = s_b(r.mode) != s_b(prev);
      if (r.mode != prev) ++m.switch_count;
      if (a) ++m.n_sa;
      if (b) ++m.n_sb;
    }

    m.e_in += r.w.v_in * r.x.i_l;
    m.e_out += r.x.v_o * r.w.i_o;

    cost_cfg.v_cf_ref = vcf_ref;
    m.j_sum += stage_cost(r.x, r.i_ref, cost_cfg);
  }

  m.mse_vo /= nd;
  m.mse_vcf /= nd;
  m.mse_il /= nd;

  const TrajectoryRecord& last = recs.back();
  m.sse_vo = last.x.v_o - v_ref;
  m.sse_vcf = last.x.v_cf - cf_ref(last);

  m.overshoot_vo = std::max(max_vo - v_ref, 0.0);
  m.overshoot_vcf = std::max(max_cf_err, 0.0);
  m.mp_vo = 100.0 * m.overshoot_vo / v_ref;
  m.mp_vcf = 100.0 * m.overshoot_vcf / (buck ? cf_ref(recs.front()) : 0.5 * v_ref);

  // A trace that never leaves the band settles at its first sample.
  if (!vo_left) m.t_set_vo = recs.front().t;
  if (!cf_left) m.t_set_vcf = recs.front().t;

  const double end_time = last.t + ts;
  m.ripple_window_scaled = end_time < kNominalEpisode;
  m.ripple_window_start = m.ripple_window_scaled ? 0.8 * end_time : kRippleStart;
  std::vector<double> vo_tail, cf_tail;
  for (const TrajectoryRecord& r : recs) {
    if (r.t >= m.ripple_window_start - 1e-12) {
      vo_tail.push_back(r.x.v_o);
      cf_tail.push_back(r.x.v_cf);
    }
  }
  m.ripple_vo = population_std(vo_tail);
  m.ripple_vcf = population_std(cf_tail);

  m.penalty_over *= ts / v_ref;
  m.penalty_sag *= ts / v_ref;

  m.n_trans_total = m.n_sa + m.n_sb;
  m.switch_freq = static_cast<double>(m.switch_count) / t_total;

  m.e_in *= ts;
  m.e_out *= ts;
  m.p_out_avg = m.e_out / t_total;
  m.eff_avg = m.e_in != 0.0 ? m.e_out / m.e_in : 0.0;

  m.j_mean = m.j_sum / nd;
  return m;
}

std::vector<std::pair<std::string, double>> metrics_fields(const MetricsReport& m) {
  return {{"mse_vo", m.mse_vo},
          {"mse_vcf", m.mse_vcf},
          {"mse_il", m.mse_il},
          {"sse_vo", m.sse_vo},
          {"sse_vcf", m.sse_vcf},
          {"overshoot_vo", m.overshoot_vo},
          {"overshoot_vcf", m.overshoot_vcf},
          {"mp_vo", m.mp_vo},
          {"mp_vcf", m.mp_vcf},
          {"t_set_vo", m.t_set_vo},
          {"t_set_vcf", m.t_set_vcf},
          {"ripple_vo", m.ripple_vo},
          {"ripple_vcf", m.ripple_vcf},
          {"ripple_window_start", m.ripple_window_start},
          {"penalty_over", m.penalty_over},
          {"penalty_sag", m.penalty_sag},
          {"n_il_viol", static_cast<double>(m.n_il_viol)},
          {"switch_count", static_cast<double>(m.switch_count)},
          {"switch_freq", m.switch_freq},
          {"n_sa", static_cast<double>(m.n_sa)},
          {"n_sb", static_cast<double>(m.n_sb)},
          {"n_trans_total", static_cast<double>(m.n_trans_total)},
          {"e_in", m.e_in},
          {"e_out", m.e_out},
          {"p_out_avg", m.p_out_avg},
          {"eff_avg", m.eff_avg},
          {"j_sum", m.j_sum},
          {"j_mean", m.j_mean},
          {"steps", static_cast<double>(m.steps)}};
}

std::string metrics_to_json(const MetricsReport& m) {
  nlohmann::ordered_json j;
  for (const auto& [k, v] : metrics_fields(m)) j[k] = v;
  j["ripple_window_scaled"] = m.ripple_window_scaled;
  return j.dump(2);
}

}  // namespace fcdistill
