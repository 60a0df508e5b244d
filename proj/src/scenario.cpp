#include "fcdistill/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json_io.hpp"

namespace fcdistill {

using nlohmann::json;

std::pair<double, OuterLoopState> outer_current_reference(const OuterLoopState& state, double v_o,
                                                          double v_ref, double ts) {
  if (!(ts > 0.0)) throw std::invalid_argument("control period must be positive");
  const OuterLoopConfig& c = state.cfg;
  const double e = v_ref - v_o;
  const double candidate = state.integral + e * ts;
  const double u = c.k_p * e + c.k_i * candidate;
  OuterLoopState next = state;
  if (u > c.i_ref_hi) return {c.i_ref_hi, next};
  if (u < c.i_ref_lo) return {c.i_ref_lo, next};
  next.integral = candidate;
  return {u, next};
}

std::string_view to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::S1: return "S1";
    case ScenarioKind::S2: return "S2";
    case ScenarioKind::S3: return "S3";
  }
  return "?";
}

ScenarioKind parse_scenario_kind(std::string_view name) {
  if (name == "S1" || name == "s1") return ScenarioKind::S1;
  if (name == "S2" || name == "s2") return ScenarioKind::S2;
  if (name == "S3" || name == "s3") return ScenarioKind::S3;
  throw std::invalid_argument("unknown scenario kind '" + std::string(name) + "'");
}

void ScenarioConfig::validate() const {
  if (!(duration >= 0.0) || !std::isfinite(duration)) {
    throw std::invalid_argument("scenario duration must be a non-negative finite number");
  }
  if (!(load_r > 0.0)) throw std::invalid_argument("load resistance must be positive");
  if (!(v_in > 0.0) || !(v_ref > 0.0)) throw std::invalid_argument("voltages must be positive");
  double prev = 0.0;
  for (const StepEvent& ev : events) {
    if (ev.time < prev) throw std::invalid_argument("step events must be sorted by time");
    if (ev.time < 0.0 || ev.time > duration) {
      throw std::invalid_argument("step event lies outside the episode");
    }
    if (!(ev.value > 0.0)) throw std::invalid_argument("step event value must be positive");
    prev = ev.time;
  }
}

std::size_t step_count(double duration, double ts) {
  return static_cast<std::size_t>(std::llround(duration / ts));
}

std::size_t event_step(double time, double ts) {
  const double k = std::ceil(time / ts - 1e-9);
  return k <= 0.0 ? 0 : static_cast<std::size_t>(k);
}

PlantState steady_state(Topology topology, double v_ref, double v_in, double load_r) {
  if (topology == Topology::FcBoost) {
    return {v_ref * v_ref / (load_r * v_in), 0.5 * v_ref, v_ref};
  }
  return {v_ref / load_r, 0.5 * v_in, v_ref};
}

namespace {

// Fills `traj` step by step; returns the failing step index or -1.
long simulate(const ScenarioConfig& cfg, const SwitchingPolicy& policy, const ConverterParams& p,
              Trajectory& traj) {
  cfg.validate();
  p.validate();
  traj.ts = p.ts;
  traj.records.clear();
  const std::size_t n = step_count(cfg.duration, p.ts);
  traj.records.reserve(n);

  double v_in = cfg.v_in;
  double load_r = cfg.load_r;
  PlantState x = steady_state(cfg.topology, cfg.v_ref, v_in, load_r);
  OuterLoopState outer{cfg.outer, 0.0};
  if (cfg.outer.k_i != 0.0) outer.integral = x.i_l / cfg.outer.k_i;

  std::size_t next_event = 0;
  for (std::size_t k = 0; k < n; ++k) {
    while (next_event < cfg.events.size() && event_step(cfg.events[next_event].time, p.ts) <= k) {
      const StepEvent& ev = cfg.events[next_event++];
      (ev.target == EventTarget::VIn ? v_in : load_r) = ev.value;
    }
    const Exogenous w{v_in, x.v_o / load_r};
    const auto [i_ref, next_outer] = outer_current_reference(outer, x.v_o, cfg.v_ref, p.ts);
    outer = next_outer;

    const FeatureVector z{x.i_l, x.v_cf, x.v_o, i_ref, w.v_in, w.i_o};
    if (!z.finite()) return static_cast<long>(k);
    SwitchMode mode;
    try {
      mode = policy(z);
    } catch (const DivergenceError&) {
      // A policy may itself detect runaway and bail out.
      return static_cast<long>(k);
    }
    traj.records.push_back({static_cast<double>(k) * p.ts, x, w, i_ref, mode, load_r});

    x = detail::euler_step(affine_row(cfg.topology, mode), x, w, p);
    if (!x.finite()) return static_cast<long>(k);
  }
  return -1;
}

}  // namespace

Trajectory run_episode(const ScenarioConfig& cfg, const SwitchingPolicy& policy,
                       const ConverterParams& p) {
  Trajectory traj;
  const long failed = simulate(cfg, policy, p, traj);
  if (failed >= 0) throw DivergenceError("closed loop diverged", failed);
  return traj;
}

EpisodeOutcome run_episode_partial(const ScenarioConfig& cfg, const SwitchingPolicy& policy,
                                   const ConverterParams& p) {
  EpisodeOutcome out;
  out.diverged_step = simulate(cfg, policy, p, out.trajectory);
  return out;
}

RandomizationRanges RandomizationRanges::scaled(double r) const {
  if (!(r > 0.0)) throw std::invalid_argument("randomization scale must be positive");
  RandomizationRanges out = *this;
  auto scale = [r](double& lo, double& hi) {
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo) * r;
    lo = mid - half;
    hi = mid + half;
  };
  scale(out.v_in_lo, out.v_in_hi);
  scale(out.r_lo, out.r_hi);
  out.rho = rho * r;
  return out;
}

ScenarioConfig canonical_s1() {
  ScenarioConfig cfg;
  cfg.events = {{0.2, EventTarget::VIn, 100.0},
                {0.3, EventTarget::VIn, 130.0},
                {0.4, EventTarget::LoadR, 20.0}};
  return cfg;
}

ConverterParams episode_params(const ScenarioConfig& cfg, const ConverterParams& base) {
  return perturb_params(base, cfg.d_l, cfg.d_cf, cfg.d_c);
}

std::pair<ScenarioConfig, ConverterParams> sample_scenario(ScenarioKind kind, std::mt19937_64& rng,
                                                           const RandomizationRanges& ranges,
                                                           const ConverterParams& base) {
  if (kind == ScenarioKind::S1) {
    ScenarioConfig cfg = canonical_s1();
    return {cfg, base};
  }
  std::uniform_real_distribution<double> v_in_dist(ranges.v_in_lo, ranges.v_in_hi);
  std::uniform_real_distribution<double> r_dist(ranges.r_lo, ranges.r_hi);
  std::uniform_real_distribution<double> time_dist(ranges.event_margin,
                                                   ranges.duration - ranges.event_margin);
  std::bernoulli_distribution pick_vin(0.5);

  ScenarioConfig cfg;
  cfg.duration = ranges.duration;
  cfg.seed = rng();
  cfg.v_in = v_in_dist(rng);
  cfg.load_r = r_dist(rng);
  std::vector<double> times(static_cast<std::size_t>(ranges.events));
  for (double& t : times) t = time_dist(rng);
  std::sort(times.begin(), times.end());
  for (double t : times) {
    StepEvent ev;
    ev.time = t;
    ev.target = pick_vin(rng) ? EventTarget::VIn : EventTarget::LoadR;
    ev.value = ev.target == EventTarget::VIn ? v_in_dist(rng) : r_dist(rng);
    cfg.events.push_back(ev);
  }
  if (kind == ScenarioKind::S3) {
    std::uniform_real_distribution<double> d_dist(-ranges.rho, ranges.rho);
    cfg.d_l = d_dist(rng);
    cfg.d_cf = d_dist(rng);
    cfg.d_c = d_dist(rng);
  }
  return {cfg, episode_params(cfg, base)};
}

std::string scenario_to_json(const ScenarioConfig& cfg) { return json(cfg).dump(2); }

ScenarioConfig scenario_from_json(const std::string& text) {
  ScenarioConfig cfg = json::parse(text).get<ScenarioConfig>();
  cfg.validate();
  return cfg;
}

void save_scenario(const ScenarioConfig& cfg, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write scenario file " + path);
  os << scenario_to_json(cfg) << '\n';
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read scenario file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return scenario_from_json(ss.str());
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
  os << "t,i_L,v_Cf,v_o,V_in,i_o,i_ref,mode,R\n";
  os << std::setprecision(10);
  for (const TrajectoryRecord& r : traj.records) {
    os << r.t << ',' << r.x.i_l << ',' << r.x.v_cf << ',' << r.x.v_o << ',' << r.w.v_in << ','
       << r.w.i_o << ',' << r.i_ref << ',' << to_string(r.mode) << ',' << r.load_r << '\n';
  }
}

void save_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write trajectory file " + path);
  write_trajectory_csv(traj, os);
}

}  // namespace fcdistill
