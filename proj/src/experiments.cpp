#include "fcdistill/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "fcdistill/parallel.hpp"
#include "json_io.hpp"

#ifndef FCDISTILL_BUILD_ID
#define FCDISTILL_BUILD_ID "unknown"
#endif

namespace fcdistill {

using nlohmann::json;

std::string build_id() { return FCDISTILL_BUILD_ID; }

// ---------------------------------------------------------------------------
// Configuration

void PipelineConfig::validate() const {
  for (int n : episodes) {
    if (n < 0) throw std::invalid_argument("episode counts must be non-negative");
  }
  if (hidden < 1 || hidden > kMaxHidden) throw std::invalid_argument("invalid hidden width");
  if (eval_episodes < 1) throw std::invalid_argument("eval_episodes must be at least 1");
  const double s = split[0] + split[1] + split[2];
  if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");
  mpc.validate();
  train.validate();
  dagger.validate();
}

namespace {

json train_json(const TrainConfig& t) {
  json j = {{"lr", t.lr},         {"batch_size", t.batch_size},  {"epochs", t.epochs},
            {"seed", t.seed},     {"beta1", t.adam.beta1},       {"beta2", t.adam.beta2},
            {"eps", t.adam.eps}};
  if (!t.class_weights.empty()) j["class_weights"] = t.class_weights;
  return j;
}

TrainConfig train_from(const json& j, TrainConfig t) {
  t.lr = j.value("lr", t.lr);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.epochs = j.value("epochs", t.epochs);
  t.seed = j.value("seed", t.seed);
  t.adam.beta1 = j.value("beta1", t.adam.beta1);
  t.adam.beta2 = j.value("beta2", t.adam.beta2);
  t.adam.eps = j.value("eps", t.adam.eps);
  if (j.contains("class_weights")) t.class_weights = j.at("class_weights").get<std::vector<double>>();
  return t;
}

}  // namespace

std::string pipeline_config_to_json(const PipelineConfig& c) {
  json j = {{"seed", c.seed},
            {"threads", c.threads},
            {"episodes", c.episodes},
            {"ranges", c.ranges},
            {"split", c.split},
            {"mpc", c.mpc},
            {"hidden", c.hidden},
            {"train", train_json(c.train)},
            {"dagger",
             {{"iterations", c.dagger.iterations},
              {"episodes", c.dagger.episodes},
              {"budget", c.dagger.budget},
              {"finetune_epochs", c.dagger.finetune_epochs},
              {"seed", c.dagger.seed}}},
            {"eval_episodes", c.eval_episodes},
            {"eval_seed", c.eval_seed}};
  return j.dump(2);
}

PipelineConfig pipeline_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  PipelineConfig c;
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  if (j.contains("episodes")) c.episodes = j.at("episodes").get<std::array<int, 3>>();
  if (j.contains("ranges")) c.ranges = j.at("ranges").get<RandomizationRanges>();
  if (j.contains("split")) c.split = j.at("split").get<std::array<double, 3>>();
  if (j.contains("mpc")) c.mpc = j.at("mpc").get<MpcConfig>();
  c.hidden = j.value("hidden", c.hidden);
  if (j.contains("train")) c.train = train_from(j.at("train"), c.train);
  if (j.contains("dagger")) {
    const json& d = j.at("dagger");
    c.dagger.iterations = d.value("iterations", c.dagger.iterations);
    if (d.contains("episodes")) c.dagger.episodes = d.at("episodes").get<std::array<int, 3>>();
    c.dagger.budget = d.value("budget", c.dagger.budget);
    c.dagger.finetune_epochs = d.value("finetune_epochs", c.dagger.finetune_epochs);
    c.dagger.seed = d.value("seed", c.dagger.seed);
  }
  c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
  c.eval_seed = j.value("eval_seed", c.eval_seed);
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return pipeline_config_from_json(ss.str());
}

void save_pipeline_config(const PipelineConfig& cfg, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write config file " + path);
  os << pipeline_config_to_json(cfg) << '\n';
}

// ---------------------------------------------------------------------------
// Training pipeline

Dataset generate_dataset(const PipelineConfig& cfg, Labeler labeler, bool domain_randomization) {
  GenerationSpec spec;
  spec.seed = cfg.seed;
  spec.mpc = cfg.mpc;
  spec.labeler = labeler;
  spec.threads = cfg.threads;
  spec.sampler = boost_sampler(cfg.ranges);
  spec.episodes = cfg.episodes;
  if (!domain_randomization) {
    spec.episodes = {cfg.episodes[0] + cfg.episodes[1] + cfg.episodes[2], 0, 0};
  }
  return collect_expert_dataset(spec);
}

std::vector<double> present_class_weights(const ClassHistogram& histogram) {
  const double total = static_cast<double>(
      std::accumulate(histogram.begin(), histogram.end(), std::size_t{0}));
  std::vector<double> w(kNumModes, 1.0);
  for (std::size_t c = 0; c < kNumModes; ++c) {
    if (histogram[c] > 0) {
      w[c] = total / (static_cast<double>(kNumModes) * static_cast<double>(histogram[c]));
    }
  }
  return w;
}

OfflineResult train_offline(const PipelineConfig& cfg, const Dataset& ds,
                            std::vector<double> weights) {
  OfflineResult r;
  r.split = split(ds, cfg.split, cfg.seed);
  r.model = init_mlp<float>(cfg.hidden, cfg.train.seed);
  r.model.normalizer = fit_normalizer(r.split.train);
  TrainConfig tc = cfg.train;
  if (!weights.empty()) tc.class_weights = std::move(weights);
  r.history = train(r.model, r.split.train, r.split.val, tc);
  r.test_accuracy = evaluate(r.model, r.split.test).accuracy;
  return r;
}

DaggerConfig pipeline_dagger(const PipelineConfig& cfg, bool domain_randomization) {
  DaggerConfig d = cfg.dagger;
  d.train = cfg.train;
  d.mpc = cfg.mpc;
  d.threads = cfg.threads;
  d.sampler = boost_sampler(cfg.ranges);
  // Rollouts mirror the offline mix; the nominal scenario is deterministic,
  // so one rollout per iteration covers it.
  if (!domain_randomization) d.episodes = {1, 0, 0};
  return d;
}

namespace {

std::uint64_t kind_salt(ScenarioKind kind) { return 0x51ED270B27D0F1A3ull * (static_cast<std::uint64_t>(kind) + 1); }

}  // namespace

std::vector<EpisodeSpec> evaluation_set(ScenarioKind kind, int n, std::uint64_t seed,
                                        const RandomizationRanges& ranges) {
  if (kind == ScenarioKind::S1) return {{canonical_s1(), nominal_params()}};
  std::mt19937_64 rng(seed ^ kind_salt(kind));
  std::vector<EpisodeSpec> out;
  for (int i = 0; i < n; ++i) {
    auto [scenario, params] = sample_scenario(kind, rng, ranges);
    out.push_back({scenario, params});
  }
  return out;
}

PolicyFactory expert_factory(const MpcConfig& mpc) {
  return [mpc](const EpisodeSpec& ep) -> SwitchingPolicy {
    const MpcConfig cfg = episode_mpc(mpc, ep.scenario);
    const ConverterParams p = ep.params;
    return [cfg, p](const FeatureVector& z) {
      return label_features(Labeler::BeamExpert, z, p, cfg);
    };
  };
}

PolicyFactory student_factory(const MlpModel& model) {
  const SwitchingPolicy policy = mlp_policy(model);
  return [policy](const EpisodeSpec&) { return policy; };
}

std::vector<RolloutRow> run_rollouts(const PolicyFactory& factory, const std::string& controller,
                                     const std::string& scenario,
                                     const std::vector<EpisodeSpec>& episodes,
                                     const MpcConfig& mpc, unsigned threads) {
  std::vector<RolloutRow> rows(episodes.size());
  parallel_for(episodes.size(), threads, [&](std::size_t i) {
    const EpisodeSpec& ep = episodes[i];
    RolloutRow& row = rows[i];
    row.scenario = scenario;
    row.controller = controller;
    row.episode = static_cast<int>(i);
    row.seed = ep.scenario.seed;
    const EpisodeOutcome out = run_episode_partial(ep.scenario, factory(ep), ep.params);
    row.diverged = out.diverged();
    if (out.trajectory.empty()) {
      row.metrics.mse_vo = std::numeric_limits<double>::infinity();
      return;
    }
    row.metrics = compute_metrics(out.trajectory, ep.scenario.v_ref, episode_mpc(mpc, ep.scenario),
                                  {ep.params.i_safe_lo, ep.params.i_safe_hi});
  });
  return rows;
}

MetricsReport aggregate_metrics(const std::vector<MetricsReport>& reports) {
  MetricsReport m;
  if (reports.empty()) return m;
  const double n = static_cast<double>(reports.size());
  auto mean = [&](double MetricsReport::*f) {
    double s = 0.0;
    for (const MetricsReport& r : reports) s += r.*f;
    m.*f = s / n;
  };
  auto sum = [&](long MetricsReport::*f) {
    long s = 0;
    for (const MetricsReport& r : reports) s += r.*f;
    m.*f = s;
  };
  for (auto f : {&MetricsReport::mse_vo, &MetricsReport::mse_vcf, &MetricsReport::mse_il,
                 &MetricsReport::sse_vo, &MetricsReport::sse_vcf, &MetricsReport::overshoot_vo,
                 &MetricsReport::overshoot_vcf, &MetricsReport::mp_vo, &MetricsReport::mp_vcf,
                 &MetricsReport::t_set_vo, &MetricsReport::t_set_vcf, &MetricsReport::ripple_vo,
                 &MetricsReport::ripple_vcf, &MetricsReport::ripple_window_start,
                 &MetricsReport::penalty_over, &MetricsReport::penalty_sag,
                 &MetricsReport::switch_freq, &MetricsReport::e_in, &MetricsReport::e_out,
                 &MetricsReport::p_out_avg, &MetricsReport::eff_avg, &MetricsReport::j_sum,
                 &MetricsReport::j_mean}) {
    mean(f);
  }
  for (auto f : {&MetricsReport::n_il_viol, &MetricsReport::switch_count, &MetricsReport::n_sa,
                 &MetricsReport::n_sb, &MetricsReport::n_trans_total, &MetricsReport::steps}) {
    sum(f);
  }
  m.ripple_window_scaled = std::any_of(reports.begin(), reports.end(),
                                       [](const MetricsReport& r) { return r.ripple_window_scaled; });
  return m;
}

SuiteResult run_scenario_suite(const MlpModel& model, const PipelineConfig& cfg) {
  SuiteResult out;
  const PolicyFactory expert = expert_factory(cfg.mpc);
  const PolicyFactory ann = student_factory(model);
  for (ScenarioKind kind : {ScenarioKind::S1, ScenarioKind::S2, ScenarioKind::S3}) {
    const auto episodes = evaluation_set(kind, cfg.eval_episodes, cfg.eval_seed, cfg.ranges);
    const std::string name(to_string(kind));
    if (kind != ScenarioKind::S3) {
      auto rows = run_rollouts(expert, "MPC", name, episodes, cfg.mpc, cfg.threads);
      out.rows.insert(out.rows.end(), rows.begin(), rows.end());
    }
    auto rows = run_rollouts(ann, "ANN", name, episodes, cfg.mpc, cfg.threads);
    out.rows.insert(out.rows.end(), rows.begin(), rows.end());
  }
  return out;
}

namespace {

void write_metric_header(std::ostream& os) {
  for (const auto& [name, value] : metrics_fields(MetricsReport{})) os << ',' << name;
  os << '\n';
}

void write_metric_values(std::ostream& os, const MetricsReport& m) {
  for (const auto& [name, value] : metrics_fields(m)) os << ',' << value;
  os << '\n';
}

}  // namespace

void write_rollouts_csv(const std::vector<RolloutRow>& rows, std::uint64_t master_seed,
                        const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.precision(10);
  os << "build_id,master_seed,scenario,controller,episode,scenario_seed,diverged";
  write_metric_header(os);
  for (const RolloutRow& r : rows) {
    os << build_id() << ',' << master_seed << ',' << r.scenario << ',' << r.controller << ','
       << r.episode << ',' << r.seed << ',' << (r.diverged ? 1 : 0);
    write_metric_values(os, r.metrics);
  }
}

void write_summary_csv(const std::vector<RolloutRow>& rows, std::uint64_t master_seed,
                       const std::string& path) {
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, std::vector<MetricsReport>> groups;
  std::map<std::pair<std::string, std::string>, int> diverged;
  for (const RolloutRow& r : rows) {
    const auto key = std::make_pair(r.scenario, r.controller);
    if (!groups.count(key)) keys.push_back(key);
    groups[key].push_back(r.metrics);
    diverged[key] += r.diverged ? 1 : 0;
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.precision(10);
  os << "build_id,master_seed,scenario,controller,episodes,diverged";
  write_metric_header(os);
  for (const auto& key : keys) {
    os << build_id() << ',' << master_seed << ',' << key.first << ',' << key.second << ','
       << groups[key].size() << ',' << diverged[key];
    write_metric_values(os, aggregate_metrics(groups[key]));
  }
}

// ---------------------------------------------------------------------------
// Ablation

std::string_view to_string(AblationName a) {
  switch (a) {
    case AblationName::Full: return "FULL";
    case AblationName::NoDagger: return "NO_DAGGER";
    case AblationName::NoDr: return "NO_DR";
    case AblationName::NoExpert: return "NO_EXPERT";
  }
  return "?";
}

AblationName parse_ablation(std::string_view name) {
  for (AblationName a : {AblationName::Full, AblationName::NoDagger, AblationName::NoDr,
                         AblationName::NoExpert}) {
    if (to_string(a) == name) return a;
  }
  throw std::invalid_argument("unknown ablation '" + std::string(name) + "'");
}

AblationConfig ablation_config(AblationName name) {
  switch (name) {
    case AblationName::Full: return {name, true, true, true};
    case AblationName::NoDagger: return {name, true, true, false};
    case AblationName::NoDr: return {name, true, false, true};
    case AblationName::NoExpert: return {name, false, true, false};
  }
  throw std::invalid_argument("unknown ablation");
}

std::vector<AblationConfig> default_ablation_grid() {
  return {ablation_config(AblationName::Full), ablation_config(AblationName::NoDagger),
          ablation_config(AblationName::NoDr), ablation_config(AblationName::NoExpert)};
}

AblationModels train_ablation_models(const PipelineConfig& cfg,
                                     const std::vector<AblationConfig>& grid) {
  AblationModels out;
  std::optional<OfflineResult> dr_base;
  auto base = [&]() -> const OfflineResult& {
    if (!dr_base) dr_base = train_offline(cfg, generate_dataset(cfg));
    return *dr_base;
  };
  for (const AblationConfig& a : grid) {
    MlpModel model;
    if (!a.expert_labels) {
      const Dataset ds = generate_dataset(cfg, Labeler::GreedySurrogate, a.domain_randomization);
      model = train_offline(cfg, ds, present_class_weights(ds.meta.histogram)).model;
    } else if (a.domain_randomization) {
      const OfflineResult& b = base();
      model = a.dagger
                  ? run_dagger(b.model, b.split.train, b.split.val, pipeline_dagger(cfg, true)).model
                  : b.model;
    } else {
      const OfflineResult nominal = train_offline(cfg, generate_dataset(cfg, Labeler::BeamExpert, false));
      model = a.dagger ? run_dagger(nominal.model, nominal.split.train, nominal.split.val,
                                    pipeline_dagger(cfg, false))
                             .model
                       : nominal.model;
    }
    out.models.emplace_back(a.name, std::move(model));
  }
  return out;
}

std::vector<RolloutRow> evaluate_ablation(const AblationModels& models, const PipelineConfig& cfg) {
  std::vector<RolloutRow> rows;
  for (ScenarioKind kind : {ScenarioKind::S1, ScenarioKind::S2, ScenarioKind::S3}) {
    const auto episodes = evaluation_set(kind, cfg.eval_episodes, cfg.eval_seed, cfg.ranges);
    for (const auto& [name, model] : models.models) {
      auto r = run_rollouts(student_factory(model), std::string(to_string(name)),
                            std::string(to_string(kind)), episodes, cfg.mpc, cfg.threads);
      rows.insert(rows.end(), r.begin(), r.end());
    }
  }
  return rows;
}

std::vector<RolloutRow> run_ablation(const PipelineConfig& cfg,
                                     const std::vector<AblationConfig>& grid) {
  return evaluate_ablation(train_ablation_models(cfg, grid), cfg);
}

// ---------------------------------------------------------------------------
// Sweeps

std::string_view to_string(SweepAxis a) {
  return a == SweepAxis::DaggerBudget ? "dagger_budget" : "dr_intensity";
}

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "dagger_budget") return SweepAxis::DaggerBudget;
  if (name == "dr_intensity") return SweepAxis::DrIntensity;
  throw std::invalid_argument("unknown sweep axis '" + std::string(name) + "'");
}

SweepSpec SweepSpec::defaults(SweepAxis axis) {
  SweepSpec s;
  s.axis = axis;
  if (axis == SweepAxis::DaggerBudget) {
    s.grid = {0, 500, 1000, 2000, 4000, 8000, 12000};
  } else {
    s.grid = {10, 30, 50, 80, 100};
  }
  return s;
}

std::vector<SweepPoint> run_sweep(const SweepSpec& spec, const PipelineConfig& cfg,
                                  const OfflineResult& base) {
  if (spec.grid.empty()) throw std::invalid_argument("sweep grid is empty");
  if (spec.epochs < 0) throw std::invalid_argument("sweep epochs must be non-negative");
  std::vector<std::pair<ScenarioKind, std::vector<EpisodeSpec>>> tests;
  for (ScenarioKind kind : {ScenarioKind::S2, ScenarioKind::S3}) {
    tests.emplace_back(kind, evaluation_set(kind, cfg.eval_episodes, cfg.eval_seed, cfg.ranges));
  }
  std::vector<SweepPoint> points;
  for (double value : spec.grid) {
    if (!(value >= 0.0)) throw std::invalid_argument("sweep values must be non-negative");
    for (std::uint64_t seed : spec.seeds) {
      MlpModel model;
      if (spec.axis == SweepAxis::DaggerBudget) {
        const auto budget = static_cast<std::size_t>(std::llround(value));
        if (budget == 0) {
          model = base.model;
        } else {
          DaggerConfig d = pipeline_dagger(cfg, true);
          d.budget = budget;
          d.seed = seed;
          d.finetune_epochs = spec.epochs;
          d.train.seed = seed;
          model = run_dagger(base.model, base.split.train, base.split.val, d).model;
        }
      } else {
        if (!(value > 0.0)) throw std::invalid_argument("DR intensity must be positive");
        PipelineConfig c = cfg;
        c.ranges = cfg.ranges.scaled(value / 100.0);
        c.seed = seed;
        c.train.seed = seed;
        c.train.epochs = spec.epochs;
        model = train_offline(c, generate_dataset(c)).model;
      }
      for (const auto& [kind, episodes] : tests) {
        const auto rows = run_rollouts(student_factory(model), "ANN", std::string(to_string(kind)),
                                       episodes, cfg.mpc, cfg.threads);
        std::vector<MetricsReport> reports;
        bool diverged = false;
        for (const RolloutRow& r : rows) {
          reports.push_back(r.metrics);
          diverged = diverged || r.diverged;
        }
        points.push_back({value, seed, std::string(to_string(kind)), aggregate_metrics(reports),
                          diverged});
      }
    }
  }
  return points;
}

void write_sweep_csv(const std::vector<SweepPoint>& points, SweepAxis axis,
                     std::uint64_t master_seed, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.precision(10);
  os << "build_id,master_seed,axis,value,seed,scenario,diverged";
  write_metric_header(os);
  for (const SweepPoint& p : points) {
    os << build_id() << ',' << master_seed << ',' << to_string(axis) << ',' << p.value << ','
       << p.seed << ',' << p.scenario << ',' << (p.diverged ? 1 : 0);
    write_metric_values(os, p.metrics);
  }
}

void write_sweep_variance_csv(const std::vector<SweepPoint>& points, const std::string& path) {
  std::map<std::string, std::map<std::string, std::vector<double>>> values;
  for (const SweepPoint& p : points) {
    for (const auto& [name, v] : metrics_fields(p.metrics)) values[p.scenario][name].push_back(v);
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.precision(10);
  os << "scenario,metric,mean,variance\n";
  for (const auto& [scenario, metrics] : values) {
    std::vector<std::tuple<double, double, std::string>> rows;
    for (const auto& [name, vs] : metrics) {
      const double n = static_cast<double>(vs.size());
      const double mean = std::accumulate(vs.begin(), vs.end(), 0.0) / n;
      double var = 0.0;
      for (double v : vs) var += (v - mean) * (v - mean);
      rows.emplace_back(var / n, mean, name);
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      return std::get<0>(a) > std::get<0>(b);
    });
    for (const auto& [var, mean, name] : rows) {
      os << scenario << ',' << name << ',' << mean << ',' << var << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Latency benchmark

namespace {

template <typename Fn>
double median_latency_us(const std::vector<FeatureVector>& inputs, Fn&& fn) {
  using clock = std::chrono::steady_clock;
  volatile std::size_t sink = 0;
  const std::size_t warmup = std::min<std::size_t>(200, inputs.size());
  for (std::size_t i = 0; i < warmup; ++i) sink = sink + index_of(fn(inputs[i]));
  std::vector<double> times;
  times.reserve(inputs.size());
  for (const FeatureVector& z : inputs) {
    const auto t0 = clock::now();
    const SwitchMode m = fn(z);
    const auto t1 = clock::now();
    sink = sink + index_of(m);
    times.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
  }
  auto mid = times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2);
  std::nth_element(times.begin(), mid, times.end());
  return *mid;
}

}  // namespace

BenchResult bench_decision_time(const MpcConfig& mpc, const MlpModel& model, std::size_t n,
                                std::uint64_t seed) {
  if (n < 1000) throw std::invalid_argument("benchmark needs at least 1000 decisions");
  std::mt19937_64 rng(seed);
  auto [scenario, params] = sample_scenario(ScenarioKind::S2, rng);
  const MpcConfig cfg = episode_mpc(mpc, scenario);
  const Trajectory traj = run_episode(
      scenario,
      [&](const FeatureVector& z) { return label_features(Labeler::BeamExpert, z, params, cfg); },
      params);
  std::uniform_int_distribution<std::size_t> pick(0, traj.size() - 1);
  std::vector<FeatureVector> inputs(n);
  for (FeatureVector& z : inputs) {
    const TrajectoryRecord& r = traj.records[pick(rng)];
    z = FeatureVector{r.x.i_l, r.x.v_cf, r.x.v_o, r.i_ref, r.w.v_in, r.w.i_o}.quantized();
  }
  BenchResult b;
  b.decisions = n;
  b.expert_us = median_latency_us(inputs, [&](const FeatureVector& z) {
    return beam_decide(z, params, cfg).mode;
  });
  b.ann_us = median_latency_us(inputs, [&](const FeatureVector& z) {
    return predict_mode(model, z);
  });
  b.ratio = b.ann_us > 0.0 ? b.expert_us / b.ann_us : std::numeric_limits<double>::infinity();
  return b;
}

}  // namespace fcdistill
