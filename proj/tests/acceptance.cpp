// End-to-end acceptance checks. Prints one line per criterion:
//   criterion N: PASS|FAIL  <measurements>
// Exit status is 0 unless a check crashes; pass --strict to also fail on any
// FAIL line.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fcdistill/experiments.hpp"
#include "fcdistill/transfer.hpp"
#include "test_support.hpp"

using namespace fcdistill;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

MpcConfig mpc_with(int n, int k) {
  MpcConfig c = default_mpc_config();
  c.horizon = n;
  c.beam_width = k;
  return c;
}

Outcome beam_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  int mismatches = 0, exceptions = 0, total = 0;
  for (int n = 1; n <= 3; ++n) {
    const MpcConfig c = mpc_with(n, 1 << (2 * (n - 1)));
    for (int i = 0; i < 1000; ++i) {
      ++total;
      try {
        const ConverterParams p = testing::random_params(rng);
        const FeatureVector z = testing::random_features(rng);
        const Decision b = beam_decide(z, p, c);
        const Decision e = exhaustive_decide(z, p, c);
        if (b.mode != e.mode || b.cost != e.cost) ++mismatches;
      } catch (const std::exception&) {
        ++exceptions;
      }
    }
  }
  const double dt = seconds_since(t0);
  return {mismatches == 0 && exceptions == 0 && dt < 10.0,
          fmt("%d states, %d mismatches, %d exceptions, %.2f s", total, mismatches, exceptions, dt)};
}

Outcome beam_gap() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2025);
  const MpcConfig c = mpc_with(5, 15);
  int below = 0, suboptimal = 0;
  double gap = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const ConverterParams p = testing::random_params(rng);
    const FeatureVector z = testing::random_features(rng);
    const double b = beam_decide(z, p, c).cost;
    const double e = exhaustive_decide(z, p, c).cost;
    if (b < e) ++below;
    if (b > e) ++suboptimal;
    gap += e > 0.0 ? (b - e) / e : 0.0;
  }
  const double dt = seconds_since(t0);
  return {below == 0 && dt < 60.0,
          fmt("beam < optimum in %d of 1000, suboptimal in %d, mean relative gap %.3e, %.2f s", below,
              suboptimal, gap / 1000.0, dt)};
}

Outcome dynamics() {
  const ConverterParams p = nominal_params();
  const PlantState x{10.0, 90.0, 180.0};
  const Exogenous w{120.0, 5.0};
  const std::vector<std::pair<SwitchMode, PlantState>> cases{{SwitchMode::NO, {12.4, 90.0, 179.2}},
                                                             {SwitchMode::PO, {8.8, 90.0, 180.8}},
                                                             {SwitchMode::OP, {10.6, 94.0, 180.8}},
                                                             {SwitchMode::ON, {10.6, 86.0, 180.8}}};
  double worst_example = 0.0;
  for (const auto& [m, want] : cases) {
    const PlantState y = discrete_step(x, w, m, p);
    for (auto [a, b] : {std::pair{y.i_l, want.i_l}, {y.v_cf, want.v_cf}, {y.v_o, want.v_o}}) {
      worst_example = std::max(worst_example, std::abs(a - b) / std::abs(b));
    }
  }

  std::mt19937_64 rng(7);
  int affine_fail = 0, symmetry_fail = 0;
  for (int k = 0; k < 10000; ++k) {
    const ConverterParams q = testing::random_params(rng);
    const PlantState x1 = testing::random_state(rng), x2 = testing::random_state(rng);
    const Exogenous e = testing::random_exogenous(rng);
    const SwitchMode m = kAllModes[static_cast<std::size_t>(k) % kNumModes];
    // x -> step(x) is affine: the midpoint maps to the midpoint.
    const PlantState mid{0.5 * (x1.i_l + x2.i_l), 0.5 * (x1.v_cf + x2.v_cf), 0.5 * (x1.v_o + x2.v_o)};
    const PlantState y1 = discrete_step(x1, e, m, q), y2 = discrete_step(x2, e, m, q);
    const PlantState ym = discrete_step(mid, e, m, q);
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); };
    if (!close(ym.i_l, 0.5 * (y1.i_l + y2.i_l)) || !close(ym.v_cf, 0.5 * (y1.v_cf + y2.v_cf)) ||
        !close(ym.v_o, 0.5 * (y1.v_o + y2.v_o))) {
      ++affine_fail;
    }
    const double up = discrete_step(x1, e, SwitchMode::OP, q).v_cf - x1.v_cf;
    const double down = discrete_step(x1, e, SwitchMode::ON, q).v_cf - x1.v_cf;
    const bool frozen = discrete_step(x1, e, SwitchMode::NO, q).v_cf == x1.v_cf &&
                        discrete_step(x1, e, SwitchMode::PO, q).v_cf == x1.v_cf;
    if (std::abs(up + down) > 1e-12 * std::max(1.0, std::abs(up)) || !frozen) ++symmetry_fail;
  }
  return {worst_example <= 1e-12 && affine_fail == 0 && symmetry_fail == 0,
          fmt("example max rel err %.1e, affinity failures %d/10000, symmetry failures %d/10000",
              worst_example, affine_fail, symmetry_fail)};
}

Outcome expert_regulation() {
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioConfig s = canonical_s1();
  const ConverterParams p = nominal_params();
  const MpcConfig mpc = episode_mpc(default_mpc_config(), s);
  const Trajectory t = run_episode(
      s, [&](const FeatureVector& z) { return label_features(Labeler::BeamExpert, z, p, mpc); }, p);
  const MetricsReport m = compute_metrics(t, s.v_ref, mpc, {p.i_safe_lo, p.i_safe_hi});
  double worst_vo = 0.0, worst_cf = 0.0;
  // The 10 ms before each event's +0.1 s mark must lie inside the bands.
  for (const StepEvent& e : s.events) {
    const double hi = e.time + 0.1, lo = hi - 0.01;
    for (const TrajectoryRecord& r : t.records) {
      if (r.t < lo - 1e-12 || r.t >= hi - 1e-12) continue;
      worst_vo = std::max(worst_vo, std::abs(r.x.v_o - s.v_ref) / s.v_ref);
      worst_cf = std::max(worst_cf, std::abs(r.x.v_cf - 0.5 * s.v_ref));
    }
  }
  const double dt = seconds_since(t0);
  return {worst_vo <= 0.02 && worst_cf <= 5.0 && m.n_il_viol == 0 && dt < 30.0,
          fmt("max |v_o-180|/180 %.4f, max |v_cf-90| %.2f V, N_viol %ld, MSE_vo %.3f, %.1f s", worst_vo,
              worst_cf, m.n_il_viol, m.mse_vo, dt)};
}

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    BasicMlp<double> m = init_mlp<double>(8, seed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> bias(0.0, 0.3);
    for (std::size_t i = m.b1_offset(); i < m.w2_offset(); ++i) m.params[i] = bias(rng);
    for (std::size_t i = m.b2_offset(); i < m.params.size(); ++i) m.params[i] = bias(rng);
    const auto samples = testing::random_samples(32, seed + 10);
    m.normalizer = fit_normalizer(samples);
    const ClassWeights alpha{1.5, 0.8, 3.0, 0.4};
    const LossGrad<double> lg = loss_and_grad(m, samples, alpha);
    for (std::size_t i = 0; i < m.params.size(); ++i) {
      const double h = 1e-5;
      BasicMlp<double> a = m, b = m;
      a.params[i] += h;
      b.params[i] -= h;
      const double num = (loss_and_grad(a, samples, alpha).loss - loss_and_grad(b, samples, alpha).loss) / (2 * h);
      worst = std::max(worst, std::abs(lg.grad[i] - num) / std::max({std::abs(lg.grad[i]), std::abs(num), 1e-3}));
    }
  }
  const double dt = seconds_since(t0);
  return {worst <= 1e-4 && dt < 5.0, fmt("max relative error %.2e over 5 seeds, %.2f s", worst, dt)};
}

Outcome metrics_suite() {
  const double ts = 20e-6;
  auto trace = [&](std::vector<double> v, std::vector<SwitchMode> modes) {
    Trajectory t;
    t.ts = ts;
    for (std::size_t k = 0; k < v.size(); ++k) {
      TrajectoryRecord r;
      r.t = static_cast<double>(k) * ts;
      r.x = {7.5, 90.0, v[k]};
      r.w = {120.0, 5.0};
      r.i_ref = 7.5;
      r.mode = modes.empty() ? SwitchMode::PO : modes[k];
      r.load_r = 36.0;
      t.records.push_back(r);
    }
    return t;
  };
  const MpcConfig c = default_mpc_config();
  const CurrentLimits lim{-5.0, 50.0};
  std::vector<std::string> failed;
  auto check = [&](bool ok, const char* what) {
    if (!ok) failed.emplace_back(what);
  };

  const MetricsReport flat = compute_metrics(trace({180, 180, 180}, {}), 180.0, c, lim);
  check(flat.mse_vo == 0 && flat.mse_vcf == 0 && flat.mse_il == 0, "constant trace MSE");
  check(flat.overshoot_vo == 0 && flat.overshoot_vcf == 0, "constant trace overshoot");
  check(flat.penalty_over == 0 && flat.penalty_sag == 0, "constant trace penalties");
  check(flat.t_set_vo == 0.0 && flat.t_set_vcf == 0.0, "constant trace settling");

  const MetricsReport os = compute_metrics(trace({180, 190, 180}, {}), 180.0, c, lim);
  check(os.overshoot_vo == 10.0, "overshoot 10 V");
  check(os.mp_vo == 100.0 * 10.0 / 180.0, "mp 5.556 %");
  check(os.penalty_over == ts / 180.0, "penalty_over ts/180");

  const MetricsReport sw = compute_metrics(
      trace({180, 180, 180, 180}, {SwitchMode::OP, SwitchMode::OP, SwitchMode::PO, SwitchMode::PO}), 180.0, c, lim);
  check(sw.switch_count == 1 && sw.n_sa == 1 && sw.n_sb == 1 && sw.n_trans_total == 2, "switch counts");

  const std::size_t n = 5000;
  const MetricsReport en = compute_metrics(trace(std::vector<double>(n, 180.0), {}), 180.0, c, lim);
  const double horizon = static_cast<double>(n) * ts;
  check(std::abs(en.e_in - 900.0 * horizon) <= 1e-12 * 900.0 * horizon, "e_in 900 T");

  std::string detail = failed.empty() ? "all metric examples exact" : "failed:";
  for (const std::string& f : failed) detail += " [" + f + "]";
  return {failed.empty(), detail};
}

// Shared state of the training-based criteria.
struct PipelineRun {
  PipelineConfig cfg;
  Dataset data;
  OfflineResult base;
  std::vector<MlpModel> refined;  // one per DAgger seed
  std::vector<std::pair<double, double>> disagreement;  // pre, post per seed
  std::vector<RolloutRow> full_rows;
};

std::vector<EpisodeSpec> disagreement_set() {
  std::vector<EpisodeSpec> out = evaluation_set(ScenarioKind::S1, 1, 555);
  for (const auto& e : evaluation_set(ScenarioKind::S2, 5, 555)) out.push_back(e);
  for (const auto& e : evaluation_set(ScenarioKind::S3, 4, 555)) out.push_back(e);
  return out;
}

std::vector<RolloutRow> fresh_rollouts(const MlpModel& model, const std::string& label, const PipelineConfig& cfg) {
  std::vector<RolloutRow> rows;
  for (ScenarioKind k : {ScenarioKind::S1, ScenarioKind::S2, ScenarioKind::S3}) {
    const auto eps = evaluation_set(k, cfg.eval_episodes, cfg.eval_seed, cfg.ranges);
    auto r = run_rollouts(student_factory(model), label, std::string(to_string(k)), eps, cfg.mpc, cfg.threads);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return rows;
}

MetricsReport scenario_mean(const std::vector<RolloutRow>& rows, const std::string& scenario) {
  std::vector<MetricsReport> v;
  for (const RolloutRow& r : rows) {
    if (r.scenario == scenario) v.push_back(r.metrics);
  }
  return aggregate_metrics(v);
}

Outcome distillation_accuracy(PipelineRun& run) {
  const auto t0 = std::chrono::steady_clock::now();
  run.data = generate_dataset(run.cfg);
  run.base = train_offline(run.cfg, run.data);
  const TrainConfig& t = run.cfg.train;
  const bool table = t.lr == 1e-4 && t.batch_size == 2048 && t.epochs == 260 && run.cfg.hidden == 128;
  const double dt = seconds_since(t0);
  return {run.base.test_accuracy >= 0.85 && run.data.size() >= 50000 && table && dt < 1800.0,
          fmt("test accuracy %.4f (val %.4f) on %zu samples (%zu test), lr %g batch %d epochs %d, %.0f s",
              run.base.test_accuracy, run.base.history.back().val_acc, run.data.size(),
              run.base.split.test.size(), t.lr, t.batch_size, t.epochs, dt)};
}

Outcome dagger_effect(PipelineRun& run) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto eps = disagreement_set();
  const double pre = disagreement_rate(run.base.model, eps, run.cfg.mpc, run.cfg.threads);
  int decreased = 0;
  std::string per_seed;
  for (std::uint64_t s = 0; s < 3; ++s) {
    DaggerConfig d = pipeline_dagger(run.cfg);
    d.seed += s;
    d.train.seed += 100 * s;
    const DaggerResult r = run_dagger(run.base.model, run.base.split.train, run.base.split.val, d);
    const double post = disagreement_rate(r.model, eps, run.cfg.mpc, run.cfg.threads);
    run.refined.push_back(r.model);
    run.disagreement.emplace_back(pre, post);
    if (post < pre) ++decreased;
    per_seed += fmt(" %.4f->%.4f", pre, post);
  }
  return {decreased >= 2,
          fmt("decreased in %d of 3 seeds:%s, %.0f s", decreased, per_seed.c_str(), seconds_since(t0))};
}

Outcome student_safety(PipelineRun& run) {
  run.full_rows = fresh_rollouts(run.refined.front(), "FULL", run.cfg);
  long viol = 0;
  int diverged = 0;
  std::string parts;
  for (const char* sc : {"S1", "S2", "S3"}) {
    const MetricsReport m = scenario_mean(run.full_rows, sc);
    viol += m.n_il_viol;
    parts += fmt(" %s N_viol %ld MSE_vo %.3f;", sc, m.n_il_viol, m.mse_vo);
  }
  for (const RolloutRow& r : run.full_rows) diverged += r.diverged;
  return {viol == 0 && diverged == 0,
          fmt("%zu rollouts (S1 is deterministic, run once),%s diverged %d", run.full_rows.size(),
              parts.c_str(), diverged)};
}

Outcome ablation_direction(PipelineRun& run) {
  const auto t0 = std::chrono::steady_clock::now();
  const AblationModels am = train_ablation_models(run.cfg, {ablation_config(AblationName::NoExpert)});
  const auto rows = fresh_rollouts(am.models.front().second, "NO_EXPERT", run.cfg);
  bool ok = true;
  std::string parts;
  for (const char* sc : {"S1", "S2", "S3"}) {
    const MetricsReport ne = scenario_mean(rows, sc);
    const MetricsReport full = scenario_mean(run.full_rows, sc);
    const double ratio = ne.mse_vo / full.mse_vo;
    ok = ok && ratio >= 100.0 && ne.n_il_viol > 0;
    parts += fmt(" %s MSE_vo %.3f vs %.3f (x%.1f) N_viol %ld;", sc, ne.mse_vo, full.mse_vo, ratio, ne.n_il_viol);
  }
  return {ok, fmt("NO_EXPERT vs FULL:%s %.0f s", parts.c_str(), seconds_since(t0))};
}

Outcome latency(PipelineRun& run) {
  const BenchResult b = bench_decision_time(run.cfg.mpc, run.refined.front(), 5000, 3);
  return {b.ratio >= 5.0, fmt("expert %.2f us, ANN %.2f us, ratio %.1f", b.expert_us, b.ann_us, b.ratio)};
}

Outcome transfer_direction() {
  const auto t0 = std::chrono::steady_clock::now();
  const TransferConfig cfg;
  const TransferResult r = run_transfer_experiment(cfg);
  double scratch = 0.0, transfer = 0.0, mse_s = 0.0, mse_t = 0.0;
  int n_s = 0, n_t = 0;
  std::string per_seed;
  for (const TransferSeedResult& s : r.seeds) {
    scratch += s.scratch_accuracy;
    transfer += s.transfer_accuracy;
    per_seed += fmt(" seed %llu src %.3f scratch %.3f transfer %.3f;", static_cast<unsigned long long>(s.seed),
                    s.source_accuracy, s.scratch_accuracy, s.transfer_accuracy);
    for (const RolloutRow& row : s.rows) {
      if (row.scenario != "S2") continue;
      if (row.controller == "Scratch") {
        mse_s += row.metrics.mse_vo;
        ++n_s;
      } else if (row.controller == "Transfer") {
        mse_t += row.metrics.mse_vo;
        ++n_t;
      }
    }
  }
  const double k = static_cast<double>(r.seeds.size());
  scratch /= k;
  transfer /= k;
  mse_s /= n_s;
  mse_t /= n_t;
  return {transfer >= scratch + 0.03 && mse_t < mse_s,
          fmt("mean accuracy transfer %.4f vs scratch %.4f (gap %+.4f); S2 MSE_vo transfer %.2f vs scratch %.2f;%s %.0f s",
              transfer, scratch, transfer - scratch, mse_t, mse_s, per_seed.c_str(), seconds_since(t0))};
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--strict") == 0) {
      strict = true;
    } else {
      only.push_back(std::atoi(argv[i]));
    }
  }
  auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

  PipelineRun run;
  int failures = 0, crashes = 0;
  auto report = [&](int id, const std::function<Outcome()>& fn) {
    if (!wanted(id)) return;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
      ++crashes;
    }
    if (!o.pass) ++failures;
    std::printf("criterion %d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, beam_equivalence);
  report(2, beam_gap);
  report(3, dynamics);
  report(4, expert_regulation);
  report(5, gradient_check);
  report(11, metrics_suite);

  // Criteria 7-10 build on the model trained for criterion 6.
  const bool pipeline = wanted(6) || wanted(7) || wanted(8) || wanted(9) || wanted(10);
  if (pipeline) {
    bool trained = false;
    report(6, [&] {
      Outcome o = distillation_accuracy(run);
      trained = true;
      return o;
    });
    if (!trained) {
      run.data = generate_dataset(run.cfg);
      run.base = train_offline(run.cfg, run.data);
    }
    bool refined = false;
    report(8, [&] {
      Outcome o = dagger_effect(run);
      refined = true;
      return o;
    });
    if (!refined) run.refined.push_back(run.base.model);
    report(7, [&] { return student_safety(run); });
    if (run.full_rows.empty()) run.full_rows = fresh_rollouts(run.refined.front(), "FULL", run.cfg);
    report(9, [&] { return ablation_direction(run); });
    report(10, [&] { return latency(run); });
  }
  report(12, transfer_direction);

  std::printf("summary: %d failing criteria, %d errors\n", failures, crashes);
  if (crashes > 0) return 2;
  return strict && failures > 0 ? 1 : 0;
}
