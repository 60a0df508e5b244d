#include "fcdistill/dagger.hpp"

#include <fstream>

#include "fcdistill/parallel.hpp"

namespace fcdistill {

void DaggerConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("DAgger iterations must be non-negative");
  if (finetune_epochs < 0) throw std::invalid_argument("fine-tune epochs must be non-negative");
  for (int n : episodes) {
    if (n < 0) throw std::invalid_argument("episode counts must be non-negative");
  }
  mpc.validate();
}

std::vector<EpisodeSpec> dagger_episodes(const DaggerConfig& cfg, int iteration) {
  const ScenarioSampler sampler = cfg.sampler ? cfg.sampler : boost_sampler();
  const std::uint64_t seed = cfg.seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(iteration + 1);
  std::vector<EpisodeSpec> out;
  for (std::size_t s = 0; s < 3; ++s) {
    for (int i = 0; i < cfg.episodes[s]; ++i) {
      std::mt19937_64 rng = episode_rng(seed, static_cast<Subset>(s), static_cast<std::size_t>(i));
      auto [scenario, params] = sampler(static_cast<Subset>(s), rng);
      out.push_back({scenario, params});
    }
  }
  return out;
}

namespace {

struct RolloutResult {
  std::vector<Sample> mismatches;
  std::size_t visited = 0;
  std::size_t disagreements = 0;
  bool diverged = false;
};

RolloutResult student_rollout(const SwitchingPolicy& student, const EpisodeSpec& ep,
                              const MpcConfig& base_mpc, Labeler labeler, std::size_t cap) {
  RolloutResult r;
  const MpcConfig mpc = episode_mpc(base_mpc, ep.scenario);
  auto policy = [&](const FeatureVector& z) {
    const SwitchMode action = student(z);
    const SwitchMode label = label_features(labeler, z, ep.params, mpc);
    ++r.visited;
    if (action != label) {
      ++r.disagreements;
      if (r.mismatches.size() < cap) r.mismatches.push_back({z.quantized(), label});
    }
    return action;
  };
  try {
    run_episode(ep.scenario, policy, ep.params);
  } catch (const DivergenceError&) {
    r.diverged = true;
  }
  return r;
}

}  // namespace

MismatchSet collect_mismatch(const SwitchingPolicy& student, const std::vector<EpisodeSpec>& episodes,
                             std::size_t budget, const MpcConfig& mpc, Labeler labeler,
                             unsigned threads) {
  MismatchSet out;
  out.samples.meta.labeler = labeler;
  out.samples.meta.mpc = mpc;
  if (budget == 0) return out;
  std::vector<RolloutResult> results(episodes.size());
  parallel_for(episodes.size(), threads, [&](std::size_t i) {
    results[i] = student_rollout(student, episodes[i], mpc, labeler, budget);
  });
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    RolloutResult& r = results[i];
    out.visited += r.visited;
    out.disagreements += r.disagreements;
    if (r.diverged) ++out.diverged_episodes;
    const std::size_t room = budget - out.samples.size();
    const std::size_t take = std::min(room, r.mismatches.size());
    if (take == 0) continue;
    EpisodeInfo info;
    info.subset = Subset::Dagger;
    info.scenario = episodes[i].scenario;
    info.params = episodes[i].params;
    info.offset = out.samples.size();
    info.count = take;
    out.samples.samples.insert(out.samples.samples.end(), r.mismatches.begin(),
                               r.mismatches.begin() + static_cast<std::ptrdiff_t>(take));
    out.samples.meta.episodes.push_back(std::move(info));
  }
  refresh_meta(out.samples);
  return out;
}

DaggerResult run_dagger(const MlpModel& student, std::span<const Sample> base_train,
                        std::span<const Sample> val, const DaggerConfig& cfg) {
  cfg.validate();
  if (base_train.empty()) throw std::invalid_argument("DAgger needs a non-empty base dataset");
  DaggerResult result;
  result.model = student;
  result.mismatches.meta.labeler = cfg.labeler;
  result.mismatches.meta.mpc = cfg.mpc;
  result.mismatches.meta.seed = cfg.seed;
  if (cfg.iterations == 0) return result;

  std::vector<Sample> aggregate(base_train.begin(), base_train.end());
  const auto iters = static_cast<std::size_t>(cfg.iterations);
  for (int it = 0; it < cfg.iterations; ++it) {
    const bool last = it + 1 == cfg.iterations;
    const std::size_t budget = cfg.budget / iters + (last ? cfg.budget % iters : 0);
    const int epochs = cfg.finetune_epochs / cfg.iterations +
                       (last ? cfg.finetune_epochs % cfg.iterations : 0);

    const MismatchSet ms = collect_mismatch(mlp_policy(result.model), dagger_episodes(cfg, it),
                                            budget, cfg.mpc, cfg.labeler, cfg.threads);
    aggregate.insert(aggregate.end(), ms.samples.samples.begin(), ms.samples.samples.end());
    append_dataset(result.mismatches, ms.samples);

    TrainConfig tc = cfg.train;
    tc.epochs = epochs;
    tc.seed = cfg.train.seed + static_cast<std::uint64_t>(it) + 1;
    tc.class_weights.clear();
    const TrainHistory h = train(result.model, aggregate, val, tc);

    DaggerIterationStats st;
    st.iteration = it + 1;
    st.visited = ms.visited;
    st.disagreements = ms.disagreements;
    st.mismatch_rate = ms.mismatch_rate();
    st.added = ms.samples.size();
    st.aggregate_size = aggregate.size();
    st.diverged_episodes = ms.diverged_episodes;
    st.epochs = epochs;
    if (!h.empty()) {
      st.train_acc = h.back().train_acc;
      st.val_acc = h.back().val_acc;
    }
    result.stats.push_back(st);
  }
  return result;
}

double disagreement_rate(const MlpModel& student, const std::vector<EpisodeSpec>& episodes,
                         const MpcConfig& mpc, unsigned threads) {
  const SwitchingPolicy policy = mlp_policy(student);
  std::vector<RolloutResult> results(episodes.size());
  parallel_for(episodes.size(), threads, [&](std::size_t i) {
    results[i] = student_rollout(policy, episodes[i], mpc, Labeler::BeamExpert, 0);
  });
  std::size_t visited = 0, disagreements = 0;
  for (const RolloutResult& r : results) {
    visited += r.visited;
    disagreements += r.disagreements;
  }
  return visited == 0 ? 0.0 : static_cast<double>(disagreements) / static_cast<double>(visited);
}

void write_dagger_stats_csv(const std::vector<DaggerIterationStats>& stats,
                            const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "iteration,visited,disagreements,mismatch_rate,added,aggregate_size,diverged_episodes,"
        "epochs,train_acc,val_acc\n";
  os.precision(8);
  for (const DaggerIterationStats& s : stats) {
    os << s.iteration << ',' << s.visited << ',' << s.disagreements << ',' << s.mismatch_rate
       << ',' << s.added << ',' << s.aggregate_size << ',' << s.diverged_episodes << ','
       << s.epochs << ',' << s.train_acc << ',' << s.val_acc << '\n';
  }
}

}  // namespace fcdistill
