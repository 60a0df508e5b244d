#include "fcdistill/transfer.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

namespace fcdistill {

ScenarioConfig buck_base_scenario() {
  ScenarioConfig s;
  s.topology = Topology::NpcBuck;
  s.v_ref = 80.0;
  s.v_in = 120.0;
  s.load_r = 20.0;
  return s;
}

ScenarioConfig buck_scenario_s1() {
  ScenarioConfig s = buck_base_scenario();
  s.duration = 0.15;
  s.events = {{0.05, EventTarget::LoadR, 10.0}};
  return s;
}

ScenarioConfig buck_scenario_s2() {
  ScenarioConfig s = buck_base_scenario();
  s.duration = 0.25;
  s.events = {{0.05, EventTarget::LoadR, 10.0},
              {0.10, EventTarget::VIn, 100.0},
              {0.15, EventTarget::LoadR, 20.0}};
  return s;
}

ScenarioSampler buck_sampler(const BuckRanges& ranges, const ConverterParams& base) {
  return [ranges, base](Subset, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> v_in(ranges.v_in_lo, ranges.v_in_hi);
    std::uniform_real_distribution<double> load(ranges.r_lo, ranges.r_hi);
    std::uniform_real_distribution<double> time(ranges.event_margin,
                                                ranges.duration - ranges.event_margin);
    std::bernoulli_distribution pick_vin(0.5);
    ScenarioConfig s = buck_base_scenario();
    s.duration = ranges.duration;
    s.seed = rng();
    s.v_in = v_in(rng);
    s.load_r = load(rng);
    std::vector<double> times(static_cast<std::size_t>(ranges.events));
    for (double& t : times) t = time(rng);
    std::sort(times.begin(), times.end());
    for (double t : times) {
      const bool vin = pick_vin(rng);
      s.events.push_back({t, vin ? EventTarget::VIn : EventTarget::LoadR, vin ? v_in(rng) : load(rng)});
    }
    return std::make_pair(s, base);
  };
}

void TransferConfig::validate() const {
  if (source_samples == 0 || target_samples == 0) {
    throw std::invalid_argument("transfer sample counts must be positive");
  }
  if (source_epochs < 0 || target_epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (target_episodes < 1) throw std::invalid_argument("target_episodes must be positive");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test_fraction must lie in (0, 1)");
  }
  if (seeds.empty()) throw std::invalid_argument("transfer needs at least one seed");
  mpc.validate();
}

MlpModel transfer_init(const MlpModel& source, std::uint64_t seed,
                       std::span<const Sample> target_train, int hidden) {
  source.validate();
  if (source.hidden != hidden) {
    throw std::invalid_argument("source hidden width " + std::to_string(source.hidden) +
                                " does not match the target width " + std::to_string(hidden));
  }
  MlpModel m = init_mlp<float>(hidden, seed);
  std::copy(source.params.begin(), source.params.begin() + static_cast<std::ptrdiff_t>(m.w2_offset()),
            m.params.begin());
  m.normalizer = fit_normalizer(target_train);
  return m;
}

std::vector<Sample> subsample(std::span<const Sample> samples, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(n, idx.size()));
  std::sort(idx.begin(), idx.end());
  std::vector<Sample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(samples[i]);
  return out;
}

namespace {

// Seeded sample-level train/test partition.
std::pair<std::vector<Sample>, std::vector<Sample>> holdout(const std::vector<Sample>& s,
                                                            double test_fraction,
                                                            std::uint64_t seed) {
  std::vector<Sample> shuffled = s;
  std::mt19937_64 rng(seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto n_test = static_cast<std::size_t>(test_fraction * static_cast<double>(s.size()));
  std::vector<Sample> test(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<Sample> train(shuffled.begin() + static_cast<std::ptrdiff_t>(n_test), shuffled.end());
  return {train, test};
}

TrainConfig small_train(const TransferConfig& cfg, int epochs, std::uint64_t seed,
                        const std::vector<Sample>& train_set) {
  TrainConfig t;
  t.lr = cfg.lr;
  t.batch_size = cfg.batch_size;
  t.epochs = epochs;
  t.seed = seed;
  t.class_weights = present_class_weights(class_histogram(train_set));
  return t;
}

}  // namespace

TransferResult run_transfer_experiment(const TransferConfig& cfg) {
  cfg.validate();
  TransferResult result;
  std::optional<MlpModel> fixed_source;
  if (!cfg.source_model.empty()) fixed_source = load_model(cfg.source_model);

  for (std::uint64_t seed : cfg.seeds) {
    TransferSeedResult r;
    r.seed = seed;

    // Stage 1: source network on FC-TLBC data.
    MlpModel source;
    if (fixed_source) {
      source = *fixed_source;
    } else {
      GenerationSpec gs;
      gs.episodes = cfg.source_episodes;
      gs.seed = seed;
      gs.mpc = cfg.mpc;
      gs.threads = cfg.threads;
      const Dataset fc = collect_expert_dataset(gs);
      const auto [src_train, src_test] =
          holdout(subsample(fc.samples, cfg.source_samples, seed), cfg.test_fraction, seed);
      source = init_mlp<float>(cfg.hidden, seed);
      source.normalizer = fit_normalizer(src_train);
      train(source, src_train, {}, small_train(cfg, cfg.source_epochs, seed, src_train));
      r.source_accuracy = evaluate(source, src_test).accuracy;
    }

    // Target data, shared byte-for-byte by both students.
    GenerationSpec bs;
    bs.episodes = {0, cfg.target_episodes, 0};
    bs.seed = seed + 7919;
    bs.mpc = cfg.mpc;
    bs.sampler = buck_sampler(cfg.buck);
    bs.threads = cfg.threads;
    const Dataset buck = collect_expert_dataset(bs);
    const auto [tgt_train, tgt_test] =
        holdout(subsample(buck.samples, cfg.target_samples, seed), cfg.test_fraction, seed + 1);
    r.target_train = tgt_train.size();
    r.target_test = tgt_test.size();
    const TrainConfig tc = small_train(cfg, cfg.target_epochs, seed + 2, tgt_train);

    // Stage 2: scratch.
    MlpModel scratch = init_mlp<float>(cfg.hidden, seed + 3);
    scratch.normalizer = fit_normalizer(tgt_train);
    train(scratch, tgt_train, {}, tc);
    r.scratch_accuracy = evaluate(scratch, tgt_test).accuracy;

    // Stage 3: transfer.
    MlpModel transferred = transfer_init(source, seed + 3, tgt_train, cfg.hidden);
    train(transferred, tgt_train, {}, tc);
    r.transfer_accuracy = evaluate(transferred, tgt_test).accuracy;

    const std::vector<std::pair<std::string, ScenarioConfig>> scenarios{
        {"S1", buck_scenario_s1()}, {"S2", buck_scenario_s2()}};
    for (const auto& [name, sc] : scenarios) {
      const std::vector<EpisodeSpec> eps{{sc, nominal_params()}};
      for (auto& [label, factory] :
           std::vector<std::pair<std::string, PolicyFactory>>{{"MPC", expert_factory(cfg.mpc)},
                                                              {"Scratch", student_factory(scratch)},
                                                              {"Transfer", student_factory(transferred)}}) {
        auto rows = run_rollouts(factory, label, name, eps, cfg.mpc, cfg.threads);
        for (RolloutRow& row : rows) row.seed = seed;
        r.rows.insert(r.rows.end(), rows.begin(), rows.end());
      }
    }
    result.seeds.push_back(std::move(r));
  }
  return result;
}

void write_transfer_accuracy_csv(const TransferResult& r, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.precision(8);
  os << "build_id,seed,source_accuracy,scratch_accuracy,transfer_accuracy,target_train,target_test\n";
  for (const TransferSeedResult& s : r.seeds) {
    os << build_id() << ',' << s.seed << ',' << s.source_accuracy << ',' << s.scratch_accuracy
       << ',' << s.transfer_accuracy << ',' << s.target_train << ',' << s.target_test << '\n';
  }
}

}  // namespace fcdistill
