#include "fcdistill/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "fcdistill/parallel.hpp"
#include "json_io.hpp"

namespace fcdistill {

using nlohmann::json;

std::string_view to_string(Subset s) {
  switch (s) {
    case Subset::Nominal: return "nominal";
    case Subset::Operating: return "operating";
    case Subset::Parametric: return "parametric";
    case Subset::Dagger: return "dagger";
  }
  return "?";
}

Subset parse_subset(std::string_view name) {
  if (name == "nominal" || name == "nom") return Subset::Nominal;
  if (name == "operating" || name == "op") return Subset::Operating;
  if (name == "parametric" || name == "par") return Subset::Parametric;
  if (name == "dagger") return Subset::Dagger;
  throw std::invalid_argument("unknown dataset subset '" + std::string(name) + "'");
}

std::string_view to_string(Labeler l) {
  return l == Labeler::BeamExpert ? "beam_expert" : "greedy_surrogate";
}

Labeler parse_labeler(std::string_view name) {
  if (name == "beam_expert" || name == "expert") return Labeler::BeamExpert;
  if (name == "greedy_surrogate" || name == "greedy") return Labeler::GreedySurrogate;
  throw std::invalid_argument("unknown labeler '" + std::string(name) + "'");
}

FeatureNormalizer fit_normalizer(std::span<const Sample> samples) {
  FeatureNormalizer n;
  if (samples.empty()) return n;
  std::array<double, FeatureVector::kSize> sum{}, sq{};
  for (const Sample& s : samples) {
    const auto a = s.z.to_array();
    for (std::size_t j = 0; j < a.size(); ++j) sum[j] += a[j];
  }
  const double count = static_cast<double>(samples.size());
  std::array<double, FeatureVector::kSize> mean{};
  for (std::size_t j = 0; j < mean.size(); ++j) mean[j] = sum[j] / count;
  for (const Sample& s : samples) {
    const auto a = s.z.to_array();
    for (std::size_t j = 0; j < a.size(); ++j) sq[j] += (a[j] - mean[j]) * (a[j] - mean[j]);
  }
  for (std::size_t j = 0; j < mean.size(); ++j) {
    const double sd = std::sqrt(sq[j] / count);
    n.mean[j] = static_cast<float>(mean[j]);
    n.stddev[j] = sd < 1e-9 ? 1.0f : static_cast<float>(sd);
  }
  return n;
}

ScenarioSampler boost_sampler(const RandomizationRanges& ranges, const ConverterParams& base) {
  return [ranges, base](Subset subset, std::mt19937_64& rng) {
    switch (subset) {
      case Subset::Nominal: return sample_scenario(ScenarioKind::S1, rng, ranges, base);
      case Subset::Operating: return sample_scenario(ScenarioKind::S2, rng, ranges, base);
      default: return sample_scenario(ScenarioKind::S3, rng, ranges, base);
    }
  };
}

std::mt19937_64 episode_rng(std::uint64_t master_seed, Subset subset, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(subset),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(index) >> 32)};
  return std::mt19937_64(seq);
}

SwitchMode label_features(Labeler labeler, const FeatureVector& z, const ConverterParams& p,
                          const MpcConfig& cfg) {
  const FeatureVector q = z.quantized();
  return labeler == Labeler::BeamExpert ? beam_decide(q, p, cfg).mode
                                        : greedy_decide(q, p, cfg).mode;
}

MpcConfig episode_mpc(const MpcConfig& base, const ScenarioConfig& scenario) {
  MpcConfig cfg = base;
  cfg.topology = scenario.topology;
  cfg.v_cf_ref = 0.5 * scenario.v_ref;
  return cfg;
}

namespace {

FeatureVector record_features(const TrajectoryRecord& r) {
  return FeatureVector{r.x.i_l, r.x.v_cf, r.x.v_o, r.i_ref, r.w.v_in, r.w.i_o}.quantized();
}

struct EpisodeJob {
  Subset subset;
  std::size_t index;
};

struct EpisodeResult {
  EpisodeInfo info;
  std::vector<Sample> samples;
  bool diverged = false;
};

}  // namespace

Dataset collect_expert_dataset(const GenerationSpec& spec) {
  spec.mpc.validate();
  for (int n : spec.episodes) {
    if (n < 0) throw std::invalid_argument("episode counts must be non-negative");
  }
  const ScenarioSampler sampler = spec.sampler ? spec.sampler : boost_sampler();

  std::vector<EpisodeJob> jobs;
  for (std::size_t s = 0; s < 3; ++s) {
    for (int i = 0; i < spec.episodes[s]; ++i) {
      jobs.push_back({static_cast<Subset>(s), static_cast<std::size_t>(i)});
    }
  }

  std::vector<EpisodeResult> results(jobs.size());
  parallel_for(jobs.size(), spec.threads, [&](std::size_t j) {
    std::mt19937_64 rng = episode_rng(spec.seed, jobs[j].subset, jobs[j].index);
    auto [scenario, params] = sampler(jobs[j].subset, rng);
    const MpcConfig mpc = episode_mpc(spec.mpc, scenario);
    const Labeler labeler = spec.labeler;
    const ConverterParams plant = params;
    EpisodeResult& out = results[j];
    out.info.subset = jobs[j].subset;
    out.info.scenario = scenario;
    out.info.params = params;
    try {
      const Trajectory traj = run_episode(
          scenario,
          [&](const FeatureVector& z) { return label_features(labeler, z, plant, mpc); }, plant);
      out.samples.reserve(traj.size());
      for (const TrajectoryRecord& r : traj.records) out.samples.push_back({record_features(r), r.mode});
    } catch (const DivergenceError&) {
      out.diverged = true;
    }
  });

  Dataset ds;
  ds.meta.seed = spec.seed;
  ds.meta.labeler = spec.labeler;
  ds.meta.mpc = spec.mpc;
  for (EpisodeResult& r : results) {
    if (r.diverged) {
      ++ds.meta.dropped_episodes;
      continue;
    }
    r.info.offset = ds.samples.size();
    r.info.count = r.samples.size();
    ds.samples.insert(ds.samples.end(), r.samples.begin(), r.samples.end());
    ds.meta.episodes.push_back(std::move(r.info));
  }
  refresh_meta(ds);
  return ds;
}

ClassHistogram class_histogram(std::span<const Sample> samples) {
  ClassHistogram h{};
  for (const Sample& s : samples) ++h[index_of(s.label)];
  return h;
}

std::array<double, kNumModes> class_weights(const ClassHistogram& histogram) {
  const double total = static_cast<double>(
      std::accumulate(histogram.begin(), histogram.end(), std::size_t{0}));
  std::array<double, kNumModes> w{};
  for (std::size_t c = 0; c < kNumModes; ++c) {
    if (histogram[c] == 0) {
      throw std::invalid_argument("class " + std::string(to_string(mode_from_index(c))) +
                                  " has no samples; collect more data before training");
    }
    w[c] = total / (static_cast<double>(kNumModes) * static_cast<double>(histogram[c]));
  }
  return w;
}

void refresh_meta(Dataset& ds) {
  ds.meta.histogram = class_histogram(ds.samples);
  ds.meta.subset_counts = {};
  std::size_t covered = 0;
  for (const EpisodeInfo& e : ds.meta.episodes) {
    ds.meta.subset_counts[static_cast<std::size_t>(e.subset)] += e.count;
    covered += e.count;
  }
  if (covered != ds.samples.size()) {
    throw std::logic_error("dataset episodes do not cover every sample");
  }
}

void append_dataset(Dataset& base, const Dataset& more) {
  const std::size_t shift = base.samples.size();
  base.samples.insert(base.samples.end(), more.samples.begin(), more.samples.end());
  for (EpisodeInfo e : more.meta.episodes) {
    e.offset += shift;
    base.meta.episodes.push_back(std::move(e));
  }
  base.meta.dropped_episodes += more.meta.dropped_episodes;
  refresh_meta(base);
}

DatasetSplit split(const Dataset& ds, std::array<double, 3> fractions, std::uint64_t seed) {
  if (ds.size() < 3) throw std::invalid_argument("dataset needs at least 3 samples to split");
  double fsum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw std::invalid_argument("split fractions must be non-negative");
    fsum += f;
  }
  if (std::abs(fsum - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");

  std::vector<EpisodeInfo> episodes = ds.meta.episodes;
  if (episodes.empty()) episodes.push_back({Subset::Nominal, {}, {}, 0, ds.size()});
  std::vector<std::size_t> order(episodes.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  // An episode goes to the partition that contains its midpoint on the
  // cumulative sample axis.
  const double total = static_cast<double>(ds.size());
  const double b0 = fractions[0] * total;
  const double b1 = (fractions[0] + fractions[1]) * total;
  std::vector<int> part(episodes.size());
  double cum = 0.0;
  for (std::size_t idx : order) {
    const double mid = cum + 0.5 * static_cast<double>(episodes[idx].count);
    part[idx] = mid < b0 ? 0 : (mid < b1 ? 1 : 2);
    cum += static_cast<double>(episodes[idx].count);
  }
  // Every partition with a positive share gets at least one episode when the
  // donor partition can spare one.
  for (int p = 0; p < 3; ++p) {
    if (fractions[static_cast<std::size_t>(p)] <= 0.0) continue;
    if (std::count(part.begin(), part.end(), p) > 0) continue;
    std::array<long, 3> n{};
    for (int q : part) ++n[static_cast<std::size_t>(q)];
    const int donor = static_cast<int>(std::max_element(n.begin(), n.end()) - n.begin());
    if (n[static_cast<std::size_t>(donor)] < 2) continue;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if (part[*it] == donor) {
        part[*it] = p;
        break;
      }
    }
  }

  DatasetSplit out;
  out.episode_partition = part;
  std::array<std::vector<Sample>*, 3> dest{&out.train, &out.val, &out.test};
  for (std::size_t idx : order) {
    const EpisodeInfo& e = episodes[idx];
    auto first = ds.samples.begin() + static_cast<std::ptrdiff_t>(e.offset);
    dest[static_cast<std::size_t>(part[idx])]->insert(
        dest[static_cast<std::size_t>(part[idx])]->end(), first,
        first + static_cast<std::ptrdiff_t>(e.count));
  }
  return out;
}

std::size_t audit_labels(const Dataset& ds, double fraction, std::uint64_t seed,
                         std::size_t* checked) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution pick(std::clamp(fraction, 0.0, 1.0));
  std::size_t n_checked = 0, mismatches = 0;
  for (const EpisodeInfo& e : ds.meta.episodes) {
    const MpcConfig mpc = episode_mpc(ds.meta.mpc, e.scenario);
    for (std::size_t i = e.offset; i < e.offset + e.count; ++i) {
      if (!pick(rng)) continue;
      ++n_checked;
      const Sample& s = ds.samples[i];
      if (label_features(ds.meta.labeler, s.z, e.params, mpc) != s.label) ++mismatches;
    }
  }
  if (checked) *checked = n_checked;
  return mismatches;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr char kMagic[4] = {'F', 'C', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

void require_little_endian() {
  if constexpr (std::endian::native != std::endian::little) {
    throw std::runtime_error("binary containers require a little-endian host");
  }
}

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("truncated dataset file");
  return v;
}

json normalizer_json(const FeatureNormalizer& n) {
  return {{"mean", n.mean}, {"std", n.stddev}};
}

FeatureNormalizer normalizer_from(const json& j) {
  FeatureNormalizer n;
  n.mean = j.at("mean").get<std::array<float, FeatureVector::kSize>>();
  n.stddev = j.at("std").get<std::array<float, FeatureVector::kSize>>();
  return n;
}

json meta_json(const DatasetMeta& m) {
  json episodes = json::array();
  for (const EpisodeInfo& e : m.episodes) {
    episodes.push_back({{"subset", std::string(to_string(e.subset))},
                        {"scenario", e.scenario},
                        {"params", e.params},
                        {"offset", e.offset},
                        {"count", e.count}});
  }
  json j = {{"subset_counts",
             {{"nominal", m.subset_counts[0]},
              {"operating", m.subset_counts[1]},
              {"parametric", m.subset_counts[2]},
              {"dagger", m.subset_counts[3]}}},
            {"histogram", m.histogram},
            {"seed", m.seed},
            {"dropped_episodes", m.dropped_episodes},
            {"labeler", std::string(to_string(m.labeler))},
            {"mpc", m.mpc},
            {"episodes", episodes}};
  if (m.normalizer) j["normalizer"] = normalizer_json(*m.normalizer);
  if (m.split_sizes) {
    j["split_sizes"] = {{"train", m.split_sizes->train},
                        {"val", m.split_sizes->val},
                        {"test", m.split_sizes->test}};
  }
  return j;
}

DatasetMeta meta_from(const json& j) {
  DatasetMeta m;
  m.seed = j.value("seed", std::uint64_t{0});
  m.dropped_episodes = j.value("dropped_episodes", std::size_t{0});
  m.labeler = parse_labeler(j.value("labeler", std::string("beam_expert")));
  if (j.contains("mpc")) m.mpc = j.at("mpc").get<MpcConfig>();
  if (j.contains("normalizer")) m.normalizer = normalizer_from(j.at("normalizer"));
  if (j.contains("split_sizes")) {
    const json& s = j.at("split_sizes");
    m.split_sizes = SplitSizes{s.at("train"), s.at("val"), s.at("test")};
  }
  for (const json& e : j.value("episodes", json::array())) {
    EpisodeInfo info;
    info.subset = parse_subset(e.at("subset").get<std::string>());
    info.scenario = e.at("scenario").get<ScenarioConfig>();
    info.params = e.at("params").get<ConverterParams>();
    info.offset = e.at("offset");
    info.count = e.at("count");
    m.episodes.push_back(std::move(info));
  }
  return m;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  require_little_endian();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write dataset file " + path);
  const std::string meta = meta_json(ds.meta).dump();
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint64_t>(os, meta.size());
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put<std::uint64_t>(os, ds.samples.size());
  std::vector<char> buf;
  buf.reserve(ds.samples.size() * 25);
  for (const Sample& s : ds.samples) {
    for (double v : s.z.to_array()) {
      const float f = static_cast<float>(v);
      const char* p = reinterpret_cast<const char*>(&f);
      buf.insert(buf.end(), p, p + 4);
    }
    buf.push_back(static_cast<char>(index_of(s.label)));
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw std::runtime_error("failed writing dataset file " + path);
}

Dataset load_dataset(const std::string& path) {
  require_little_endian();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read dataset file " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error(path + " is not a dataset file");
  }
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion) {
    throw std::runtime_error("unsupported dataset version " + std::to_string(version));
  }
  const auto meta_len = get<std::uint64_t>(is);
  std::string meta(meta_len, '\0');
  is.read(meta.data(), static_cast<std::streamsize>(meta_len));
  if (!is) throw std::runtime_error("truncated dataset file");
  Dataset ds;
  ds.meta = meta_from(json::parse(meta));
  const auto count = get<std::uint64_t>(is);
  std::vector<char> buf(count * 25);
  is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!is) throw std::runtime_error("truncated dataset file");
  ds.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const char* rec = buf.data() + i * 25;
    std::array<double, FeatureVector::kSize> a{};
    for (std::size_t j = 0; j < a.size(); ++j) {
      float f;
      std::memcpy(&f, rec + 4 * j, 4);
      a[j] = f;
    }
    const auto label = static_cast<std::uint8_t>(rec[24]);
    if (label >= kNumModes) throw std::runtime_error("dataset contains an invalid label");
    ds.samples[i] = {FeatureVector::from_array(a), mode_from_index(label)};
  }
  refresh_meta(ds);
  return ds;
}

void export_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "i_L,v_Cf,v_o,i_ref,V_in,i_o,label\n" << std::setprecision(9);
  for (const Sample& s : ds.samples) {
    for (double v : s.z.to_array()) os << v << ',';
    os << to_string(s.label) << '\n';
  }
}

}  // namespace fcdistill
