#include "fcdistill/mlp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace fcdistill {

template <typename T>
void BasicMlp<T>::validate() const {
  if (hidden < 1 || hidden > kMaxHidden) {
    throw std::invalid_argument("hidden width must lie in [1, " + std::to_string(kMaxHidden) + "]");
  }
  if (params.size() != parameter_count(hidden)) {
    throw std::invalid_argument("parameter vector does not match the layer shapes");
  }
  for (T v : params) {
    if (!std::isfinite(v)) throw std::invalid_argument("model contains non-finite parameters");
  }
  for (std::size_t j = 0; j < FeatureVector::kSize; ++j) {
    if (!std::isfinite(normalizer.mean[j]) || !(normalizer.stddev[j] > 0.0f) ||
        !std::isfinite(normalizer.stddev[j])) {
      throw std::invalid_argument("normalizer scales must be finite and positive");
    }
  }
  std::array<bool, kNumModes> seen{};
  for (SwitchMode m : mode_order) {
    if (seen[index_of(m)]) throw std::invalid_argument("mode order repeats a mode");
    seen[index_of(m)] = true;
  }
}

template <typename T>
BasicMlp<T> init_mlp(int hidden, std::uint64_t seed) {
  if (hidden < 1 || hidden > kMaxHidden) throw std::invalid_argument("invalid hidden width");
  BasicMlp<T> m;
  m.hidden = hidden;
  m.params.assign(BasicMlp<T>::parameter_count(hidden), T(0));
  std::mt19937_64 rng(seed);
  const double b1 = std::sqrt(6.0 / BasicMlp<T>::kInputs);
  const double b2 = std::sqrt(6.0 / hidden);
  std::uniform_real_distribution<double> d1(-b1, b1), d2(-b2, b2);
  for (std::size_t k = m.w1_offset(); k < m.b1_offset(); ++k) m.params[k] = static_cast<T>(d1(rng));
  for (std::size_t k = m.w2_offset(); k < m.b2_offset(); ++k) m.params[k] = static_cast<T>(d2(rng));
  return m;
}

template <typename T>
std::array<T, FeatureVector::kSize> normalize_features(const BasicMlp<T>& model,
                                                       const FeatureVector& z) {
  if (!z.finite()) throw std::invalid_argument("feature vector is not finite");
  const auto a = z.to_array();
  std::array<T, FeatureVector::kSize> x{};
  for (std::size_t j = 0; j < x.size(); ++j) {
    x[j] = static_cast<T>((a[j] - static_cast<double>(model.normalizer.mean[j])) /
                          static_cast<double>(model.normalizer.stddev[j]));
  }
  return x;
}

namespace {

constexpr int kIn = static_cast<int>(FeatureVector::kSize);
constexpr int kOut = static_cast<int>(kNumModes);

// Hidden pre-activations and output logits for one standardized input.
template <typename T>
void forward_raw(const BasicMlp<T>& m, const T* x, T* pre, T* out) {
  const int h = m.hidden;
  const T* w1 = m.params.data() + m.w1_offset();
  const T* b1 = m.params.data() + m.b1_offset();
  const T* w2 = m.params.data() + m.w2_offset();
  const T* b2 = m.params.data() + m.b2_offset();
  std::copy(b1, b1 + h, pre);
  for (int i = 0; i < kIn; ++i) {
    const T xi = x[i];
    const T* row = w1 + i * h;
    for (int j = 0; j < h; ++j) pre[j] += xi * row[j];
  }
  for (int c = 0; c < kOut; ++c) out[c] = b2[c];
  for (int j = 0; j < h; ++j) {
    const T a = pre[j] > T(0) ? pre[j] : T(0);
    const T* row = w2 + j * kOut;
    for (int c = 0; c < kOut; ++c) out[c] += a * row[c];
  }
}

template <typename T>
std::array<T, kNumModes> softmax(const std::array<T, kNumModes>& l) {
  const T mx = *std::max_element(l.begin(), l.end());
  std::array<T, kNumModes> p{};
  T sum = 0;
  for (std::size_t c = 0; c < kNumModes; ++c) {
    p[c] = std::exp(l[c] - mx);
    sum += p[c];
  }
  for (T& v : p) v /= sum;
  return p;
}

// Index of the largest score; ties go to the output whose mode comes first
// in the canonical order.
template <typename T>
std::size_t argmax_output(const std::array<T, kNumModes>& s,
                          const std::array<SwitchMode, kNumModes>& order) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumModes; ++c) {
    if (s[c] > s[best] || (s[c] == s[best] && index_of(order[c]) < index_of(order[best]))) best = c;
  }
  return best;
}

template <typename T>
std::size_t output_of(const BasicMlp<T>& m, SwitchMode label) {
  for (std::size_t c = 0; c < kNumModes; ++c) {
    if (m.mode_order[c] == label) return c;
  }
  throw std::logic_error("label missing from the model's mode order");
}

}  // namespace

template <typename T>
std::array<T, kNumModes> logits(const BasicMlp<T>& model, const FeatureVector& z) {
  if (model.hidden > kMaxHidden) throw std::invalid_argument("invalid hidden width");
  const auto x = normalize_features(model, z);
  std::array<T, kMaxHidden> pre;
  std::array<T, kNumModes> out{};
  forward_raw(model, x.data(), pre.data(), out.data());
  return out;
}

template <typename T>
std::array<T, kNumModes> forward(const BasicMlp<T>& model, const FeatureVector& z) {
  return softmax(logits(model, z));
}

template <typename T>
SwitchMode predict_mode(const BasicMlp<T>& model, const FeatureVector& z) {
  return model.mode_order[argmax_output(logits(model, z), model.mode_order)];
}

template <typename T>
LossGrad<T> loss_and_grad(const BasicMlp<T>& model, std::span<const Sample> batch,
                          const ClassWeights& alpha) {
  for (double a : alpha) {
    if (!(a > 0.0)) throw std::invalid_argument("class weights must be positive");
  }
  LossGrad<T> out;
  out.grad.assign(model.params.size(), T(0));
  if (batch.empty()) return out;

  const int h = model.hidden;
  const T* w2 = model.params.data() + model.w2_offset();
  T* g_w1 = out.grad.data() + model.w1_offset();
  T* g_b1 = out.grad.data() + model.b1_offset();
  T* g_w2 = out.grad.data() + model.w2_offset();
  T* g_b2 = out.grad.data() + model.b2_offset();
  std::vector<T> pre(static_cast<std::size_t>(h)), dh(static_cast<std::size_t>(h));
  const T inv_n = T(1) / static_cast<T>(batch.size());
  double loss = 0.0;

  for (const Sample& s : batch) {
    const auto x = normalize_features(model, s.z);
    std::array<T, kNumModes> l{};
    forward_raw(model, x.data(), pre.data(), l.data());
    const std::size_t y = output_of(model, s.label);
    const T mx = *std::max_element(l.begin(), l.end());
    T sum = 0;
    for (T v : l) sum += std::exp(v - mx);
    const T lse = mx + std::log(sum);
    const T a = static_cast<T>(alpha[index_of(s.label)]);
    loss += static_cast<double>(a * (lse - l[y]));

    std::array<T, kNumModes> dl{};
    for (std::size_t c = 0; c < kNumModes; ++c) {
      const T p = std::exp(l[c] - lse);
      dl[c] = a * inv_n * (p - (c == y ? T(1) : T(0)));
      g_b2[c] += dl[c];
    }
    for (int j = 0; j < h; ++j) {
      if (pre[static_cast<std::size_t>(j)] > T(0)) {
        const T act = pre[static_cast<std::size_t>(j)];
        const T* row = w2 + j * kOut;
        T* grow = g_w2 + j * kOut;
        T d = 0;
        for (int c = 0; c < kOut; ++c) {
          grow[c] += act * dl[static_cast<std::size_t>(c)];
          d += row[c] * dl[static_cast<std::size_t>(c)];
        }
        dh[static_cast<std::size_t>(j)] = d;
      } else {
        dh[static_cast<std::size_t>(j)] = T(0);
      }
    }
    for (int j = 0; j < h; ++j) g_b1[j] += dh[static_cast<std::size_t>(j)];
    for (int i = 0; i < kIn; ++i) {
      const T xi = x[static_cast<std::size_t>(i)];
      T* grow = g_w1 + i * h;
      for (int j = 0; j < h; ++j) grow[j] += xi * dh[static_cast<std::size_t>(j)];
    }
  }
  out.loss = loss / static_cast<double>(batch.size());
  return out;
}

EvalResult evaluate(const MlpModel& model, std::span<const Sample> samples,
                    const ClassWeights& alpha) {
  EvalResult r;
  if (samples.empty()) return r;
  std::vector<float> pre(static_cast<std::size_t>(model.hidden));
  std::size_t correct = 0;
  double loss = 0.0;
  for (const Sample& s : samples) {
    const auto x = normalize_features(model, s.z);
    std::array<float, kNumModes> l{};
    forward_raw(model, x.data(), pre.data(), l.data());
    const std::size_t y = output_of(model, s.label);
    const double mx = *std::max_element(l.begin(), l.end());
    double sum = 0.0;
    for (float v : l) sum += std::exp(static_cast<double>(v) - mx);
    loss += alpha[index_of(s.label)] * (mx + std::log(sum) - static_cast<double>(l[y]));
    if (argmax_output(l, model.mode_order) == y) ++correct;
  }
  r.loss = loss / static_cast<double>(samples.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  return r;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  if (epochs < 0) throw std::invalid_argument("epoch count must be non-negative");
  if (!class_weights.empty() && class_weights.size() != kNumModes) {
    throw std::invalid_argument("class weights need one entry per mode");
  }
}

TrainingDiverged::TrainingDiverged(int epoch, std::size_t batch)
    : std::runtime_error("training loss became non-finite at epoch " + std::to_string(epoch) +
                         ", batch " + std::to_string(batch)),
      epoch_(epoch),
      batch_(batch) {}

TrainHistory train(MlpModel& model, std::span<const Sample> train_set,
                   std::span<const Sample> val_set, const TrainConfig& cfg) {
  cfg.validate();
  model.validate();
  TrainHistory history;
  if (cfg.epochs == 0) return history;
  if (train_set.empty()) throw std::invalid_argument("training split is empty");

  ClassWeights alpha{};
  if (cfg.class_weights.empty()) {
    alpha = class_weights(class_histogram(train_set));
  } else {
    std::copy(cfg.class_weights.begin(), cfg.class_weights.end(), alpha.begin());
  }

  const std::size_t n_params = model.params.size();
  std::vector<double> m1(n_params, 0.0), m2(n_params, 0.0);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Sample> batch;
  batch.reserve(static_cast<std::size_t>(cfg.batch_size));
  std::mt19937_64 rng(cfg.seed);
  const double b1 = cfg.adam.beta1, b2 = cfg.adam.beta2;
  long t = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(train_set[order[k]]);
      const LossGrad<float> lg = loss_and_grad(model, std::span<const Sample>(batch), alpha);
      if (!std::isfinite(lg.loss)) throw TrainingDiverged(epoch, batch_index);

      ++t;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
      for (std::size_t k = 0; k < n_params; ++k) {
        const double g = lg.grad[k];
        m1[k] = b1 * m1[k] + (1.0 - b1) * g;
        m2[k] = b2 * m2[k] + (1.0 - b2) * g * g;
        const double step = cfg.lr * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + cfg.adam.eps);
        model.params[k] = static_cast<float>(model.params[k] - step);
      }
    }
    EpochStats st;
    st.epoch = epoch;
    const EvalResult tr = evaluate(model, train_set, alpha);
    st.train_loss = tr.loss;
    st.train_acc = tr.accuracy;
    if (!val_set.empty()) {
      const EvalResult va = evaluate(model, val_set, alpha);
      st.val_loss = va.loss;
      st.val_acc = va.accuracy;
    }
    history.push_back(st);
  }
  return history;
}

SwitchingPolicy mlp_policy(const MlpModel& model) {
  model.validate();
  return [model](const FeatureVector& z) { return predict_mode(model, z); };
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  os.precision(8);
  for (const EpochStats& e : history) {
    os << e.epoch << ',' << e.train_loss << ',' << e.train_acc << ',' << e.val_loss << ','
       << e.val_acc << '\n';
  }
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr char kModelMagic[4] = {'F', 'C', 'N', 'N'};
constexpr std::uint32_t kModelVersion = 1;

template <typename V>
void put(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& is) {
  V v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(V));
  if (!is) throw std::runtime_error("truncated model file");
  return v;
}

}  // namespace

void save_model(const MlpModel& model, const std::string& path) {
  if constexpr (std::endian::native != std::endian::little) {
    throw std::runtime_error("model files require a little-endian host");
  }
  model.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write model file " + path);
  const auto h = static_cast<std::size_t>(model.hidden);
  os.write(kModelMagic, 4);
  put<std::uint32_t>(os, kModelVersion);
  put<std::uint32_t>(os, kIn);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(h));
  put<std::uint32_t>(os, kOut);
  for (float v : model.normalizer.mean) put(os, v);
  for (float v : model.normalizer.stddev) put(os, v);
  for (SwitchMode m : model.mode_order) put<std::uint8_t>(os, static_cast<std::uint8_t>(m));
  const float* p = model.params.data();
  for (std::size_t j = 0; j < h; ++j) {
    for (std::size_t i = 0; i < kIn; ++i) put(os, p[model.w1_offset() + i * h + j]);
  }
  for (std::size_t j = 0; j < h; ++j) put(os, p[model.b1_offset() + j]);
  for (std::size_t c = 0; c < kOut; ++c) {
    for (std::size_t j = 0; j < h; ++j) put(os, p[model.w2_offset() + j * kOut + c]);
  }
  for (std::size_t c = 0; c < kOut; ++c) put(os, p[model.b2_offset() + c]);
  if (!os) throw std::runtime_error("failed writing model file " + path);
}

MlpModel load_model(const std::string& path) {
  if constexpr (std::endian::native != std::endian::little) {
    throw std::runtime_error("model files require a little-endian host");
  }
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read model file " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kModelMagic, 4) != 0) {
    throw std::runtime_error(path + " is not a model file");
  }
  if (get<std::uint32_t>(is) != kModelVersion) throw std::runtime_error("unsupported model version");
  const auto inputs = get<std::uint32_t>(is);
  const auto hidden = get<std::uint32_t>(is);
  const auto outputs = get<std::uint32_t>(is);
  if (inputs != kIn || outputs != kOut || hidden < 1 || hidden > kMaxHidden) {
    throw std::runtime_error("model file has unsupported layer shapes");
  }
  MlpModel m;
  m.hidden = static_cast<int>(hidden);
  m.params.assign(MlpModel::parameter_count(m.hidden), 0.0f);
  for (float& v : m.normalizer.mean) v = get<float>(is);
  for (float& v : m.normalizer.stddev) v = get<float>(is);
  for (SwitchMode& mode : m.mode_order) mode = mode_from_index(get<std::uint8_t>(is));
  const std::size_t h = hidden;
  float* p = m.params.data();
  for (std::size_t j = 0; j < h; ++j) {
    for (std::size_t i = 0; i < kIn; ++i) p[m.w1_offset() + i * h + j] = get<float>(is);
  }
  for (std::size_t j = 0; j < h; ++j) p[m.b1_offset() + j] = get<float>(is);
  for (std::size_t c = 0; c < kOut; ++c) {
    for (std::size_t j = 0; j < h; ++j) p[m.w2_offset() + j * kOut + c] = get<float>(is);
  }
  for (std::size_t c = 0; c < kOut; ++c) p[m.b2_offset() + c] = get<float>(is);
  m.validate();
  return m;
}

#define FCDISTILL_INSTANTIATE(T)                                                             \
  template struct BasicMlp<T>;                                                               \
  template BasicMlp<T> init_mlp<T>(int, std::uint64_t);                                      \
  template std::array<T, FeatureVector::kSize> normalize_features(const BasicMlp<T>&,        \
                                                                  const FeatureVector&);     \
  template std::array<T, kNumModes> logits(const BasicMlp<T>&, const FeatureVector&);        \
  template std::array<T, kNumModes> forward(const BasicMlp<T>&, const FeatureVector&);       \
  template SwitchMode predict_mode(const BasicMlp<T>&, const FeatureVector&);                \
  template LossGrad<T> loss_and_grad(const BasicMlp<T>&, std::span<const Sample>,            \
                                     const ClassWeights&);

FCDISTILL_INSTANTIATE(float)
FCDISTILL_INSTANTIATE(double)

#undef FCDISTILL_INSTANTIATE

}  // namespace fcdistill
