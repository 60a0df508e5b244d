#pragma once

// The student policy: a one-hidden-layer ReLU classifier over the six
// features with a softmax head, class-weighted cross-entropy, hand-written
// backpropagation and Adam.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fcdistill/dataset.hpp"
#include "fcdistill/scenario.hpp"

namespace fcdistill {

inline constexpr int kDefaultHidden = 128;
inline constexpr int kMaxHidden = 1024;

/// Dense 6 -> hidden -> 4 network. All parameters live in one flat vector:
/// w1 (input-major, w1[i * hidden + j]), b1, w2 (hidden-major, w2[j * 4 + c]),
/// b2. T is float for deployment and double for gradient checks.
template <typename T>
struct BasicMlp {
  int hidden = kDefaultHidden;
  std::vector<T> params;
  FeatureNormalizer normalizer;
  std::array<SwitchMode, kNumModes> mode_order = kAllModes;  // output index -> mode

  static constexpr int kInputs = static_cast<int>(FeatureVector::kSize);
  static constexpr int kOutputs = static_cast<int>(kNumModes);

  static std::size_t parameter_count(int hidden) {
    const auto h = static_cast<std::size_t>(hidden);
    return kInputs * h + h + h * kOutputs + kOutputs;
  }
  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const { return static_cast<std::size_t>(kInputs * hidden); }
  std::size_t w2_offset() const { return b1_offset() + static_cast<std::size_t>(hidden); }
  std::size_t b2_offset() const {
    return w2_offset() + static_cast<std::size_t>(hidden * kOutputs);
  }

  /// Throws std::invalid_argument unless shapes agree and every value is
  /// finite with positive normalizer scales.
  void validate() const;

  template <typename U>
  BasicMlp<U> cast() const {
    BasicMlp<U> out;
    out.hidden = hidden;
    out.params.assign(params.begin(), params.end());
    out.normalizer = normalizer;
    out.mode_order = mode_order;
    return out;
  }

  friend bool operator==(const BasicMlp&, const BasicMlp&) = default;
};

using MlpModel = BasicMlp<float>;

/// He-uniform weights U(-sqrt(6 / fan_in), +sqrt(6 / fan_in)), zero biases.
template <typename T>
BasicMlp<T> init_mlp(int hidden, std::uint64_t seed);

/// Standardized network input.
template <typename T>
std::array<T, FeatureVector::kSize> normalize_features(const BasicMlp<T>& model,
                                                       const FeatureVector& z);

template <typename T>
std::array<T, kNumModes> logits(const BasicMlp<T>& model, const FeatureVector& z);

/// Class probabilities (max-shifted softmax). Throws on a non-finite input.
template <typename T>
std::array<T, kNumModes> forward(const BasicMlp<T>& model, const FeatureVector& z);

/// Argmax of the output; equal scores go to the earlier mode in OP, PO, NO, ON.
template <typename T>
SwitchMode predict_mode(const BasicMlp<T>& model, const FeatureVector& z);

template <typename T>
struct LossGrad {
  double loss = 0.0;
  std::vector<T> grad;  // same layout as BasicMlp::params
};

using ClassWeights = std::array<double, kNumModes>;
inline constexpr ClassWeights kUnitWeights{1.0, 1.0, 1.0, 1.0};

/// Mean over the batch of -alpha_label * log p_label, with gradients of every
/// parameter. log p is computed as logit - logsumexp.
template <typename T>
LossGrad<T> loss_and_grad(const BasicMlp<T>& model, std::span<const Sample> batch,
                          const ClassWeights& alpha);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalResult evaluate(const MlpModel& model, std::span<const Sample> samples,
                    const ClassWeights& alpha = kUnitWeights);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  double lr = 1e-4;
  int batch_size = 2048;
  int epochs = 260;
  std::uint64_t seed = 1;
  AdamConfig adam;
  /// Empty means inverse-frequency weights of the training split.
  std::vector<double> class_weights;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

using TrainHistory = std::vector<EpochStats>;

/// Thrown when a minibatch loss stops being finite.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int epoch, std::size_t batch);
  int epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

 private:
  int epoch_;
  std::size_t batch_;
};

/// Seeded minibatch Adam over `train`; the normalizer is left as is. Records
/// train and validation loss/accuracy after every epoch. The final model is
/// the last epoch.
TrainHistory train(MlpModel& model, std::span<const Sample> train_set,
                   std::span<const Sample> val_set, const TrainConfig& cfg);

/// Closed-loop policy backed by the network.
SwitchingPolicy mlp_policy(const MlpModel& model);

void write_history_csv(const TrainHistory& history, const std::string& path);

// Model file: "FCNN" magic, u32 version, u32 inputs/hidden/outputs, float32
// normalizer mean and std, 4 mode bytes, then little-endian float32 w1
// (hidden x inputs, row-major), b1, w2 (outputs x hidden), b2.
void save_model(const MlpModel& model, const std::string& path);
MlpModel load_model(const std::string& path);

}  // namespace fcdistill
