#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "fcdistill/mlp.hpp"
#include "test_support.hpp"

using namespace fcdistill;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double max_rel_grad_error(std::uint64_t seed) {
  BasicMlp<double> m = init_mlp<double>(8, seed);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> bias(0.0, 0.3);
  for (std::size_t i = m.b1_offset(); i < m.w2_offset(); ++i) m.params[i] = bias(rng);
  for (std::size_t i = m.b2_offset(); i < m.params.size(); ++i) m.params[i] = bias(rng);
  const auto samples = testing::random_samples(16, seed + 100);
  m.normalizer = fit_normalizer(samples);
  const ClassWeights alpha{0.7, 1.3, 2.0, 0.5};
  const LossGrad<double> lg = loss_and_grad(m, samples, alpha);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    BasicMlp<double> plus = m, minus = m;
    plus.params[i] += h;
    minus.params[i] -= h;
    const double num = (loss_and_grad(plus, samples, alpha).loss -
                        loss_and_grad(minus, samples, alpha).loss) / (2 * h);
    const double a = lg.grad[i];
    worst = std::max(worst, std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-3}));
  }
  return worst;
}

}  // namespace

TEST_CASE("layout and initialization") {
  const MlpModel m = init_mlp<float>(128, 1);
  CHECK(m.params.size() == MlpModel::parameter_count(128));
  CHECK(MlpModel::parameter_count(128) == 6 * 128 + 128 + 128 * 4 + 4);
  const float bound1 = std::sqrt(6.0f / 6.0f);
  const float bound2 = std::sqrt(6.0f / 128.0f);
  for (std::size_t i = 0; i < m.b1_offset(); ++i) REQUIRE(std::abs(m.params[i]) <= bound1);
  for (std::size_t i = m.b1_offset(); i < m.w2_offset(); ++i) REQUIRE(m.params[i] == 0.0f);
  for (std::size_t i = m.w2_offset(); i < m.b2_offset(); ++i) REQUIRE(std::abs(m.params[i]) <= bound2);
  for (std::size_t i = m.b2_offset(); i < m.params.size(); ++i) REQUIRE(m.params[i] == 0.0f);
  CHECK(init_mlp<float>(128, 1) == m);
  CHECK_FALSE(init_mlp<float>(128, 2) == m);
  CHECK_THROWS_AS(init_mlp<float>(0, 1), std::invalid_argument);
  CHECK_THROWS_AS(init_mlp<float>(kMaxHidden + 1, 1), std::invalid_argument);
}

TEST_CASE("softmax output") {
  MlpModel zero = init_mlp<float>(16, 1);
  std::fill(zero.params.begin(), zero.params.end(), 0.0f);
  std::mt19937_64 rng(2);
  const FeatureVector z = testing::random_features(rng);
  for (float p : forward(zero, z)) CHECK(p == 0.25f);
  CHECK(predict_mode(zero, z) == SwitchMode::OP);

  MlpModel m = init_mlp<float>(32, 3);
  m.normalizer = fit_normalizer(testing::random_samples(500, 4));
  for (int i = 0; i < 200; ++i) {
    const auto p = forward(m, testing::random_features(rng));
    float sum = 0.0f;
    for (float x : p) {
      REQUIRE(x > 0.0f);
      sum += x;
    }
    REQUIRE_THAT(sum, WithinAbs(1.0f, 1e-6f));
  }

  // A constant shift of every logit (through b2) leaves p unchanged.
  MlpModel shifted = m;
  for (std::size_t i = shifted.b2_offset(); i < shifted.params.size(); ++i) shifted.params[i] += 3.0f;
  const FeatureVector q = testing::random_features(rng);
  const auto p0 = forward(m, q);
  const auto p1 = forward(shifted, q);
  for (std::size_t c = 0; c < kNumModes; ++c) CHECK_THAT(p1[c], WithinAbs(p0[c], 1e-6f));
  CHECK(predict_mode(m, q) == predict_mode(shifted, q));

  FeatureVector bad = q;
  bad.v_o = NAN;
  CHECK_THROWS(forward(m, bad));
}

TEST_CASE("argmax follows the output mapping") {
  MlpModel m = init_mlp<float>(4, 1);
  std::fill(m.params.begin(), m.params.end(), 0.0f);
  m.params[m.b2_offset() + 1] = 2.0f;
  const FeatureVector z{};
  CHECK(predict_mode(m, z) == m.mode_order[1]);
  CHECK(predict_mode(m, z) == SwitchMode::PO);
}

TEST_CASE("loss values") {
  BasicMlp<double> m = init_mlp<double>(8, 1);
  std::fill(m.params.begin(), m.params.end(), 0.0);
  const auto samples = testing::random_samples(12, 4);
  CHECK_THAT(loss_and_grad(m, samples, kUnitWeights).loss, WithinRel(std::log(4.0), 1e-12));

  // A confident correct model has vanishing loss.
  BasicMlp<double> sure = m;
  sure.params[sure.b2_offset() + index_of(SwitchMode::NO)] = 50.0;
  std::vector<Sample> all_no = samples;
  for (Sample& s : all_no) s.label = SwitchMode::NO;
  CHECK(loss_and_grad(sure, all_no, kUnitWeights).loss < 1e-12);
}

TEST_CASE("gradients match central differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    INFO("seed " << seed);
    CHECK(max_rel_grad_error(seed) <= 1e-4);
  }
}

TEST_CASE("unit class weights equal the unweighted loss") {
  MlpModel m = init_mlp<float>(16, 5);
  const auto samples = testing::random_samples(40, 5);
  m.normalizer = fit_normalizer(samples);
  const LossGrad<float> a = loss_and_grad(m, samples, kUnitWeights);
  const LossGrad<float> b = loss_and_grad(m, samples, ClassWeights{1.0, 1.0, 1.0, 1.0});
  CHECK(a.loss == b.loss);
  CHECK(a.grad == b.grad);
  // Doubling every weight doubles the loss.
  const LossGrad<float> c = loss_and_grad(m, samples, ClassWeights{2.0, 2.0, 2.0, 2.0});
  CHECK_THAT(c.loss, WithinRel(2.0 * a.loss, 1e-6));
}

TEST_CASE("training") {
  auto samples = testing::random_samples(10, 7);
  std::vector<Sample> dup;
  for (int r = 0; r < 8; ++r) dup.insert(dup.end(), samples.begin(), samples.end());

  MlpModel m = init_mlp<float>(32, 7);
  m.normalizer = fit_normalizer(dup);
  const MlpModel before = m;
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK(train(m, dup, {}, cfg).empty());
  CHECK(m == before);

  cfg.epochs = 200;
  cfg.lr = 1e-2;
  cfg.batch_size = 16;
  const TrainHistory h = train(m, dup, samples, cfg);
  REQUIRE(h.size() == 200);
  CHECK(h.back().train_acc == 1.0);
  CHECK(h.back().val_acc == 1.0);
  CHECK(h.back().train_loss < h.front().train_loss);
  CHECK(evaluate(m, samples).accuracy == 1.0);

  MlpModel again = before;
  train(again, dup, samples, cfg);
  CHECK(again == m);

  TrainConfig bad = cfg;
  bad.lr = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.class_weights = {1.0, 2.0};
  CHECK_THROWS_AS(train(m, dup, {}, bad), std::invalid_argument);
}

TEST_CASE("model file round trip") {
  MlpModel m = init_mlp<float>(24, 9);
  m.normalizer = fit_normalizer(testing::random_samples(50, 9));
  const auto path = std::filesystem::temp_directory_path() / "fcdistill_test.fcnn";
  save_model(m, path.string());
  const MlpModel back = load_model(path.string());
  CHECK(back == m);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const FeatureVector z = testing::random_features(rng);
    REQUIRE(predict_mode(back, z) == predict_mode(m, z));
  }
  std::filesystem::resize_file(path, 40);
  CHECK_THROWS(load_model(path.string()));
  std::filesystem::remove(path);
}

TEST_CASE("policy wrapper") {
  const MlpModel m = init_mlp<float>(16, 2);
  const SwitchingPolicy p = mlp_policy(m);
  std::mt19937_64 rng(4);
  const FeatureVector z = testing::random_features(rng);
  CHECK(p(z) == predict_mode(m, z));
}
