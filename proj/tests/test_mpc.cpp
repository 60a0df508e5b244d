#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "fcdistill/mpc.hpp"
#include "test_support.hpp"

using namespace fcdistill;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

MpcConfig config(int n, int k) {
  MpcConfig c = default_mpc_config();
  c.horizon = n;
  c.beam_width = k;
  return c;
}

int pow4(int e) {
  int r = 1;
  for (int i = 0; i < e; ++i) r *= 4;
  return r;
}

}  // namespace

TEST_CASE("stage cost") {
  const MpcConfig c = default_mpc_config();
  CHECK(stage_cost({7.0, 90.0, 180.0}, 7.0, c) == 0.0);
  CHECK_THAT(stage_cost({9.0, 100.0, 180.0}, 7.0, c), WithinRel(4.7, 1e-12));
  MpcConfig z = c;
  z.lambda_cf = 0.0;
  CHECK_THAT(stage_cost({9.0, 130.0, 180.0}, 7.0, z), WithinRel(4.0, 1e-12));
}

TEST_CASE("default expert settings") {
  const MpcConfig c = default_mpc_config();
  CHECK(c.horizon == 5);
  CHECK(c.beam_width == 15);
  CHECK(c.lambda_i == 1.0);
  CHECK(c.lambda_cf == 0.007);
  CHECK(c.v_cf_ref == 90.0);
  CHECK(default_mpc_config(80.0).v_cf_ref == 40.0);
  MpcConfig bad = c;
  bad.beam_width = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = c;
  bad.horizon = kMaxHorizon + 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("sequence cost") {
  const ConverterParams p = nominal_params();
  const MpcConfig c = default_mpc_config();
  const PlantState x{10.0, 88.0, 178.0};
  const Exogenous w{120.0, 5.0};
  CHECK(sequence_cost(x, w, 12.0, {}, p, c) == 0.0);
  for (SwitchMode m : kAllModes) {
    const std::array<SwitchMode, 1> seq{m};
    CHECK(sequence_cost(x, w, 12.0, seq, p, c) == stage_cost(discrete_step(x, w, m, p), 12.0, c));
  }
  const std::vector<SwitchMode> seq{SwitchMode::NO, SwitchMode::OP, SwitchMode::PO, SwitchMode::ON};
  double prev = 0.0;
  for (std::size_t n = 1; n <= seq.size(); ++n) {
    const double cost = sequence_cost(x, w, 12.0, std::span(seq).first(n), p, c);
    CHECK(cost >= prev);
    prev = cost;
  }
}

TEST_CASE("exhaustive search visits every sequence") {
  std::mt19937_64 rng(3);
  const FeatureVector z = testing::random_features(rng);
  SearchStats stats;
  exhaustive_decide(z, nominal_params(), config(5, 15), &stats);
  CHECK(stats.complete_sequences == 1024);
  SearchStats one;
  const Decision d = exhaustive_decide(z, nominal_params(), config(1, 1), &one);
  CHECK(one.complete_sequences == 4);
  double best = INFINITY;
  SwitchMode best_mode = SwitchMode::OP;
  for (SwitchMode m : kAllModes) {
    const double cost = stage_cost(discrete_step(z.state(), z.exogenous(), m, nominal_params()),
                                   z.i_ref, config(1, 1));
    if (cost < best) {
      best = cost;
      best_mode = m;
    }
  }
  CHECK(d.mode == best_mode);
  CHECK(d.cost == best);
}

TEST_CASE("far below the current reference the first mode is NO") {
  // V_in < v_cf < v_o: NO has the only maximal positive di/dt.
  const FeatureVector z{2.0, 90.0, 180.0, 30.0, 80.0, 5.0};
  CHECK(exhaustive_decide(z, nominal_params(), config(5, 15)).mode == SwitchMode::NO);
  CHECK(beam_decide(z, nominal_params(), config(5, 15)).mode == SwitchMode::NO);
}

TEST_CASE("beam equals exhaustive when nothing is pruned") {
  std::mt19937_64 rng(11);
  for (int n = 1; n <= 4; ++n) {
    const MpcConfig c = config(n, pow4(n - 1));
    for (int k = 0; k < 200; ++k) {
      const ConverterParams p = testing::random_params(rng);
      const FeatureVector z = testing::random_features(rng);
      const Decision b = beam_decide(z, p, c);
      const Decision e = exhaustive_decide(z, p, c);
      REQUIRE(b.mode == e.mode);
      REQUIRE(b.cost == e.cost);
      REQUIRE(b.sequence == e.sequence);
    }
  }
}

TEST_CASE("beam is never better than exhaustive") {
  std::mt19937_64 rng(12);
  for (auto [n, k] : std::vector<std::pair<int, int>>{{2, 1}, {3, 2}, {5, 15}, {5, 1}}) {
    const MpcConfig c = config(n, k);
    for (int i = 0; i < 200; ++i) {
      const ConverterParams p = testing::random_params(rng);
      const FeatureVector z = testing::random_features(rng);
      REQUIRE(beam_decide(z, p, c).cost >= exhaustive_decide(z, p, c).cost);
    }
  }
}

TEST_CASE("beam work is bounded by 4KN stage evaluations") {
  std::mt19937_64 rng(13);
  for (auto [n, k] : std::vector<std::pair<int, int>>{{1, 1}, {3, 2}, {5, 15}, {8, 6}}) {
    SearchStats s;
    beam_decide(testing::random_features(rng), nominal_params(), config(n, k), &s);
    CHECK(s.stage_evaluations <= static_cast<std::uint64_t>(4 * k * n));
  }
}

TEST_CASE("beam decision is the first element of its sequence") {
  std::mt19937_64 rng(14);
  const MpcConfig c = config(5, 15);
  for (int i = 0; i < 100; ++i) {
    const FeatureVector z = testing::random_features(rng);
    const Decision d = beam_decide(z, nominal_params(), c);
    const auto seq = unpack_sequence(d.sequence, c.horizon);
    REQUIRE(seq[0] == d.mode);
    REQUIRE_THAT(sequence_cost(z.state(), z.exogenous(), z.i_ref, std::span(seq).first(5),
                               nominal_params(), c),
                 WithinRel(d.cost, 1e-12));
  }
}

TEST_CASE("decisions are invariant to scaling the weights by powers of two") {
  std::mt19937_64 rng(15);
  const MpcConfig c = config(5, 15);
  MpcConfig scaled = c;
  scaled.lambda_i *= 8.0;
  scaled.lambda_cf *= 8.0;
  for (int i = 0; i < 200; ++i) {
    const FeatureVector z = testing::random_features(rng);
    const Decision a = beam_decide(z, nominal_params(), c);
    const Decision b = beam_decide(z, nominal_params(), scaled);
    REQUIRE(a.mode == b.mode);
    REQUIRE(a.sequence == b.sequence);
    REQUIRE(b.cost == 8.0 * a.cost);
  }
}

TEST_CASE("greedy is the one-step argmin") {
  std::mt19937_64 rng(16);
  const MpcConfig c = default_mpc_config();
  for (int i = 0; i < 100; ++i) {
    const FeatureVector z = testing::random_features(rng);
    REQUIRE(greedy_decide(z, nominal_params(), c).mode ==
            exhaustive_decide(z, nominal_params(), config(1, 1)).mode);
  }
}

TEST_CASE("non-finite features are rejected") {
  FeatureVector z{NAN, 90.0, 180.0, 5.0, 120.0, 5.0};
  CHECK_THROWS_AS(beam_decide(z, nominal_params(), default_mpc_config()), DivergenceError);
}

TEST_CASE("feature quantization rounds through float") {
  const FeatureVector z{0.1, 90.123456789, 180.0, 5.0, 120.0, 5.0};
  const FeatureVector q = z.quantized();
  CHECK(q.i_l == static_cast<double>(0.1f));
  CHECK(q.v_cf == static_cast<double>(static_cast<float>(90.123456789)));
  CHECK(q.quantized() == q);
}
